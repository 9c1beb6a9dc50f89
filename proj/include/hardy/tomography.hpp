#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "hardy/errors.hpp"
#include "hardy/quantum.hpp"

namespace hardy::tomo {

inline constexpr std::size_t kBases = 36;
inline constexpr std::size_t kParameters = 16;

// Single-photon analyzer states, H = |0>, V = |1>,
// D = (H+V)/sqrt2, A = (H-V)/sqrt2, R = (H+iV)/sqrt2, L = (H-iV)/sqrt2.
enum class Polarization { H, V, D, A, R, L };

Vector2c polarization_state(Polarization p);

// The 36 product projectors, Alice-major over (H, V, D, A, R, L) x
// (H, V, D, A, R, L); index = 6 * alice + bob, label e.g. "HV".
class TomoBasisSet {
  public:
    static const TomoBasisSet& standard();

    const Vector4c& state(std::size_t mu) const { return states_[mu]; }
    Matrix4c projector(std::size_t mu) const { return states_[mu] * states_[mu].adjoint(); }
    const std::string& label(std::size_t mu) const { return labels_[mu]; }
    // Throws DataFormatError for unknown labels.
    std::size_t index_of(std::string_view label) const;

  private:
    TomoBasisSet();
    std::array<Vector4c, kBases> states_;
    std::array<std::string, kBases> labels_;
};

// Coincidence counts in basis order and the count scale N, so that the
// expected count of basis mu is N <phi_mu|rho|phi_mu>.
struct TomoCounts {
    std::array<double, kBases> n{};
    double n_total_scale = 0.0;

    // Throws ValidationError on negative counts or non-positive N.
    void validate() const;
    // N = sum(n) / 9, i.e. counts per pair of analyzer bases.
    static double natural_scale(const std::array<double, kBases>& n);
};

using TParameters = std::array<double, kParameters>;

// Lower-triangular T(t): t1..t4 on the diagonal, t5+i t6, t7+i t8,
// t9+i t10 on the first sub-diagonal, t11+i t12, t13+i t14 on the second
// and t15+i t16 in the corner.
Matrix4c t_matrix(const TParameters& t);

// rho_p = T^dag T / Tr(T^dag T). Throws DomainError for degenerate t.
DensityMatrix rho_from_t(const TParameters& t);
// Inverse map for a positive definite rho (reversed Cholesky factor).
TParameters t_from_rho(const DensityMatrix& rho);

// Floor on the expected count in the likelihood denominator, as a fraction of N.
inline constexpr double kExpectedCountFloor = 1e-9;

// L(t) = sum_mu (N p_mu - n_mu)^2 / (2 N p_mu), p_mu = <phi_mu|rho_p(t)|phi_mu>.
double likelihood(const TParameters& t, const TomoCounts& counts);
TParameters likelihood_gradient(const TParameters& t, const TomoCounts& counts);

TomoCounts expected_counts(const DensityMatrix& rho, double n_total_scale);

// Least-squares linear inversion, projected to the PSD cone by clipping
// eigenvalues at 1e-6; falls back to I/4.
DensityMatrix linear_inversion(const TomoCounts& counts);

struct ReconstructOptions {
    int max_iterations = 5000;
    double relative_tolerance = 1e-10;
};

struct TomographyResult {
    DensityMatrix rho = DensityMatrix::maximally_mixed();
    std::optional<double> fidelity;
    double likelihood = 0.0;
    int iterations = 0;
};

class TomographyConvergenceError : public ConvergenceError {
  public:
    TomographyConvergenceError(const std::string& what, TomographyResult best)
        : ConvergenceError(what), best_(std::move(best)) {}
    const TomographyResult& best() const { return best_; }

  private:
    TomographyResult best_;
};

// Maximum-likelihood estimate minimising L(t) with damped Gauss-Newton
// steps from the linear-inversion start. Requires at least 16 strictly
// positive counts (InsufficientDataError otherwise).
TomographyResult reconstruct(const TomoCounts& counts,
                             const std::optional<TwoQubitPureState>& target = std::nullopt,
                             const ReconstructOptions& options = {});

}  // namespace hardy::tomo
