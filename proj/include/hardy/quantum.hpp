#pragma once

#include <complex>

#include <Eigen/Dense>

namespace hardy {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;
using Vector2c = Eigen::Vector2cd;
using Vector4c = Eigen::Vector4cd;

// Two-qubit amplitudes over |00>,|01>,|10>,|11>; the first qubit is Alice's.
class TwoQubitPureState {
  public:
    explicit TwoQubitPureState(const Vector4c& amplitudes);

    const Vector4c& amplitudes() const { return amplitudes_; }
    Matrix4c projector() const { return amplitudes_ * amplitudes_.adjoint(); }

  private:
    Vector4c amplitudes_;
};

// Hermitian, unit-trace, positive semidefinite 4x4 matrix.
class DensityMatrix {
  public:
    static constexpr double kTolerance = 1e-10;

    // Throws ValidationError when any invariant fails.
    explicit DensityMatrix(const Matrix4c& m);

    static DensityMatrix from_pure(const TwoQubitPureState& psi);
    static DensityMatrix maximally_mixed();

    const Matrix4c& matrix() const { return m_; }
    Eigen::Vector4d eigenvalues() const;

  private:
    Matrix4c m_;
};

// Dichotomic observable cos(angle) sz + sin(angle) sx. projector0 belongs to
// eigenvalue +1 (outcome 0), projector1 to eigenvalue -1 (outcome 1).
struct Observable {
    double angle = 0.0;
    Matrix2c projector0;
    Matrix2c projector1;

    const Matrix2c& projector(int outcome) const {
        return outcome == 0 ? projector0 : projector1;
    }
};

// a (x) b with Alice's factor on the left.
Matrix4c kron(const Matrix2c& a, const Matrix2c& b);

// |Psi(theta)> = cos(theta)|01> + sin(theta)|10>, theta in [0, pi/2].
TwoQubitPureState make_state(double theta);

// Angles are wrapped into [-pi, pi] first; every finite angle is accepted.
Observable observable_from_angle(double angle);

// Tr[(pa (x) pb) rho], clamped into [0, 1] when within 1e-12 of the range.
double born_joint(const DensityMatrix& rho, const Matrix2c& pa, const Matrix2c& pb);

// V |Psi(theta)><Psi(theta)| + (1 - V) I / 4.
DensityMatrix werner(double theta, double visibility);

// <target| rho |target>.
double fidelity(const DensityMatrix& rho, const TwoQubitPureState& target);

double visibility_from_fidelity(double fidelity);
double fidelity_from_visibility(double visibility);

// Values in [-1e-12, 0) map to 0 and (1, 1 + 1e-12] map to 1; anything
// further out is a ValidationError.
double clamp_probability(double p);

}  // namespace hardy
