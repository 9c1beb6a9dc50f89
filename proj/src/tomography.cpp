#include "hardy/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hardy::tomo {
namespace {

// Location of parameter k inside T and whether it is the imaginary part.
struct Entry {
    int row;
    int col;
    bool imaginary;
};

constexpr std::array<Entry, kParameters> kEntries{{
    {0, 0, false}, {1, 1, false}, {2, 2, false}, {3, 3, false},
    {1, 0, false}, {1, 0, true},  {2, 1, false}, {2, 1, true},
    {3, 2, false}, {3, 2, true},  {2, 0, false}, {2, 0, true},
    {3, 1, false}, {3, 1, true},  {3, 0, false}, {3, 0, true},
}};

constexpr std::array<char, 6> kLetters{'H', 'V', 'D', 'A', 'R', 'L'};

struct Model {
    std::array<double, kBases> prob{};
    // d prob_mu / d t_k
    Eigen::Matrix<double, kBases, kParameters> jacobian;
};

Model evaluate(const TParameters& t, bool with_jacobian) {
    Matrix4c tm = t_matrix(t);
    double trace = 0.0;
    for (double v : t) trace += v * v;
    if (!(trace > 0.0) || !std::isfinite(trace)) {
        throw DomainError("T(t) has zero or non-finite norm");
    }
    const auto& basis = TomoBasisSet::standard();
    Model m;
    for (std::size_t mu = 0; mu < kBases; ++mu) {
        const Vector4c& phi = basis.state(mu);
        Vector4c tphi = tm * phi;
        double p = tphi.squaredNorm() / trace;
        m.prob[mu] = p;
        if (!with_jacobian) continue;
        for (std::size_t k = 0; k < kParameters; ++k) {
            const Entry& e = kEntries[k];
            Complex unit = e.imaginary ? Complex(0.0, 1.0) : Complex(1.0, 0.0);
            double d_quad = 2.0 * (std::conj(tphi(e.row)) * unit * phi(e.col)).real();
            double d_trace = 2.0 * t[k];
            m.jacobian(static_cast<Eigen::Index>(mu), static_cast<Eigen::Index>(k)) =
                (d_quad - p * d_trace) / trace;
        }
    }
    return m;
}

double floor_count(const TomoCounts& c) { return kExpectedCountFloor * c.n_total_scale; }

TParameters normalized(TParameters t) {
    double norm = 0.0;
    for (double v : t) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : t) v /= norm;
    return t;
}

// Residuals r_mu with sum r_mu^2 = L and their Jacobian in t.
struct Residuals {
    Eigen::Matrix<double, kBases, 1> r;
    Eigen::Matrix<double, kBases, kParameters> jac;
    double value = 0.0;
};

Residuals residuals(const TParameters& t, const TomoCounts& counts, bool with_jacobian) {
    Model m = evaluate(t, with_jacobian);
    double floor = floor_count(counts);
    double scale = counts.n_total_scale;
    Residuals out;
    for (std::size_t mu = 0; mu < kBases; ++mu) {
        auto i = static_cast<Eigen::Index>(mu);
        double s = scale * m.prob[mu];
        double n = counts.n[mu];
        double denom = std::max(s, floor);
        out.r(i) = (s - n) / std::sqrt(2.0 * denom);
        if (with_jacobian) {
            double dr_ds = s >= floor ? (s + n) / (2.0 * std::sqrt(2.0) * s * std::sqrt(s))
                                      : 1.0 / std::sqrt(2.0 * floor);
            out.jac.row(i) = dr_ds * scale * m.jacobian.row(i);
        }
    }
    out.value = out.r.squaredNorm();
    return out;
}

}  // namespace

Vector2c polarization_state(Polarization p) {
    const double h = 1.0 / std::numbers::sqrt2;
    switch (p) {
        case Polarization::H: return Vector2c(1.0, 0.0);
        case Polarization::V: return Vector2c(0.0, 1.0);
        case Polarization::D: return Vector2c(h, h);
        case Polarization::A: return Vector2c(h, -h);
        case Polarization::R: return Vector2c(Complex(h, 0.0), Complex(0.0, h));
        case Polarization::L: return Vector2c(Complex(h, 0.0), Complex(0.0, -h));
    }
    return Vector2c::Zero();
}

TomoBasisSet::TomoBasisSet() {
    for (std::size_t a = 0; a < 6; ++a) {
        Vector2c va = polarization_state(static_cast<Polarization>(a));
        for (std::size_t b = 0; b < 6; ++b) {
            Vector2c vb = polarization_state(static_cast<Polarization>(b));
            Vector4c v;
            v << va(0) * vb(0), va(0) * vb(1), va(1) * vb(0), va(1) * vb(1);
            states_[6 * a + b] = v;
            labels_[6 * a + b] = std::string{kLetters[a], kLetters[b]};
        }
    }
}

const TomoBasisSet& TomoBasisSet::standard() {
    static const TomoBasisSet basis;
    return basis;
}

std::size_t TomoBasisSet::index_of(std::string_view label) const {
    for (std::size_t mu = 0; mu < kBases; ++mu) {
        if (labels_[mu] == label) return mu;
    }
    throw DataFormatError("unknown tomography basis label '" + std::string(label) + "'");
}

void TomoCounts::validate() const {
    for (double v : n) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("tomography counts must be finite and non-negative");
        }
    }
    if (!(n_total_scale > 0.0) || !std::isfinite(n_total_scale)) {
        throw ValidationError("count scale N must be positive");
    }
}

double TomoCounts::natural_scale(const std::array<double, kBases>& n) {
    double sum = 0.0;
    for (double v : n) sum += v;
    return sum / 9.0;
}

Matrix4c t_matrix(const TParameters& t) {
    Matrix4c m = Matrix4c::Zero();
    for (std::size_t k = 0; k < kParameters; ++k) {
        const Entry& e = kEntries[k];
        if (e.imaginary) {
            m(e.row, e.col) += Complex(0.0, t[k]);
        } else {
            m(e.row, e.col) += Complex(t[k], 0.0);
        }
    }
    return m;
}

DensityMatrix rho_from_t(const TParameters& t) {
    Matrix4c tm = t_matrix(t);
    Matrix4c g = tm.adjoint() * tm;
    double trace = g.trace().real();
    if (!(trace > 0.0) || !std::isfinite(trace)) {
        throw DomainError("degenerate normalization: T(t) is zero");
    }
    Matrix4c rho = g / trace;
    rho = 0.5 * (rho + rho.adjoint());
    return DensityMatrix(rho);
}

TParameters t_from_rho(const DensityMatrix& rho) {
    // rho = T^dag T with T lower triangular: Cholesky of the index-reversed
    // matrix gives rho' = C C^dag, and T = (J C J)^dag.
    Matrix4c reversed = rho.matrix().reverse();
    Eigen::LLT<Matrix4c> llt(reversed);
    if (llt.info() != Eigen::Success) {
        throw DomainError("density matrix is not positive definite");
    }
    Matrix4c c = llt.matrixL();
    Matrix4c t_mat = c.reverse().adjoint();
    TParameters t{};
    for (std::size_t k = 0; k < kParameters; ++k) {
        const Entry& e = kEntries[k];
        Complex v = t_mat(e.row, e.col);
        t[k] = e.imaginary ? v.imag() : v.real();
    }
    return t;
}

double likelihood(const TParameters& t, const TomoCounts& counts) {
    counts.validate();
    return residuals(t, counts, false).value;
}

TParameters likelihood_gradient(const TParameters& t, const TomoCounts& counts) {
    counts.validate();
    Residuals res = residuals(t, counts, true);
    Eigen::Matrix<double, kParameters, 1> g = 2.0 * res.jac.transpose() * res.r;
    TParameters out{};
    for (std::size_t k = 0; k < kParameters; ++k) out[k] = g(static_cast<Eigen::Index>(k));
    return out;
}

TomoCounts expected_counts(const DensityMatrix& rho, double n_total_scale) {
    const auto& basis = TomoBasisSet::standard();
    TomoCounts c;
    c.n_total_scale = n_total_scale;
    for (std::size_t mu = 0; mu < kBases; ++mu) {
        const Vector4c& phi = basis.state(mu);
        double p = (phi.adjoint() * rho.matrix() * phi)(0, 0).real();
        c.n[mu] = n_total_scale * std::max(0.0, p);
    }
    return c;
}

DensityMatrix linear_inversion(const TomoCounts& counts) {
    counts.validate();
    std::array<Matrix2c, 4> pauli;
    pauli[0] = Matrix2c::Identity();
    pauli[1] << 0.0, 1.0, 1.0, 0.0;
    pauli[2] << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
    pauli[3] << 1.0, 0.0, 0.0, -1.0;
    std::array<Matrix4c, 16> ops;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) ops[4 * i + j] = kron(pauli[i], pauli[j]) * 0.25;
    }

    const auto& basis = TomoBasisSet::standard();
    Eigen::Matrix<double, kBases, 16> design;
    Eigen::Matrix<double, kBases, 1> rhs;
    for (std::size_t mu = 0; mu < kBases; ++mu) {
        auto i = static_cast<Eigen::Index>(mu);
        Matrix4c proj = basis.projector(mu);
        for (std::size_t k = 0; k < 16; ++k) {
            design(i, static_cast<Eigen::Index>(k)) = (proj * ops[k]).trace().real();
        }
        rhs(i) = counts.n[mu] / counts.n_total_scale;
    }
    Eigen::Matrix<double, 16, 1> coeffs = design.colPivHouseholderQr().solve(rhs);

    Matrix4c rho = Matrix4c::Zero();
    for (std::size_t k = 0; k < 16; ++k) rho += coeffs(static_cast<Eigen::Index>(k)) * ops[k];
    rho = 0.5 * (rho + rho.adjoint());
    if (!rho.allFinite() || !(rho.trace().real() > 0.0)) {
        return DensityMatrix::maximally_mixed();
    }
    Eigen::SelfAdjointEigenSolver<Matrix4c> eig(rho / rho.trace().real());
    Eigen::Vector4d vals = eig.eigenvalues().cwiseMax(1e-6);
    vals /= vals.sum();
    Matrix4c clipped = eig.eigenvectors() * vals.cast<Complex>().asDiagonal() *
                       eig.eigenvectors().adjoint();
    clipped = 0.5 * (clipped + clipped.adjoint());
    return DensityMatrix(clipped);
}

TomographyResult reconstruct(const TomoCounts& counts, const std::optional<TwoQubitPureState>& target,
                             const ReconstructOptions& options) {
    counts.validate();
    auto positive = std::count_if(counts.n.begin(), counts.n.end(), [](double v) { return v > 0.0; });
    if (positive < 16) {
        throw InsufficientDataError("tomography needs at least 16 strictly positive counts");
    }

    TParameters t;
    try {
        t = normalized(t_from_rho(linear_inversion(counts)));
    } catch (const DomainError&) {
        t = normalized(t_from_rho(DensityMatrix::maximally_mixed()));
    }

    using Vec = Eigen::Matrix<double, kParameters, 1>;
    using Mat = Eigen::Matrix<double, kParameters, kParameters>;
    auto gradient_at = [&](const TParameters& x) -> Vec {
        Residuals r = residuals(x, counts, true);
        return 2.0 * r.jac.transpose() * r.r;
    };

    Residuals current = residuals(t, counts, true);
    double lambda = 1e-3;

    auto make_result = [&](int iterations) {
        TomographyResult r;
        r.rho = rho_from_t(t);
        r.likelihood = current.value;
        r.iterations = iterations;
        if (target) r.fidelity = fidelity(r.rho, *target);
        return r;
    };

    // Damped Newton. Gauss-Newton alone crawls when the optimum is rank
    // deficient: zero-count residuals behave like |t| there, while L itself
    // stays smooth, so use the full Hessian (differenced analytic gradient).
    constexpr double h = 1e-6;
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        Vec g = 2.0 * current.jac.transpose() * current.r;
        Mat hess;
        for (std::size_t k = 0; k < kParameters; ++k) {
            TParameters up = t, down = t;
            up[k] += h;
            down[k] -= h;
            hess.col(static_cast<Eigen::Index>(k)) = (gradient_at(up) - gradient_at(down)) / (2.0 * h);
        }
        hess = 0.5 * (hess + hess.transpose()).eval();
        double diag_scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-300);

        bool accepted = false;
        while (!accepted) {
            Mat damped = hess;
            damped.diagonal().array() += lambda * diag_scale;
            Eigen::LDLT<Mat> ldlt(damped);
            Vec step = ldlt.solve(-g);
            bool usable = ldlt.info() == Eigen::Success && step.allFinite() && g.dot(step) < 0.0;
            if (usable) {
                TParameters trial = t;
                for (std::size_t k = 0; k < kParameters; ++k) trial[k] += step(static_cast<Eigen::Index>(k));
                trial = normalized(trial);
                Residuals next = residuals(trial, counts, true);
                if (std::isfinite(next.value) && next.value < current.value) {
                    double gain = current.value - next.value;
                    t = trial;
                    current = std::move(next);
                    lambda = std::max(lambda / 5.0, 1e-12);
                    accepted = true;
                    // L is chi-square-like; below one unit a purely relative
                    // test keeps chasing an exact fit at a linear rate.
                    if (gain <= options.relative_tolerance * std::max(current.value, 1.0)) {
                        return make_result(iter);
                    }
                    continue;
                }
            }
            lambda *= 4.0;
            if (lambda > 1e16) {
                // No descent direction left at working precision.
                return make_result(iter);
            }
        }
    }
    throw TomographyConvergenceError("tomography did not converge within the iteration limit",
                                     make_result(options.max_iterations));
}

}  // namespace hardy::tomo
