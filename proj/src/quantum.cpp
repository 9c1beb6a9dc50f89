#include "hardy/quantum.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hardy/errors.hpp"

namespace hardy {
namespace {

constexpr double kProbabilitySlack = 1e-12;

double wrap_angle(double angle) {
    if (!std::isfinite(angle)) {
        throw DomainError("observable angle must be finite");
    }
    constexpr double pi = std::numbers::pi;
    if (angle >= -pi && angle <= pi) {
        return angle;
    }
    double wrapped = std::remainder(angle, 2.0 * pi);
    return wrapped;
}

}  // namespace

TwoQubitPureState::TwoQubitPureState(const Vector4c& amplitudes) : amplitudes_(amplitudes) {
    double norm2 = amplitudes_.squaredNorm();
    if (!std::isfinite(norm2) || std::abs(norm2 - 1.0) > 1e-12) {
        throw ValidationError("pure state must have unit norm, got squared norm " +
                              std::to_string(norm2));
    }
}

DensityMatrix::DensityMatrix(const Matrix4c& m) : m_(m) {
    if (!m_.allFinite()) {
        throw ValidationError("density matrix has non-finite entries");
    }
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kTolerance) {
        throw ValidationError("density matrix is not Hermitian");
    }
    if (std::abs(m_.trace() - Complex(1.0, 0.0)) > kTolerance) {
        throw ValidationError("density matrix trace differs from 1");
    }
    if (eigenvalues().minCoeff() < -kTolerance) {
        throw ValidationError("density matrix has a negative eigenvalue");
    }
}

DensityMatrix DensityMatrix::from_pure(const TwoQubitPureState& psi) {
    return DensityMatrix(psi.projector());
}

DensityMatrix DensityMatrix::maximally_mixed() {
    return DensityMatrix(Matrix4c::Identity() * 0.25);
}

Eigen::Vector4d DensityMatrix::eigenvalues() const {
    Matrix4c herm = 0.5 * (m_ + m_.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix4c> solver(herm, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

Matrix4c kron(const Matrix2c& a, const Matrix2c& b) {
    Matrix4c out;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
        }
    }
    return out;
}

TwoQubitPureState make_state(double theta) {
    if (!(theta >= 0.0 && theta <= std::numbers::pi / 2)) {
        throw DomainError("state parameter theta must lie in [0, pi/2]");
    }
    Vector4c amps;
    amps << 0.0, std::cos(theta), std::sin(theta), 0.0;
    return TwoQubitPureState(amps);
}

Observable observable_from_angle(double angle) {
    Observable obs;
    obs.angle = wrap_angle(angle);
    double half = 0.5 * obs.angle;
    Vector2c plus(std::cos(half), std::sin(half));
    Vector2c minus(-std::sin(half), std::cos(half));
    obs.projector0 = plus * plus.adjoint();
    obs.projector1 = minus * minus.adjoint();
    return obs;
}

double clamp_probability(double p) {
    if (p >= 0.0 && p <= 1.0) {
        return p;
    }
    if (p < 0.0 && p >= -kProbabilitySlack) {
        return 0.0;
    }
    if (p > 1.0 && p <= 1.0 + kProbabilitySlack) {
        return 1.0;
    }
    throw ValidationError("probability out of range: " + std::to_string(p));
}

double born_joint(const DensityMatrix& rho, const Matrix2c& pa, const Matrix2c& pb) {
    Matrix4c joint = kron(pa, pb);
    return clamp_probability((joint * rho.matrix()).trace().real());
}

DensityMatrix werner(double theta, double visibility) {
    if (!(visibility >= 0.0 && visibility <= 1.0)) {
        throw DomainError("visibility must lie in [0, 1]");
    }
    Matrix4c m = visibility * make_state(theta).projector() +
                 (1.0 - visibility) * 0.25 * Matrix4c::Identity();
    return DensityMatrix(m);
}

double fidelity(const DensityMatrix& rho, const TwoQubitPureState& target) {
    const Vector4c& psi = target.amplitudes();
    Complex value = psi.adjoint() * rho.matrix() * psi;
    return clamp_probability(value.real());
}

double visibility_from_fidelity(double fidelity) {
    if (!(fidelity >= 0.25 && fidelity <= 1.0)) {
        throw DomainError("Werner fidelity must lie in [1/4, 1]");
    }
    return (4.0 * fidelity - 1.0) / 3.0;
}

double fidelity_from_visibility(double visibility) { return (3.0 * visibility + 1.0) / 4.0; }

}  // namespace hardy
