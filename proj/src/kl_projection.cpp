#include "hardy/kl_projection.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "hardy/errors.hpp"

namespace hardy {
namespace {

Eigen::MatrixXd null_space(const Eigen::MatrixXd& e) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    double cutoff = 1e-12 * (s.size() > 0 ? s(0) : 1.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) ++rank;
    }
    return svd.matrixV().rightCols(e.cols() - rank);
}

double barrier_objective(const CrossEntropyProblem& p, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& q, double tau) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (p.weights(i) > 0.0) v -= p.weights(i) * std::log(q(i));
    }
    for (Eigen::Index j = 0; j < y.size(); ++j) v -= tau * std::log(y(j));
    return v;
}

}  // namespace

CrossEntropySolution minimize_cross_entropy(const CrossEntropyProblem& p,
                                            const Eigen::VectorXd& start,
                                            const BarrierOptions& opt) {
    if (start.minCoeff() <= 0.0) {
        throw ValidationError("barrier start must be strictly positive");
    }
    if ((p.equality * start - p.rhs).cwiseAbs().maxCoeff() > 1e-9) {
        throw ValidationError("barrier start violates the equality constraints");
    }
    const Eigen::MatrixXd z = null_space(p.equality);
    const Eigen::Index n = start.size();

    // Only cells with positive weight enter the objective.
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < p.weights.size(); ++i) {
        if (p.weights(i) > 0.0) active.push_back(i);
    }
    Eigen::MatrixXd b_active(static_cast<Eigen::Index>(active.size()), n);
    Eigen::VectorXd c_active(static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
        b_active.row(static_cast<Eigen::Index>(k)) = p.map.row(active[k]);
        c_active(static_cast<Eigen::Index>(k)) = p.weights(active[k]);
    }

    CrossEntropySolution sol;
    Eigen::VectorXd y = start;
    Eigen::VectorXd q = p.map * y;
    double tau = opt.initial_barrier;
    bool stage_converged = false;

    while (true) {
        stage_converged = false;
        for (int step = 0; step < opt.max_newton_steps; ++step) {
            Eigen::VectorXd qa = b_active * y;
            Eigen::VectorXd ratio = c_active.cwiseQuotient(qa);
            Eigen::VectorXd grad = -b_active.transpose() * ratio - tau * y.cwiseInverse();
            Eigen::VectorXd curv = ratio.cwiseQuotient(qa);
            Eigen::MatrixXd hess = b_active.transpose() * curv.asDiagonal() * b_active;
            hess.diagonal() += tau * y.cwiseInverse().cwiseAbs2();

            Eigen::VectorXd gz = z.transpose() * grad;
            Eigen::MatrixXd hz = z.transpose() * hess * z;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(hz);
            Eigen::VectorXd dz = ldlt.solve(-gz);
            if (ldlt.info() != Eigen::Success || !dz.allFinite()) {
                hz.diagonal().array() += 1e-14 * hz.diagonal().cwiseAbs().maxCoeff();
                dz = hz.ldlt().solve(-gz);
            }
            double decrement = -gz.dot(dz);
            ++sol.newton_steps;
            if (!(decrement >= 0.0) || 0.5 * decrement <= opt.newton_tolerance) {
                stage_converged = true;
                break;
            }
            Eigen::VectorXd dy = z * dz;

            double alpha = 1.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (dy(j) < 0.0) alpha = std::min(alpha, -0.99 * y(j) / dy(j));
            }
            double f0 = barrier_objective(p, y, p.map * y, tau);
            double slope = grad.dot(dy);
            Eigen::VectorXd y_next;
            while (true) {
                y_next = y + alpha * dy;
                Eigen::VectorXd q_next = p.map * y_next;
                if (y_next.minCoeff() > 0.0) {
                    double f1 = barrier_objective(p, y_next, q_next, tau);
                    if (std::isfinite(f1) && f1 <= f0 + 1e-4 * alpha * slope) break;
                }
                alpha *= 0.5;
                if (alpha < 1e-20) break;
            }
            if (alpha < 1e-20) {
                // Objective is flat at working precision along the step.
                stage_converged = true;
                break;
            }
            y = y_next;
        }
        if (tau <= opt.final_barrier) break;
        tau = std::max(tau * opt.barrier_shrink, opt.final_barrier);
    }

    q = p.map * y;
    sol.variables = y;
    sol.image = q;
    sol.final_barrier = tau;
    sol.converged = stage_converged;
    sol.objective = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (p.weights(i) > 0.0) sol.objective -= p.weights(i) * std::log(q(i));
    }
    return sol;
}

}  // namespace hardy
