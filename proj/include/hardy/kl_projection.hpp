#pragma once

#include <Eigen/Dense>

namespace hardy {

// min_y  -sum_i c_i log (B y)_i   subject to  E y = e,  y >= 0.
//
// Every KL projection of an empirical distribution onto a polytope that
// is the linear image of a constrained non-negative orthant has this form:
// the no-signaling set (B = I, E = normalization and marginal constraints)
// and the local polytope (B = deterministic strategy table, E = simplex).
struct CrossEntropyProblem {
    Eigen::VectorXd weights;   // c >= 0
    Eigen::MatrixXd map;       // B >= 0, cells x variables
    Eigen::MatrixXd equality;  // E
    Eigen::VectorXd rhs;       // e
};

struct BarrierOptions {
    double initial_barrier = 1e-2;
    double final_barrier = 1e-15;
    double barrier_shrink = 0.1;
    double newton_tolerance = 1e-15;  // on half the squared Newton decrement
    int max_newton_steps = 100;       // per barrier stage
};

struct CrossEntropySolution {
    Eigen::VectorXd variables;
    Eigen::VectorXd image;  // B y
    double objective = 0.0;  // -sum c log(B y), nats
    double final_barrier = 0.0;
    int newton_steps = 0;
    bool converged = false;
};

// Log-barrier path following with equality-constrained Newton steps in the
// null space of E. `start` must be feasible and strictly positive.
CrossEntropySolution minimize_cross_entropy(const CrossEntropyProblem& problem,
                                            const Eigen::VectorXd& start,
                                            const BarrierOptions& options = {});

}  // namespace hardy
