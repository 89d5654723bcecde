#pragma once

// Weighted multinomial logit with fractional targets.
//
// Maximizes  sum_i w_i sum_k t_ik ln P(k | x_i; gamma) - ridge * ||gamma||^2 / 2
// where P is the softmax of x_i . gamma_k and gamma row 0 is pinned to zero.
// Parameters are the flattened rows 1..K-1 of gamma (row-major).

#include <Eigen/Dense>

namespace lcca {

struct LogitProblem {
  const Eigen::MatrixXd& design;   // N x D
  const Eigen::MatrixXd& targets;  // N x K, rows are probability vectors
  const Eigen::VectorXd& weights;  // N
  double ridge = 0.0;
};

/// N x K matrix of class log-probabilities under gamma (K x D).
Eigen::MatrixXd softmax_log_probs(const Eigen::MatrixXd& design, const Eigen::MatrixXd& gamma);

double logit_objective(const LogitProblem& problem, const Eigen::MatrixXd& gamma);
/// Gradient w.r.t. rows 1..K-1 of gamma, flattened to length (K-1)*D.
Eigen::VectorXd logit_gradient(const LogitProblem& problem, const Eigen::MatrixXd& gamma);
/// Hessian of the objective (negative semidefinite), (K-1)D square.
Eigen::MatrixXd logit_hessian(const LogitProblem& problem, const Eigen::MatrixXd& gamma);

struct LogitSolverOptions {
  int max_iterations = 50;
  double gradient_tolerance = 1e-10;
};

struct LogitFit {
  Eigen::MatrixXd gamma;  // K x D, row 0 zero
  double objective = 0.0;
  double gradient_max_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton ascent from `start`. Every accepted step does not decrease
/// the objective, so the result is never worse than the start.
///
/// Convergence: gradient max-norm below tolerance, or the Newton decrement
/// has fallen to the rounding level of the objective (no representable
/// improvement remains). On non-convergence the best iterate is returned.
LogitFit fit_logit(const LogitProblem& problem, const Eigen::MatrixXd& start,
                   const LogitSolverOptions& options);

}  // namespace lcca
