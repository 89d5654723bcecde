#include "lcca/logit.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "lcca/core.hpp"

namespace lcca {

namespace {

Eigen::VectorXd flatten_free(const Eigen::MatrixXd& gamma) {
  const auto k = gamma.rows();
  const auto d = gamma.cols();
  Eigen::VectorXd theta((k - 1) * d);
  for (Eigen::Index c = 1; c < k; ++c) theta.segment((c - 1) * d, d) = gamma.row(c).transpose();
  return theta;
}

Eigen::MatrixXd unflatten_free(const Eigen::VectorXd& theta, Eigen::Index k, Eigen::Index d) {
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(k, d);
  for (Eigen::Index c = 1; c < k; ++c) gamma.row(c) = theta.segment((c - 1) * d, d).transpose();
  return gamma;
}

}  // namespace

Eigen::MatrixXd softmax_log_probs(const Eigen::MatrixXd& design, const Eigen::MatrixXd& gamma) {
  const Eigen::MatrixXd eta = design * gamma.transpose();
  Eigen::MatrixXd out(eta.rows(), eta.cols());
  std::vector<double> row(static_cast<std::size_t>(eta.cols()));
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    for (Eigen::Index c = 0; c < eta.cols(); ++c) row[static_cast<std::size_t>(c)] = eta(i, c);
    out.row(i) = eta.row(i).array() - log_sum_exp(row);
  }
  return out;
}

double logit_objective(const LogitProblem& problem, const Eigen::MatrixXd& gamma) {
  const Eigen::MatrixXd lp = softmax_log_probs(problem.design, gamma);
  double total = 0.0;
  for (Eigen::Index i = 0; i < lp.rows(); ++i) {
    const double w = problem.weights(i);
    if (w == 0.0) continue;
    double row = 0.0;
    for (Eigen::Index c = 0; c < lp.cols(); ++c) {
      const double t = problem.targets(i, c);
      if (t != 0.0) row += t * lp(i, c);
    }
    total += w * row;
  }
  return total - 0.5 * problem.ridge * gamma.squaredNorm();
}

Eigen::VectorXd logit_gradient(const LogitProblem& problem, const Eigen::MatrixXd& gamma) {
  const auto k = gamma.rows();
  const auto d = gamma.cols();
  const Eigen::MatrixXd p = softmax_log_probs(problem.design, gamma).array().exp().matrix();
  // residual_ik = w_i * (t_ik - p_ik)
  const Eigen::MatrixXd residual =
      (problem.targets - p).array().colwise() * problem.weights.array();
  const Eigen::MatrixXd g = residual.transpose() * problem.design;  // K x D
  Eigen::VectorXd out((k - 1) * d);
  for (Eigen::Index c = 1; c < k; ++c) {
    out.segment((c - 1) * d, d) = (g.row(c) - problem.ridge * gamma.row(c)).transpose();
  }
  return out;
}

Eigen::MatrixXd logit_hessian(const LogitProblem& problem, const Eigen::MatrixXd& gamma) {
  const auto k = gamma.rows();
  const auto d = gamma.cols();
  const auto& x = problem.design;
  const Eigen::MatrixXd p = softmax_log_probs(x, gamma).array().exp().matrix();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero((k - 1) * d, (k - 1) * d);
  for (Eigen::Index a = 1; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      // -sum_i w_i p_ia (delta_ab - p_ib) x_i x_i^T
      Eigen::VectorXd s = problem.weights.array() * p.col(a).array() *
                          ((a == b ? 1.0 : 0.0) - p.col(b).array());
      const Eigen::MatrixXd block = -(x.transpose() * s.asDiagonal() * x);
      h.block((a - 1) * d, (b - 1) * d, d, d) = block;
      if (a != b) h.block((b - 1) * d, (a - 1) * d, d, d) = block.transpose();
    }
  }
  h.diagonal().array() -= problem.ridge;
  return h;
}

LogitFit fit_logit(const LogitProblem& problem, const Eigen::MatrixXd& start,
                   const LogitSolverOptions& options) {
  const auto k = start.rows();
  const auto d = start.cols();
  LogitFit fit;
  fit.gamma = start;
  fit.gamma.row(0).setZero();
  fit.objective = logit_objective(problem, fit.gamma);
  if (k < 2) {
    fit.converged = true;
    return fit;
  }

  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd grad = logit_gradient(problem, fit.gamma);
    fit.gradient_max_norm = grad.cwiseAbs().maxCoeff();
    if (fit.gradient_max_norm < options.gradient_tolerance) {
      fit.converged = true;
      return fit;
    }

    Eigen::MatrixXd info = -logit_hessian(problem, fit.gamma);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      info.diagonal().array() += 1e-8 * (1.0 + info.diagonal().cwiseAbs().maxCoeff());
      ldlt.compute(info);
    }
    const Eigen::VectorXd step = ldlt.solve(grad);
    const double decrement = grad.dot(step);
    const Eigen::VectorXd theta = flatten_free(fit.gamma);
    if (!(decrement > 0.0) || 0.5 * decrement <= 16.0 * eps * std::max(1.0, std::abs(fit.objective))) {
      // objective change is below round-off; the full step still removes the remaining parameter error
      if (decrement > 0.0 && std::isfinite(decrement)) {
        fit.gamma = unflatten_free(theta + step, k, d);
        fit.objective = logit_objective(problem, fit.gamma);
        fit.gradient_max_norm = logit_gradient(problem, fit.gamma).cwiseAbs().maxCoeff();
      }
      fit.converged = std::isfinite(decrement);
      fit.iterations = iter + 1;
      return fit;
    }

    double scale = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
      Eigen::MatrixXd trial = unflatten_free(theta + scale * step, k, d);
      const double obj = logit_objective(problem, trial);
      if (std::isfinite(obj) && obj >= fit.objective) {
        fit.gamma = std::move(trial);
        fit.objective = obj;
        accepted = true;
        break;
      }
    }
    fit.iterations = iter + 1;
    if (!accepted) return fit;  // stuck: no ascent along the Newton direction
  }
  fit.gradient_max_norm = logit_gradient(problem, fit.gamma).cwiseAbs().maxCoeff();
  fit.converged = fit.gradient_max_norm < options.gradient_tolerance;
  return fit;
}

}  // namespace lcca
