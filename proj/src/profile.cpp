#include "lcca/profile.hpp"

#include <cmath>
#include <limits>
#include <tuple>

#include "lcca/estimate.hpp"

namespace lcca {

std::vector<std::size_t> assign_classes(const Eigen::MatrixXd& posteriors) {
  std::vector<std::size_t> labels(static_cast<std::size_t>(posteriors.rows()));
  for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < posteriors.cols(); ++c) {
      if (posteriors(i, c) > posteriors(i, best)) best = c;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return labels;
}

Eigen::VectorXd weighted_class_shares(std::span<const std::size_t> labels, const Eigen::VectorXd& weights,
                                      std::size_t k) {
  if (labels.size() != static_cast<std::size_t>(weights.size())) {
    throw Error(ErrorKind::invalid_dimension, "labels and weights differ in length");
  }
  Eigen::VectorXd shares = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) throw Error(ErrorKind::domain, "class label out of range");
    shares(static_cast<Eigen::Index>(labels[i])) += weights(static_cast<Eigen::Index>(i));
  }
  const double total = shares.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::all_zero_weights, "labels carry no weight");
  return shares / total;
}

std::vector<ConditionalProbTable> conditional_prob_table(const LatentClassModel& model) {
  std::vector<ConditionalProbTable> out;
  for (std::size_t l = 0; l < model.indicators.size(); ++l) {
    ConditionalProbTable t;
    t.indicator = model.indicators[l].name;
    t.categories = model.indicators[l].categories;
    t.probs.resize(static_cast<Eigen::Index>(t.categories.size()), static_cast<Eigen::Index>(model.k()));
    for (std::size_t k = 0; k < model.k(); ++k) t.probs.col(static_cast<Eigen::Index>(k)) = model.measurement.probs[k][l];
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

struct VariableColumn {
  const CategoricalVariable* variable;
  const IndexMatrix* codes;
  Eigen::Index column;
};

VariableColumn locate(const Dataset& data, const std::string& name) {
  for (std::size_t l = 0; l < data.indicators.size(); ++l) {
    if (data.indicators[l].name == name) return {&data.indicators[l], &data.indicator_codes, static_cast<Eigen::Index>(l)};
  }
  for (std::size_t j = 0; j < data.covariates.size(); ++j) {
    if (data.covariates[j].name == name) return {&data.covariates[j], &data.covariate_codes, static_cast<Eigen::Index>(j)};
  }
  throw Error(ErrorKind::unknown_variable, "dataset has no variable '" + name + "'");
}

}  // namespace

std::vector<Crosstab> weighted_profile(const Dataset& data, std::span<const std::size_t> labels, std::size_t k,
                                       std::span<const std::string> variables) {
  if (labels.size() != data.size()) throw Error(ErrorKind::invalid_dimension, "one label per row is required");
  std::vector<Crosstab> out;
  for (const auto& name : variables) {
    const auto vc = locate(data, name);
    const auto m = static_cast<Eigen::Index>(vc.variable->size());
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(m, kk + 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= k) throw Error(ErrorKind::domain, "class label out of range");
      const auto r = static_cast<Eigen::Index>(i);
      const auto cat = (*vc.codes)(r, vc.column);
      mass(cat, static_cast<Eigen::Index>(labels[i])) += data.weights(r);
      mass(cat, kk) += data.weights(r);
    }
    Crosstab t;
    t.variable = name;
    t.categories = vc.variable->categories;
    t.percent = Eigen::MatrixXd::Zero(m, kk + 1);
    for (Eigen::Index c = 0; c <= kk; ++c) {
      const double total = mass.col(c).sum();
      if (total > 0.0) t.percent.col(c) = 100.0 * mass.col(c) / total;
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Crosstab> descriptive_table(const Dataset& data) {
  std::vector<std::string> names;
  for (const auto& v : data.indicators) names.push_back(v.name);
  for (const auto& v : data.covariates) names.push_back(v.name);
  const std::vector<std::size_t> labels(data.size(), 0);
  auto tables = weighted_profile(data, labels, 1, names);
  for (auto& t : tables) {
    const Eigen::VectorXd total = t.percent.col(1);
    t.percent = total;
  }
  return tables;
}

double wald_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

namespace {

bool information_ill_conditioned(const Eigen::MatrixXd& info, double rcond_limit) {
  if (!info.allFinite()) return true;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  if (ev.size() == 0) return false;
  return !(ev.minCoeff() > rcond_limit * ev.maxCoeff());
}

}  // namespace

MembershipLogitReport post_hoc_membership_logit(std::span<const std::size_t> labels, const Dataset& data,
                                                std::size_t k, const PostHocOptions& options,
                                                const Eigen::MatrixXd* posteriors) {
  if (k < 2) throw Error(ErrorKind::invalid_dimension, "post-hoc membership logit needs at least two classes");
  if (labels.size() != data.size()) throw Error(ErrorKind::invalid_dimension, "one label per row is required");
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto kk = static_cast<Eigen::Index>(k);

  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, kk);
  if (options.posterior_targets) {
    if (!posteriors || posteriors->rows() != n || posteriors->cols() != kk) {
      throw Error(ErrorKind::invalid_dimension, "posterior targets requested without matching posteriors");
    }
    targets = *posteriors;
  } else {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= k) throw Error(ErrorKind::domain, "class label out of range");
      targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
    }
  }

  const Eigen::MatrixXd design = design_matrix(data.covariates, data.covariate_codes);
  MembershipLogitReport report;
  report.columns = {"(Intercept)"};
  for (auto& name : dummy_names(data.covariates)) report.columns.push_back(std::move(name));

  auto solve = [&](double ridge) {
    const LogitProblem problem{design, targets, data.weights, ridge};
    const LogitFit fit = fit_logit(problem, Eigen::MatrixXd::Zero(kk, design.cols()), options.solver);
    const Eigen::MatrixXd info = -logit_hessian(problem, fit.gamma);
    const bool diverged = fit.gamma.cwiseAbs().maxCoeff() > options.divergence_bound;
    return std::tuple{fit, info, diverged || information_ill_conditioned(info, options.rcond_limit)};
  };

  auto [fit, info, separated] = solve(0.0);
  if (separated) {
    report.separation = true;
    report.ridge = options.fallback_ridge;
    std::tie(fit, info, std::ignore) = solve(options.fallback_ridge);
  }

  report.gamma = fit.gamma;
  report.converged = fit.converged;
  report.iterations = fit.iterations;
  {
    const LogitProblem problem{design, targets, data.weights, 0.0};
    report.loglik = logit_objective(problem, fit.gamma);
  }

  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  const auto d = design.cols();
  for (Eigen::Index c = 1; c < kk; ++c) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto idx = (c - 1) * d + j;
      MembershipCoefficient coef;
      coef.cls = static_cast<std::size_t>(c);
      coef.column = report.columns[static_cast<std::size_t>(j)];
      coef.estimate = fit.gamma(c, j);
      const double var = cov(idx, idx);
      coef.std_error = var > 0.0 ? std::sqrt(var) : std::numeric_limits<double>::quiet_NaN();
      coef.z = coef.estimate / coef.std_error;
      coef.p = std::isfinite(coef.z) ? wald_p_value(coef.z) : std::numeric_limits<double>::quiet_NaN();
      coef.stars = std::isfinite(coef.p) ? significance_stars(coef.p) : "";
      report.coefficients.push_back(std::move(coef));
    }
  }
  return report;
}

ProfileReport build_profile(const LatentClassModel& model, const Dataset& data, const PostHocOptions& options) {
  ProfileReport report;
  std::vector<std::string> model_covariates;
  for (const auto& v : model.covariates) model_covariates.push_back(v.name);
  const Eigen::MatrixXd post = model.mode() == MembershipMode::covariate
                                   ? e_step(model, data.with_covariates(model_covariates))
                                   : e_step(model, data);
  report.labels = assign_classes(post);
  report.class_shares = weighted_class_shares(report.labels, data.weights, model.k());
  report.conditional_probs = conditional_prob_table(model);
  std::vector<std::string> names;
  for (const auto& v : data.indicators) names.push_back(v.name);
  for (const auto& v : data.covariates) names.push_back(v.name);
  report.crosstabs = weighted_profile(data, report.labels, model.k(), names);
  if (model.k() >= 2) report.membership = post_hoc_membership_logit(report.labels, data, model.k(), options, &post);
  return report;
}

}  // namespace lcca
