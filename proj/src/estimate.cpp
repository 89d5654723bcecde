#include "lcca/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "lcca/logit.hpp"
#include "lcca/parallel.hpp"
#include "lcca/random.hpp"

namespace lcca {

void EmConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorKind::domain, "max_iterations must be positive");
  if (!(loglik_tolerance > 0.0)) throw Error(ErrorKind::domain, "loglik_tolerance must be positive");
  if (n_restarts < 1) throw Error(ErrorKind::domain, "n_restarts must be at least 1");
  if (!(prob_floor > 0.0 && prob_floor < 1e-3)) throw Error(ErrorKind::domain, "prob_floor must lie in (0, 1e-3)");
  if (irls_max_iter < 1) throw Error(ErrorKind::domain, "irls_max_iter must be positive");
  if (!(irls_tolerance > 0.0)) throw Error(ErrorKind::domain, "irls_tolerance must be positive");
  if (!(ridge >= 0.0)) throw Error(ErrorKind::domain, "ridge must be nonnegative");
}

namespace {

/// N x K matrix of ln P(C_k|Z_i) + sum_l ln P(Y_il|C_k).
Eigen::MatrixXd log_joint(const LatentClassModel& model, const Dataset& data) {
  Eigen::MatrixXd lj = model.class_log_probs(data);
  const auto n = static_cast<Eigen::Index>(data.size());
  for (std::size_t k = 0; k < model.k(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    for (std::size_t l = 0; l < model.indicators.size(); ++l) {
      const Eigen::VectorXd logp = model.measurement.probs[k][l].array().log().matrix();
      const auto lcol = static_cast<Eigen::Index>(l);
      for (Eigen::Index i = 0; i < n; ++i) lj(i, col) += logp(data.indicator_codes(i, lcol));
    }
  }
  return lj;
}

struct EStep {
  Eigen::MatrixXd posteriors;
  double loglik = 0.0;
};

EStep run_e_step(const LatentClassModel& model, const Dataset& data) {
  const Eigen::MatrixXd lj = log_joint(model, data);
  EStep out;
  out.posteriors.resize(lj.rows(), lj.cols());
  std::vector<double> row(static_cast<std::size_t>(lj.cols()));
  for (Eigen::Index i = 0; i < lj.rows(); ++i) {
    for (Eigen::Index c = 0; c < lj.cols(); ++c) row[static_cast<std::size_t>(c)] = lj(i, c);
    const double lse = log_sum_exp(row);
    if (!std::isfinite(lse)) {
      throw Error(ErrorKind::corrupt_model,
                  "observation " + std::to_string(i) + " has zero probability under the model");
    }
    out.posteriors.row(i) = (lj.row(i).array() - lse).exp();
    const double w = data.weights(i);
    if (w != 0.0) out.loglik += w * lse;
  }
  return out;
}

LatentClassModel skeleton(const Dataset& data, MembershipMode mode) {
  LatentClassModel model;
  model.indicators = data.indicators;
  if (mode == MembershipMode::covariate) model.covariates = data.covariates;
  return model;
}

struct MStep {
  bool degenerate = false;
  bool separation = false;
};

MStep run_m_step(LatentClassModel& model, const Eigen::MatrixXd& posteriors, const Dataset& data,
                 MembershipMode mode, const EmConfig& config) {
  MStep flags;
  auto measurement = m_step_measurement(posteriors, data, config.prob_floor);
  flags.degenerate = measurement.any_degenerate();
  model.measurement = std::move(measurement.params);
  if (mode == MembershipMode::constant_prior) {
    model.membership = ClassPriors{expected_class_shares(posteriors, data.weights)};
  } else {
    std::optional<MembershipParams> warm;
    if (const auto* m = std::get_if<MembershipParams>(&model.membership); m && m->gamma.size() > 0) {
      warm = *m;
    }
    auto step = m_step_membership(posteriors, data, config, warm);
    flags.separation = step.separation;
    model.membership = std::move(step.params);
  }
  return flags;
}

Eigen::MatrixXd dirichlet_posteriors(std::size_t n, std::size_t k, Rng& rng) {
  Eigen::MatrixXd post(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < post.rows(); ++i) {
    double total = 0.0;
    for (Eigen::Index c = 0; c < post.cols(); ++c) {
      post(i, c) = rng.exponential();
      total += post(i, c);
    }
    post.row(i) /= total;
  }
  return post;
}

bool relative_change_below(double current, double previous, double tolerance) {
  return std::abs(current - previous) <= tolerance * std::abs(previous);
}

}  // namespace

double log_likelihood(const LatentClassModel& model, const Dataset& data) {
  model.check_schema(data);
  const Eigen::MatrixXd lj = log_joint(model, data);
  std::vector<double> row(static_cast<std::size_t>(lj.cols()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < lj.rows(); ++i) {
    const double w = data.weights(i);
    if (w == 0.0) continue;
    for (Eigen::Index c = 0; c < lj.cols(); ++c) row[static_cast<std::size_t>(c)] = lj(i, c);
    total += w * log_sum_exp(row);
  }
  if (!std::isfinite(total)) {
    throw Error(ErrorKind::corrupt_model, "log-likelihood is not finite; an observed pattern has probability 0");
  }
  return total;
}

Eigen::MatrixXd e_step(const LatentClassModel& model, const Dataset& data) {
  model.check_schema(data);
  return run_e_step(model, data).posteriors;
}

bool MeasurementStep::any_degenerate() const {
  return std::find(degenerate.begin(), degenerate.end(), true) != degenerate.end();
}

MeasurementStep m_step_measurement(const Eigen::MatrixXd& posteriors, const Dataset& data,
                                   double prob_floor) {
  const auto k = static_cast<std::size_t>(posteriors.cols());
  const auto n = static_cast<Eigen::Index>(data.size());
  const double total = data.total_weight();
  MeasurementStep out;
  out.degenerate.assign(k, false);
  out.params.probs.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    const Eigen::VectorXd mass = data.weights.cwiseProduct(posteriors.col(col));
    const double class_weight = mass.sum();
    const bool empty = !(class_weight > 1e-12 * total);
    out.degenerate[c] = empty;
    auto& tables = out.params.probs[c];
    tables.reserve(data.indicators.size());
    for (std::size_t l = 0; l < data.indicators.size(); ++l) {
      const auto m = static_cast<Eigen::Index>(data.indicators[l].size());
      if (empty) {
        tables.push_back(Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m)));
        continue;
      }
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(m);
      const auto lcol = static_cast<Eigen::Index>(l);
      for (Eigen::Index i = 0; i < n; ++i) counts(data.indicator_codes(i, lcol)) += mass(i);
      Eigen::VectorXd p = counts / class_weight;
      if ((p.array() < prob_floor).any()) {
        p = p.cwiseMax(prob_floor);
        p /= p.sum();
      }
      tables.push_back(std::move(p));
    }
  }
  return out;
}

MembershipStep m_step_membership(const Eigen::MatrixXd& posteriors, const Dataset& data,
                                 const EmConfig& config,
                                 const std::optional<MembershipParams>& warm_start) {
  const auto k = posteriors.cols();
  const Eigen::MatrixXd design = design_matrix(data.covariates, data.covariate_codes);
  MembershipStep out;
  if (k < 2) {
    out.params.gamma = Eigen::MatrixXd::Zero(k, design.cols());
    return out;
  }
  Eigen::MatrixXd start = Eigen::MatrixXd::Zero(k, design.cols());
  if (warm_start && warm_start->gamma.rows() == k && warm_start->gamma.cols() == design.cols()) {
    start = warm_start->gamma;
  }
  const LogitProblem problem{design, posteriors, data.weights, config.ridge};
  const LogitFit fit = fit_logit(problem, start, {config.irls_max_iter, config.irls_tolerance});
  out.params.gamma = fit.gamma;
  out.params.gamma.row(0).setZero();
  out.separation = !fit.converged;
  out.iterations = fit.iterations;
  return out;
}

Eigen::VectorXd expected_class_shares(const Eigen::MatrixXd& posteriors, const Eigen::VectorXd& weights) {
  Eigen::VectorXd shares = posteriors.transpose() * weights;
  return shares / shares.sum();
}

ChainResult run_em_chain(const Dataset& data, std::size_t k, MembershipMode mode,
                         const EmConfig& config, int restart_index) {
  Rng rng(config.seed, static_cast<std::uint64_t>(restart_index));
  ChainResult chain;
  chain.model = skeleton(data, mode);

  Eigen::MatrixXd post = dirichlet_posteriors(data.size(), k, rng);
  MStep flags = run_m_step(chain.model, post, data, mode, config);
  chain.degenerate = flags.degenerate;
  chain.separation = flags.separation;

  for (int iter = 0; iter < config.max_iterations && !chain.degenerate; ++iter) {
    EStep e = run_e_step(chain.model, data);
    chain.loglik = e.loglik;
    chain.loglik_trace.push_back(e.loglik);
    const auto& trace = chain.loglik_trace;
    // A single class is fitted in closed form by the first M-step.
    if (k == 1 || (trace.size() >= 2 && relative_change_below(trace.back(), trace[trace.size() - 2],
                                                              config.loglik_tolerance))) {
      chain.converged = true;
      break;
    }
    if (iter + 1 == config.max_iterations) break;
    flags = run_m_step(chain.model, e.posteriors, data, mode, config);
    chain.degenerate = flags.degenerate;
    chain.separation = flags.separation;
  }
  if (chain.degenerate) chain.loglik = -std::numeric_limits<double>::infinity();
  chain.iterations = static_cast<int>(chain.loglik_trace.size());
  return chain;
}

std::vector<std::size_t> canonical_order(const MeasurementParams& measurement, const Eigen::VectorXd& shares) {
  std::vector<std::size_t> order(measurement.k());
  std::iota(order.begin(), order.end(), 0);
  auto flat = [&](std::size_t c) {
    std::vector<double> v;
    for (const auto& t : measurement.probs[c]) v.insert(v.end(), t.data(), t.data() + t.size());
    return v;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = shares(static_cast<Eigen::Index>(a));
    const double sb = shares(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return flat(a) < flat(b);
  });
  return order;
}

CompressedData compress(const Dataset& data) {
  CompressedData out;
  const auto n = data.size();
  const auto l = data.indicator_codes.cols();
  const auto j = data.covariate_codes.cols();
  std::map<std::vector<int>, std::size_t> index;
  std::vector<std::size_t> first_row;
  std::vector<double> weight;
  out.row_to_pattern.resize(n);
  std::vector<int> key(static_cast<std::size_t>(l + j));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index c = 0; c < l; ++c) key[static_cast<std::size_t>(c)] = data.indicator_codes(r, c);
    for (Eigen::Index c = 0; c < j; ++c) key[static_cast<std::size_t>(l + c)] = data.covariate_codes(r, c);
    auto [it, inserted] = index.try_emplace(key, first_row.size());
    if (inserted) {
      first_row.push_back(i);
      weight.push_back(0.0);
    }
    weight[it->second] += data.weights(r);
    out.row_to_pattern[i] = it->second;
  }
  auto& p = out.patterns;
  p.indicators = data.indicators;
  p.covariates = data.covariates;
  const auto np = static_cast<Eigen::Index>(first_row.size());
  p.indicator_codes.resize(np, l);
  p.covariate_codes.resize(np, j);
  p.weights.resize(np);
  for (Eigen::Index r = 0; r < np; ++r) {
    const auto src = static_cast<Eigen::Index>(first_row[static_cast<std::size_t>(r)]);
    p.indicator_codes.row(r) = data.indicator_codes.row(src);
    p.covariate_codes.row(r) = data.covariate_codes.row(src);
    p.weights(r) = weight[static_cast<std::size_t>(r)];
    p.ids.push_back("pattern" + std::to_string(r));
  }
  return out;
}

FitResult fit_em(const Dataset& data, std::size_t k, MembershipMode mode, const EmConfig& config) {
  config.validate();
  data.validate();
  if (k < 1) throw Error(ErrorKind::invalid_dimension, "class count must be at least 1");

  const Dataset working = mode == MembershipMode::covariate ? data : data.with_covariates({});
  const CompressedData compressed = compress(working);

  const auto restarts = static_cast<std::size_t>(config.n_restarts);
  std::vector<ChainResult> chains(restarts);
  parallel_for(restarts, config.threads, [&](std::size_t r) {
    chains[r] = run_em_chain(compressed.patterns, k, mode, config, static_cast<int>(r));
  });

  std::optional<std::size_t> best;
  int degenerate = 0;
  for (std::size_t r = 0; r < restarts; ++r) {
    if (chains[r].degenerate) {
      ++degenerate;
      continue;
    }
    if (!best || chains[r].loglik > chains[*best].loglik) best = r;
  }
  if (!best) {
    throw Error(ErrorKind::all_chains_degenerate,
                "every restart produced an empty class at K=" + std::to_string(k));
  }
  const ChainResult& chain = chains[*best];

  const Eigen::MatrixXd raw_post = run_e_step(chain.model, working).posteriors;
  const auto order = canonical_order(chain.model.measurement, expected_class_shares(raw_post, working.weights));

  FitResult fit;
  fit.model = chain.model.permuted(order);
  fit.model.validate();
  const EStep final_step = run_e_step(fit.model, working);
  fit.posteriors = final_step.posteriors;
  fit.class_shares = expected_class_shares(fit.posteriors, working.weights);
  fit.loglik = final_step.loglik;

  std::vector<std::size_t> cats;
  for (const auto& v : data.indicators) cats.push_back(v.size());
  fit.n_params = n_params(k, cats, dummy_count(fit.model.covariates), mode);
  fit.bic_sample_size = config.bic_sample_size == BicSampleSize::weighted ? data.total_weight()
                                                                           : static_cast<double>(data.size());
  const auto ic = information_criteria(fit.loglik, fit.n_params, fit.bic_sample_size);
  fit.aic = ic.aic;
  fit.bic = ic.bic;
  fit.converged = chain.converged;
  fit.iterations = chain.iterations;
  fit.restart_index = static_cast<int>(*best);
  fit.seed = config.seed;
  fit.loglik_trace = chain.loglik_trace;
  fit.degenerate_restarts = degenerate;
  fit.separation = chain.separation;
  return fit;
}

}  // namespace lcca
