#pragma once

// Weighted EM estimation for latent class models with either constant class
// priors or a multinomial-logit membership model.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lcca/core.hpp"

namespace lcca {

enum class BicSampleSize { weighted, raw };

struct EmConfig {
  int max_iterations = 500;
  double loglik_tolerance = 1e-8;  // relative change
  int n_restarts = 20;
  std::uint64_t seed = 0;
  double prob_floor = 1e-10;
  int irls_max_iter = 50;
  double irls_tolerance = 1e-10;  // gradient max-norm
  double ridge = 1e-8;
  BicSampleSize bic_sample_size = BicSampleSize::weighted;
  unsigned threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

nlohmann::json to_json(const EmConfig& config);
EmConfig em_config_from_json(const nlohmann::json& j);

/// sum_i w_i ln( sum_k P(C_k|Z_i) prod_l P(Y_il|C_k) ), accumulated in log space.
double log_likelihood(const LatentClassModel& model, const Dataset& data);

/// N x K posterior class probabilities.
Eigen::MatrixXd e_step(const LatentClassModel& model, const Dataset& data);

struct MeasurementStep {
  MeasurementParams params;
  std::vector<bool> degenerate;  // class had zero posterior weight

  bool any_degenerate() const;
};

/// Weighted category frequencies per class, floored at prob_floor and renormalized.
/// A class with zero posterior weight keeps a uniform table and is flagged.
MeasurementStep m_step_measurement(const Eigen::MatrixXd& posteriors, const Dataset& data,
                                   double prob_floor);

struct MembershipStep {
  MembershipParams params;
  bool separation = false;
  int iterations = 0;
};

/// Weighted multinomial-logit fit of the posteriors on the dummy-encoded
/// covariates. `warm_start` (K x (1+J_d)) seeds the Newton iterations.
MembershipStep m_step_membership(const Eigen::MatrixXd& posteriors, const Dataset& data,
                                 const EmConfig& config,
                                 const std::optional<MembershipParams>& warm_start = std::nullopt);

/// Weighted posterior mass per class, normalized.
Eigen::VectorXd expected_class_shares(const Eigen::MatrixXd& posteriors, const Eigen::VectorXd& weights);

/// One EM chain from a Dirichlet(1) posterior draw.
struct ChainResult {
  LatentClassModel model;
  double loglik = 0.0;
  std::vector<double> loglik_trace;  // log-likelihood after each E-step
  bool converged = false;
  bool degenerate = false;
  bool separation = false;
  int iterations = 0;
};

ChainResult run_em_chain(const Dataset& data, std::size_t k, MembershipMode mode,
                         const EmConfig& config, int restart_index);

/// Canonical class order: descending share, ties by lexicographic order of
/// the flattened measurement tables.
std::vector<std::size_t> canonical_order(const MeasurementParams& measurement,
                                         const Eigen::VectorXd& shares);

/// Best of config.n_restarts chains, canonically ordered, with fit statistics.
FitResult fit_em(const Dataset& data, std::size_t k, MembershipMode mode, const EmConfig& config);

/// Collapse identical (indicator, covariate) rows, summing weights.
/// `row_to_pattern[i]` maps each original row to its pattern.
struct CompressedData {
  Dataset patterns;
  std::vector<std::size_t> row_to_pattern;
};

CompressedData compress(const Dataset& data);

// --- model serialization ----------------------------------------------------

nlohmann::json to_json(const LatentClassModel& model);
LatentClassModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CategoricalVariable& v);
CategoricalVariable variable_from_json(const nlohmann::json& j);

/// Model document: model, fit statistics, config echo and seed.
nlohmann::json fit_to_json(const FitResult& fit, const EmConfig& config);

}  // namespace lcca
