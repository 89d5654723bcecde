#pragma once

// Domain types shared by every stage of the latent class pipeline.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace lcca {

enum class ErrorKind {
  invalid_dimension,
  domain,
  schema_mismatch,
  io,
  missing_column,
  duplicate_key,
  unmapped_code,
  empty_result,
  all_zero_weights,
  invalid_spec,
  all_chains_degenerate,
  no_successful_fit,
  unknown_variable,
  corrupt_model,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A categorical variable with an ordered category list. The reference
/// category is the one whose logit parameter is pinned to zero.
struct CategoricalVariable {
  std::string name;
  std::vector<std::string> categories;
  std::size_t reference_index = 0;

  std::size_t size() const noexcept { return categories.size(); }
  /// Throws Error(unknown_variable) when the label is not a category.
  std::size_t index_of(std::string_view label) const;
  void validate() const;

  friend bool operator==(const CategoricalVariable&, const CategoricalVariable&) = default;
};

/// N weighted observations over L indicators and J covariates.
struct Dataset {
  std::vector<CategoricalVariable> indicators;
  std::vector<CategoricalVariable> covariates;
  IndexMatrix indicator_codes;  // N x L
  IndexMatrix covariate_codes;  // N x J
  Eigen::VectorXd weights;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return static_cast<std::size_t>(weights.size()); }
  double total_weight() const { return weights.sum(); }
  void validate() const;

  /// Copy restricted to the named covariates, in the order given.
  Dataset with_covariates(std::span<const std::string> names) const;
  Dataset with_weights(Eigen::VectorXd new_weights) const;
  /// Index of a variable by name, searching indicators then covariates.
  const CategoricalVariable& variable(std::string_view name) const;
};

/// Per-class indicator distributions: probs[k][l](m) = P(Y_l = m | class k).
struct MeasurementParams {
  std::vector<std::vector<Eigen::VectorXd>> probs;

  std::size_t k() const noexcept { return probs.size(); }
  void validate(std::span<const CategoricalVariable> indicators) const;
  /// ln(p_m / p_ref); exactly zero at the reference.
  Eigen::VectorXd logits(std::size_t k, std::size_t l, std::size_t reference) const;
};

/// Multinomial-logit class membership coefficients, K x (1 + J_d).
/// Row 0 is the reference class and is identically zero; column 0 is the intercept.
struct MembershipParams {
  Eigen::MatrixXd gamma;

  std::size_t k() const noexcept { return static_cast<std::size_t>(gamma.rows()); }
  void validate(std::size_t dummy_count) const;
};

/// Class priors for the indicator-only stage.
struct ClassPriors {
  Eigen::VectorXd priors;
  void validate() const;
};

enum class MembershipMode { constant_prior, covariate };

const char* to_string(MembershipMode mode);
MembershipMode parse_membership_mode(std::string_view text);

struct LatentClassModel {
  std::vector<CategoricalVariable> indicators;
  std::vector<CategoricalVariable> covariates;  // empty for constant-prior models
  MeasurementParams measurement;
  std::variant<ClassPriors, MembershipParams> membership;

  std::size_t k() const noexcept { return measurement.k(); }
  MembershipMode mode() const noexcept {
    return std::holds_alternative<ClassPriors>(membership) ? MembershipMode::constant_prior
                                                           : MembershipMode::covariate;
  }
  void validate() const;
  /// Throws Error(schema_mismatch) unless data carries this model's layout.
  void check_schema(const Dataset& data) const;
  /// N x K matrix of ln P(C_k | Z_i).
  Eigen::MatrixXd class_log_probs(const Dataset& data) const;
  /// Relabel classes so new class j is old class order[j]. Membership
  /// coefficients are re-referenced so the new class 0 row is zero.
  LatentClassModel permuted(std::span<const std::size_t> order) const;
};

struct FitResult {
  LatentClassModel model;
  double loglik = 0.0;
  int n_params = 0;
  double aic = 0.0;
  double bic = 0.0;
  double bic_sample_size = 0.0;
  Eigen::MatrixXd posteriors;  // N x K
  Eigen::VectorXd class_shares;
  bool converged = false;
  int iterations = 0;
  int restart_index = 0;
  std::uint64_t seed = 0;

  // run diagnostics
  std::vector<double> loglik_trace;
  int degenerate_restarts = 0;
  bool separation = false;
};

// --- dummy encoding -------------------------------------------------------

/// Number of dummy columns: one per non-reference category of each covariate.
std::size_t dummy_count(std::span<const CategoricalVariable> covariates);
/// "<variable>=<category>" for each dummy column, in design-matrix order.
std::vector<std::string> dummy_names(std::span<const CategoricalVariable> covariates);
/// N x (1 + J_d) design: intercept column then dummies.
Eigen::MatrixXd design_matrix(std::span<const CategoricalVariable> covariates,
                              const IndexMatrix& codes);

// --- fit statistics -------------------------------------------------------

int n_params(std::size_t k, std::span<const std::size_t> indicator_categories,
             std::size_t covariate_dummy_count, MembershipMode mode);

struct InformationCriteria {
  double aic;
  double bic;
};

InformationCriteria information_criteria(double loglik, int n_params, double bic_sample_size);

// --- numerics -------------------------------------------------------------

/// ln(sum(exp(x))). Terms are summed in sorted order so the result does not
/// depend on the order of the input.
double log_sum_exp(std::span<const double> x);

}  // namespace lcca
