#pragma once

// Reporting on a fitted model: hard assignment, class shares, conditional
// probability tables, weighted crosstabs and the post-hoc membership logit.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcca/core.hpp"
#include "lcca/logit.hpp"

namespace lcca {

/// Argmax per row; ties go to the lowest class index.
std::vector<std::size_t> assign_classes(const Eigen::MatrixXd& posteriors);

/// share_k = sum of weights labelled k / total weight.
Eigen::VectorXd weighted_class_shares(std::span<const std::size_t> labels, const Eigen::VectorXd& weights,
                                      std::size_t k);

/// One indicator's class-conditional distributions, categories x classes.
struct ConditionalProbTable {
  std::string indicator;
  std::vector<std::string> categories;
  Eigen::MatrixXd probs;  // M x K
};

std::vector<ConditionalProbTable> conditional_prob_table(const LatentClassModel& model);

/// Weighted column percentages, categories x (K + 1); the last column is the whole sample.
struct Crosstab {
  std::string variable;
  std::vector<std::string> categories;
  Eigen::MatrixXd percent;
};

/// Throws Error(unknown_variable) for a name that is neither an indicator nor a covariate.
std::vector<Crosstab> weighted_profile(const Dataset& data, std::span<const std::size_t> labels, std::size_t k,
                                       std::span<const std::string> variables);

/// Whole-sample weighted percentages of every indicator and covariate (one column).
std::vector<Crosstab> descriptive_table(const Dataset& data);

struct PostHocOptions {
  bool posterior_targets = false;  // fit to posteriors instead of hard labels
  double divergence_bound = 30.0;
  double rcond_limit = 1e-12;      // information matrix reciprocal condition number
  double fallback_ridge = 1e-2;
  LogitSolverOptions solver{100, 1e-9};
};

struct MembershipCoefficient {
  std::size_t cls = 0;  // 1..K-1; class 0 is the reference
  std::string column;   // "(Intercept)" or "variable=category"
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p = 1.0;
  std::string stars;
};

struct MembershipLogitReport {
  std::vector<std::string> columns;
  Eigen::MatrixXd gamma;  // K x D, row 0 zero
  std::vector<MembershipCoefficient> coefficients;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  bool separation = false;
  double ridge = 0.0;  // nonzero when the fallback was applied
};

/// Weighted multinomial logit of class labels on dummy-encoded covariates,
/// reference class 0, with Wald statistics from the inverse observed information.
MembershipLogitReport post_hoc_membership_logit(std::span<const std::size_t> labels, const Dataset& data,
                                                std::size_t k, const PostHocOptions& options = {},
                                                const Eigen::MatrixXd* posteriors = nullptr);

/// Two-sided normal p-value for a Wald statistic.
double wald_p_value(double z);
/// "***" below 1%, "**" below 5%, "*" below 10%, else "".
std::string significance_stars(double p);

struct ProfileReport {
  Eigen::VectorXd class_shares;
  std::vector<ConditionalProbTable> conditional_probs;
  std::vector<Crosstab> crosstabs;
  std::optional<MembershipLogitReport> membership;
  std::vector<std::size_t> labels;
};

/// Full report. Crosstabs cover every indicator and covariate of `data`;
/// the post-hoc logit uses `data`'s covariates and is skipped when K = 1.
ProfileReport build_profile(const LatentClassModel& model, const Dataset& data, const PostHocOptions& options = {});

// --- writers ----------------------------------------------------------------

enum class TableFormat { csv, markdown };
TableFormat parse_table_format(std::string_view text);

void write_conditional_probs(std::ostream& out, const std::vector<ConditionalProbTable>& tables,
                             const Eigen::VectorXd& class_shares, TableFormat format);
void write_membership(std::ostream& out, const MembershipLogitReport& report, TableFormat format);
void write_crosstabs(std::ostream& out, const std::vector<Crosstab>& tables, TableFormat format);
void write_assignments(std::ostream& out, const Dataset& data, const Eigen::MatrixXd& posteriors,
                       std::span<const std::size_t> labels);

/// Writes table1_descriptives, table3_conditional_probs, table4_membership
/// (K >= 2) and table5_profiles with extension .csv or .md, plus assignments.csv.
/// Returns the file names written.
std::vector<std::string> write_profile_report(const std::filesystem::path& dir, const ProfileReport& report,
                                              const Dataset& data, const Eigen::MatrixXd& posteriors,
                                              TableFormat format);

}  // namespace lcca
