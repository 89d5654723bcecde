#include "lcca/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace lcca {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_dimension: return "invalid-dimension";
    case ErrorKind::domain: return "domain";
    case ErrorKind::schema_mismatch: return "schema-mismatch";
    case ErrorKind::io: return "io";
    case ErrorKind::missing_column: return "missing-column";
    case ErrorKind::duplicate_key: return "duplicate-key";
    case ErrorKind::unmapped_code: return "unmapped-code";
    case ErrorKind::empty_result: return "empty-result";
    case ErrorKind::all_zero_weights: return "all-zero-weights";
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::all_chains_degenerate: return "all-chains-degenerate";
    case ErrorKind::no_successful_fit: return "no-successful-fit";
    case ErrorKind::unknown_variable: return "unknown-variable";
    case ErrorKind::corrupt_model: return "corrupt-model";
  }
  return "unknown";
}

const char* to_string(MembershipMode mode) {
  return mode == MembershipMode::constant_prior ? "constant" : "covariate";
}

MembershipMode parse_membership_mode(std::string_view text) {
  if (text == "constant" || text == "constant-prior") return MembershipMode::constant_prior;
  if (text == "covariate") return MembershipMode::covariate;
  throw Error(ErrorKind::invalid_spec, "unknown membership mode '" + std::string(text) + "'");
}

// --- CategoricalVariable ----------------------------------------------------

std::size_t CategoricalVariable::index_of(std::string_view label) const {
  auto it = std::find(categories.begin(), categories.end(), label);
  if (it == categories.end()) {
    throw Error(ErrorKind::unknown_variable,
                "variable '" + name + "' has no category '" + std::string(label) + "'");
  }
  return static_cast<std::size_t>(it - categories.begin());
}

void CategoricalVariable::validate() const {
  if (name.empty()) throw Error(ErrorKind::invalid_spec, "variable name is empty");
  if (categories.size() < 2) {
    throw Error(ErrorKind::invalid_dimension,
                "variable '" + name + "' needs at least 2 categories");
  }
  std::set<std::string> seen;
  for (const auto& c : categories) {
    if (c.empty()) throw Error(ErrorKind::invalid_spec, "variable '" + name + "' has an empty category label");
    if (!seen.insert(c).second) {
      throw Error(ErrorKind::invalid_spec, "variable '" + name + "' repeats category '" + c + "'");
    }
  }
  if (reference_index >= categories.size()) {
    throw Error(ErrorKind::invalid_spec, "variable '" + name + "' has an out-of-range reference");
  }
}

// --- Dataset ----------------------------------------------------------------

namespace {

void check_codes(const IndexMatrix& codes, std::span<const CategoricalVariable> vars,
                 const char* what) {
  if (static_cast<std::size_t>(codes.cols()) != vars.size()) {
    throw Error(ErrorKind::invalid_dimension, std::string(what) + " code matrix has wrong column count");
  }
  for (Eigen::Index j = 0; j < codes.cols(); ++j) {
    const int limit = static_cast<int>(vars[static_cast<std::size_t>(j)].size());
    for (Eigen::Index i = 0; i < codes.rows(); ++i) {
      const int c = codes(i, j);
      if (c < 0 || c >= limit) {
        throw Error(ErrorKind::invalid_dimension,
                    std::string(what) + " '" + vars[static_cast<std::size_t>(j)].name + "' row " +
                        std::to_string(i) + " has out-of-range code " + std::to_string(c));
      }
    }
  }
}

}  // namespace

void Dataset::validate() const {
  for (const auto& v : indicators) v.validate();
  for (const auto& v : covariates) v.validate();
  const auto n = weights.size();
  if (indicator_codes.rows() != n || covariate_codes.rows() != n ||
      static_cast<Eigen::Index>(ids.size()) != n) {
    throw Error(ErrorKind::invalid_dimension, "dataset fields disagree on the row count");
  }
  check_codes(indicator_codes, indicators, "indicator");
  check_codes(covariate_codes, covariates, "covariate");
  bool any_positive = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(weights(i)) || weights(i) < 0.0) {
      throw Error(ErrorKind::domain, "weight at row " + std::to_string(i) + " is negative or not finite");
    }
    any_positive = any_positive || weights(i) > 0.0;
  }
  if (!any_positive) throw Error(ErrorKind::all_zero_weights, "dataset has no positive weight");
}

Dataset Dataset::with_covariates(std::span<const std::string> names) const {
  Dataset out;
  out.indicators = indicators;
  out.indicator_codes = indicator_codes;
  out.weights = weights;
  out.ids = ids;
  out.covariate_codes.resize(indicator_codes.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    auto it = std::find_if(covariates.begin(), covariates.end(),
                           [&](const CategoricalVariable& v) { return v.name == names[j]; });
    if (it == covariates.end()) {
      throw Error(ErrorKind::unknown_variable, "dataset has no covariate '" + names[j] + "'");
    }
    const auto src = it - covariates.begin();
    out.covariates.push_back(*it);
    out.covariate_codes.col(static_cast<Eigen::Index>(j)) = covariate_codes.col(src);
  }
  return out;
}

Dataset Dataset::with_weights(Eigen::VectorXd new_weights) const {
  Dataset out = *this;
  out.weights = std::move(new_weights);
  out.validate();
  return out;
}

const CategoricalVariable& Dataset::variable(std::string_view name) const {
  for (const auto& v : indicators) if (v.name == name) return v;
  for (const auto& v : covariates) if (v.name == name) return v;
  throw Error(ErrorKind::unknown_variable, "dataset has no variable '" + std::string(name) + "'");
}

// --- parameters -------------------------------------------------------------

void MeasurementParams::validate(std::span<const CategoricalVariable> indicators) const {
  if (probs.empty()) throw Error(ErrorKind::invalid_dimension, "measurement table has no classes");
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k].size() != indicators.size()) {
      throw Error(ErrorKind::invalid_dimension, "measurement table has wrong indicator count");
    }
    for (std::size_t l = 0; l < indicators.size(); ++l) {
      const auto& p = probs[k][l];
      if (static_cast<std::size_t>(p.size()) != indicators[l].size()) {
        throw Error(ErrorKind::invalid_dimension,
                    "measurement table for '" + indicators[l].name + "' has wrong length");
      }
      if ((p.array() < 0.0).any() || (p.array() > 1.0).any() || !p.allFinite()) {
        throw Error(ErrorKind::domain, "measurement probabilities must lie in [0, 1]");
      }
      if (std::abs(p.sum() - 1.0) > 1e-10) {
        throw Error(ErrorKind::domain, "measurement probabilities for '" + indicators[l].name +
                                           "' in class " + std::to_string(k) + " do not sum to 1");
      }
    }
  }
}

Eigen::VectorXd MeasurementParams::logits(std::size_t k, std::size_t l, std::size_t reference) const {
  const auto& p = probs[k][l];
  Eigen::VectorXd beta = (p.array() / p(static_cast<Eigen::Index>(reference))).log().matrix();
  beta(static_cast<Eigen::Index>(reference)) = 0.0;
  return beta;
}

void MembershipParams::validate(std::size_t dummies) const {
  if (gamma.rows() < 1 || static_cast<std::size_t>(gamma.cols()) != 1 + dummies) {
    throw Error(ErrorKind::invalid_dimension, "membership coefficients have the wrong shape");
  }
  if (!gamma.allFinite()) throw Error(ErrorKind::domain, "membership coefficients must be finite");
  if ((gamma.row(0).array() != 0.0).any()) {
    throw Error(ErrorKind::domain, "reference class membership coefficients must be zero");
  }
}

void ClassPriors::validate() const {
  if (priors.size() < 1) throw Error(ErrorKind::invalid_dimension, "class priors are empty");
  if ((priors.array() < 0.0).any() || !priors.allFinite()) {
    throw Error(ErrorKind::domain, "class priors must be nonnegative");
  }
  if (std::abs(priors.sum() - 1.0) > 1e-10) throw Error(ErrorKind::domain, "class priors do not sum to 1");
}

// --- LatentClassModel -------------------------------------------------------

void LatentClassModel::validate() const {
  for (const auto& v : indicators) v.validate();
  for (const auto& v : covariates) v.validate();
  measurement.validate(indicators);
  if (const auto* priors = std::get_if<ClassPriors>(&membership)) {
    priors->validate();
    if (static_cast<std::size_t>(priors->priors.size()) != k()) {
      throw Error(ErrorKind::invalid_dimension, "class prior length differs from class count");
    }
  } else {
    const auto& gamma = std::get<MembershipParams>(membership);
    gamma.validate(dummy_count(covariates));
    if (gamma.k() != k()) {
      throw Error(ErrorKind::invalid_dimension, "membership rows differ from class count");
    }
  }
}

void LatentClassModel::check_schema(const Dataset& data) const {
  if (data.indicators != indicators) {
    throw Error(ErrorKind::schema_mismatch, "model indicators do not match the dataset indicators");
  }
  if (mode() == MembershipMode::covariate && data.covariates != covariates) {
    throw Error(ErrorKind::schema_mismatch, "model covariate schema does not match the dataset covariates");
  }
}

Eigen::MatrixXd LatentClassModel::class_log_probs(const Dataset& data) const {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto kk = static_cast<Eigen::Index>(k());
  Eigen::MatrixXd out(n, kk);
  if (const auto* priors = std::get_if<ClassPriors>(&membership)) {
    const Eigen::RowVectorXd lp = priors->priors.array().log().matrix().transpose();
    out.rowwise() = lp;
    return out;
  }
  const auto& gamma = std::get<MembershipParams>(membership).gamma;
  const Eigen::MatrixXd eta = design_matrix(covariates, data.covariate_codes) * gamma.transpose();
  std::vector<double> row(static_cast<std::size_t>(kk));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < kk; ++c) row[static_cast<std::size_t>(c)] = eta(i, c);
    const double lse = log_sum_exp(row);
    out.row(i) = eta.row(i).array() - lse;
  }
  return out;
}

LatentClassModel LatentClassModel::permuted(std::span<const std::size_t> order) const {
  LatentClassModel out = *this;
  for (std::size_t j = 0; j < order.size(); ++j) out.measurement.probs[j] = measurement.probs[order[j]];
  if (const auto* priors = std::get_if<ClassPriors>(&membership)) {
    ClassPriors p;
    p.priors.resize(priors->priors.size());
    for (std::size_t j = 0; j < order.size(); ++j) {
      p.priors(static_cast<Eigen::Index>(j)) = priors->priors(static_cast<Eigen::Index>(order[j]));
    }
    out.membership = p;
  } else {
    const auto& gamma = std::get<MembershipParams>(membership).gamma;
    MembershipParams m;
    m.gamma.resize(gamma.rows(), gamma.cols());
    const Eigen::RowVectorXd base = gamma.row(static_cast<Eigen::Index>(order[0]));
    for (std::size_t j = 0; j < order.size(); ++j) {
      m.gamma.row(static_cast<Eigen::Index>(j)) = gamma.row(static_cast<Eigen::Index>(order[j])) - base;
    }
    m.gamma.row(0).setZero();
    out.membership = m;
  }
  return out;
}

// --- dummy encoding ---------------------------------------------------------

std::size_t dummy_count(std::span<const CategoricalVariable> covariates) {
  std::size_t n = 0;
  for (const auto& v : covariates) n += v.size() - 1;
  return n;
}

std::vector<std::string> dummy_names(std::span<const CategoricalVariable> covariates) {
  std::vector<std::string> names;
  for (const auto& v : covariates) {
    for (std::size_t m = 0; m < v.size(); ++m) {
      if (m != v.reference_index) names.push_back(v.name + "=" + v.categories[m]);
    }
  }
  return names;
}

Eigen::MatrixXd design_matrix(std::span<const CategoricalVariable> covariates, const IndexMatrix& codes) {
  const auto n = codes.rows();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(1 + dummy_count(covariates)));
  x.col(0).setOnes();
  Eigen::Index offset = 1;
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    const auto& v = covariates[j];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto m = static_cast<std::size_t>(codes(i, static_cast<Eigen::Index>(j)));
      if (m == v.reference_index) continue;
      const auto col = m < v.reference_index ? m : m - 1;
      x(i, offset + static_cast<Eigen::Index>(col)) = 1.0;
    }
    offset += static_cast<Eigen::Index>(v.size() - 1);
  }
  return x;
}

// --- fit statistics ---------------------------------------------------------

int n_params(std::size_t k, std::span<const std::size_t> indicator_categories,
             std::size_t covariate_dummy_count, MembershipMode mode) {
  if (k < 1) throw Error(ErrorKind::invalid_dimension, "class count must be at least 1");
  std::size_t free_per_class = 0;
  for (auto m : indicator_categories) {
    if (m < 2) throw Error(ErrorKind::invalid_dimension, "every indicator needs at least 2 categories");
    free_per_class += m - 1;
  }
  const std::size_t per_mixing = mode == MembershipMode::constant_prior ? 1 : 1 + covariate_dummy_count;
  return static_cast<int>(k * free_per_class + (k - 1) * per_mixing);
}

InformationCriteria information_criteria(double loglik, int p, double bic_sample_size) {
  if (!(bic_sample_size > 1.0)) {
    throw Error(ErrorKind::domain, "BIC sample size must exceed 1");
  }
  const double penalty = static_cast<double>(p);
  return {2.0 * penalty - 2.0 * loglik, penalty * std::log(bic_sample_size) - 2.0 * loglik};
}

// --- numerics ---------------------------------------------------------------

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double top = sorted.back();
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : sorted) acc += std::exp(v - top);
  return top + std::log(acc);
}

}  // namespace lcca
