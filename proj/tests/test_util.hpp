#pragma once

#include <string>
#include <vector>

#include "lcca/core.hpp"
#include "lcca/random.hpp"

namespace lcca::test {

inline CategoricalVariable make_variable(const std::string& name, std::size_t m, std::size_t reference = 0) {
  CategoricalVariable v;
  v.name = name;
  for (std::size_t c = 0; c < m; ++c) v.categories.push_back(name + "_" + std::to_string(c));
  v.reference_index = reference;
  return v;
}

inline Eigen::VectorXd random_simplex(Rng& rng, std::size_t m, double min_mass = 0.0) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(m));
  for (std::size_t c = 0; c < m; ++c) p(static_cast<Eigen::Index>(c)) = rng.exponential() + min_mass;
  return p / p.sum();
}

/// Random dataset with the given category counts. Weights uniform on [lo, hi).
inline Dataset random_dataset(Rng& rng, std::size_t n, const std::vector<std::size_t>& indicator_sizes,
                              const std::vector<std::size_t>& covariate_sizes, double lo = 0.5, double hi = 2.0) {
  Dataset d;
  for (std::size_t l = 0; l < indicator_sizes.size(); ++l) {
    d.indicators.push_back(make_variable("y" + std::to_string(l), indicator_sizes[l]));
  }
  for (std::size_t j = 0; j < covariate_sizes.size(); ++j) {
    d.covariates.push_back(make_variable("z" + std::to_string(j), covariate_sizes[j]));
  }
  const auto rows = static_cast<Eigen::Index>(n);
  d.indicator_codes.resize(rows, static_cast<Eigen::Index>(indicator_sizes.size()));
  d.covariate_codes.resize(rows, static_cast<Eigen::Index>(covariate_sizes.size()));
  d.weights.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (std::size_t l = 0; l < indicator_sizes.size(); ++l) {
      d.indicator_codes(i, static_cast<Eigen::Index>(l)) = static_cast<int>(rng.index(indicator_sizes[l]));
    }
    for (std::size_t j = 0; j < covariate_sizes.size(); ++j) {
      d.covariate_codes(i, static_cast<Eigen::Index>(j)) = static_cast<int>(rng.index(covariate_sizes[j]));
    }
    d.weights(i) = lo + (hi - lo) * rng.uniform();
    d.ids.push_back("r" + std::to_string(i));
  }
  return d;
}

/// Random model over the dataset's schema. Covariate mode draws gamma entries
/// uniformly from [-scale, scale].
inline LatentClassModel random_model(Rng& rng, const Dataset& d, std::size_t k, MembershipMode mode,
                                     double scale = 1.0) {
  LatentClassModel m;
  m.indicators = d.indicators;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<Eigen::VectorXd> tables;
    for (const auto& v : d.indicators) tables.push_back(random_simplex(rng, v.size(), 0.05));
    m.measurement.probs.push_back(std::move(tables));
  }
  if (mode == MembershipMode::constant_prior) {
    m.membership = ClassPriors{random_simplex(rng, k, 0.1)};
  } else {
    m.covariates = d.covariates;
    MembershipParams p;
    p.gamma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(1 + dummy_count(d.covariates)));
    for (Eigen::Index r = 1; r < p.gamma.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.gamma.cols(); ++c) p.gamma(r, c) = scale * (2.0 * rng.uniform() - 1.0);
    }
    m.membership = p;
  }
  return m;
}

/// Constant-prior model from explicit tables: probs[k][l] as std vectors.
inline LatentClassModel table_model(const std::vector<CategoricalVariable>& indicators,
                                    const std::vector<std::vector<std::vector<double>>>& probs,
                                    const std::vector<double>& priors) {
  LatentClassModel m;
  m.indicators = indicators;
  for (const auto& cls : probs) {
    std::vector<Eigen::VectorXd> tables;
    for (const auto& t : cls) tables.push_back(Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())));
    m.measurement.probs.push_back(std::move(tables));
  }
  m.membership = ClassPriors{Eigen::Map<const Eigen::VectorXd>(priors.data(), static_cast<Eigen::Index>(priors.size()))};
  return m;
}

/// Direct evaluation of sum_i w_i ln sum_k P(k|z_i) prod_l P(y_il|k) without
/// log-space tricks: softmax and products computed in plain arithmetic.
inline double brute_force_loglik(const LatentClassModel& m, const Dataset& d) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<double> prior(m.k());
    if (const auto* p = std::get_if<ClassPriors>(&m.membership)) {
      for (std::size_t c = 0; c < m.k(); ++c) prior[c] = p->priors(static_cast<Eigen::Index>(c));
    } else {
      const auto& g = std::get<MembershipParams>(m.membership).gamma;
      double denom = 0.0;
      for (std::size_t c = 0; c < m.k(); ++c) {
        double eta = g(static_cast<Eigen::Index>(c), 0);
        Eigen::Index col = 1;
        for (std::size_t j = 0; j < m.covariates.size(); ++j) {
          const auto& v = m.covariates[j];
          const auto code = static_cast<std::size_t>(d.covariate_codes(r, static_cast<Eigen::Index>(j)));
          for (std::size_t cat = 0; cat < v.size(); ++cat) {
            if (cat == v.reference_index) continue;
            if (cat == code) eta += g(static_cast<Eigen::Index>(c), col);
            ++col;
          }
        }
        prior[c] = std::exp(eta);
        denom += prior[c];
      }
      for (auto& p : prior) p /= denom;
    }
    double mix = 0.0;
    for (std::size_t c = 0; c < m.k(); ++c) {
      double prod = prior[c];
      for (std::size_t l = 0; l < m.indicators.size(); ++l) {
        prod *= m.measurement.probs[c][l](d.indicator_codes(r, static_cast<Eigen::Index>(l)));
      }
      mix += prod;
    }
    total += d.weights(r) * std::log(mix);
  }
  return total;
}

/// Largest absolute difference between two models' measurement tables.
inline double max_table_diff(const LatentClassModel& a, const LatentClassModel& b) {
  double worst = 0.0;
  for (std::size_t c = 0; c < a.k(); ++c) {
    for (std::size_t l = 0; l < a.indicators.size(); ++l) {
      worst = std::max(worst, (a.measurement.probs[c][l] - b.measurement.probs[c][l]).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace lcca::test
