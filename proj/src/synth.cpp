#include "lcca/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "lcca/csv.hpp"
#include "lcca/random.hpp"

namespace lcca {

namespace {

// Independent streams per concern, so changing the weight spec does not
// reshuffle the class and indicator draws.
enum Stream : std::uint64_t { covariate_stream = 1, class_stream = 2, indicator_stream = 3, weight_stream = 4 };

IndexMatrix draw_covariates(const LatentClassModel& model, std::size_t n, const CovariateSource& source, Rng& rng) {
  const auto& vars = model.covariates;
  IndexMatrix codes(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(vars.size()));
  if (std::holds_alternative<UniformCovariates>(source)) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < vars.size(); ++j) {
        codes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<int>(rng.index(vars[j].size()));
      }
    }
  } else if (const auto* pool = std::get_if<CovariatePool>(&source)) {
    if (!pool->pool || pool->pool->size() == 0) throw Error(ErrorKind::invalid_spec, "covariate pool is empty");
    std::vector<std::string> names;
    for (const auto& v : vars) names.push_back(v.name);
    const Dataset restricted = pool->pool->with_covariates(names);
    for (std::size_t j = 0; j < vars.size(); ++j) {
      if (!(restricted.covariates[j] == vars[j])) {
        throw Error(ErrorKind::schema_mismatch, "covariate pool disagrees with model on '" + vars[j].name + "'");
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = static_cast<Eigen::Index>(rng.index(restricted.size()));
      codes.row(static_cast<Eigen::Index>(i)) = restricted.covariate_codes.row(src);
    }
  } else {
    const auto& marg = std::get<CovariateMarginals>(source);
    if (marg.probs.size() != vars.size()) {
      throw Error(ErrorKind::invalid_spec, "need one marginal distribution per model covariate");
    }
    for (std::size_t j = 0; j < vars.size(); ++j) {
      const auto& p = marg.probs[j];
      if (static_cast<std::size_t>(p.size()) != vars[j].size() || (p.array() < 0.0).any() ||
          std::abs(p.sum() - 1.0) > 1e-9) {
        throw Error(ErrorKind::invalid_spec, "marginal for '" + vars[j].name + "' is not a distribution over its categories");
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < vars.size(); ++j) {
        codes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<int>(rng.categorical(marg.probs[j]));
      }
    }
  }
  return codes;
}

double draw_weight(const WeightSpec& spec, Rng& rng) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantWeight>) {
          return s.value;
        } else if constexpr (std::is_same_v<T, UniformWeight>) {
          return s.low + (s.high - s.low) * rng.uniform();
        } else if constexpr (std::is_same_v<T, LognormalWeight>) {
          return std::exp(s.mu + s.sigma * rng.normal());
        } else {
          return s.values[rng.index(s.values.size())];
        }
      },
      spec);
}

void validate_weight_spec(const WeightSpec& spec) {
  auto fail = [](const char* msg) { throw Error(ErrorKind::invalid_spec, msg); };
  if (const auto* c = std::get_if<ConstantWeight>(&spec)) {
    if (!(c->value > 0.0) || !std::isfinite(c->value)) fail("constant weight must be positive");
  } else if (const auto* u = std::get_if<UniformWeight>(&spec)) {
    if (!(u->low >= 0.0 && u->high > u->low) || !std::isfinite(u->high)) fail("uniform weight needs 0 <= low < high");
  } else if (const auto* l = std::get_if<LognormalWeight>(&spec)) {
    if (!(l->sigma >= 0.0) || !std::isfinite(l->mu)) fail("lognormal weight needs finite mu and sigma >= 0");
  } else {
    const auto& b = std::get<BootstrapWeight>(spec);
    if (b.values.empty()) fail("bootstrap weight list is empty");
    for (double v : b.values) {
      if (!(v >= 0.0) || !std::isfinite(v)) fail("bootstrap weights must be nonnegative and finite");
    }
    if (std::none_of(b.values.begin(), b.values.end(), [](double v) { return v > 0.0; })) {
      fail("bootstrap weights are all zero");
    }
  }
}

}  // namespace

Simulation simulate(const LatentClassModel& model, std::size_t n, std::uint64_t seed,
                    const CovariateSource& covariates, const WeightSpec& weights) {
  if (n < 1) throw Error(ErrorKind::domain, "simulation size must be at least 1");
  try {
    model.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_spec, std::string("cannot simulate from invalid model: ") + e.what());
  }
  validate_weight_spec(weights);

  Rng cov_rng(seed, covariate_stream);
  Rng class_rng(seed, class_stream);
  Rng ind_rng(seed, indicator_stream);
  Rng weight_rng(seed, weight_stream);

  Simulation sim;
  Dataset& data = sim.data;
  data.indicators = model.indicators;
  data.covariates = model.covariates;
  data.covariate_codes = draw_covariates(model, n, covariates, cov_rng);
  const auto rows = static_cast<Eigen::Index>(n);
  data.indicator_codes.resize(rows, static_cast<Eigen::Index>(model.indicators.size()));
  data.weights.resize(rows);
  data.ids.reserve(n);

  const Eigen::MatrixXd class_probs = model.class_log_probs(data).array().exp().matrix();
  sim.true_labels.resize(n);
  Eigen::VectorXd p(class_probs.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    p = class_probs.row(i).transpose();
    const std::size_t c = class_rng.categorical(p);
    sim.true_labels[static_cast<std::size_t>(i)] = c;
    for (std::size_t l = 0; l < model.indicators.size(); ++l) {
      data.indicator_codes(i, static_cast<Eigen::Index>(l)) =
          static_cast<int>(ind_rng.categorical(model.measurement.probs[c][l]));
    }
    data.weights(i) = draw_weight(weights, weight_rng);
    data.ids.push_back("sim" + std::to_string(i + 1));
  }
  if (!(data.weights.array() > 0.0).any()) data.weights(0) = 1.0;
  data.validate();
  return sim;
}

double alignment_distance(const LatentClassModel& estimated, const LatentClassModel& truth,
                          std::span<const std::size_t> order) {
  double total = 0.0;
  for (std::size_t j = 0; j < truth.k(); ++j) {
    for (std::size_t l = 0; l < truth.indicators.size(); ++l) {
      total += (estimated.measurement.probs[order[j]][l] - truth.measurement.probs[j][l]).cwiseAbs().sum();
    }
  }
  return total;
}

std::vector<std::size_t> align_labels(const LatentClassModel& estimated, const LatentClassModel& truth) {
  if (estimated.k() != truth.k() || estimated.indicators != truth.indicators) {
    throw Error(ErrorKind::schema_mismatch, "cannot align models with different class counts or indicators");
  }
  if (truth.k() > 8) throw Error(ErrorKind::invalid_dimension, "label alignment is limited to K <= 8");
  std::vector<std::size_t> perm(truth.k());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_distance = std::numeric_limits<double>::infinity();
  do {
    const double d = alignment_distance(estimated, truth, perm);
    if (d < best_distance) {
      best_distance = d;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void write_truth_labels(const Simulation& sim, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  write_csv_row(out, {"id", "true_class"});
  for (std::size_t i = 0; i < sim.true_labels.size(); ++i) {
    write_csv_row(out, {sim.data.ids[i], std::to_string(sim.true_labels[i] + 1)});
  }
}

}  // namespace lcca
