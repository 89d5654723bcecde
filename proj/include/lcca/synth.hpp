#pragma once

// Synthetic data from a known latent class model, and label alignment for
// comparing an estimate against the truth.

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "lcca/core.hpp"

namespace lcca {

/// Each covariate drawn independently and uniformly over its categories.
struct UniformCovariates {};
/// Whole covariate rows bootstrapped from an existing Dataset.
struct CovariatePool {
  const Dataset* pool = nullptr;
};
/// Independent draws from per-covariate marginal distributions.
struct CovariateMarginals {
  std::vector<Eigen::VectorXd> probs;  // one per model covariate
};

using CovariateSource = std::variant<UniformCovariates, CovariatePool, CovariateMarginals>;

struct ConstantWeight {
  double value = 1.0;
};
struct UniformWeight {
  double low = 0.5;
  double high = 1.5;
};
struct LognormalWeight {
  double mu = 0.0;
  double sigma = 0.5;
};
/// Weights bootstrapped independently from a list.
struct BootstrapWeight {
  std::vector<double> values;
};

using WeightSpec = std::variant<ConstantWeight, UniformWeight, LognormalWeight, BootstrapWeight>;

struct Simulation {
  Dataset data;
  std::vector<std::size_t> true_labels;
};

/// Draws n rows: covariates, then class from the membership model, then each
/// indicator independently given the class, then a weight. Deterministic in seed.
Simulation simulate(const LatentClassModel& model, std::size_t n, std::uint64_t seed,
                    const CovariateSource& covariates = UniformCovariates{},
                    const WeightSpec& weights = ConstantWeight{});

/// Sum of |p - q| over all classes, indicators and categories when estimated
/// class order[j] is matched with truth class j.
double alignment_distance(const LatentClassModel& estimated, const LatentClassModel& truth,
                          std::span<const std::size_t> order);

/// Permutation minimizing alignment_distance by exhaustive search (K <= 8).
/// estimated.permuted(result) lines up with truth.
std::vector<std::size_t> align_labels(const LatentClassModel& estimated, const LatentClassModel& truth);

/// CSV with columns id, true_class (1-based).
void write_truth_labels(const Simulation& sim, const std::filesystem::path& path);

}  // namespace lcca
