#pragma once

// Class-count sweep and information-criterion model selection.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lcca/estimate.hpp"

namespace lcca {

struct SelectionRow {
  std::size_t k = 0;
  bool ok = false;
  std::string error;  // set when !ok
  double aic = 0.0;
  double bic = 0.0;
  double loglik = 0.0;
  int n_params = 0;
  double bic_sample_size = 0.0;
  Eigen::VectorXd class_shares;
  bool converged = false;
  std::uint64_t seed = 0;
  std::optional<FitResult> fit;
};

using SelectionTable = std::vector<SelectionRow>;

enum class Criterion { bic, aic };

Criterion parse_criterion(std::string_view text);

/// Fits K = kmin..kmax. Each K uses seed derive_seed(config.seed, K). A K
/// whose fit throws is recorded as a failed row.
SelectionTable sweep(const Dataset& data, std::size_t kmin, std::size_t kmax, MembershipMode mode,
                     const EmConfig& config, bool keep_fits = false);

/// K minimizing the criterion over successful rows; ties go to smaller K.
std::size_t select_best(const SelectionTable& table, Criterion criterion = Criterion::bic);

void write_selection_csv(std::ostream& out, const SelectionTable& table);
void write_selection_text(std::ostream& out, const SelectionTable& table, bool markdown = false);

}  // namespace lcca
