#include "lcca/select.hpp"

#include <cstdio>
#include <ostream>

#include "lcca/csv.hpp"
#include "lcca/random.hpp"

namespace lcca {

Criterion parse_criterion(std::string_view text) {
  if (text == "bic" || text == "BIC") return Criterion::bic;
  if (text == "aic" || text == "AIC") return Criterion::aic;
  throw Error(ErrorKind::domain, "unknown criterion '" + std::string(text) + "' (expected bic or aic)");
}

SelectionTable sweep(const Dataset& data, std::size_t kmin, std::size_t kmax, MembershipMode mode,
                     const EmConfig& config, bool keep_fits) {
  if (kmin < 1 || kmax < kmin) {
    throw Error(ErrorKind::domain, "class range must satisfy 1 <= kmin <= kmax");
  }
  SelectionTable table;
  for (std::size_t k = kmin; k <= kmax; ++k) {
    SelectionRow row;
    row.k = k;
    EmConfig cfg = config;
    cfg.seed = derive_seed(config.seed, k);
    row.seed = cfg.seed;
    try {
      FitResult fit = fit_em(data, k, mode, cfg);
      row.ok = true;
      row.aic = fit.aic;
      row.bic = fit.bic;
      row.loglik = fit.loglik;
      row.n_params = fit.n_params;
      row.bic_sample_size = fit.bic_sample_size;
      row.class_shares = fit.class_shares;
      row.converged = fit.converged;
      if (keep_fits) row.fit = std::move(fit);
    } catch (const Error& e) {
      row.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    table.push_back(std::move(row));
  }
  return table;
}

std::size_t select_best(const SelectionTable& table, Criterion criterion) {
  const SelectionRow* best = nullptr;
  for (const auto& row : table) {
    if (!row.ok) continue;
    const double value = criterion == Criterion::bic ? row.bic : row.aic;
    if (!best) {
      best = &row;
      continue;
    }
    const double current = criterion == Criterion::bic ? best->bic : best->aic;
    if (value < current || (value == current && row.k < best->k)) best = &row;
  }
  if (!best) throw Error(ErrorKind::no_successful_fit, "no class count produced a successful fit");
  return best->k;
}

namespace {

std::string shares_text(const Eigen::VectorXd& shares) {
  std::string out;
  char buf[32];
  for (Eigen::Index k = 0; k < shares.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%s%.3f", k ? "/" : "", shares(k));
    out += buf;
  }
  return out;
}

}  // namespace

void write_selection_csv(std::ostream& out, const SelectionTable& table) {
  write_csv_row(out, {"k", "ok", "loglik", "n_params", "aic", "bic", "bic_sample_size", "converged",
                      "class_shares", "seed", "error"});
  for (const auto& r : table) {
    if (!r.ok) {
      write_csv_row(out, {std::to_string(r.k), "false", "", "", "", "", "", "", "", std::to_string(r.seed), r.error});
      continue;
    }
    std::string shares;
    for (Eigen::Index k = 0; k < r.class_shares.size(); ++k) {
      shares += (k ? ";" : "") + format_double(r.class_shares(k));
    }
    write_csv_row(out, {std::to_string(r.k), "true", format_double(r.loglik), std::to_string(r.n_params),
                        format_double(r.aic), format_double(r.bic), format_double(r.bic_sample_size),
                        r.converged ? "true" : "false", shares, std::to_string(r.seed), ""});
  }
}

void write_selection_text(std::ostream& out, const SelectionTable& table, bool markdown) {
  char buf[256];
  if (markdown) {
    out << "| Number of Classes | AIC | BIC | Log-likelihood | N_Params | Class shares |\n";
    out << "|---:|---:|---:|---:|---:|:---|\n";
  } else {
    std::snprintf(buf, sizeof buf, "%-17s %10s %10s %15s %9s  %s\n", "Number of Classes", "AIC", "BIC",
                  "Log-likelihood", "N_Params", "Class shares");
    out << buf;
  }
  for (const auto& r : table) {
    if (!r.ok) {
      if (markdown) {
        out << "| " << r.k << " | failed | | | | " << r.error << " |\n";
      } else {
        std::snprintf(buf, sizeof buf, "%-17zu failed: ", r.k);
        out << buf << r.error << '\n';
      }
      continue;
    }
    const auto shares = shares_text(r.class_shares);
    if (markdown) {
      std::snprintf(buf, sizeof buf, "| %zu | %.1f | %.1f | %.1f | %d | %s |\n", r.k, r.aic, r.bic, r.loglik,
                    r.n_params, shares.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-17zu %10.1f %10.1f %15.1f %9d  %s\n", r.k, r.aic, r.bic, r.loglik,
                    r.n_params, shares.c_str());
    }
    out << buf;
  }
}

}  // namespace lcca
