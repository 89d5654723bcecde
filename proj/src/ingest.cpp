#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "ingest_detail.hpp"
#include "lcca/ingest.hpp"

namespace lcca {

namespace {

constexpr std::size_t kMaxListedWarnings = 50;

std::string join_key(std::initializer_list<std::string_view> parts) {
  std::string key;
  for (auto p : parts) {
    if (!key.empty()) key.push_back('\x1f');
    key.append(detail::canonical_token(p));
  }
  return key;
}

std::string printable_key(std::string key) {
  for (auto& c : key) if (c == '\x1f') c = '/';
  return key;
}

}  // namespace

MergeResult merge_tables(const RawTable& household, const RawTable& person, const RawTable& trip,
                         const JoinKeys& keys) {
  const auto hh_house = household.column(keys.household, "household file");
  const auto p_house = person.column(keys.household, "person file");
  const auto p_person = person.column(keys.person, "person file");
  const auto t_house = trip.column(keys.household, "trip file");
  const auto t_person = trip.column(keys.person, "trip file");
  const auto t_trip = trip.column(keys.trip, "trip file");

  std::unordered_map<std::string, std::size_t> households;
  for (std::size_t r = 0; r < household.size(); ++r) {
    const auto key = join_key({household.rows[r][hh_house]});
    if (!households.emplace(key, r).second) {
      throw Error(ErrorKind::duplicate_key, "household file repeats key " + printable_key(key));
    }
  }
  std::unordered_map<std::string, std::size_t> persons;
  for (std::size_t r = 0; r < person.size(); ++r) {
    const auto key = join_key({person.rows[r][p_house], person.rows[r][p_person]});
    if (!persons.emplace(key, r).second) {
      throw Error(ErrorKind::duplicate_key, "person file repeats key " + printable_key(key));
    }
  }

  MergeResult out;
  out.table.header = trip.header;
  std::set<std::string> present(trip.header.begin(), trip.header.end());
  std::vector<std::size_t> person_cols;
  for (std::size_t c = 0; c < person.header.size(); ++c) {
    if (present.insert(person.header[c]).second) {
      person_cols.push_back(c);
      out.table.header.push_back(person.header[c]);
    }
  }
  std::vector<std::size_t> household_cols;
  for (std::size_t c = 0; c < household.header.size(); ++c) {
    if (present.insert(household.header[c]).second) {
      household_cols.push_back(c);
      out.table.header.push_back(household.header[c]);
    }
  }

  std::set<std::string> trip_keys;
  for (std::size_t r = 0; r < trip.size(); ++r) {
    const auto& row = trip.rows[r];
    const auto tkey = join_key({row[t_house], row[t_person], row[t_trip]});
    if (!trip_keys.insert(tkey).second) {
      throw Error(ErrorKind::duplicate_key, "trip file repeats key " + printable_key(tkey));
    }
    const auto pit = persons.find(join_key({row[t_house], row[t_person]}));
    const auto hit = households.find(join_key({row[t_house]}));
    if (pit == persons.end() || hit == households.end()) {
      ++out.unmatched_trips;
      if (out.warnings.size() < kMaxListedWarnings) {
        out.warnings.push_back("trip " + printable_key(tkey) + " excluded: no matching " +
                               (pit == persons.end() ? "person" : "household") + " record");
      }
      continue;
    }
    std::vector<std::string> merged = row;
    for (auto c : person_cols) merged.push_back(person.rows[pit->second][c]);
    for (auto c : household_cols) merged.push_back(household.rows[hit->second][c]);
    out.table.rows.push_back(std::move(merged));
  }
  if (out.unmatched_trips > kMaxListedWarnings) {
    out.warnings.push_back("... " + std::to_string(out.unmatched_trips - kMaxListedWarnings) +
                           " more unmatched trips excluded");
  }
  return out;
}

MergeResult load_and_merge(const std::filesystem::path& household_file, const std::filesystem::path& person_file,
                           const std::filesystem::path& trip_file, const JoinKeys& keys) {
  for (const auto& p : {household_file, person_file, trip_file}) {
    if (!std::filesystem::exists(p)) throw Error(ErrorKind::io, "missing input file '" + p.string() + "'");
  }
  return merge_tables(read_csv(household_file), read_csv(person_file), read_csv(trip_file), keys);
}

// --- recode -----------------------------------------------------------------

namespace {

struct Outcome {
  enum class Kind { ok, unmapped, invalid } kind = Kind::ok;
  std::size_t code = 0;
};

Outcome apply_rule(const VariableRule& v, const std::string& token) {
  Outcome out;
  if (const auto* map = std::get_if<ValueMapRule>(&v.rule)) {
    auto it = map->map.find(token);
    if (it == map->map.end()) {
      out.kind = Outcome::Kind::unmapped;
      return out;
    }
    out.code = v.variable().index_of(it->second);
    return out;
  }
  if (const auto* bins = std::get_if<NumericBinRule>(&v.rule)) {
    std::optional<double> value;
    if (auto it = bins->code_values.find(token); it != bins->code_values.end()) {
      value = it->second;
    } else {
      value = detail::parse_number(token);
    }
    if (!value) {
      out.kind = Outcome::Kind::unmapped;
      return out;
    }
    if (bins->floor && *value < *bins->floor) {
      out.kind = Outcome::Kind::invalid;
      return out;
    }
    out.code = bins->bin(*value);
    return out;
  }
  auto it = std::find(v.categories.begin(), v.categories.end(), token);
  if (it == v.categories.end()) {
    out.kind = Outcome::Kind::unmapped;
    return out;
  }
  out.code = static_cast<std::size_t>(it - v.categories.begin());
  return out;
}

}  // namespace

RecodeResult recode(const RawTable& raw, const RecodeSpec& spec) {
  spec.validate();
  std::vector<std::size_t> var_cols;
  for (const auto& v : spec.variables) var_cols.push_back(raw.column(v.column, "raw table"));
  const auto weight_col = raw.column(spec.weight.column, "raw table");
  std::vector<std::size_t> filter_cols;
  for (const auto& f : spec.filters) filter_cols.push_back(raw.column(f.column, "raw table"));
  std::vector<std::size_t> id_cols;
  for (const auto& c : spec.id.columns) id_cols.push_back(raw.column(c, "raw table"));

  std::set<std::string> missing(spec.missing_values.begin(), spec.missing_values.end());
  auto is_missing = [&](const std::string& token) { return missing.count(token) > 0; };

  std::vector<std::size_t> indicator_rules;
  std::vector<std::size_t> covariate_rules;
  for (std::size_t v = 0; v < spec.variables.size(); ++v) {
    (spec.variables[v].role == VariableRole::indicator ? indicator_rules : covariate_rules).push_back(v);
  }

  RecodeResult result;
  auto& report = result.report;
  report.input_rows = raw.size();

  std::vector<std::vector<int>> codes;
  std::vector<double> weights;
  std::vector<std::string> ids;

  for (std::size_t r = 0; r < raw.size(); ++r) {
    const auto& row = raw.rows[r];
    std::string id;
    for (std::size_t c = 0; c < id_cols.size(); ++c) {
      if (c) id += spec.id.separator;
      id += detail::trim(row[id_cols[c]]);
    }
    if (id_cols.empty()) id = std::to_string(r);

    bool keep = true;
    for (std::size_t f = 0; f < spec.filters.size() && keep; ++f) {
      keep = spec.filters[f].matches(row[filter_cols[f]]);
    }
    if (!keep) {
      ++report.filtered_rows;
      continue;
    }

    std::string reason;
    std::vector<int> row_codes(spec.variables.size());
    for (std::size_t v = 0; v < spec.variables.size() && reason.empty(); ++v) {
      const auto& rule = spec.variables[v];
      const std::string token = detail::canonical_token(row[var_cols[v]]);
      if (is_missing(token)) {
        reason = "missing: " + rule.column;
        break;
      }
      const Outcome o = apply_rule(rule, token);
      switch (o.kind) {
        case Outcome::Kind::ok:
          row_codes[v] = static_cast<int>(o.code);
          break;
        case Outcome::Kind::unmapped:
          if (rule.unmapped == UnmappedPolicy::error) {
            throw Error(ErrorKind::unmapped_code, "row " + std::to_string(r) + " (id " + id + "): column " +
                                                      rule.column + " has unmapped value '" + token + "'");
          }
          reason = "unmapped: " + rule.column + "=" + token;
          break;
        case Outcome::Kind::invalid:
          reason = "invalid: " + rule.column + "=" + token;
          break;
      }
    }
    double weight = 0.0;
    if (reason.empty()) {
      const std::string token = detail::canonical_token(row[weight_col]);
      const auto value = detail::parse_number(token);
      if (is_missing(token) || !value) {
        reason = "missing: " + spec.weight.column;
      } else if (*value < 0.0) {
        reason = "invalid: " + spec.weight.column + "=" + token;
      } else {
        weight = *value;
      }
    }
    if (!reason.empty()) {
      report.dropped.push_back({r, id, reason});
      continue;
    }
    codes.push_back(std::move(row_codes));
    weights.push_back(weight);
    ids.push_back(std::move(id));
  }

  report.kept_rows = codes.size();
  if (codes.empty()) {
    throw Error(ErrorKind::empty_result, "no rows remain after filtering and recoding (" +
                                             std::to_string(report.filtered_rows) + " filtered, " +
                                             std::to_string(report.dropped.size()) + " dropped)");
  }

  Dataset& data = result.data;
  for (auto v : indicator_rules) data.indicators.push_back(spec.variables[v].variable());
  for (auto v : covariate_rules) data.covariates.push_back(spec.variables[v].variable());
  const auto n = static_cast<Eigen::Index>(codes.size());
  data.indicator_codes.resize(n, static_cast<Eigen::Index>(indicator_rules.size()));
  data.covariate_codes.resize(n, static_cast<Eigen::Index>(covariate_rules.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rc = codes[static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < indicator_rules.size(); ++c) {
      data.indicator_codes(i, static_cast<Eigen::Index>(c)) = rc[indicator_rules[c]];
    }
    for (std::size_t c = 0; c < covariate_rules.size(); ++c) {
      data.covariate_codes(i, static_cast<Eigen::Index>(c)) = rc[covariate_rules[c]];
    }
  }
  data.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), n);
  if (spec.weight.target_mean) {
    data.weights = normalize_weights(data.weights, *spec.weight.target_mean, spec.weight.integer_mode);
  }
  data.ids = std::move(ids);
  data.validate();
  return result;
}

Eigen::VectorXd normalize_weights(const Eigen::VectorXd& weights, double target_mean, bool integer_mode) {
  if (!(target_mean > 0.0)) throw Error(ErrorKind::domain, "target mean must be positive");
  if (weights.size() == 0 || (weights.array() < 0.0).any() || !weights.allFinite()) {
    throw Error(ErrorKind::domain, "weights must be nonnegative and finite");
  }
  const double mean = weights.mean();
  if (!(mean > 0.0)) throw Error(ErrorKind::all_zero_weights, "cannot normalize all-zero weights");
  Eigen::VectorXd out = weights * (target_mean / mean);
  if (integer_mode) out = out.array().round().max(1.0).matrix();
  return out;
}

}  // namespace lcca
