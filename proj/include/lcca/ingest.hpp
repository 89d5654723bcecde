#pragma once

// Survey ingestion: merge household/person/trip files, recode raw columns
// into categorical analysis variables, and normalize trip weights.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "lcca/core.hpp"
#include "lcca/csv.hpp"

namespace lcca {

using RawTable = CsvTable;

struct JoinKeys {
  std::string household = "HOUSEID";
  std::string person = "PERSONID";
  std::string trip = "TRIPID";
};

struct MergeResult {
  RawTable table;  // trip grain
  std::size_t unmatched_trips = 0;
  std::vector<std::string> warnings;
};

/// Inner join at trip grain: trip -> person on (household, person), then
/// -> household on household. Columns already present are not repeated.
MergeResult merge_tables(const RawTable& household, const RawTable& person, const RawTable& trip,
                         const JoinKeys& keys = {});

MergeResult load_and_merge(const std::filesystem::path& household_file,
                           const std::filesystem::path& person_file,
                           const std::filesystem::path& trip_file, const JoinKeys& keys = {});

// --- recode specification ---------------------------------------------------

enum class VariableRole { indicator, covariate };
enum class UnmappedPolicy { error, drop };

/// Raw code -> category label.
struct ValueMapRule {
  std::map<std::string, std::string> map;
};

/// Right-closed bins: label[b] covers (bounds[b-1], bounds[b]]; the last
/// label is open-ended. Values below `floor` are invalid. `code_values`
/// translates survey bracket codes to numbers before binning.
struct NumericBinRule {
  std::vector<double> bounds;
  std::optional<double> floor;
  std::map<std::string, double> code_values;

  std::size_t bin(double value) const;
};

/// The raw value is itself the category label.
struct PassthroughRule {};

struct VariableRule {
  std::string name;
  std::string column;
  VariableRole role = VariableRole::indicator;
  std::variant<ValueMapRule, NumericBinRule, PassthroughRule> rule;
  std::vector<std::string> categories;
  std::optional<std::string> reference;
  UnmappedPolicy unmapped = UnmappedPolicy::error;

  CategoricalVariable variable() const;
};

struct FilterPredicate {
  enum class Op { eq, ne, lt, le, gt, ge, in };
  std::string column;
  Op op = Op::eq;
  std::vector<std::string> values;

  bool matches(std::string_view raw) const;
  std::string describe() const;
};

struct WeightRule {
  std::string column;
  std::optional<double> target_mean;
  bool integer_mode = false;
};

struct IdRule {
  std::vector<std::string> columns;
  std::string separator = "-";
};

struct RecodeSpec {
  std::vector<std::string> missing_values;
  std::vector<FilterPredicate> filters;
  std::vector<VariableRule> variables;
  WeightRule weight;
  IdRule id;

  void validate() const;
};

RecodeSpec recode_spec_from_json(const nlohmann::json& j);
RecodeSpec load_recode_spec(const std::filesystem::path& path);
/// The bundled NHTS 2022 zero-vehicle-household spec.
RecodeSpec default_recode_spec();
const char* default_recode_spec_text();

struct DroppedRow {
  std::size_t row = 0;  // index in the raw table
  std::string id;
  std::string reason;
};

struct RecodeReport {
  std::size_t input_rows = 0;
  std::size_t filtered_rows = 0;
  std::vector<DroppedRow> dropped;  // post-filter drops: missing, unmapped, invalid
  std::size_t kept_rows = 0;
};

struct RecodeResult {
  Dataset data;
  RecodeReport report;
};

RecodeResult recode(const RawTable& raw, const RecodeSpec& spec);

/// Scale weights to `target_mean`. Integer mode rounds to the nearest
/// integer and clamps at 1.
Eigen::VectorXd normalize_weights(const Eigen::VectorXd& weights, double target_mean, bool integer_mode);

// --- Dataset files ----------------------------------------------------------

/// Writes `<stem>.json` (schema header) and `<stem>.csv` (coded body).
void write_dataset(const Dataset& data, const std::filesystem::path& header_path);
Dataset read_dataset(const std::filesystem::path& header_path);
nlohmann::json dataset_header(const Dataset& data, const std::string& body_file);

void write_drop_report(const RecodeReport& report, const std::filesystem::path& path);

}  // namespace lcca
