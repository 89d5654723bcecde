#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lcca/ingest.hpp"
#include "recode_golden.hpp"
#include "test_util.hpp"

using namespace lcca;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = LCCA_FIXTURE_DIR;

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lcca_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an lcca::Error");
  return ErrorKind::io;
}

RecodeSpec small_spec() {
  return recode_spec_from_json(nlohmann::json::parse(R"({
    "missing_values": ["", "-9"],
    "filters": [{"column": "keep", "op": "==", "value": 1}],
    "weight": {"column": "w"},
    "variables": [
      {"name": "y", "column": "Y", "type": "map", "categories": ["a", "b"], "map": {"a": [1], "b": [2, 3]}},
      {"name": "x", "column": "X", "role": "covariate", "type": "bins", "bounds": [10], "labels": ["low", "high"], "floor": 0}
    ]
  })"));
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("csv parsing handles quotes, CRLF and BOM") {
  const auto t = parse_csv("\xEF\xBB\xBF" "a,b,c\r\n1,\"x,y\",\"he said \"\"hi\"\"\"\r\n\r\n2,,z\n");
  REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.size() == 2);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[0][2] == "he said \"hi\"");
  CHECK(t.rows[1][1] == "");
  CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), Error);
  CHECK(kind_of([&] { (void)t.column("missing"); }) == ErrorKind::missing_column);
}

TEST_CASE("csv escaping round trips") {
  std::ostringstream out;
  write_csv_row(out, {"plain", "with,comma", "with \"quote\"", ""});
  const auto t = parse_csv("h1,h2,h3,h4\n" + out.str());
  CHECK(t.rows[0] == std::vector<std::string>{"plain", "with,comma", "with \"quote\"", ""});
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("merge joins trips to persons and households") {
  const auto merged = load_and_merge(kFixtures / "household.csv", kFixtures / "person.csv", kFixtures / "trip.csv");
  CHECK(merged.unmatched_trips == test::kGoldenUnmatched);
  REQUIRE(merged.warnings.size() == 1);
  CHECK(merged.warnings[0].find("H1/9/1") != std::string::npos);
  CHECK(merged.table.size() == 23);
  // trip columns first, key columns not repeated
  CHECK(merged.table.header[0] == "HOUSEID");
  CHECK(std::count(merged.table.header.begin(), merged.table.header.end(), "HOUSEID") == 1);
  CHECK(merged.table.find("R_AGE").has_value());
  CHECK(merged.table.find("HBPPOPDN").has_value());
  const auto age = *merged.table.find("R_AGE");
  CHECK(merged.table.rows[2][age] == "18");
}

TEST_CASE("merge rejects duplicate keys") {
  RawTable hh{{"HOUSEID"}, {{"1"}, {"1"}}};
  RawTable pp{{"HOUSEID", "PERSONID"}, {{"1", "1"}}};
  RawTable tt{{"HOUSEID", "PERSONID", "TRIPID"}, {{"1", "1", "1"}}};
  CHECK(kind_of([&] { merge_tables(hh, pp, tt); }) == ErrorKind::duplicate_key);
  hh.rows.pop_back();
  pp.rows.push_back({"01", "1"});  // same key after canonicalization
  CHECK(kind_of([&] { merge_tables(hh, pp, tt); }) == ErrorKind::duplicate_key);
  pp.rows.pop_back();
  tt.rows.push_back({"1", "1", "1"});
  CHECK(kind_of([&] { merge_tables(hh, pp, tt); }) == ErrorKind::duplicate_key);
  tt.rows.pop_back();
  CHECK(merge_tables(hh, pp, tt).table.size() == 1);
  CHECK(kind_of([&] { load_and_merge("/nonexistent/h.csv", "p", "t"); }) == ErrorKind::io);
}

TEST_CASE("right-closed bins") {
  NumericBinRule rule{{1.0, 3.0, 10.0}, 0.0, {}};
  CHECK(rule.bin(0.0) == 0);
  CHECK(rule.bin(1.0) == 0);
  CHECK(rule.bin(1.0000001) == 1);
  CHECK(rule.bin(3.0) == 1);
  CHECK(rule.bin(10.0) == 2);
  CHECK(rule.bin(10.5) == 3);
}

TEST_CASE("recode applies filters, drops and policies") {
  RawTable raw{{"keep", "Y", "X", "w"},
               {{"1", "1", "5", "2"},
                {"0", "1", "5", "2"},     // filtered
                {"1", "3", "10.0", "4"},  // boundary: 10 is low
                {"1", "-9", "5", "1"},    // missing
                {"1", "2", "-1", "1"},    // below floor
                {"1", "2", "11", "6"}}};
  auto spec = small_spec();
  const auto result = recode(raw, spec);
  CHECK(result.report.input_rows == 6);
  CHECK(result.report.filtered_rows == 1);
  REQUIRE(result.report.dropped.size() == 2);
  CHECK(result.report.dropped[0].reason == "missing: Y");
  CHECK(result.report.dropped[1].reason == "invalid: X=-1");
  CHECK(result.report.kept_rows == 3);
  const auto& d = result.data;
  CHECK(d.indicator_codes.col(0).transpose() == Eigen::RowVector3i(0, 1, 1));
  CHECK(d.covariate_codes.col(0).transpose() == Eigen::RowVector3i(0, 0, 1));
  CHECK(d.weights == Eigen::Vector3d(2, 4, 6));
  CHECK(d.ids[1] == "2");  // row index when no id columns are declared

  raw.rows.push_back({"1", "7", "5", "1"});
  CHECK(kind_of([&] { recode(raw, spec); }) == ErrorKind::unmapped_code);
  spec.variables[0].unmapped = UnmappedPolicy::drop;
  CHECK(recode(raw, spec).report.dropped.back().reason == "unmapped: Y=7");

  RawTable none{{"keep", "Y", "X", "w"}, {{"0", "1", "5", "2"}}};
  CHECK(kind_of([&] { recode(none, spec); }) == ErrorKind::empty_result);
  RawTable no_col{{"keep", "Y", "w"}, {{"1", "1", "2"}}};
  CHECK(kind_of([&] { recode(no_col, spec); }) == ErrorKind::missing_column);
}

TEST_CASE("recode spec validation") {
  auto parse = [](const char* text) { return recode_spec_from_json(nlohmann::json::parse(text)); };
  CHECK(kind_of([&] {
          parse(R"({"weight": {"column": "w"}, "variables": [
            {"name": "y", "column": "Y", "type": "bins", "bounds": [1, 2], "labels": ["a", "b"]}]})");
        }) == ErrorKind::invalid_spec);
  CHECK(kind_of([&] {
          parse(R"({"weight": {"column": "w"}, "variables": [
            {"name": "y", "column": "Y", "type": "map", "categories": ["a"], "map": {"b": [1]}}]})");
        }) == ErrorKind::invalid_spec);
  CHECK(kind_of([&] {
          parse(R"({"weight": {"column": "w"}, "variables": [
            {"name": "y", "column": "Y", "role": "covariate", "type": "passthrough", "categories": ["a", "b"]}]})");
        }) == ErrorKind::invalid_spec);
  CHECK(kind_of([&] { parse(R"({"variables": []})"); }) == ErrorKind::invalid_spec);
  CHECK_NOTHROW(default_recode_spec());
}

TEST_CASE("bundled spec covers the documented category lists") {
  const auto spec = default_recode_spec();
  std::map<std::string, std::size_t> sizes;
  for (const auto& v : spec.variables) sizes[v.name] = v.categories.size();
  CHECK(sizes["mode_group"] == 3);
  CHECK(sizes["trip_purpose"] == 5);
  CHECK(sizes["age"] == 5);
  CHECK(sizes["distance"] == 4);
  CHECK(sizes["race"] == 4);
  CHECK(sizes["education"] == 4);
  CHECK(sizes["density"] == 3);
  CHECK(sizes["income"] == 3);
}

TEST_CASE("bundled spec on the fixture files matches the golden table") {
  const auto merged = load_and_merge(kFixtures / "household.csv", kFixtures / "person.csv", kFixtures / "trip.csv");
  const auto result = recode(merged.table, default_recode_spec());
  const auto& d = result.data;
  REQUIRE(d.size() == test::kGoldenRows.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& g = test::kGoldenRows[i];
    CHECK(d.ids[i] == g.id);
    for (std::size_t c = 0; c < test::kGoldenColumns.size(); ++c) {
      const auto& v = d.variable(test::kGoldenColumns[c]);
      const bool indicator = c < 2;
      const auto& codes = indicator ? d.indicator_codes : d.covariate_codes;
      const auto col = static_cast<Eigen::Index>(indicator ? c : c - 2);
      CHECK(v.categories[static_cast<std::size_t>(codes(static_cast<Eigen::Index>(i), col))] == g.labels[c]);
    }
  }
  CHECK(d.weights.mean() == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("weight normalization") {
  const Eigen::Vector3d w(1.0, 2.0, 3.0);
  CHECK(normalize_weights(w, 1.0, false).isApprox(Eigen::Vector3d(0.5, 1.0, 1.5)));
  // integer mode rounds and clamps at 1
  const Eigen::Vector3d small(0.01, 1.0, 2.99);
  CHECK(normalize_weights(small, 1.0, true) == Eigen::Vector3d(1.0, 1.0, 2.0));
  CHECK(kind_of([&] { normalize_weights(Eigen::Vector3d::Zero(), 1.0, false); }) == ErrorKind::all_zero_weights);
}

TEST_CASE("dataset files round trip") {
  Rng rng(11);
  auto d = test::random_dataset(rng, 40, {3, 2}, {4, 2});
  d.weights(3) = 1.0 / 3.0;
  const auto dir = scratch_dir("dataset_io");
  write_dataset(d, dir / "data.json");
  CHECK(fs::exists(dir / "data.csv"));
  const auto back = read_dataset(dir / "data.json");
  CHECK(back.indicators == d.indicators);
  CHECK(back.covariates == d.covariates);
  CHECK(back.indicator_codes == d.indicator_codes);
  CHECK(back.covariate_codes == d.covariate_codes);
  CHECK(back.weights == d.weights);  // bit-exact
  CHECK(back.ids == d.ids);

  std::ofstream(dir / "bad.json") << R"({"format": "something-else"})";
  CHECK(kind_of([&] { read_dataset(dir / "bad.json"); }) == ErrorKind::schema_mismatch);
  CHECK(kind_of([&] { read_dataset(dir / "absent.json"); }) == ErrorKind::io);
}

TEST_CASE("drop report lists post-filter drops") {
  const auto merged = load_and_merge(kFixtures / "household.csv", kFixtures / "person.csv", kFixtures / "trip.csv");
  const auto result = recode(merged.table, default_recode_spec());
  CHECK(result.report.filtered_rows == test::kGoldenFiltered);
  REQUIRE(result.report.dropped.size() == test::kGoldenDropped.size());
  for (std::size_t i = 0; i < test::kGoldenDropped.size(); ++i) {
    CHECK(result.report.dropped[i].id == test::kGoldenDropped[i]);
  }
  const auto dir = scratch_dir("drop_report");
  write_drop_report(result.report, dir / "drops.csv");
  const auto t = read_csv(dir / "drops.csv");
  CHECK(t.size() == test::kGoldenDropped.size());
}

}  // TEST_SUITE
