#include <fstream>

#include "ingest_detail.hpp"
#include "lcca/estimate.hpp"
#include "lcca/ingest.hpp"

namespace lcca {

using nlohmann::json;

json dataset_header(const Dataset& data, const std::string& body_file) {
  json j;
  j["format"] = "lcca-dataset";
  j["version"] = 1;
  j["n"] = data.size();
  j["coding"] = "zero-based category index";
  j["body"] = body_file;
  j["indicators"] = json::array();
  for (const auto& v : data.indicators) j["indicators"].push_back(to_json(v));
  j["covariates"] = json::array();
  for (const auto& v : data.covariates) j["covariates"].push_back(to_json(v));
  std::vector<std::string> columns{"id", "weight"};
  for (const auto& v : data.indicators) columns.push_back(v.name);
  for (const auto& v : data.covariates) columns.push_back(v.name);
  j["columns"] = columns;
  return j;
}

void write_dataset(const Dataset& data, const std::filesystem::path& header_path) {
  data.validate();
  auto body_path = header_path;
  body_path.replace_extension(".csv");
  if (header_path.has_parent_path()) std::filesystem::create_directories(header_path.parent_path());

  std::ofstream header(header_path);
  if (!header) throw Error(ErrorKind::io, "cannot write '" + header_path.string() + "'");
  header << dataset_header(data, body_path.filename().string()).dump(2) << '\n';

  std::ofstream body(body_path);
  if (!body) throw Error(ErrorKind::io, "cannot write '" + body_path.string() + "'");
  const auto columns = dataset_header(data, "").at("columns").get<std::vector<std::string>>();
  write_csv_row(body, columns);
  std::vector<std::string> fields;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    fields.clear();
    fields.push_back(data.ids[i]);
    fields.push_back(format_double(data.weights(r)));
    for (Eigen::Index c = 0; c < data.indicator_codes.cols(); ++c) {
      fields.push_back(std::to_string(data.indicator_codes(r, c)));
    }
    for (Eigen::Index c = 0; c < data.covariate_codes.cols(); ++c) {
      fields.push_back(std::to_string(data.covariate_codes(r, c)));
    }
    write_csv_row(body, fields);
  }
}

Dataset read_dataset(const std::filesystem::path& header_path) {
  std::ifstream in(header_path);
  if (!in) throw Error(ErrorKind::io, "cannot open dataset header '" + header_path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::schema_mismatch, header_path.string() + ": " + e.what());
  }
  if (j.value("format", std::string()) != "lcca-dataset") {
    throw Error(ErrorKind::schema_mismatch, header_path.string() + " is not an lcca dataset header");
  }

  Dataset data;
  std::filesystem::path body_path;
  try {
    for (const auto& v : j.at("indicators")) data.indicators.push_back(variable_from_json(v));
    for (const auto& v : j.at("covariates")) data.covariates.push_back(variable_from_json(v));
    body_path = header_path.parent_path() / j.at("body").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema_mismatch, header_path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::schema_mismatch, header_path.string() + ": " + e.what());
  }

  const CsvTable body = read_csv(body_path);
  const auto id_col = body.column("id", body_path.string());
  const auto weight_col = body.column("weight", body_path.string());
  std::vector<std::size_t> ind_cols, cov_cols;
  for (const auto& v : data.indicators) ind_cols.push_back(body.column(v.name, body_path.string()));
  for (const auto& v : data.covariates) cov_cols.push_back(body.column(v.name, body_path.string()));

  const auto n = static_cast<Eigen::Index>(body.size());
  data.weights.resize(n);
  data.indicator_codes.resize(n, static_cast<Eigen::Index>(ind_cols.size()));
  data.covariate_codes.resize(n, static_cast<Eigen::Index>(cov_cols.size()));
  auto code = [&](std::size_t row, std::size_t col, const CategoricalVariable& v) {
    const auto value = detail::parse_number(body.rows[row][col]);
    if (!value || *value != static_cast<int>(*value) || *value < 0 || *value >= static_cast<double>(v.size())) {
      throw Error(ErrorKind::schema_mismatch, body_path.string() + " row " + std::to_string(row + 1) +
                                                  ": invalid code '" + body.rows[row][col] + "' for " + v.name);
    }
    return static_cast<int>(*value);
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    data.ids.push_back(body.rows[i][id_col]);
    const auto w = detail::parse_number(body.rows[i][weight_col]);
    if (!w) {
      throw Error(ErrorKind::schema_mismatch, body_path.string() + " row " + std::to_string(i + 1) +
                                                  ": invalid weight '" + body.rows[i][weight_col] + "'");
    }
    data.weights(r) = *w;
    for (std::size_t c = 0; c < ind_cols.size(); ++c) {
      data.indicator_codes(r, static_cast<Eigen::Index>(c)) = code(i, ind_cols[c], data.indicators[c]);
    }
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      data.covariate_codes(r, static_cast<Eigen::Index>(c)) = code(i, cov_cols[c], data.covariates[c]);
    }
  }
  if (j.contains("n") && j.at("n").get<std::size_t>() != data.size()) {
    throw Error(ErrorKind::schema_mismatch, header_path.string() + ": header n does not match body rows");
  }
  data.validate();
  return data;
}

void write_drop_report(const RecodeReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  write_csv_row(out, {"row", "id", "reason"});
  for (const auto& d : report.dropped) write_csv_row(out, {std::to_string(d.row), d.id, d.reason});
}

}  // namespace lcca
