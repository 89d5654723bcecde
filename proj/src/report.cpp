#include <cstdio>
#include <fstream>
#include <ostream>

#include "lcca/csv.hpp"
#include "lcca/profile.hpp"

namespace lcca {

TableFormat parse_table_format(std::string_view text) {
  if (text == "csv") return TableFormat::csv;
  if (text == "markdown" || text == "md") return TableFormat::markdown;
  throw Error(ErrorKind::domain, "unknown table format '" + std::string(text) + "' (expected csv or markdown)");
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void markdown_row(std::ostream& out, const std::vector<std::string>& cells) {
  out << '|';
  for (const auto& c : cells) out << ' ' << c << " |";
  out << '\n';
}

void markdown_rule(std::ostream& out, std::size_t columns) {
  out << '|';
  for (std::size_t c = 0; c < columns; ++c) out << (c < 2 ? ":---|" : "---:|");
  out << '\n';
}

std::vector<std::string> class_headers(std::size_t k) {
  std::vector<std::string> h;
  for (std::size_t c = 0; c < k; ++c) h.push_back("Class " + std::to_string(c + 1));
  return h;
}

}  // namespace

void write_conditional_probs(std::ostream& out, const std::vector<ConditionalProbTable>& tables,
                             const Eigen::VectorXd& class_shares, TableFormat format) {
  const auto k = static_cast<std::size_t>(class_shares.size());
  std::vector<std::string> header{"Variable", "Category"};
  for (auto& h : class_headers(k)) header.push_back(std::move(h));

  if (format == TableFormat::csv) {
    write_csv_row(out, header);
    std::vector<std::string> row{"Class share", ""};
    for (std::size_t c = 0; c < k; ++c) row.push_back(format_double(class_shares(static_cast<Eigen::Index>(c))));
    write_csv_row(out, row);
    for (const auto& t : tables) {
      for (std::size_t m = 0; m < t.categories.size(); ++m) {
        row = {t.indicator, t.categories[m]};
        for (std::size_t c = 0; c < k; ++c) {
          row.push_back(format_double(t.probs(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c))));
        }
        write_csv_row(out, row);
      }
    }
    return;
  }
  markdown_row(out, header);
  markdown_rule(out, header.size());
  std::vector<std::string> row{"Class Share (%)", ""};
  for (std::size_t c = 0; c < k; ++c) row.push_back(fixed(100.0 * class_shares(static_cast<Eigen::Index>(c)), 1));
  markdown_row(out, row);
  for (const auto& t : tables) {
    for (std::size_t m = 0; m < t.categories.size(); ++m) {
      row = {m == 0 ? t.indicator : "", t.categories[m]};
      for (std::size_t c = 0; c < k; ++c) {
        row.push_back(fixed(t.probs(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c)), 4));
      }
      markdown_row(out, row);
    }
  }
}

void write_membership(std::ostream& out, const MembershipLogitReport& report, TableFormat format) {
  if (format == TableFormat::csv) {
    write_csv_row(out, {"class", "term", "estimate", "std_error", "z", "p", "stars"});
    for (const auto& c : report.coefficients) {
      write_csv_row(out, {std::to_string(c.cls + 1), c.column, format_double(c.estimate), format_double(c.std_error),
                          format_double(c.z), format_double(c.p), c.stars});
    }
    return;
  }
  const auto k = static_cast<std::size_t>(report.gamma.rows());
  std::vector<std::string> header{"Term", "Reference"};
  for (std::size_t c = 1; c < k; ++c) {
    header.push_back("Class " + std::to_string(c + 1) + " coef.");
    header.push_back("z");
  }
  markdown_row(out, header);
  markdown_rule(out, header.size());
  const std::size_t d = report.columns.size();
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<std::string> row{report.columns[j], "Class 1"};
    for (std::size_t c = 1; c < k; ++c) {
      const auto& coef = report.coefficients[(c - 1) * d + j];
      row.push_back(fixed(coef.estimate, 4) + coef.stars);
      row.push_back(fixed(coef.z, 4));
    }
    markdown_row(out, row);
  }
  out << "\n*, **, *** mark significance at the 10%, 5% and 1% levels (two-sided Wald test).\n";
  if (report.separation) {
    out << "Separation detected; coefficients use ridge " << report.ridge << ".\n";
  }
}

void write_crosstabs(std::ostream& out, const std::vector<Crosstab>& tables, TableFormat format) {
  if (tables.empty()) return;
  const auto columns = static_cast<std::size_t>(tables.front().percent.cols());
  std::vector<std::string> header{"Variable", "Category"};
  if (columns == 1) {
    header.push_back("Percent");
  } else {
    for (auto& h : class_headers(columns - 1)) header.push_back(std::move(h));
    header.push_back("Total");
  }
  if (format == TableFormat::markdown) {
    markdown_row(out, header);
    markdown_rule(out, header.size());
  } else {
    write_csv_row(out, header);
  }
  for (const auto& t : tables) {
    for (std::size_t m = 0; m < t.categories.size(); ++m) {
      std::vector<std::string> row{format == TableFormat::markdown && m > 0 ? "" : t.variable, t.categories[m]};
      for (std::size_t c = 0; c < columns; ++c) {
        const double v = t.percent(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c));
        row.push_back(format == TableFormat::csv ? format_double(v) : fixed(v, 2));
      }
      if (format == TableFormat::markdown) {
        markdown_row(out, row);
      } else {
        write_csv_row(out, row);
      }
    }
  }
}

void write_assignments(std::ostream& out, const Dataset& data, const Eigen::MatrixXd& posteriors,
                       std::span<const std::size_t> labels) {
  std::vector<std::string> header{"id", "weight", "class"};
  for (Eigen::Index c = 0; c < posteriors.cols(); ++c) header.push_back("posterior_" + std::to_string(c + 1));
  write_csv_row(out, header);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<std::string> row{data.ids[i], format_double(data.weights(r)), std::to_string(labels[i] + 1)};
    for (Eigen::Index c = 0; c < posteriors.cols(); ++c) row.push_back(format_double(posteriors(r, c)));
    write_csv_row(out, row);
  }
}

std::vector<std::string> write_profile_report(const std::filesystem::path& dir, const ProfileReport& report,
                                              const Dataset& data, const Eigen::MatrixXd& posteriors,
                                              TableFormat format) {
  std::filesystem::create_directories(dir);
  const std::string ext = format == TableFormat::csv ? ".csv" : ".md";
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + (dir / name).string() + "'");
    written.push_back(name);
    return out;
  };
  {
    auto out = open("table1_descriptives" + ext);
    write_crosstabs(out, descriptive_table(data), format);
  }
  {
    auto out = open("table3_conditional_probs" + ext);
    write_conditional_probs(out, report.conditional_probs, report.class_shares, format);
  }
  if (report.membership) {
    auto out = open("table4_membership" + ext);
    write_membership(out, *report.membership, format);
  }
  {
    auto out = open("table5_profiles" + ext);
    write_crosstabs(out, report.crosstabs, format);
  }
  {
    auto out = open("assignments.csv");
    write_assignments(out, data, posteriors, report.labels);
  }
  return written;
}

}  // namespace lcca
