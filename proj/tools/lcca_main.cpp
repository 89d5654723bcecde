// lcca: latent class cluster analysis pipeline.
//
//   lcca recode   --household H --person P --trip T [--spec S] --out DIR
//   lcca select   --data D --kmin 1 --kmax 6 [--mode constant|covariate] --seed S --out DIR
//   lcca fit      --data D --k K [--covariates a,b,...] --seed S --out DIR
//   lcca profile  --model M --data D --out DIR [--format csv|markdown]
//   lcca simulate --model M --n N --seed S --out DIR
//
// Exit codes: 0 ok, 2 usage or input error, 3 estimation failure, 4 schema mismatch.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "lcca/estimate.hpp"
#include "lcca/ingest.hpp"
#include "lcca/profile.hpp"
#include "lcca/select.hpp"
#include "lcca/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitSchema = 4;
constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(lcca::ErrorKind kind) {
  using lcca::ErrorKind;
  switch (kind) {
    case ErrorKind::schema_mismatch:
      return kExitSchema;
    case ErrorKind::all_chains_degenerate:
    case ErrorKind::no_successful_fit:
    case ErrorKind::corrupt_model:
      return kExitEstimation;
    default:
      return kExitInput;
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw lcca::Error(lcca::ErrorKind::io, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json manifest(const std::string& command, const json& args, const std::vector<std::string>& outputs) {
  return {{"tool", "lcca"},     {"version", kVersion},        {"command", command},
          {"arguments", args},  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                              std::to_string(EIGEN_MINOR_VERSION)},
          {"outputs", outputs}};
}

lcca::EmConfig em_config(std::uint64_t seed, int restarts, unsigned threads, const std::string& bic_n) {
  lcca::EmConfig c;
  c.seed = seed;
  c.n_restarts = restarts;
  c.threads = threads;
  if (bic_n == "raw") {
    c.bic_sample_size = lcca::BicSampleSize::raw;
  } else if (bic_n != "weighted") {
    throw UsageError("--bic-n must be 'weighted' or 'raw'");
  }
  c.validate();
  return c;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

lcca::LatentClassModel read_model_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw lcca::Error(lcca::ErrorKind::io, "cannot open model '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw lcca::Error(lcca::ErrorKind::invalid_spec, path.string() + ": " + e.what());
  }
  return lcca::model_from_json(j);
}

// --- commands ---------------------------------------------------------------

struct RecodeArgs {
  std::string household, person, trip, spec, out;
};

int run_recode(const RecodeArgs& a) {
  const auto spec = a.spec.empty() ? lcca::default_recode_spec() : lcca::load_recode_spec(a.spec);
  auto merged = lcca::load_and_merge(a.household, a.person, a.trip);
  for (const auto& w : merged.warnings) std::cerr << "warning: " << w << '\n';
  const auto result = lcca::recode(merged.table, spec);
  fs::create_directories(a.out);
  lcca::write_dataset(result.data, fs::path(a.out) / "dataset.json");
  lcca::write_drop_report(result.report, fs::path(a.out) / "drop_report.csv");
  const json summary = {{"input_rows", result.report.input_rows},
                        {"unmatched_trips", merged.unmatched_trips},
                        {"filtered_rows", result.report.filtered_rows},
                        {"dropped_rows", result.report.dropped.size()},
                        {"kept_rows", result.report.kept_rows},
                        {"total_weight", result.data.total_weight()}};
  auto m = manifest("recode",
                    {{"household", a.household}, {"person", a.person}, {"trip", a.trip},
                     {"spec", a.spec.empty() ? "bundled" : a.spec}},
                    {"dataset.json", "dataset.csv", "drop_report.csv"});
  m["summary"] = summary;
  write_json(fs::path(a.out) / "manifest.json", m);
  std::cout << "kept " << result.report.kept_rows << " of " << result.report.input_rows << " merged rows ("
            << result.report.filtered_rows << " filtered, " << result.report.dropped.size() << " dropped)\n";
  return kExitOk;
}

struct SelectArgs {
  std::string data, mode = "constant", out, criterion = "bic", format = "markdown", bic_n = "weighted";
  std::size_t kmin = 1, kmax = 6;
  std::uint64_t seed = 0;
  int restarts = 20;
  unsigned threads = 0;
};

int run_select(const SelectArgs& a) {
  if (a.kmin < 1 || a.kmin > a.kmax) throw UsageError("--kmin must be at least 1 and not exceed --kmax");
  const auto mode = lcca::parse_membership_mode(a.mode);
  const auto criterion = lcca::parse_criterion(a.criterion);
  const auto format = lcca::parse_table_format(a.format);
  const auto config = em_config(a.seed, a.restarts, a.threads, a.bic_n);
  const auto data = lcca::read_dataset(a.data);

  const auto table = lcca::sweep(data, a.kmin, a.kmax, mode, config);
  fs::create_directories(a.out);
  {
    std::ofstream out(fs::path(a.out) / "selection.csv");
    lcca::write_selection_csv(out, table);
  }
  const std::string table_name = format == lcca::TableFormat::csv ? "table2_fit.txt" : "table2_fit.md";
  {
    std::ofstream out(fs::path(a.out) / table_name);
    lcca::write_selection_text(out, table, format == lcca::TableFormat::markdown);
  }
  lcca::write_selection_text(std::cout, table);

  std::size_t best = 0;
  try {
    best = lcca::select_best(table, criterion);
  } catch (const lcca::Error&) {
    write_json(fs::path(a.out) / "manifest.json",
               manifest("select", {{"data", a.data}}, {"selection.csv", table_name}));
    throw;
  }
  auto m = manifest("select",
                    {{"data", a.data}, {"kmin", a.kmin}, {"kmax", a.kmax}, {"mode", a.mode},
                     {"criterion", a.criterion}},
                    {"selection.csv", table_name});
  m["seed"] = a.seed;
  m["config"] = lcca::to_json(config);
  m["best_k"] = best;
  write_json(fs::path(a.out) / "manifest.json", m);
  std::cout << "best K (" << a.criterion << "): " << best << '\n';
  return kExitOk;
}

struct FitArgs {
  std::string data, covariates, out, bic_n = "weighted";
  std::size_t k = 0;
  std::uint64_t seed = 0;
  int restarts = 20;
  unsigned threads = 0;
  bool all_covariates = false;
};

int run_fit(const FitArgs& a) {
  if (a.k < 1) throw UsageError("--k must be at least 1");
  const auto config = em_config(a.seed, a.restarts, a.threads, a.bic_n);
  auto data = lcca::read_dataset(a.data);
  auto mode = lcca::MembershipMode::constant_prior;
  std::vector<std::string> names;
  if (a.all_covariates) {
    for (const auto& v : data.covariates) names.push_back(v.name);
  } else {
    names = split_names(a.covariates);
  }
  if (!names.empty()) {
    mode = lcca::MembershipMode::covariate;
    data = data.with_covariates(names);
  }
  const auto fit = lcca::fit_em(data, a.k, mode, config);
  fs::create_directories(a.out);
  write_json(fs::path(a.out) / "model.json", lcca::fit_to_json(fit, config));
  auto m = manifest("fit", {{"data", a.data}, {"k", a.k}, {"covariates", names}}, {"model.json"});
  m["seed"] = a.seed;
  m["config"] = lcca::to_json(config);
  write_json(fs::path(a.out) / "manifest.json", m);
  std::printf("K=%zu loglik=%.4f n_params=%d AIC=%.1f BIC=%.1f converged=%s\n", a.k, fit.loglik, fit.n_params,
              fit.aic, fit.bic, fit.converged ? "yes" : "no");
  return kExitOk;
}

struct ProfileArgs {
  std::string model, data, out, format = "markdown";
  bool posterior_targets = false;
};

int run_profile(const ProfileArgs& a) {
  const auto format = lcca::parse_table_format(a.format);
  const auto model = read_model_file(a.model);
  auto data = lcca::read_dataset(a.data);
  model.check_schema(model.mode() == lcca::MembershipMode::covariate ? [&] {
    std::vector<std::string> names;
    for (const auto& v : model.covariates) names.push_back(v.name);
    for (const auto& name : names) {
      if (std::none_of(data.covariates.begin(), data.covariates.end(),
                       [&](const lcca::CategoricalVariable& v) { return v.name == name; })) {
        throw lcca::Error(lcca::ErrorKind::schema_mismatch, "dataset lacks model covariate '" + name + "'");
      }
    }
    return data.with_covariates(names);
  }() : data);

  lcca::PostHocOptions options;
  options.posterior_targets = a.posterior_targets;
  const auto report = lcca::build_profile(model, data, options);
  std::vector<std::string> model_covariates;
  for (const auto& v : model.covariates) model_covariates.push_back(v.name);
  const Eigen::MatrixXd post = lcca::e_step(
      model, model.mode() == lcca::MembershipMode::covariate ? data.with_covariates(model_covariates) : data);
  const auto written = lcca::write_profile_report(a.out, report, data, post, format);
  auto m = manifest("profile", {{"model", a.model}, {"data", a.data}, {"format", a.format}}, written);
  m["class_shares"] = std::vector<double>(report.class_shares.data(), report.class_shares.data() + report.class_shares.size());
  if (report.membership) m["separation"] = report.membership->separation;
  write_json(fs::path(a.out) / "manifest.json", m);
  std::cout << "wrote " << written.size() << " files to " << a.out << '\n';
  return kExitOk;
}

struct SimulateArgs {
  std::string model, out, pool;
  long long n = 0;
  std::uint64_t seed = 0;
};

int run_simulate(const SimulateArgs& a) {
  if (a.n < 1) throw UsageError("--n must be at least 1");
  lcca::LatentClassModel model;
  try {
    model = read_model_file(a.model);
  } catch (const lcca::Error& e) {
    throw lcca::Error(lcca::ErrorKind::invalid_spec, e.what());
  }
  lcca::CovariateSource source = lcca::UniformCovariates{};
  lcca::Dataset pool;
  if (!a.pool.empty()) {
    pool = lcca::read_dataset(a.pool);
    source = lcca::CovariatePool{&pool};
  }
  const auto sim = lcca::simulate(model, static_cast<std::size_t>(a.n), a.seed, source);
  fs::create_directories(a.out);
  lcca::write_dataset(sim.data, fs::path(a.out) / "dataset.json");
  lcca::write_truth_labels(sim, fs::path(a.out) / "truth_labels.csv");
  auto m = manifest("simulate", {{"model", a.model}, {"n", a.n}, {"pool", a.pool}},
                    {"dataset.json", "dataset.csv", "truth_labels.csv"});
  m["seed"] = a.seed;
  write_json(fs::path(a.out) / "manifest.json", m);
  std::cout << "simulated " << a.n << " rows\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted latent class cluster analysis for categorical survey data"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RecodeArgs recode_args;
  auto* recode = app.add_subcommand("recode", "Merge survey files and recode into a Dataset");
  recode->add_option("--household", recode_args.household, "Household CSV")->required();
  recode->add_option("--person", recode_args.person, "Person CSV")->required();
  recode->add_option("--trip", recode_args.trip, "Trip CSV")->required();
  recode->add_option("--spec", recode_args.spec, "Recode spec JSON (default: bundled NHTS 2022 spec)");
  recode->add_option("--out", recode_args.out, "Output directory")->required();

  SelectArgs select_args;
  auto* select = app.add_subcommand("select", "Fit K = kmin..kmax and pick the best by BIC");
  select->add_option("--data", select_args.data, "Dataset header JSON")->required();
  select->add_option("--kmin", select_args.kmin, "Smallest class count")->capture_default_str();
  select->add_option("--kmax", select_args.kmax, "Largest class count")->capture_default_str();
  select->add_option("--mode", select_args.mode, "constant or covariate")->capture_default_str();
  select->add_option("--seed", select_args.seed, "Base seed")->capture_default_str();
  select->add_option("--out", select_args.out, "Output directory")->required();
  select->add_option("--restarts", select_args.restarts, "Random starts per K")->capture_default_str();
  select->add_option("--threads", select_args.threads, "Worker threads (0 = all cores)")->capture_default_str();
  select->add_option("--bic-n", select_args.bic_n, "BIC sample size: weighted or raw")->capture_default_str();
  select->add_option("--criterion", select_args.criterion, "bic or aic")->capture_default_str();
  select->add_option("--format", select_args.format, "csv or markdown")->capture_default_str();

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit one model");
  fit->add_option("--data", fit_args.data, "Dataset header JSON")->required();
  fit->add_option("--k", fit_args.k, "Class count")->required();
  auto* covariates_opt =
      fit->add_option("--covariates", fit_args.covariates, "Comma-separated covariates for the membership model");
  fit->add_flag("--all-covariates", fit_args.all_covariates, "Use every dataset covariate")->excludes(covariates_opt);
  fit->add_option("--seed", fit_args.seed, "Seed")->capture_default_str();
  fit->add_option("--out", fit_args.out, "Output directory")->required();
  fit->add_option("--restarts", fit_args.restarts, "Random starts")->capture_default_str();
  fit->add_option("--threads", fit_args.threads, "Worker threads (0 = all cores)")->capture_default_str();
  fit->add_option("--bic-n", fit_args.bic_n, "BIC sample size: weighted or raw")->capture_default_str();

  ProfileArgs profile_args;
  auto* profile = app.add_subcommand("profile", "Write class profile tables for a fitted model");
  profile->add_option("--model", profile_args.model, "Model JSON from fit")->required();
  profile->add_option("--data", profile_args.data, "Dataset header JSON")->required();
  profile->add_option("--out", profile_args.out, "Output directory")->required();
  profile->add_option("--format", profile_args.format, "csv or markdown")->capture_default_str();
  profile->add_flag("--posterior-targets", profile_args.posterior_targets,
                    "Fit the post-hoc logit to posteriors instead of hard labels");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic Dataset from a model");
  simulate->add_option("--model", sim_args.model, "Model JSON")->required();
  simulate->add_option("--n", sim_args.n, "Rows")->required();
  simulate->add_option("--seed", sim_args.seed, "Seed")->capture_default_str();
  simulate->add_option("--out", sim_args.out, "Output directory")->required();
  simulate->add_option("--covariate-pool", sim_args.pool, "Dataset to bootstrap covariate rows from");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*recode) return run_recode(recode_args);
    if (*select) return run_select(select_args);
    if (*fit) return run_fit(fit_args);
    if (*profile) return run_profile(profile_args);
    if (*simulate) return run_simulate(sim_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitInput;
  } catch (const lcca::Error& e) {
    std::cerr << "error (" << lcca::to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
