#include <string>

#include "lcca/estimate.hpp"

namespace lcca {

using nlohmann::json;

namespace {

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

template <typename F>
auto parse_guard(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_spec, std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

json to_json(const EmConfig& c) {
  return {
      {"max_iterations", c.max_iterations},
      {"loglik_tolerance", c.loglik_tolerance},
      {"n_restarts", c.n_restarts},
      {"seed", c.seed},
      {"prob_floor", c.prob_floor},
      {"irls_max_iter", c.irls_max_iter},
      {"irls_tolerance", c.irls_tolerance},
      {"ridge", c.ridge},
      {"bic_sample_size", c.bic_sample_size == BicSampleSize::weighted ? "weighted" : "raw"},
  };
}

EmConfig em_config_from_json(const json& j) {
  return parse_guard("EM config", [&] {
    EmConfig c;
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.loglik_tolerance = j.value("loglik_tolerance", c.loglik_tolerance);
    c.n_restarts = j.value("n_restarts", c.n_restarts);
    c.seed = j.value("seed", c.seed);
    c.prob_floor = j.value("prob_floor", c.prob_floor);
    c.irls_max_iter = j.value("irls_max_iter", c.irls_max_iter);
    c.irls_tolerance = j.value("irls_tolerance", c.irls_tolerance);
    c.ridge = j.value("ridge", c.ridge);
    c.bic_sample_size = j.value("bic_sample_size", std::string("weighted")) == "raw" ? BicSampleSize::raw
                                                                                     : BicSampleSize::weighted;
    c.validate();
    return c;
  });
}

json to_json(const CategoricalVariable& v) {
  return {{"name", v.name}, {"categories", v.categories}, {"reference", v.categories.at(v.reference_index)}};
}

CategoricalVariable variable_from_json(const json& j) {
  return parse_guard("variable", [&] {
    CategoricalVariable v;
    v.name = j.at("name").get<std::string>();
    v.categories = j.at("categories").get<std::vector<std::string>>();
    if (j.contains("reference")) v.reference_index = v.index_of(j.at("reference").get<std::string>());
    v.validate();
    return v;
  });
}

json to_json(const LatentClassModel& model) {
  json j;
  j["format"] = "lcca-model";
  j["version"] = 1;
  j["k"] = model.k();
  j["membership_mode"] = to_string(model.mode());
  j["indicators"] = json::array();
  for (const auto& v : model.indicators) j["indicators"].push_back(to_json(v));
  j["covariates"] = json::array();
  for (const auto& v : model.covariates) j["covariates"].push_back(to_json(v));

  json classes = json::array();
  for (std::size_t k = 0; k < model.k(); ++k) {
    json tables = json::object();
    for (std::size_t l = 0; l < model.indicators.size(); ++l) {
      tables[model.indicators[l].name] = to_std(model.measurement.probs[k][l]);
    }
    classes.push_back(tables);
  }
  j["measurement"] = classes;

  if (const auto* priors = std::get_if<ClassPriors>(&model.membership)) {
    j["class_priors"] = to_std(priors->priors);
  } else {
    const auto& gamma = std::get<MembershipParams>(model.membership).gamma;
    std::vector<std::string> columns{"(Intercept)"};
    for (auto& name : dummy_names(model.covariates)) columns.push_back(std::move(name));
    json rows = json::array();
    for (Eigen::Index r = 0; r < gamma.rows(); ++r) rows.push_back(to_std(gamma.row(r).transpose()));
    j["membership"] = {{"columns", columns}, {"gamma", rows}};
  }
  return j;
}

LatentClassModel model_from_json(const json& doc) {
  const json& j = doc.contains("model") ? doc.at("model") : doc;
  LatentClassModel model = parse_guard("model", [&] {
    LatentClassModel m;
    for (const auto& v : j.at("indicators")) m.indicators.push_back(variable_from_json(v));
    for (const auto& v : j.value("covariates", json::array())) m.covariates.push_back(variable_from_json(v));
    for (const auto& tables : j.at("measurement")) {
      std::vector<Eigen::VectorXd> cls;
      for (const auto& ind : m.indicators) cls.push_back(vector_from_json(tables.at(ind.name)));
      m.measurement.probs.push_back(std::move(cls));
    }
    if (j.contains("class_priors")) {
      m.membership = ClassPriors{vector_from_json(j.at("class_priors"))};
    } else {
      const auto& rows = j.at("membership").at("gamma");
      MembershipParams params;
      const auto cols = static_cast<Eigen::Index>(1 + dummy_count(m.covariates));
      params.gamma.resize(static_cast<Eigen::Index>(rows.size()), cols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const Eigen::VectorXd row = vector_from_json(rows[r]);
        if (row.size() != cols) throw Error(ErrorKind::invalid_spec, "membership row has wrong length");
        params.gamma.row(static_cast<Eigen::Index>(r)) = row.transpose();
      }
      m.membership = params;
    }
    return m;
  });
  model.validate();
  return model;
}

json fit_to_json(const FitResult& fit, const EmConfig& config) {
  json j;
  j["model"] = to_json(fit.model);
  j["class_order"] = "descending weighted class share";
  j["fit"] = {
      {"loglik", fit.loglik},
      {"n_params", fit.n_params},
      {"aic", fit.aic},
      {"bic", fit.bic},
      {"bic_sample_size", fit.bic_sample_size},
      {"class_shares", to_std(fit.class_shares)},
      {"converged", fit.converged},
      {"iterations", fit.iterations},
      {"restart_index", fit.restart_index},
      {"degenerate_restarts", fit.degenerate_restarts},
      {"separation", fit.separation},
  };
  j["config"] = to_json(config);
  j["seed"] = fit.seed;
  return j;
}

}  // namespace lcca
