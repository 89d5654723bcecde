#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "lcca/estimate.hpp"
#include "lcca/profile.hpp"
#include "lcca/synth.hpp"
#include "test_util.hpp"

using namespace lcca;

namespace {

/// 12 rows, one binary covariate, K = 2 labels.
Dataset twelve_row_fixture(std::vector<std::size_t>& labels) {
  Dataset d;
  d.indicators = {test::make_variable("y", 2)};
  d.covariates = {test::make_variable("z", 2)};
  d.indicator_codes = IndexMatrix::Zero(12, 1);
  d.covariate_codes.resize(12, 1);
  d.covariate_codes << 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1;
  d.weights.resize(12);
  d.weights << 1.0, 2.0, 0.5, 1.5, 1.0, 1.0, 2.0, 0.8, 1.2, 1.0, 0.6, 1.4;
  for (int i = 0; i < 12; ++i) d.ids.push_back(std::to_string(i));
  labels = {0, 0, 1, 0, 1, 0, 1, 1, 0, 1, 1, 0};
  return d;
}

}  // namespace

TEST_SUITE("profile") {

TEST_CASE("assign_classes takes the argmax with ties to the lowest index") {
  Eigen::MatrixXd post(3, 3);
  post << 0.7, 0.2, 0.1,  //
      0.25, 0.5, 0.25,    //
      0.4, 0.2, 0.4;
  CHECK(assign_classes(post) == std::vector<std::size_t>{0, 1, 0});
  Eigen::MatrixXd tie(1, 2);
  tie << 0.5, 0.5;
  CHECK(assign_classes(tie) == std::vector<std::size_t>{0});
}

TEST_CASE("assign_classes is equivariant under class relabeling") {
  Rng rng(301);
  Eigen::MatrixXd post(50, 4);
  for (Eigen::Index i = 0; i < 50; ++i) post.row(i) = test::random_simplex(rng, 4).transpose();
  const std::vector<std::size_t> order{2, 0, 3, 1};  // new column j is old column order[j]
  Eigen::MatrixXd permuted(50, 4);
  for (Eigen::Index j = 0; j < 4; ++j) permuted.col(j) = post.col(static_cast<Eigen::Index>(order[static_cast<std::size_t>(j)]));
  const auto a = assign_classes(post);
  const auto b = assign_classes(permuted);
  for (std::size_t i = 0; i < 50; ++i) CHECK(order[b[i]] == a[i]);
}

TEST_CASE("weighted class shares") {
  const std::vector<std::size_t> labels{0, 0, 1};
  const auto equal = weighted_class_shares(labels, Eigen::Vector3d::Ones(), 2);
  CHECK(equal(0) == doctest::Approx(2.0 / 3.0));
  CHECK(equal(1) == doctest::Approx(1.0 / 3.0));
  const std::vector<std::size_t> two{0, 1};
  const auto s = weighted_class_shares(two, Eigen::Vector2d(1.0, 9.0), 2);
  CHECK(s(0) == doctest::Approx(0.1));
  CHECK(s(1) == doctest::Approx(0.9));

  Rng rng(302);
  std::vector<std::size_t> many(40);
  for (auto& l : many) l = rng.index(3);
  const Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(40, [&] { return rng.uniform() + 0.1; });
  const auto base = weighted_class_shares(many, w, 3);
  CHECK(std::abs(base.sum() - 1.0) < 1e-12);
  CHECK((weighted_class_shares(many, w * 13.7, 3) - base).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("crosstab matches a hand-computed fixture") {
  Dataset d;
  d.indicators = {test::make_variable("y", 2)};
  d.covariates = {test::make_variable("z", 2)};
  d.indicator_codes.resize(5, 1);
  d.indicator_codes << 0, 1, 0, 1, 1;
  d.covariate_codes.resize(5, 1);
  d.covariate_codes << 1, 1, 0, 0, 1;
  d.weights.resize(5);
  d.weights << 1, 1, 2, 2, 4;
  d.ids = {"a", "b", "c", "d", "e"};
  const std::vector<std::size_t> labels{0, 0, 1, 1, 1};
  const std::vector<std::string> vars{"y", "z"};
  const auto tabs = weighted_profile(d, labels, 2, vars);
  REQUIRE(tabs.size() == 2);
  Eigen::MatrixXd y(2, 3), z(2, 3);
  y << 50, 25, 30,  //
      50, 75, 70;
  z << 0, 50, 40,  //
      100, 50, 60;
  CHECK((tabs[0].percent - y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((tabs[1].percent - z).cwiseAbs().maxCoeff() < 1e-12);
  const std::vector<std::string> bad{"nope"};
  try {
    (void)weighted_profile(d, labels, 2, bad);
    FAIL("expected unknown_variable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unknown_variable);
  }
}

TEST_CASE("single class with equal weights gives plain frequencies") {
  Rng rng(303);
  auto d = test::random_dataset(rng, 40, {3}, {});
  d.weights.setOnes();
  const std::vector<std::size_t> labels(40, 0);
  const std::vector<std::string> vars{"y0"};
  const auto t = weighted_profile(d, labels, 1, vars)[0];
  for (Eigen::Index m = 0; m < 3; ++m) {
    const double count = static_cast<double>((d.indicator_codes.col(0).array() == m).count());
    CHECK(t.percent(m, 0) == doctest::Approx(100.0 * count / 40.0));
  }
}

TEST_CASE("conditional probability table projects the measurement model") {
  Rng rng(304);
  const auto d = test::random_dataset(rng, 5, {3, 5}, {});
  const auto m = test::random_model(rng, d, 3, MembershipMode::constant_prior);
  const auto tables = conditional_prob_table(m);
  REQUIRE(tables.size() == 2);
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(tables[l].probs.col(static_cast<Eigen::Index>(k)) == m.measurement.probs[k][l]);
      CHECK(std::abs(tables[l].probs.col(static_cast<Eigen::Index>(k)).sum() - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("p-values and significance codes") {
  CHECK(wald_p_value(0.0) == doctest::Approx(1.0));
  CHECK(wald_p_value(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(wald_p_value(-2.5758293035489) == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(significance_stars(0.005) == "***");
  CHECK(significance_stars(0.03) == "**");
  CHECK(significance_stars(0.07) == "*");
  CHECK(significance_stars(0.2).empty());
}

TEST_CASE("post-hoc logit without covariates inverts the label shares") {
  Rng rng(305);
  auto d = test::random_dataset(rng, 60, {2}, {});
  std::vector<std::size_t> labels(60);
  for (auto& l : labels) l = rng.index(3);
  const auto report = post_hoc_membership_logit(labels, d, 3);
  const auto shares = weighted_class_shares(labels, d.weights, 3);
  CHECK(report.gamma.row(0).isZero(0.0));
  CHECK(report.gamma(1, 0) == doctest::Approx(std::log(shares(1) / shares(0))).epsilon(1e-8));
  CHECK(report.gamma(2, 0) == doctest::Approx(std::log(shares(2) / shares(0))).epsilon(1e-8));
  CHECK_FALSE(report.separation);
}

TEST_CASE("post-hoc logit matches grid-search and finite-difference oracles") {
  std::vector<std::size_t> labels;
  const auto d = twelve_row_fixture(labels);
  const auto report = post_hoc_membership_logit(labels, d, 2);
  REQUIRE(report.coefficients.size() == 2);

  // Weighted log-likelihood of the hard labels, written out directly.
  auto loglik = [&](double a, double b) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < 12; ++i) {
      const double eta = a + b * d.covariate_codes(i, 0);
      const double p1 = 1.0 / (1.0 + std::exp(-eta));
      total += d.weights(i) * std::log(labels[static_cast<std::size_t>(i)] == 1 ? p1 : 1.0 - p1);
    }
    return total;
  };
  double ba = 0.0, bb = 0.0, span = 6.0, best = -1e300;
  for (int level = 0; level < 12; ++level) {
    const double ca = ba, cb = bb;
    for (int i = -24; i <= 24; ++i) {
      for (int j = -24; j <= 24; ++j) {
        const double a = ca + span * i / 24.0, b = cb + span * j / 24.0;
        const double v = loglik(a, b);
        if (v > best) {
          best = v;
          ba = a;
          bb = b;
        }
      }
    }
    span /= 4.0;
  }
  CHECK(std::abs(report.coefficients[0].estimate - ba) < 1e-3);
  CHECK(std::abs(report.coefficients[1].estimate - bb) < 1e-3);

  // Observed information from second differences of the log-likelihood.
  const double a = report.coefficients[0].estimate, b = report.coefficients[1].estimate, h = 1e-4;
  Eigen::Matrix2d info;
  info(0, 0) = -(loglik(a + h, b) - 2 * loglik(a, b) + loglik(a - h, b)) / (h * h);
  info(1, 1) = -(loglik(a, b + h) - 2 * loglik(a, b) + loglik(a, b - h)) / (h * h);
  info(0, 1) = info(1, 0) =
      -(loglik(a + h, b + h) - loglik(a + h, b - h) - loglik(a - h, b + h) + loglik(a - h, b - h)) / (4 * h * h);
  const Eigen::Matrix2d cov = info.inverse();
  const double za = a / std::sqrt(cov(0, 0)), zb = b / std::sqrt(cov(1, 1));
  CHECK(std::abs(report.coefficients[0].z - za) < 1e-3 * std::abs(za));
  CHECK(std::abs(report.coefficients[1].z - zb) < 1e-3 * std::abs(zb));
  CHECK(report.coefficients[1].column == "z=z_1");
  CHECK(report.coefficients[0].p == doctest::Approx(wald_p_value(report.coefficients[0].z)));
}

TEST_CASE("post-hoc logit flags separation and applies the ridge") {
  Dataset d;
  d.indicators = {test::make_variable("y", 2)};
  d.covariates = {test::make_variable("z", 2)};
  d.indicator_codes = IndexMatrix::Zero(6, 1);
  d.covariate_codes.resize(6, 1);
  d.covariate_codes << 0, 0, 0, 1, 1, 1;
  d.weights = Eigen::VectorXd::Ones(6);
  d.ids = {"1", "2", "3", "4", "5", "6"};
  const std::vector<std::size_t> labels{0, 0, 0, 1, 1, 1};
  const auto report = post_hoc_membership_logit(labels, d, 2);
  CHECK(report.separation);
  CHECK(report.ridge > 0.0);
  CHECK(report.gamma.allFinite());
}

TEST_CASE("post-hoc predicted probabilities sum to one") {
  Rng rng(306);
  const auto d = test::random_dataset(rng, 80, {2}, {3, 2});
  std::vector<std::size_t> labels(80);
  for (auto& l : labels) l = rng.index(3);
  const auto report = post_hoc_membership_logit(labels, d, 3);
  CHECK(report.gamma.row(0).isZero(0.0));
  const Eigen::MatrixXd p = softmax_log_probs(design_matrix(d.covariates, d.covariate_codes), report.gamma).array().exp().matrix();
  CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(post_hoc_membership_logit(labels, d, 1), Error);
}

TEST_CASE("full profile report on a fitted model") {
  auto y = [](int l) { return test::make_variable("y" + std::to_string(l), 3); };
  auto truth = test::table_model({y(0), y(1), y(2)},
                                 {{{0.8, 0.1, 0.1}, {0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}},
                                  {{0.1, 0.2, 0.7}, {0.1, 0.8, 0.1}, {0.6, 0.3, 0.1}}},
                                 {0.6, 0.4});
  auto sim = simulate(truth, 800, 3);
  Rng rng(307);
  auto with_cov = test::random_dataset(rng, 800, {3, 3, 3}, {3});
  with_cov.indicator_codes = sim.data.indicator_codes;
  with_cov.weights = sim.data.weights;

  EmConfig cfg;
  cfg.n_restarts = 4;
  cfg.threads = 1;
  const auto fit = fit_em(with_cov, 2, MembershipMode::constant_prior, cfg);
  const auto report = build_profile(fit.model, with_cov);
  CHECK(report.labels.size() == 800);
  REQUIRE(report.crosstabs.size() == 4);
  for (const auto& t : report.crosstabs) {
    for (Eigen::Index c = 0; c < t.percent.cols(); ++c) CHECK(std::abs(t.percent.col(c).sum() - 100.0) < 0.05);
    CHECK((t.percent.array() >= 0.0).all());
    CHECK((t.percent.array() <= 100.0).all());
  }
  REQUIRE(report.membership.has_value());
  CHECK(report.membership->columns.size() == 3);

  const auto dir = std::filesystem::temp_directory_path() / "lcca_test_profile";
  std::filesystem::remove_all(dir);
  const auto written = write_profile_report(dir, report, with_cov, fit.posteriors, TableFormat::markdown);
  CHECK(written.size() == 5);
  for (const auto& f : written) CHECK(std::filesystem::exists(dir / f));
  std::ostringstream md;
  write_conditional_probs(md, report.conditional_probs, report.class_shares, TableFormat::markdown);
  CHECK(md.str().find("Class Share (%)") != std::string::npos);
}

}  // TEST_SUITE
