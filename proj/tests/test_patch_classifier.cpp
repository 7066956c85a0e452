#include "ovpath/csv.hpp"
#include "ovpath/error.hpp"
#include "ovpath/linear_model.hpp"
#include "ovpath/patch_classifier.hpp"

#include <Eigen/QR>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace ovpath;

namespace {

double concordance_auc(const Eigen::VectorXd& d, const Eigen::VectorXd& y) {
  double num = 0.0, pairs = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (y(i) <= 0) continue;
    for (Eigen::Index j = 0; j < d.size(); ++j) {
      if (y(j) > 0) continue;
      pairs += 1.0;
      num += d(i) > d(j) ? 1.0 : (d(i) == d(j) ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

double soft(double z, double l) { return z > l ? z - l : (z < -l ? z + l : 0.0); }

Eigen::MatrixXd centred_gaussian(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = g(rng);
  return standardize_fit_apply(x).x;
}

}  // namespace

TEST_CASE("roc examples") {
  Eigen::VectorXd y(6);
  y << 1, 1, 1, -1, -1, -1;
  SUBCASE("perfect separation") {
    Eigen::VectorXd d(6);
    d << 3, 2, 1, -1, -2, -3;
    const RocCurve r = roc_auc(d, y);
    CHECK(r.auc == 1.0);
    CHECK(r.points.front().fpr == 0.0);
    CHECK(r.points.front().tpr == 0.0);
    CHECK(r.points.back().fpr == 1.0);
    CHECK(r.points.back().tpr == 1.0);
  }
  SUBCASE("all ties") { CHECK(roc_auc(Eigen::VectorXd::Constant(6, 0.3), y).auc == 0.5); }
  SUBCASE("single class") {
    try {
      roc_auc(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3));
      FAIL("expected SingleClass");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SingleClass);
    }
  }
}

TEST_CASE("trapezoid auc equals pairwise concordance") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 50;
    Eigen::VectorXd d(n), y(n);
    for (int i = 0; i < n; ++i) {
      y(i) = i % 2 ? 1.0 : -1.0;
      d(i) = trial % 2 ? std::round(g(rng) * 2.0) / 2.0 + 0.3 * y(i) : g(rng) + 0.5 * y(i);  // odd trials carry ties
    }
    const RocCurve r = roc_auc(d, y);
    CHECK(std::abs(r.auc - concordance_auc(d, y)) <= 1e-12);

    // strictly increasing relabeling leaves the curve alone
    const Eigen::VectorXd e = d.unaryExpr([](double v) { return std::exp(v) * 3.0 + 1.0; });
    const RocCurve re = roc_auc(e, y);
    CHECK(re.auc == r.auc);
    REQUIRE(re.points.size() == r.points.size());
    for (std::size_t k = 0; k < r.points.size(); ++k) {
      CHECK(re.points[k].fpr == r.points[k].fpr);
      CHECK(re.points[k].tpr == r.points[k].tpr);
    }
  }
}

TEST_CASE("decision histogram covers every decision") {
  Eigen::VectorXd d(7), y(7);
  d << -2, -1, 0, 0.5, 1, 2, 4;
  y << -1, -1, 1, 1, -1, 1, 1;
  const DecisionHistogram h = decision_histogram(d, y, 50);
  CHECK(h.edges.size() == 51);
  CHECK(h.edges.front() == -2.0);
  CHECK(h.edges.back() == 4.0);
  CHECK(std::accumulate(h.hgsoc.begin(), h.hgsoc.end(), std::int64_t{0}) == 4);
  CHECK(std::accumulate(h.sbot.begin(), h.sbot.end(), std::int64_t{0}) == 3);
  CHECK(h.hgsoc.back() == 1);  // the maximum falls in the last bin
}

TEST_CASE("lasso is exactly zero at lambda_max") {
  const Eigen::MatrixXd x = centred_gaussian(80, 30, 1);
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd y(80);
  for (int i = 0; i < 80; ++i) y(i) = coin(rng) ? 1.0 : -1.0;
  const double lmax = lasso_lambda_max(x, y);
  for (double f : {1.0, 1.5, 10.0}) {
    const LassoFit fit = lasso_fit(x, y, f * lmax);
    CHECK(fit.model.weights.isZero(0.0));
    CHECK(fit.nonzero.empty());
    CHECK(fit.model.bias == y.mean());
  }
  CHECK(lasso_fit(x, y, 0.95 * lmax).nonzero.size() >= 1);
}

TEST_CASE("orthonormal design matches soft-thresholded least squares") {
  const int n = 64, p = 10;
  const Eigen::MatrixXd a = centred_gaussian(n, p, 3);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() * Eigen::MatrixXd::Identity(n, p);
  const Eigen::MatrixXd x = q * std::sqrt(double(n));
  REQUIRE(((x.transpose() * x) / n - Eigen::MatrixXd::Identity(p, p)).norm() < 1e-10);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = g(rng) + (i % 2 ? 0.8 : -0.8);
  const Eigen::VectorXd ols = x.transpose() * (y.array() - y.mean()).matrix() / n;
  for (double lambda : {0.0, 0.01, 0.05, 0.1, 0.2}) {
    const LassoFit fit = lasso_fit(x, y, lambda);
    for (int j = 0; j < p; ++j) CHECK(std::abs(fit.model.weights(j) - soft(ols(j), lambda)) <= 1e-6);
  }
}

TEST_CASE("lasso path satisfies KKT at every point") {
  const int n = 60, p = 40;
  Eigen::MatrixXd raw = centred_gaussian(n, p, 5);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> tiny(0.0, 1e-3), g;
  for (int i = 0; i < n; ++i) raw(i, 7) = raw(i, 3) + tiny(rng);  // near-collinear pair
  const Eigen::MatrixXd x = standardize_fit_apply(raw).x;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = x(i, 3) - 0.5 * x(i, 11) + 0.3 * g(rng) > 0 ? 1.0 : -1.0;
  const auto lambdas = lambda_path(lasso_lambda_max(x, y), LassoPathSpec{});
  CHECK(lambdas.size() == 100);
  CHECK(lambdas.back() == doctest::Approx(lambdas.front() * 1e-3));
  Eigen::VectorXd warm = Eigen::VectorXd::Zero(p);
  for (std::size_t l = 0; l < 60; ++l) {
    const LassoFit fit = lasso_fit(x, y, lambdas[l], LassoOptions{}, &warm);
    warm = fit.model.weights;
    CHECK(lasso_kkt_violation(x, y, warm, lambdas[l]) <= 1e-6);
    std::size_t nz = 0;
    for (int j = 0; j < p; ++j) nz += warm(j) != 0.0;
    CHECK(fit.nonzero.size() == nz);
  }
}

TEST_CASE("lasso_select recovers a planted support") {
  const int n = 150, p = 60;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  Eigen::MatrixXd raw(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) raw(i, j) = 5.0 + 2.0 * g(rng);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = 0.8 * (raw(i, 4) - 5) - 0.6 * (raw(i, 17) - 5) + 0.5 * (raw(i, 42) - 5) + 0.3 * g(rng);
  std::vector<std::string> names;
  for (int j = 0; j < p; ++j) names.push_back("tumor_Nucleus:F" + std::to_string(j) + ":mean");
  LassoPathSpec spec;
  spec.seed = 3;
  const LassoSelection sel = lasso_select(raw, y, names, spec);
  std::set<std::string> support;
  for (const auto& [name, coef] : sel.fit.nonzero) support.insert(name);
  for (int j : {4, 17, 42}) CHECK(support.count(names[j]) == 1);
  CHECK(sel.index_1se <= sel.index_min);
  CHECK(sel.cv_mean[sel.index_1se] <= sel.cv_mean[sel.index_min] + sel.cv_se[sel.index_min]);
  CHECK(sel.fit.path.front().second == 0);
  CHECK(sel.lambdas.size() == sel.cv_mean.size());

  const auto table = csv::parse(lasso_table_csv(sel.fit));
  REQUIRE(table.size() == sel.fit.nonzero.size() + 1);
  CHECK(table[0] == std::vector<std::string>{"No.", "Content", "Cellular Feature Name", "Statistics", "Importance"});
  CHECK(table[1][0] == "1");
  CHECK(table[1][1] == "tumor_Nucleus");
  CHECK(table[1][2] == "F4");
  CHECK(table[1][3] == "mean");
  for (std::size_t r = 2; r < table.size(); ++r)
    CHECK(std::abs(std::stod(table[r][4])) <= std::abs(std::stod(table[r - 1][4])));
}

TEST_CASE("lasso_select with grouped folds") {
  const int n = 90, p = 12;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  Eigen::MatrixXd raw(n, p);
  Eigen::VectorXd y(n);
  std::vector<std::string> groups;
  for (int i = 0; i < n; ++i) {
    const int subject = i / 9;
    y(i) = subject % 2 ? 1.0 : -1.0;
    groups.push_back("S" + std::to_string(subject));
    for (int j = 0; j < p; ++j) raw(i, j) = g(rng) + (j == 0 ? y(i) : 0.0);
  }
  const auto a = lasso_select(raw, y, {}, LassoPathSpec{}, &groups);
  const auto b = lasso_select(raw, y, {}, LassoPathSpec{}, &groups);
  CHECK(a.fit.model.weights == b.fit.model.weights);
  CHECK(a.cv_mean == b.cv_mean);
  CHECK(a.fit.model.weights(0) > 0.0);
  std::vector<std::string> few(groups.begin(), groups.end());
  for (auto& s : few) s = s < "S5" ? "A" : "B";
  CHECK_THROWS_AS(lasso_select(raw, y, {}, LassoPathSpec{}, &few), Error);
}

TEST_CASE("subject bootstrap examples") {
  SUBCASE("all positive") {
    const SubjectCall c = subject_bootstrap("S", {0.5, 1.0, 0.2, 3.0}, 1000, 1);
    CHECK(c.fraction_positive == 1.0);
    CHECK(c.predicted == Histotype::HGSOC);
    CHECK(c.replicate_means.size() == 1000);
    CHECK(c.n_patches == 4);
  }
  SUBCASE("single patch") {
    const SubjectCall c = subject_bootstrap("S", {-0.7}, 1000, 1);
    for (double m : c.replicate_means) CHECK(m == -0.7);
    CHECK(c.predicted == Histotype::SBOT);
  }
  SUBCASE("zero median is SBOT") {
    const SubjectCall c = subject_bootstrap("S", {0.0}, 101, 1);
    CHECK(c.median == 0.0);
    CHECK(c.predicted == Histotype::SBOT);
  }
  SUBCASE("no patches") {
    try {
      subject_bootstrap("S", {}, 1000, 1);
      FAIL("expected NoEligiblePatches");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NoEligiblePatches);
    }
  }
}

TEST_CASE("subject bootstrap is reproducible and stable") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(0.1, 1.0);
  std::vector<double> d(17);
  for (double& v : d) v = g(rng);
  const SubjectCall a = subject_bootstrap("HGSOC_03", d, 1000, 7);
  const SubjectCall b = subject_bootstrap("HGSOC_03", d, 1000, 7);
  CHECK(a.replicate_means == b.replicate_means);
  const SubjectCall other = subject_bootstrap("HGSOC_04", d, 1000, 7);
  CHECK(other.replicate_means != a.replicate_means);

  std::vector<double> sorted = a.replicate_means;
  std::sort(sorted.begin(), sorted.end());
  CHECK(a.median == doctest::Approx(0.5 * (sorted[499] + sorted[500])));
  CHECK((a.predicted == Histotype::HGSOC) == (a.median > 0.0));

  // the first replicates do not depend on how many follow
  const SubjectCall longer = subject_bootstrap("HGSOC_03", d, 4000, 7);
  for (int k = 0; k < 1000; ++k) CHECK(longer.replicate_means[k] == a.replicate_means[k]);

  double diff = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    diff += subject_bootstrap("S", d, 4000, seed).fraction_positive - subject_bootstrap("S", d, 1000, seed).fraction_positive;
  CHECK(std::abs(diff / 10.0) < 0.03);
}
