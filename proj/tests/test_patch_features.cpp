#include "ovpath/error.hpp"
#include "ovpath/patch_features.hpp"
#include "ovpath/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace ovpath;

namespace {

// Sort, then interpolate at rank p (n - 1); population std.
std::array<double, 7> stats_oracle(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double r = p * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(r);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (r - lo) * (v[hi] - v[lo]);
  };
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, q(0.5), std::sqrt(ss / v.size()), q(0.25), q(0.75), v.front(), v.back()};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)}); }

std::vector<PatchCell> grid_cells(int n_tumor, int n_stroma, double x0, double y0) {
  std::vector<PatchCell> out;
  int id = 1;
  for (int i = 0; i < n_tumor; ++i) out.push_back({id++, CellLabel::Tumor, x0 + 5.0 * i, y0});
  for (int i = 0; i < n_stroma; ++i) out.push_back({id++, CellLabel::Stroma, x0 + 5.0 * i, y0 + 40.0});
  return out;
}

}  // namespace

TEST_CASE("descriptor dimensions") {
  CHECK(kCellStatsCount == 574);
  CHECK(kKdeStatsCount == 35);
  CHECK(kPatchFeatureCount == 609);
  const auto names = patch_feature_names();
  CHECK(names.size() == 609);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == 609);
  CHECK(names.front() == "tumor_Nucleus:Area:mean");
  CHECK(names[7] == "tumor_Nucleus:Perimeter:mean");
  CHECK(names[287] == "stroma_Nucleus:Area:mean");
  CHECK(names[574] == "interaction:KDE_h16:mean");
  CHECK(names.back() == "interaction:KDE_h34:max");
  CHECK(patch_feature_names() == names);
}

TEST_CASE("tile_patches grid") {
  CHECK(tile_patches(1024, 1024, {}).size() == 4);
  CHECK(tile_patches(1040, 1024, {}).size() == 4);
  CHECK(tile_patches(1536, 600, {}).size() == 3);
  try {
    tile_patches(500, 1024, {});
    FAIL("expected RoiTooSmall");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RoiTooSmall);
  }
  const auto patches = tile_patches(1024, 1024, {{1, CellLabel::Tumor, 512.0, 10.0}, {2, CellLabel::Stroma, 511.99, 10.0}});
  for (const Patch& p : patches) {
    if (p.grid_row == 0 && p.grid_col == 1) {
      REQUIRE(p.members.size() == 1);
      CHECK(p.members[0].cell_id == 1);
    }
    if (p.grid_row == 0 && p.grid_col == 0) {
      REQUIRE(p.members.size() == 1);
      CHECK(p.members[0].cell_id == 2);
    }
  }
}

TEST_CASE("every retained cell lands in exactly one patch") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(0, 1300), uy(0, 1100);
  std::vector<PatchCell> cells;
  for (int i = 0; i < 3000; ++i) cells.push_back({i + 1, i % 3 ? CellLabel::Stroma : CellLabel::Tumor, ux(rng), uy(rng)});
  const auto patches = tile_patches(1300, 1100, cells);
  CHECK(patches.size() == 4);
  std::multiset<int> seen;
  for (const Patch& p : patches)
    for (const PatchCell& c : p.members) seen.insert(c.cell_id);
  std::size_t inside = 0;
  for (const PatchCell& c : cells) {
    const bool kept = c.x < 1024 && c.y < 1024;
    inside += kept;
    CHECK(seen.count(c.cell_id) == (kept ? 1u : 0u));
  }
  CHECK(seen.size() == inside);
}

TEST_CASE("eligibility threshold") {
  Patch p;
  auto fill = [&](int t, int s) {
    p.members.clear();
    for (int i = 0; i < t; ++i) p.members.push_back({i, CellLabel::Tumor, 1, 1});
    for (int i = 0; i < s; ++i) p.members.push_back({t + i, CellLabel::Stroma, 1, 1});
  };
  fill(10, 10);
  CHECK(check_eligibility(p));
  fill(9, 100);
  CHECK_FALSE(check_eligibility(p));
  fill(0, 0);
  CHECK_FALSE(check_eligibility(p));
  fill(30, 10);
  CHECK(check_eligibility(p));
}

TEST_CASE("seven_stats examples") {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto s = seven_stats(v);
  CHECK(s.mean == 5.5);
  CHECK(s.median == 5.5);
  CHECK(s.q1 == 3.25);
  CHECK(s.q3 == 7.75);
  CHECK(s.min == 1);
  CHECK(s.max == 10);
  const auto one = seven_stats(std::vector<double>{7});
  CHECK(one.as_array() == std::array<double, 7>{7, 7, 0, 7, 7, 7, 7});
  try {
    seven_stats(std::vector<double>{});
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyInput);
  }
}

TEST_CASE("seven_stats matches the sort-and-interpolate oracle") {
  std::mt19937_64 rng(7);
  std::lognormal_distribution<double> g(0.0, 1.5);
  for (int n = 1; n < 60; n += 3) {
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    const auto s = seven_stats(v).as_array();
    const auto o = stats_oracle(v);
    for (int k = 0; k < 7; ++k) CHECK(rel_err(s[k], o[k]) <= 1e-12);
    CHECK(s[5] <= s[3]);
    CHECK(s[3] <= s[1]);
    CHECK(s[1] <= s[4]);
    CHECK(s[4] <= s[6]);
  }
}

TEST_CASE("kde examples") {
  Eigen::MatrixXd t(1, 2), s(1, 2);
  t << 100, 200;
  s << 100, 200;
  const double expect = 1.0 / (2.0 * std::numbers::pi * 256.0);
  CHECK(std::abs(kde_scores(t, s, 16.0)(0) - expect) < 1e-18);
  CHECK(std::abs(expect - 6.217e-4) < 1e-7);
  s << 100 + 160, 200;
  CHECK(kde_scores(t, s, 16.0)(0) < 1e-20);
  try {
    kde_scores(Eigen::MatrixXd(0, 2), s, 16.0);
    FAIL("expected NoTumorCells");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoTumorCells);
  }
}

TEST_CASE("kde matches a double-loop evaluation and ignores translation") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 512);
  for (int trial = 0; trial < 5; ++trial) {
    const int nt = 5 + 13 * trial, ns = 3 + 7 * trial;
    Eigen::MatrixXd t(nt, 2), s(ns, 2);
    for (int i = 0; i < nt; ++i) t.row(i) << u(rng), u(rng);
    for (int i = 0; i < ns; ++i) s.row(i) << u(rng), u(rng);
    for (double h : kDefaultBandwidths) {
      const Eigen::VectorXd k = kde_scores(t, s, h);
      for (int a = 0; a < ns; ++a) {
        double acc = 0.0;
        for (int b = 0; b < nt; ++b) {
          const double dx = s(a, 0) - t(b, 0), dy = s(a, 1) - t(b, 1);
          acc += std::exp(-(dx * dx + dy * dy) / (2 * h * h)) / (2 * std::numbers::pi * h * h);
        }
        CHECK(rel_err(k(a), acc / nt) <= 1e-12);
      }
      const Eigen::RowVector2d shift(37.0, -12.5);
      const Eigen::VectorXd moved = kde_scores(Eigen::MatrixXd(t.rowwise() + shift), Eigen::MatrixXd(s.rowwise() + shift), h);
      CHECK(rel_err(moved.mean(), k.mean()) <= 1e-9);
    }
  }
}

TEST_CASE("patch descriptor") {
  Patch p = tile_patches(512, 512, grid_cells(12, 15, 20.0, 20.0), "R/roi_00")[0];
  REQUIRE(p.eligible);
  std::unordered_map<int, CellFeatureVector> features;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(1.0, 0.3);
  for (const PatchCell& c : p.members) {
    CellFeatureVector v;
    v.cell_id = c.cell_id;
    for (int j = 0; j < 41; ++j) v.values(j) = g(rng);
    features[c.cell_id] = v;
  }
  const PatchDescriptor d = patch_descriptor(p, features);
  CHECK(d.values.size() == 609);
  CHECK(d.n_tumor == 12);
  CHECK(d.n_stroma == 15);
  for (int f = 0; f < 82; ++f) {
    const auto st = d.values.segment(7 * f, 7);  // mean, median, std, Q1, Q3, min, max
    CHECK(st(5) <= st(3));
    CHECK(st(3) <= st(1));
    CHECK(st(1) <= st(4));
    CHECK(st(4) <= st(6));
  }
  // block A column 0 is the tumor nucleus area mean
  double m = 0.0;
  for (const PatchCell& c : p.members)
    if (c.label == CellLabel::Tumor) m += features[c.cell_id].values(0);
  CHECK(rel_err(d.values(0), m / 12) <= 1e-12);

  SUBCASE("member order does not matter") {
    Patch q = p;
    std::shuffle(q.members.begin(), q.members.end(), rng);
    CHECK(patch_descriptor(q, features).values == d.values);
  }
  SUBCASE("identical members give zero spread") {
    for (auto& [id, v] : features) v.values.setConstant(0.5);
    const PatchDescriptor z = patch_descriptor(p, features);
    for (int f = 0; f < 82; ++f) {
      CHECK(z.values(7 * f + 2) == 0.0);
      CHECK(z.values(7 * f + 5) == z.values(7 * f + 6));
    }
  }
  SUBCASE("ineligible patches are rejected") {
    Patch few = tile_patches(512, 512, grid_cells(9, 15, 20.0, 20.0))[0];
    try {
      patch_descriptor(few, features);
      FAIL("expected IneligiblePatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IneligiblePatch);
    }
  }
  SUBCASE("csv round trip") {
    PatchDescriptor labeled = d;
    labeled.label = "HGSOC";
    std::vector<std::string> names;
    const auto back = parse_patch_descriptor_csv(patch_descriptor_csv({labeled}), &names);
    CHECK(names == patch_feature_names());
    REQUIRE(back.size() == 1);
    CHECK(back[0].roi_id == "R/roi_00");
    CHECK(back[0].label == "HGSOC");
    for (int j = 0; j < 609; ++j) CHECK(back[0].values(j) == d.values(j));
  }
}
