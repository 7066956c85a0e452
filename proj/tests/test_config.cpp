#include "ovpath/config.hpp"
#include "ovpath/csv.hpp"
#include "ovpath/error.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace ovpath;
using nlohmann::json;

namespace {

ErrorKind kind_of(const json& j) {
  try {
    PipelineConfig::from_json(j);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::StageFailure;
}

}  // namespace

TEST_CASE("defaults validate and round trip") {
  const PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.seed == 7);
  CHECK(c.bootstrap_replicates == 1000);
  const PipelineConfig back = PipelineConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(PipelineConfig::from_json(json::object()).to_json() == c.to_json());
}

TEST_CASE("partial objects keep defaults") {
  const auto c = PipelineConfig::from_json({{"svm", {{"c", 0.5}}}, {"patch", {{"cv_folds", 3}}}});
  CHECK(c.svm.c == 0.5);
  CHECK(c.svm.kkt_tolerance == PipelineConfig{}.svm.kkt_tolerance);
  CHECK(c.patch_cv_folds == 3);
  CHECK(c.patch_size == 512);
}

TEST_CASE("the global seed reaches every seeded component") {
  const auto c = PipelineConfig::from_json({{"seed", 99}});
  CHECK(c.seed == 99);
  CHECK(c.svm.seed == 99);
  CHECK(c.lasso.seed == 99);
  CHECK(c.synth.seed == 99);
  PipelineConfig d;
  d.apply_seed(3);
  CHECK(d.synth.seed == 3);
  CHECK(d.to_json()["seed"] == 3);
  CHECK_FALSE(d.to_json()["synth"].contains("seed"));
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK(kind_of({{"sead", 1}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"svm", {{"C", 1.0}}}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"lasso", {{"alpha", 1.0}}}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"synth", {{"hgsoc", {{"density", 1.0}}}}}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"synth", {{"seed", 5}}}}) == ErrorKind::ConfigError);
}

TEST_CASE("type and range errors") {
  CHECK(kind_of({{"workers", "four"}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"workers", 0}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"svm", {{"c", 0.0}}}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"lasso", {{"min_ratio", 1.0}}}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"lasso", {{"folds", 1}}}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"patch", {{"bandwidths", json::array()}}}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"patch", {{"bandwidths", {16.0, -1.0}}}}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"bootstrap_replicates", 0}}) == ErrorKind::ConfigError);
  CHECK(kind_of({{"segmentation", {{"pixel_size", -0.25}}}}) == ErrorKind::ConfigError);
  CHECK(kind_of(json::array()) == ErrorKind::ConfigError);
}

TEST_CASE("load from file") {
  test::TempDir dir("config");
  csv::write_text(dir.str("ok.json"), R"({"workers": 2, "overlays": false})");
  const auto c = PipelineConfig::load(dir.str("ok.json"));
  CHECK(c.workers == 2);
  CHECK_FALSE(c.overlays);

  csv::write_text(dir.str("bad.json"), "{\"workers\": ");
  CHECK_THROWS_AS(PipelineConfig::load(dir.str("bad.json")), Error);
  try {
    PipelineConfig::load(dir.str("missing.json"));
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
  }
}
