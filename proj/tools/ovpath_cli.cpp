#include "ovpath/config.hpp"
#include "ovpath/error.hpp"
#include "ovpath/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

int exit_code(ovpath::ErrorKind kind) {
  using ovpath::ErrorKind;
  switch (kind) {
    case ErrorKind::ConfigError: return 2;
    case ErrorKind::MissingInput: return 3;
    case ErrorKind::StageFailure: return 4;
    case ErrorKind::IoError: return 5;
    default: return 10 + static_cast<int>(kind);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell and patch level H&E analysis pipeline for HGSOC vs SBOT"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string cohort_dir, output_dir;
  std::optional<int> subjects_per_class, rois_per_subject;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "global seed (overrides the config)");
  app.add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::Range(1, 1024));
  app.add_option("--cohort", cohort_dir, "cohort directory <class>/<subject>/<roi>.png (overrides the config)");
  app.add_option("--out", output_dir, "output directory for stage artifacts (overrides the config)");
  app.add_option("--subjects-per-class", subjects_per_class, "synthetic subjects per histotype")->check(CLI::Range(1, 1000));
  app.add_option("--rois-per-subject", rois_per_subject, "synthetic ROIs per subject")->check(CLI::Range(1, 1000));
  app.add_flag("--quiet", quiet, "suppress JSON log lines on stderr");

  std::string selected;
  for (const std::string& name : ovpath::Pipeline::stage_names()) {
    app.add_subcommand(name, "run the " + name + " stage")->fallthrough()->callback([&selected, name] { selected = name; });
  }
  app.add_subcommand("run-all", "run every stage and write manifest.json")->fallthrough()->callback([&selected] { selected = "run-all"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ovpath::PipelineConfig config = config_path.empty() ? ovpath::PipelineConfig{} : ovpath::PipelineConfig::load(config_path);
    if (seed) config.apply_seed(*seed);
    if (workers) config.workers = *workers;
    if (!cohort_dir.empty()) config.cohort_dir = cohort_dir;
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (subjects_per_class) config.synth.n_subjects_per_class = *subjects_per_class;
    if (rois_per_subject) config.synth.rois_per_subject = *rois_per_subject;
    config.validate();

    ovpath::Pipeline pipeline(config, ovpath::Logger(quiet ? nullptr : &std::cerr));
    if (selected == "run-all") {
      const nlohmann::json manifest = pipeline.run_all();
      std::cout << manifest["summary"].dump() << '\n';
    } else {
      const ovpath::StageResult r = pipeline.run(selected);
      std::cout << nlohmann::json{{"stage", r.stage}, {"outputs", r.outputs.size()}}.dump() << '\n';
    }
    return 0;
  } catch (const ovpath::Error& e) {
    std::cerr << nlohmann::json{{"level", "fatal"}, {"kind", ovpath::to_string(e.kind())}, {"message", e.what()}}.dump()
              << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"level", "fatal"}, {"message", e.what()}}.dump() << '\n';
    return 70;
  }
}
