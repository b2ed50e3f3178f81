#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "flutterlife/errors.hpp"
#include "flutterlife/pipeline.hpp"

namespace {

int fail(flutterlife::ExitCode code, const char* kind, const std::string& msg) {
  std::fprintf(stderr, "flutterlife: error kind=%s msg=\"%s\"\n", kind, msg.c_str());
  return static_cast<int>(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Life-cycle flutter probability assessment pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  flutterlife::CliOverrides overrides;
  std::uint64_t seed_opt = 0;
  int threads_opt = 0;

  const std::array<const char*, 7> stages = {"simulate",  "identify",  "trend",  "flutter",
                                             "surrogate", "lifecycle", "report"};
  const std::array<const char*, 7> blurbs = {
      "generate synthetic acceleration and wind records",
      "run Bayesian FFT modal identification per segment and band",
      "fit deterioration trends and fluctuation distributions",
      "solve the coupled two-mode flutter critical wind speed",
      "fit the linear critical-speed surrogate over the DOE grid",
      "propagate property PDFs to yearly failure probabilities",
      "render SVG plots from existing artifacts"};
  for (std::size_t i = 0; i < stages.size(); ++i) {
    CLI::App* sub = app.add_subcommand(stages[i], blurbs[i]);
    sub->add_option("--config", config_path, "pipeline configuration JSON")->required();
    sub->add_option("--out", out_dir, "output directory for artifacts");
    sub->add_option("--seed", seed_opt, "override the configured RNG seed");
    sub->add_option("--threads", threads_opt, "override the configured thread count");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(flutterlife::ExitCode::Config);
  }

  const CLI::App* sub = app.get_subcommands().front();
  for (const auto* opt : sub->get_options()) {
    if (opt->get_name() == "--seed" && opt->count()) overrides.seed = seed_opt;
    if (opt->get_name() == "--threads" && opt->count()) overrides.threads = threads_opt;
  }

  try {
    flutterlife::PipelineConfig config = flutterlife::load_pipeline_config(config_path);
    config = flutterlife::apply_overrides(config, overrides);
    const flutterlife::Stage stage = flutterlife::stage_from_name(sub->get_name());
    flutterlife::run_stage(stage, config, out_dir);
  } catch (const flutterlife::ConfigError& e) {
    return fail(flutterlife::ExitCode::Config, "config", e.what());
  } catch (const flutterlife::DataError& e) {
    return fail(flutterlife::ExitCode::Data, "data", e.what());
  } catch (const flutterlife::NumericalError& e) {
    return fail(flutterlife::ExitCode::Numerical, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(flutterlife::ExitCode::Numerical, "internal", e.what());
  }
  return 0;
}
