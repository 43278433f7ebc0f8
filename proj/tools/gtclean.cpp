// gtclean: ground-truth cleaning pipeline driver.
#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gtclean/pipeline.hpp"

namespace {

using namespace gtclean;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string levels;
};

RunConfig resolve(const GlobalOptions& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (!g.levels.empty()) cfg.levels = parse_levels(g.levels);
  cfg.validate();
  return cfg;
}

void write_timing(const fs::path& dir, const std::string& command, double seconds) {
  std::ofstream out(dir / ("timing_" + command + ".txt"));
  out << "wall_seconds " << seconds << '\n';
}

int fail(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << "error[" << code << "]: " << message << '\n';
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-level cleaning of crop ground-truth polygons"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides config)");
  app.add_option("--out", g.out, "output directory (overrides config)");
  app.add_option("--levels", g.levels, "comma-separated levels: UNCLEAN,L1,L2,L3");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* clean = app.add_subcommand("clean", "run the elimination levels and write snapshots");
  auto* train = app.add_subcommand("train-eval", "train and evaluate a random forest per level");
  auto* report = app.add_subcommand("report", "print a Markdown summary of a run manifest");
  std::string manifest;
  report->add_option("--manifest", manifest, "manifest path (default: <out>/manifest.json)");
  auto* fcc = app.add_subcommand("fcc", "render false colour chips for review");
  std::optional<int> day;
  std::vector<std::string> plots;
  std::optional<int> size;
  fcc->add_option("--day", day, "grid day to render (default: peak mean NDVI)");
  fcc->add_option("--plots", plots, "plot ids (default: FLAGGED plots, else all retained)")->delimiter(',');
  fcc->add_option("--size", size, "chip edge length in pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("USAGE", e.what(), 2);
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    if (synth->parsed()) {
      if (g.out.empty()) return fail("USAGE", "synth requires --out", 2);
      const RunConfig cfg = resolve(g);
      run_synth(cfg);
      std::cout << "wrote synthetic dataset to " << cfg.output_dir.string() << '\n';
    } else if (clean->parsed()) {
      const RunConfig cfg = resolve(g);
      const CleanResult res = run_clean(cfg);
      write_clean_outputs(res, cfg);
      for (const LevelCounts& c : res.funnel) {
        std::cout << c.level << ": plots " << c.retained_plots << "/" << c.input_plots << ", pixels "
                  << c.retained_pixels << "/" << c.input_pixels << '\n';
      }
      write_timing(cfg.output_dir, "clean", elapsed());
    } else if (train->parsed()) {
      const RunConfig cfg = resolve(g);
      const TrainEvalResult res = run_train_eval(cfg);
      write_train_eval_outputs(res, cfg);
      for (const LevelEvaluation& ev : res.levels) {
        std::cout << ev.level << ": macro F1 " << 100.0 * ev.overall.macro_f1() << '\n';
      }
      write_timing(cfg.output_dir, "train-eval", elapsed());
    } else if (report->parsed()) {
      const RunConfig cfg = resolve(g);
      const fs::path path = manifest.empty() ? cfg.output_dir / "manifest.json" : fs::path(manifest);
      std::cout << render_report(path);
    } else if (fcc->parsed()) {
      RunConfig cfg = resolve(g);
      if (size) cfg.fcc_size = *size;
      cfg.validate();
      const auto written = run_fcc(cfg, FccRequest{day, plots});
      std::cout << "wrote " << written.size() << " chips to " << (cfg.output_dir / "fcc").string() << '\n';
    }
  } catch (const ConfigError& e) {
    return fail(e.code(), e.what(), 2);
  } catch (const Error& e) {
    return fail(e.code(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("INTERNAL", e.what(), 1);
  }
  return 0;
}
