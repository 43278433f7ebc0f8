#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "gtclean/fcc.hpp"
#include "gtclean/pipeline.hpp"
#include "helpers.hpp"

using namespace gtclean;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Synthesises a small dataset into dir and returns the config written next to it.
RunConfig small_run(const fs::path& dir, const NoiseSpec& noise, std::uint64_t seed = 1, int plots_per_crop = 12) {
  RunConfig cfg;
  cfg.output_dir = dir;
  cfg.seed = seed;
  cfg.synth.plots_per_crop = plots_per_crop;
  cfg.synth.pixels_per_plot = 6;
  cfg.synth.seed_plots_per_crop = 6;
  cfg.synth.noise = noise;
  run_synth(cfg);
  RunConfig loaded = load_run_config(dir / "config.json");
  loaded.forest.n_trees = 15;
  return loaded;
}

struct CliResult {
  int code;
  std::string err;
};

CliResult cli(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string(GTCLEAN_CLI) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::size_t lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config paths resolve next to the config file") {
    const auto dir = testutil::temp_dir("cfg_paths");
    RunConfig cfg = small_run(dir, NoiseSpec{});
    CHECK(cfg.plots == dir / "plots.geojson");
    CHECK(cfg.output_dir == dir / "run");
    CHECK(cfg.kmeans.n_init == 10);
  }

  TEST_CASE("config errors") {
    const auto dir = testutil::temp_dir("cfg_errors");
    std::ofstream(dir / "typo.json") << R"({"ndvi_max_minn": 0.4})";
    CHECK_THROWS_AS(load_run_config(dir / "typo.json"), ConfigError);
    std::ofstream(dir / "broken.json") << "{";
    CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
    std::ofstream(dir / "range.json") << R"({"ndvi_max_min": 1.5})";
    CHECK_THROWS_AS(load_run_config(dir / "range.json").validate(), ConfigError);
    CHECK_THROWS_AS(parse_levels("L1,L9"), ConfigError);
    CHECK(parse_levels("l3, L1") == std::vector<std::string>{"L1", "L3"});
  }

  TEST_CASE("noise-free data passes every level") {
    const auto dir = testutil::temp_dir("noise_free");
    RunConfig cfg = small_run(dir, NoiseSpec{});
    const CleanResult res = run_clean(cfg);
    const std::size_t input = res.data.profiles.size();
    REQUIRE(input == 3 * 12 * 6);
    CHECK(static_cast<double>(input - res.retained.at("L3").size()) <= 0.02 * static_cast<double>(input));
    std::set<std::string> plots;
    for (const auto& p : res.retained.at("L3")) plots.insert(p.plot_id);
    CHECK(plots.size() == 36);
    for (const auto& v : res.verdicts) CHECK(v.decision == Decision::Confirmed);
    CHECK(res.verdicts.size() == 36 - 18);
  }

  TEST_CASE("all non-agricultural plots empty out at L2") {
    const auto dir = testutil::temp_dir("all_soil");
    NoiseSpec noise;
    noise.non_ag_rate = 1.0;
    noise.reflectance_noise_sd = 0.01;
    RunConfig cfg = small_run(dir, noise);
    cfg.seeds.clear();
    cfg.levels = {"L1", "L2"};
    const CleanResult res = run_clean(cfg);
    CHECK(res.retained.at("L1").size() == res.data.profiles.size());
    CHECK(res.retained.at("L2").empty());
  }

  TEST_CASE("funnel reconciles at every level") {
    const auto dir = testutil::temp_dir("funnel");
    RunConfig cfg = small_run(dir, NoiseSpec{0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.02}, 5, 20);
    const CleanResult res = run_clean(cfg);
    std::size_t prev_plots = 0, prev_pixels = 0;
    for (std::size_t i = 0; i < res.funnel.size(); ++i) {
      const auto& c = res.funnel[i];
      std::size_t plot_elims = 0, pixel_elims = 0;
      for (const auto& [reason, n] : c.by_reason) {
        plot_elims += n.first;
        pixel_elims += n.second;
      }
      CHECK(c.retained_plots + plot_elims == c.input_plots);
      CHECK(c.retained_pixels + pixel_elims == c.input_pixels);
      if (i > 0) {
        CHECK(c.input_plots == prev_plots);
        CHECK(c.input_pixels == prev_pixels);
      }
      prev_plots = c.retained_plots;
      prev_pixels = c.retained_pixels;
    }
    // Every pixel is eliminated at most once.
    std::set<std::string> seen;
    for (const auto& e : res.eliminations) {
      if (e.subject == SubjectKind::Pixel) CHECK(seen.insert(e.subject_id).second);
    }
  }

  TEST_CASE("clean and train-eval outputs are deterministic") {
    const auto dir = testutil::temp_dir("determinism");
    RunConfig cfg = small_run(dir, NoiseSpec{0.2, 0.05, 0.05, 0.1, 0.1, 0.0, 0.02}, 9);
    // Same output directory both times (it is part of the manifest); the
    // first run's files are copied aside for comparison.
    cfg.output_dir = dir / "b";
    for (const char* tag : {"a", "b"}) {
      write_clean_outputs(run_clean(cfg), cfg);
      write_train_eval_outputs(run_train_eval(cfg), cfg);
      if (std::string(tag) == "a") fs::copy(dir / "b", dir / "a", fs::copy_options::recursive);
    }
    for (const char* f : {"retained_L1.csv", "retained_L2.csv", "retained_L3.csv", "eliminations.csv",
                          "verdicts.csv", "kmeans_diagnostics.csv", "manifest.json", "report_L3.csv",
                          "model_L3.json", "report.md"}) {
      CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
    }
    const std::string report = render_report(dir / "a" / "manifest.json");
    CHECK(report.find("L3") != std::string::npos);
    CHECK(report.find("largest gain") != std::string::npos);
  }

  TEST_CASE("cli exit codes and level selection") {
    const auto dir = testutil::temp_dir("cli");
    const std::string d = dir.string();

    auto r = cli("synth", dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("error[USAGE]") == 0);

    CHECK(cli("frobnicate", dir).code == 2);

    std::ofstream(dir / "bad.json") << R"({"unknown_key": 1})";
    r = cli("--config " + d + "/bad.json clean", dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("error[CONFIG]") == 0);

    std::ofstream(dir / "gen.json") << R"({"seed": 3, "synth": {"plots_per_crop": 8, "pixels_per_plot": 5,
      "seed_plots_per_crop": 5, "noise": {"reflectance_noise_sd": 0.01}}})";
    REQUIRE(cli("--config " + d + "/gen.json --out " + d + "/data synth", dir).code == 0);
    REQUIRE(cli("--config " + d + "/data/config.json --levels L1 clean", dir).code == 0);
    CHECK(fs::exists(dir / "data/run/retained_L1.csv"));
    CHECK_FALSE(fs::exists(dir / "data/run/retained_L2.csv"));
    CHECK_FALSE(fs::exists(dir / "data/run/retained_L3.csv"));
    CHECK(lines(dir / "data/run/retained_L1.csv") == 1 + 3 * 8 * 5);

    // train-eval on a missing snapshot is a runtime error.
    r = cli("--config " + d + "/data/config.json --levels L3 train-eval", dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("L3") != std::string::npos);

    // Malformed input data is a runtime error.
    std::ofstream(dir / "data/pixels.csv", std::ios::app) << "x,p0001,0,1.7,0.1,0.1,0.1,0.1,0\n";
    r = cli("--config " + d + "/data/config.json clean", dir);
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error[PARSE]", 0) == 0);

    // A referenced input that does not exist is a configuration error.
    std::filesystem::remove(dir / "data/pixels.csv");
    r = cli("--config " + d + "/data/config.json clean", dir);
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error[CONFIG]", 0) == 0);
  }

  TEST_CASE("fcc chips for flagged plots") {
    const auto dir = testutil::temp_dir("fcc_run");
    RunConfig cfg = small_run(dir, NoiseSpec{0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.01}, 2);
    cfg.fcc_size = 32;
    const CleanResult res = run_clean(cfg);
    write_clean_outputs(res, cfg);
    std::size_t flagged = 0;
    for (const auto& v : res.verdicts) flagged += v.decision == Decision::Flagged;
    REQUIRE(flagged > 0);
    const auto written = run_fcc(cfg, FccRequest{});
    CHECK(written.size() == flagged);
    const RgbImage img = read_png(written.front());
    CHECK(img.width == 32);
    CHECK_THROWS_AS(run_fcc(cfg, FccRequest{7, {}}), Error);
  }
}
