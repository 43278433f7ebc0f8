#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gtclean/preprocess.hpp"
#include "gtclean/synth.hpp"
#include "helpers.hpp"

using namespace gtclean;

namespace {

PhenologyParams mustard() {
  for (const auto& c : default_crop_specs()) {
    if (c.name == "mustard") return c.params;
  }
  throw std::logic_error("no mustard");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("double logistic values") {
    const auto p = mustard();
    CHECK(p.base == 0.15);
    CHECK(p.amplitude == 0.55);
    // Closed form evaluated separately at t = 80.
    CHECK(phenology_value(p, 80) == doctest::Approx(0.694150643129613).epsilon(1e-12));
    PhenologyParams mid = p;
    mid.senescence_day = 1000;
    CHECK(phenology_value(mid, mid.green_up_day) == doctest::Approx(p.base + p.amplitude / 2).epsilon(1e-9));
    CHECK(phenology_value(p, -200) == doctest::Approx(p.base).epsilon(1e-9));
    for (double v : phenology_curve(p, TimeGrid{})) {
      CHECK(v >= p.base - 1e-9);
      CHECK(v <= p.base + p.amplitude);
    }
  }

  TEST_CASE("band maps preserve ndvi") {
    for (const auto& c : default_crop_specs()) {
      c.params.validate(180);
      for (double v : {0.1, 0.4, 0.7}) {
        const auto& b = c.params.bands;
        const double nir = b[band_index(Band::Nir)].gain * v + b[band_index(Band::Nir)].offset;
        const double red = b[band_index(Band::Red)].gain * v + b[band_index(Band::Red)].offset;
        CHECK((nir - red) / (nir + red) == doctest::Approx(v).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("corruption counts follow the rates") {
    SynthSpec spec;
    spec.plots_per_crop = 40;
    spec.pixels_per_plot = 4;
    spec.noise = NoiseSpec{0.2, 0.1, 0.05, 0.25, 0.1, 0.15, 0.01};
    spec.seed = 3;
    const auto d = generate_dataset(spec);
    std::map<TrueCondition, int> counts;
    for (const auto& [id, t] : d.truth) ++counts[t.condition];
    CHECK(d.truth.size() == 120);
    CHECK(counts[TrueCondition::NonAg] == 12);
    CHECK(counts[TrueCondition::Perennial] == 6);
    CHECK(counts[TrueCondition::MultiCrop] == 18);
    int mislabelled = 0;
    for (const auto& p : d.plots) {
      const auto& t = d.truth.at(p.plot_id);
      CHECK(p.claimed_label.is_crop());
      if (t.condition == TrueCondition::Crop && t.crop != p.claimed_label.name()) ++mislabelled;
    }
    CHECK(mislabelled == 24);
    // One boundary pixel (round(0.25 * 4)) per crop-bearing plot; flat
    // non-ag and perennial plots get none.
    CHECK(d.boundary_pixels.size() == 120 - 12 - 6);
  }

  TEST_CASE("infeasible specs") {
    SynthSpec spec;
    spec.plots_per_crop = 0;
    CHECK_THROWS_AS(generate_dataset(spec), ConfigError);
    SynthSpec heavy;
    heavy.plots_per_crop = 5;
    heavy.noise.non_ag_rate = 0.7;
    heavy.noise.mislabel_rate = 0.7;
    CHECK_THROWS_AS(generate_dataset(heavy), ConfigError);
    SynthSpec bad_rate;
    bad_rate.noise.cloud_rate = 1.5;
    CHECK_THROWS_AS(generate_dataset(bad_rate), ConfigError);
  }

  TEST_CASE("noise-free pixels of a crop share one curve") {
    SynthSpec spec;
    spec.plots_per_crop = 3;
    spec.pixels_per_plot = 4;
    const auto d = generate_dataset(spec);
    std::map<std::string, std::string> crop_of;
    for (const auto& [id, t] : d.truth) crop_of[id] = t.crop;
    std::map<std::string, const PixelProfile*> first;
    for (const auto& px : d.pixels) {
      const std::string& crop = crop_of.at(px.plot_id);
      if (!first.count(crop)) {
        first[crop] = &px;
        continue;
      }
      CHECK(px.bands == first[crop]->bands);
    }
    // And NDVI recovered from the bands follows the generator curve.
    const auto* m = first.at("mustard");
    const auto p = mustard();
    for (const auto& s : m->band(Band::Nir)) {
      const double nir = s.reflectance;
      double red = 0.0;
      for (const auto& r : m->band(Band::Red)) {
        if (r.day == s.day) red = r.reflectance;
      }
      CHECK((nir - red) / (nir + red) == doctest::Approx(phenology_value(p, s.day)).epsilon(1e-9));
    }
  }

  TEST_CASE("non-agricultural plots never reach the crop threshold") {
    SynthSpec spec;
    spec.plots_per_crop = 4;
    spec.pixels_per_plot = 5;
    spec.noise.non_ag_rate = 1.0;
    spec.noise.reflectance_noise_sd = 0.01;
    const auto d = generate_dataset(spec);
    for (const auto& [id, t] : d.truth) CHECK(t.condition == TrueCondition::NonAg);
    for (const auto& px : d.pixels) {
      auto out = preprocess_pixel(px, TimeGrid{}, PreprocessConfig{}, px.sample_count());
      REQUIRE(out.clean.has_value());
      CHECK(*std::max_element(out.clean->ndvi.begin(), out.clean->ndvi.end()) < 0.4);
    }
  }

  TEST_CASE("same seed writes byte-identical files") {
    SynthSpec spec;
    spec.plots_per_crop = 6;
    spec.pixels_per_plot = 3;
    spec.noise = NoiseSpec{0.3, 0.1, 0.05, 0.1, 0.15, 0.0, 0.02};
    spec.seed = 77;
    const auto a = testutil::temp_dir("synth_a"), b = testutil::temp_dir("synth_b");
    write_synth_files(generate_dataset(spec), a);
    write_synth_files(generate_dataset(spec), b);
    for (const char* f : {"plots.geojson", "pixels.csv", "masks.geojson", "truth.csv", "seeds.csv"}) {
      CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
      CHECK_FALSE(slurp(a / f).empty());
    }
    std::ifstream truth(a / "truth.csv");
    const auto parsed = parse_truth_file(truth);
    CHECK(parsed.size() == 18);
  }
}
