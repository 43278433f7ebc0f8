#include <doctest.h>

#include <functional>
#include <sstream>

#include "gtclean/ingest.hpp"
#include "gtclean/synth.hpp"

using namespace gtclean;

namespace {

const CropSet kCrops({"mustard", "paddy", "wheat"});

std::string feature(const std::string& props, const std::string& coords = "[[[0,0],[1,0],[1,1],[0,1],[0,0]]]") {
  return R"({"type":"Feature","properties":)" + props + R"(,"geometry":{"type":"Polygon","coordinates":)" + coords +
         "}}";
}

std::string collection(const std::vector<std::string>& features) {
  std::string out = R"({"type":"FeatureCollection","features":[)";
  for (std::size_t i = 0; i < features.size(); ++i) out += (i ? "," : "") + features[i];
  return out + "]}";
}

std::vector<PlotRecord> plots_from(const std::string& text) {
  std::istringstream in(text);
  return parse_plots(in, kCrops);
}

std::vector<PixelProfile> pixels_from(const std::string& text) {
  std::istringstream in(text);
  return parse_pixel_series(in);
}

const std::string kHeader = "pixel_id,plot_id,day,red,green,blue,nir,swir2,cloudy\n";

std::string what_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("one wheat feature") {
    const auto plots =
        plots_from(collection({feature(R"({"plot_id":"p1","crop":"wheat","district":"D1","season_year":2024})")}));
    REQUIRE(plots.size() == 1);
    CHECK(plots[0].plot_id == "p1");
    CHECK(plots[0].claimed_label == CropLabel::crop("wheat"));
    CHECK(plots[0].polygon.size() == 4);
    CHECK(plots[0].season_year == 2024);
  }

  TEST_CASE("stray crop string becomes UNKNOWN") {
    const auto plots =
        plots_from(collection({feature(R"({"plot_id":"p1","crop":"sugarcane","district":"D1","season_year":2024})")}));
    CHECK(plots[0].claimed_label == CropLabel::unknown());
  }

  TEST_CASE("missing crop property names the feature") {
    const std::string msg = what_of(
        [] { plots_from(collection({feature(R"({"plot_id":"p7","district":"D1","season_year":2024})")})); });
    CHECK(msg.find("p7") != std::string::npos);
    CHECK(msg.find("crop") != std::string::npos);
  }

  TEST_CASE("duplicate plot ids and malformed JSON") {
    const std::string f = feature(R"({"plot_id":"p1","crop":"wheat","district":"D1","season_year":2024})");
    CHECK_THROWS_AS(plots_from(collection({f, f})), ParseError);
    CHECK_THROWS_AS(plots_from("{not json"), ParseError);
    CHECK_THROWS_AS(plots_from(collection({feature(R"({"plot_id":"p1","crop":"wheat","district":"D1","season_year":2024})",
                                                   "[[[0,0],[\"x\",0]]]")})),
                    ParseError);
  }

  TEST_CASE("pixel rows are grouped and sorted by day") {
    const auto px = pixels_from(kHeader + "x,p1,20,0.1,0.1,0.1,0.5,0.2,0\nx,p1,10,0.1,0.1,0.1,0.4,0.2,1\n");
    REQUIRE(px.size() == 1);
    CHECK(px[0].sample_count() == 2);
    CHECK(px[0].band(Band::Nir)[0].day == 10);
    CHECK(px[0].band(Band::Nir)[0].cloudy);
    CHECK(px[0].band(Band::Nir)[1].reflectance == 0.5);
    CHECK_FALSE(px[0].position.has_value());
  }

  TEST_CASE("pixel file errors carry the row number") {
    CHECK(what_of([] { pixels_from(kHeader + "x,p1,10,-0.1,0.1,0.1,0.4,0.2,0\n"); }) ==
          "pixel file: reflectance out of range, row 2");
    CHECK(what_of([] { pixels_from(kHeader + "x,p1,10,0.1,0.1,0.1,0.4,0.2,0\nx,p1,10,abc,0.1,0.1,0.4,0.2,0\n"); })
              .find("row 3") != std::string::npos);
    CHECK(what_of([] { pixels_from(kHeader + "x,p1,10,0.1,0.1,0.1,0.4,0.2,0\nx,p1,10,0.1,0.1,0.1,0.4,0.2,0\n"); })
              .find("duplicate") != std::string::npos);
    CHECK_THROWS_AS(pixels_from("pixel_id,plot_id\n"), ParseError);
    CHECK_THROWS_AS(pixels_from(kHeader + "x,p1,10,0.1,0.1,0.1,0.4,0.2,2\n"), ParseError);
  }

  TEST_CASE("optional row and col columns") {
    const auto px =
        pixels_from("pixel_id,plot_id,day,red,green,blue,nir,swir2,cloudy,row,col\nx,p1,0,0.1,0.1,0.1,0.4,0.2,0,3,4\n");
    REQUIRE(px[0].position.has_value());
    CHECK(px[0].position->row == 3);
    CHECK(px[0].position->col == 4);
  }

  TEST_CASE("join resolves pixels and drops empty plots") {
    const auto plots = plots_from(collection({
        feature(R"({"plot_id":"p1","crop":"wheat","district":"D1","season_year":2024})"),
        feature(R"({"plot_id":"p2","crop":"paddy","district":"D1","season_year":2024,"pixel_ids":["zz"]})",
                "[[[2,0],[3,0],[3,1],[2,1],[2,0]]]"),
        feature(R"({"plot_id":"p3","crop":"mustard","district":"D2","season_year":2024})",
                "[[[4,0],[5,0],[5,1],[4,1],[4,0]]]"),
    }));
    auto pixels = pixels_from(kHeader + "a,p1,0,0.1,0.1,0.1,0.4,0.2,0\nb,p3,0,0.1,0.1,0.1,0.4,0.2,0\n");
    const JoinResult r = join_and_check(plots, pixels, {}, TimeGrid{});
    CHECK(r.dataset.plots.size() == 2);
    REQUIRE(r.eliminations.size() == 1);
    CHECK(r.eliminations[0].subject_id == "p2");
    CHECK(r.eliminations[0].reason == Reason::NoPixels);
    CHECK(r.dataset.plots.at("p1").pixel_ids == std::vector<std::string>{"a"});

    auto ghost = pixels_from(kHeader + "g,ghost,0,0.1,0.1,0.1,0.4,0.2,0\n");
    CHECK_THROWS_AS(join_and_check(plots, ghost, {}, TimeGrid{}), DataError);
  }

  TEST_CASE("masks group by kind") {
    std::istringstream in(collection({
        R"({"type":"Feature","properties":{"kind":"ROAD"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}})",
        R"({"type":"Feature","properties":{"kind":"BUILT"},"geometry":{"type":"MultiPolygon","coordinates":[[[[0,0],[1,0],[1,1],[0,0]]],[[[5,5],[6,5],[6,6],[5,5]]]]}})",
    }));
    const auto masks = parse_masks(in);
    REQUIRE(masks.size() == 2);
    std::size_t built = 0;
    for (const auto& m : masks) {
      if (m.kind == MaskKind::Built) built = m.polygons.size();
    }
    CHECK(built == 2);
  }

  TEST_CASE("seed file") {
    std::istringstream in("plot_id,verified_crop\np1,wheat\np2,Mustard\n");
    const auto seeds = parse_seed_file(in, kCrops);
    REQUIRE(seeds.size() == 2);
    CHECK(seeds[1].verified == CropLabel::crop("mustard"));
    std::istringstream bad("plot_id,verified_crop\np1,rice\n");
    CHECK_THROWS_AS(parse_seed_file(bad, kCrops), ParseError);
  }

  TEST_CASE("synthetic files round-trip through parse and serialise") {
    SynthSpec spec;
    spec.plots_per_crop = 4;
    spec.pixels_per_plot = 6;
    spec.noise.cloud_rate = 0.2;
    spec.noise.reflectance_noise_sd = 0.03;
    spec.seed = 9;
    const SynthDataset d = generate_dataset(spec);

    std::ostringstream plots_out, pixels_out, masks_out;
    write_plots(plots_out, d.plots);
    write_pixel_series(pixels_out, d.pixels);
    write_masks(masks_out, d.masks);
    const auto plots = plots_from(plots_out.str());
    const auto pixels = pixels_from(pixels_out.str());
    std::istringstream masks_in(masks_out.str());
    const auto masks = parse_masks(masks_in);
    CHECK(plots == d.plots);
    CHECK(pixels == d.pixels);
    REQUIRE(masks.size() == d.masks.size());
    CHECK(masks[0].polygons == d.masks[0].polygons);

    std::ostringstream again;
    write_pixel_series(again, pixels);
    CHECK(again.str() == pixels_out.str());

    const JoinResult j = join_and_check(plots, pixels, masks, TimeGrid{});
    CHECK(j.eliminations.empty());
    CHECK(j.dataset.plots.size() == 12);
    for (const auto& [id, p] : j.dataset.plots) CHECK(validate_plot(p).empty());
  }
}
