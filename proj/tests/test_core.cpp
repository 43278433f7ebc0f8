#include <doctest.h>

#include "gtclean/core.hpp"

using namespace gtclean;

TEST_SUITE("core") {
  TEST_CASE("crop set normalises and sorts names") {
    const CropSet crops({"Wheat", "mustard", " paddy "});
    CHECK(crops.names() == std::vector<std::string>{"mustard", "paddy", "wheat"});
    CHECK(crops.index_of(CropLabel::crop("paddy")) == 1);
    CHECK(crops.at(2) == CropLabel::crop("wheat"));
  }

  TEST_CASE("crop set rejects bad vocabularies") {
    CHECK_THROWS_AS(CropSet(std::vector<std::string>{}), ConfigError);
    CHECK_THROWS_AS(CropSet({"wheat", "WHEAT"}), ConfigError);
    CHECK_THROWS_AS(CropSet({"wheat", "non_ag"}), ConfigError);
  }

  TEST_CASE("label parsing maps strays to UNKNOWN") {
    const CropSet crops({"mustard", "paddy", "wheat"});
    CHECK(crops.parse("WHEAT") == CropLabel::crop("wheat"));
    CHECK(crops.parse("NON_AG") == CropLabel::non_ag());
    CHECK(crops.parse("barley") == CropLabel::unknown());
    CHECK(crops.parse("") == CropLabel::unknown());
    CHECK(CropLabel::unknown().name() == "UNKNOWN");
    CHECK(CropLabel::non_ag().name() == "NON_AG");
    CHECK_FALSE(crops.contains(CropLabel::non_ag()));
    CHECK_THROWS_AS(crops.index_of(CropLabel::unknown()), DataError);
  }

  TEST_CASE("time grid defaults and validation") {
    const TimeGrid g;
    CHECK(g.n_steps == 19);
    CHECK(g.day(0) == 0);
    CHECK(g.end_day() == 180);
    CHECK_THROWS_AS((TimeGrid{0, 0, 5}.validate()), ConfigError);
    CHECK_THROWS_AS((TimeGrid{0, 10, 1}.validate()), ConfigError);
  }

  TEST_CASE("reason codes round-trip and belong to one level") {
    for (Reason r : {Reason::NoPixels, Reason::TooSparse, Reason::UnknownLabel, Reason::MaskOverlap,
                     Reason::PlotOverlap, Reason::L2LowNdvi, Reason::L2PlotDecimated, Reason::L3Flat, Reason::L3Noisy,
                     Reason::L3PlotDecimated, Reason::VerifyFlagged}) {
      CHECK(parse_reason(to_string(r)) == r);
    }
    CHECK(level_of(Reason::MaskOverlap) == Level::L1);
    CHECK(level_of(Reason::L2PlotDecimated) == Level::L2);
    CHECK(level_of(Reason::L3Noisy) == Level::L3);
    CHECK(level_of(Reason::TooSparse) == Level::Pre);
    CHECK(level_of(Reason::VerifyFlagged) == Level::Verify);
    CHECK(to_string(Reason::L2LowNdvi) == "L2_LOW_NDVI");
    CHECK_THROWS_AS(parse_reason("BOGUS"), ParseError);
  }

  TEST_CASE("mask kinds") {
    CHECK(parse_mask_kind("ROAD") == MaskKind::Road);
    CHECK(to_string(MaskKind::NonAg) == "NON_AG");
    CHECK_THROWS_AS(parse_mask_kind("river"), ParseError);
  }

  TEST_CASE("profile invariants") {
    PixelProfile p;
    p.pixel_id = "x";
    p.plot_id = "p";
    for (Band b : kBands) p.band(b) = {{0, 0.1, false}, {10, 0.2, false}};
    CHECK(p.violations().empty());
    p.band(Band::Nir)[1].day = 0;
    CHECK_FALSE(p.violations().empty());
    p.band(Band::Nir)[1].day = 10;
    p.band(Band::Red).pop_back();
    CHECK_FALSE(p.violations().empty());
  }

  TEST_CASE("fraction formatting") {
    CHECK(format_fraction(0.5) == "0.5000");
    CHECK(format_fraction(1.0 / 3.0) == "0.3333");
  }
}
