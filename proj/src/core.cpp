#include "gtclean/core.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace gtclean {
namespace {

std::string normalize_label(std::string_view raw) {
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out(raw.substr(b, e - b));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view band_name(Band b) {
  switch (b) {
    case Band::Red: return "red";
    case Band::Green: return "green";
    case Band::Blue: return "blue";
    case Band::Nir: return "nir";
    case Band::Swir2: return "swir2";
  }
  return "?";
}

std::string format_fraction(double value) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

std::string CropLabel::name() const {
  switch (kind_) {
    case Kind::Crop: return name_;
    case Kind::NonAg: return "NON_AG";
    case Kind::Unknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

CropSet::CropSet(std::vector<std::string> names) {
  if (names.empty()) throw ConfigError("crop list is empty");
  for (std::string& n : names) {
    n = normalize_label(n);
    if (n.empty()) throw ConfigError("crop list contains an empty name");
    if (n == "non_ag" || n == "unknown") throw ConfigError("crop list may not contain sentinel label '" + n + "'");
  }
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw ConfigError("crop list contains duplicates");
  }
  names_ = std::move(names);
}

CropLabel CropSet::parse(std::string_view raw) const {
  const std::string key = normalize_label(raw);
  if (key == "non_ag") return CropLabel::non_ag();
  if (std::binary_search(names_.begin(), names_.end(), key)) return CropLabel::crop(key);
  return CropLabel::unknown();
}

bool CropSet::contains(const CropLabel& label) const {
  return label.is_crop() && std::binary_search(names_.begin(), names_.end(), label.name());
}

std::size_t CropSet::index_of(const CropLabel& label) const {
  if (label.is_crop()) {
    auto it = std::lower_bound(names_.begin(), names_.end(), label.name());
    if (it != names_.end() && *it == label.name()) return static_cast<std::size_t>(it - names_.begin());
  }
  throw DataError("label '" + label.name() + "' is not in the configured crop set");
}

void TimeGrid::validate() const {
  if (step_days <= 0) throw ConfigError("time grid step_days must be positive");
  if (n_steps < 2) throw ConfigError("time grid needs at least 2 steps");
}

std::vector<std::string> PixelProfile::violations() const {
  std::vector<std::string> out;
  const auto& ref = bands[0];
  for (Band b : kBands) {
    const auto& samples = band(b);
    if (samples.size() != ref.size()) {
      out.push_back("band " + std::string(band_name(b)) + " has a different sample count");
      continue;
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].day != ref[i].day) {
        out.push_back("band " + std::string(band_name(b)) + " day sequence differs");
        break;
      }
    }
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (samples[i].day <= samples[i - 1].day) {
        out.push_back("band " + std::string(band_name(b)) + " days not strictly increasing");
        break;
      }
    }
    for (const BandSample& s : samples) {
      if (s.reflectance < 0.0) {
        out.push_back("band " + std::string(band_name(b)) + " has negative reflectance");
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> validate_plot(const PlotRecord& plot) {
  std::vector<std::string> out = ring_violations(plot.polygon);
  if (plot.pixel_ids.empty()) out.emplace_back("empty pixel set");
  return out;
}

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::Road: return "ROAD";
    case MaskKind::Built: return "BUILT";
    case MaskKind::NonAg: return "NON_AG";
  }
  return "?";
}

MaskKind parse_mask_kind(std::string_view text) {
  if (text == "ROAD") return MaskKind::Road;
  if (text == "BUILT") return MaskKind::Built;
  if (text == "NON_AG") return MaskKind::NonAg;
  throw ParseError("unknown mask kind '" + std::string(text) + "'");
}

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Pre: return "PRE";
    case Level::L1: return "L1";
    case Level::L2: return "L2";
    case Level::L3: return "L3";
    case Level::Verify: return "VERIFY";
  }
  return "?";
}

std::string_view to_string(Reason reason) {
  switch (reason) {
    case Reason::NoPixels: return "NO_PIXELS";
    case Reason::TooSparse: return "TOO_SPARSE";
    case Reason::UnknownLabel: return "UNKNOWN_LABEL";
    case Reason::MaskOverlap: return "MASK_OVERLAP";
    case Reason::PlotOverlap: return "PLOT_OVERLAP";
    case Reason::L2LowNdvi: return "L2_LOW_NDVI";
    case Reason::L2PlotDecimated: return "L2_PLOT_DECIMATED";
    case Reason::L3Flat: return "L3_FLAT";
    case Reason::L3Noisy: return "L3_NOISY";
    case Reason::L3PlotDecimated: return "L3_PLOT_DECIMATED";
    case Reason::VerifyFlagged: return "VERIFY_FLAGGED";
  }
  return "?";
}

std::string_view to_string(SubjectKind kind) {
  return kind == SubjectKind::Plot ? "plot" : "pixel";
}

Level parse_level(std::string_view text) {
  for (Level l : {Level::Pre, Level::L1, Level::L2, Level::L3, Level::Verify}) {
    if (to_string(l) == text) return l;
  }
  throw ParseError("unknown level '" + std::string(text) + "'");
}

Reason parse_reason(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(Reason::VerifyFlagged); ++i) {
    const auto r = static_cast<Reason>(i);
    if (to_string(r) == text) return r;
  }
  throw ParseError("unknown reason '" + std::string(text) + "'");
}

Level level_of(Reason reason) {
  switch (reason) {
    case Reason::NoPixels:
    case Reason::TooSparse: return Level::Pre;
    case Reason::UnknownLabel:
    case Reason::MaskOverlap:
    case Reason::PlotOverlap: return Level::L1;
    case Reason::L2LowNdvi:
    case Reason::L2PlotDecimated: return Level::L2;
    case Reason::L3Flat:
    case Reason::L3Noisy:
    case Reason::L3PlotDecimated: return Level::L3;
    case Reason::VerifyFlagged: return Level::Verify;
  }
  return Level::Pre;
}

}  // namespace gtclean
