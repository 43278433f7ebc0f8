#include "gtclean/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

namespace gtclean {
namespace {

using nlohmann::json;

const std::vector<std::string> kPixelColumns = {"pixel_id", "plot_id", "day",   "red",   "green",
                                                "blue",     "nir",     "swir2", "cloudy"};

json read_feature_collection(std::istream& in, const char* what) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw ParseError(std::string(what) + ": expected a GeoJSON FeatureCollection");
  }
  return doc;
}

Ring parse_ring(const json& coords, const std::string& where) {
  if (!coords.is_array()) throw ParseError(where + ": ring is not an array");
  Ring ring;
  ring.reserve(coords.size());
  for (const json& pt : coords) {
    if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number()) {
      throw ParseError(where + ": malformed coordinate");
    }
    ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  return ring;
}

json ring_to_json(const Ring& ring) {
  json coords = json::array();
  for (const Point& p : ring) coords.push_back({p.x, p.y});
  if (!ring.empty() && !(ring.front() == ring.back())) coords.push_back({ring.front().x, ring.front().y});
  return coords;
}

std::string feature_label(std::size_t index, const json& props) {
  std::string label = "feature " + std::to_string(index);
  if (props.is_object() && props.contains("plot_id") && props["plot_id"].is_string()) {
    label += " (plot_id '" + props["plot_id"].get<std::string>() + "')";
  }
  return label;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ParseError("non-numeric value '" + text + "', " + where);
  }
  return v;
}

int parse_int(const std::string& text, const std::string& where) {
  int v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ParseError("non-integer value '" + text + "', " + where);
  }
  return v;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  for (std::string& cell : cells) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    cell = (b == std::string::npos) ? std::string() : cell.substr(b, e - b + 1);
  }
  return cells;
}

std::vector<PlotRecord> parse_plots(std::istream& in, const CropSet& crops) {
  const json doc = read_feature_collection(in, "plots file");
  std::vector<PlotRecord> plots;
  std::set<std::string> seen;
  std::size_t index = 0;
  for (const json& f : doc["features"]) {
    const json props = f.value("properties", json::object());
    const std::string where = "plots file " + feature_label(index, props);
    if (!props.is_object()) throw ParseError(where + ": missing properties");
    for (const char* key : {"plot_id", "crop", "district"}) {
      if (!props.contains(key) || !props[key].is_string()) {
        throw ParseError(where + ": missing or non-string property '" + key + "'");
      }
    }
    if (!props.contains("season_year") || !props["season_year"].is_number_integer()) {
      throw ParseError(where + ": missing or non-integer property 'season_year'");
    }
    const json geom = f.value("geometry", json());
    if (!geom.is_object() || geom.value("type", "") != "Polygon" || !geom.contains("coordinates") ||
        !geom["coordinates"].is_array() || geom["coordinates"].empty()) {
      throw ParseError(where + ": geometry must be a Polygon");
    }

    PlotRecord plot;
    plot.plot_id = props["plot_id"].get<std::string>();
    if (plot.plot_id.empty()) throw ParseError(where + ": empty plot_id");
    if (!seen.insert(plot.plot_id).second) {
      throw ParseError(where + ": duplicate plot_id '" + plot.plot_id + "'");
    }
    plot.polygon = parse_ring(geom["coordinates"][0], where);
    if (plot.polygon.size() > 1 && plot.polygon.front() == plot.polygon.back()) plot.polygon.pop_back();
    plot.claimed_label = crops.parse(props["crop"].get<std::string>());
    plot.district = props["district"].get<std::string>();
    plot.season_year = props["season_year"].get<int>();
    if (props.contains("pixel_ids")) {
      if (!props["pixel_ids"].is_array()) throw ParseError(where + ": pixel_ids must be an array");
      for (const json& id : props["pixel_ids"]) {
        if (!id.is_string()) throw ParseError(where + ": pixel_ids must hold strings");
        plot.pixel_ids.push_back(id.get<std::string>());
      }
    }
    plots.push_back(std::move(plot));
    ++index;
  }
  return plots;
}

std::vector<MaskLayer> parse_masks(std::istream& in) {
  const json doc = read_feature_collection(in, "masks file");
  std::map<MaskKind, MaskLayer> layers;
  std::size_t index = 0;
  for (const json& f : doc["features"]) {
    const std::string where = "masks file feature " + std::to_string(index);
    const json props = f.value("properties", json::object());
    if (!props.is_object() || !props.contains("kind") || !props["kind"].is_string()) {
      throw ParseError(where + ": missing property 'kind'");
    }
    MaskKind kind;
    try {
      kind = parse_mask_kind(props["kind"].get<std::string>());
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    const json geom = f.value("geometry", json());
    const std::string type = geom.is_object() ? geom.value("type", "") : "";
    if (!geom.is_object() || !geom.contains("coordinates") || !geom["coordinates"].is_array()) {
      throw ParseError(where + ": missing geometry");
    }
    MaskLayer& layer = layers[kind];
    layer.kind = kind;
    auto add_polygon = [&](const json& rings) {
      if (!rings.is_array() || rings.empty()) throw ParseError(where + ": empty polygon");
      Ring ring = parse_ring(rings[0], where);
      if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
      if (!ring_violations(ring).empty()) throw ParseError(where + ": mask ring is not a simple polygon");
      layer.polygons.push_back(std::move(ring));
    };
    if (type == "Polygon") {
      add_polygon(geom["coordinates"]);
    } else if (type == "MultiPolygon") {
      for (const json& poly : geom["coordinates"]) add_polygon(poly);
    } else {
      throw ParseError(where + ": geometry must be a Polygon or MultiPolygon");
    }
    ++index;
  }
  std::vector<MaskLayer> out;
  for (auto& [kind, layer] : layers) out.push_back(std::move(layer));
  return out;
}

std::vector<PixelProfile> parse_pixel_series(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("pixel file: empty input");
  const std::vector<std::string> header = split_csv_line(line);
  const bool has_position = header.size() == kPixelColumns.size() + 2;
  bool header_ok = header.size() == kPixelColumns.size() || has_position;
  for (std::size_t i = 0; header_ok && i < kPixelColumns.size(); ++i) header_ok = header[i] == kPixelColumns[i];
  if (has_position) header_ok = header_ok && header[9] == "row" && header[10] == "col";
  if (!header_ok) {
    throw ParseError("pixel file: header must be pixel_id,plot_id,day,red,green,blue,nir,swir2,cloudy[,row,col]");
  }

  std::map<std::string, PixelProfile> by_id;
  std::set<std::pair<std::string, int>> seen_days;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = "row " + std::to_string(line_no);
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("pixel file: expected " + std::to_string(header.size()) + " columns, " + where);
    }
    const std::string& pixel_id = cells[0];
    const std::string& plot_id = cells[1];
    if (pixel_id.empty() || plot_id.empty()) throw ParseError("pixel file: empty id, " + where);
    const int day = parse_int(cells[2], where);
    if (!seen_days.insert({pixel_id, day}).second) {
      throw ParseError("pixel file: duplicate (pixel_id, day) ('" + pixel_id + "', " + std::to_string(day) +
                       "), " + where);
    }
    const std::string& cloud_text = cells[8];
    if (cloud_text != "0" && cloud_text != "1") {
      throw ParseError("pixel file: cloudy must be 0 or 1, " + where);
    }
    const bool cloudy = cloud_text == "1";

    auto [it, inserted] = by_id.try_emplace(pixel_id);
    PixelProfile& profile = it->second;
    if (inserted) {
      profile.pixel_id = pixel_id;
      profile.plot_id = plot_id;
    } else if (profile.plot_id != plot_id) {
      throw ParseError("pixel file: pixel '" + pixel_id + "' assigned to two plots, " + where);
    }
    for (std::size_t b = 0; b < kBandCount; ++b) {
      const double r = parse_double(cells[3 + b], where);
      if (!(r >= 0.0 && r <= 1.5)) {
        throw ParseError("pixel file: reflectance out of range, " + where);
      }
      profile.bands[b].push_back({day, r, cloudy});
    }
    if (has_position) {
      const PixelPosition pos{parse_int(cells[9], where), parse_int(cells[10], where)};
      if (profile.position && !(*profile.position == pos)) {
        throw ParseError("pixel file: pixel '" + pixel_id + "' changes position, " + where);
      }
      profile.position = pos;
    }
  }

  std::vector<PixelProfile> out;
  out.reserve(by_id.size());
  for (auto& [id, profile] : by_id) {
    for (auto& samples : profile.bands) {
      std::sort(samples.begin(), samples.end(),
                [](const BandSample& a, const BandSample& b) { return a.day < b.day; });
    }
    out.push_back(std::move(profile));
  }
  return out;
}

std::vector<SeedEntry> parse_seed_file(std::istream& in, const CropSet& crops) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("seed file: empty input");
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"plot_id", "verified_crop"}) {
    throw ParseError("seed file: header must be plot_id,verified_crop");
  }
  std::vector<SeedEntry> out;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = "row " + std::to_string(line_no);
    if (cells.size() != 2 || cells[0].empty()) throw ParseError("seed file: malformed " + where);
    if (!seen.insert(cells[0]).second) throw ParseError("seed file: duplicate plot_id, " + where);
    const CropLabel label = crops.parse(cells[1]);
    if (!label.is_crop()) throw ParseError("seed file: '" + cells[1] + "' is not a configured crop, " + where);
    out.push_back({cells[0], label});
  }
  return out;
}

JoinResult join_and_check(std::vector<PlotRecord> plots, std::vector<PixelProfile> pixels,
                          std::vector<MaskLayer> masks, const TimeGrid& grid) {
  grid.validate();
  JoinResult result;
  Dataset& ds = result.dataset;
  ds.grid = grid;

  std::set<MaskKind> kinds;
  for (const MaskLayer& layer : masks) {
    if (!kinds.insert(layer.kind).second) {
      throw DataError("mask kind " + std::string(to_string(layer.kind)) + " appears in two layers");
    }
  }
  ds.masks = std::move(masks);

  std::map<std::string, PlotRecord> plot_map;
  for (PlotRecord& p : plots) {
    const std::string id = p.plot_id;
    if (!plot_map.emplace(id, std::move(p)).second) throw DataError("duplicate plot_id '" + id + "'");
  }
  std::map<std::string, PixelProfile> pixel_map;
  for (PixelProfile& px : pixels) {
    const auto problems = px.violations();
    if (!problems.empty()) throw DataError("pixel '" + px.pixel_id + "': " + problems.front());
    if (!plot_map.contains(px.plot_id)) {
      throw DataError("pixel '" + px.pixel_id + "' references nonexistent plot '" + px.plot_id + "'");
    }
    const std::string id = px.pixel_id;
    if (!pixel_map.emplace(id, std::move(px)).second) throw DataError("duplicate pixel_id '" + id + "'");
  }

  // Members = declared ids that resolve, plus every pixel pointing at the plot.
  std::map<std::string, std::set<std::string>> members;
  for (auto& [plot_id, plot] : plot_map) {
    auto& set = members[plot_id];
    for (const std::string& pid : plot.pixel_ids) {
      auto it = pixel_map.find(pid);
      if (it == pixel_map.end()) continue;
      if (it->second.plot_id != plot_id) {
        throw DataError("plot '" + plot_id + "' lists pixel '" + pid + "' which belongs to plot '" +
                        it->second.plot_id + "'");
      }
      set.insert(pid);
    }
  }
  for (const auto& [pixel_id, px] : pixel_map) members[px.plot_id].insert(pixel_id);

  for (auto& [plot_id, plot] : plot_map) {
    const auto& set = members[plot_id];
    if (set.empty()) {
      result.eliminations.push_back(
          {plot_id, SubjectKind::Plot, Level::Pre, Reason::NoPixels, "no resolvable pixels"});
      continue;
    }
    plot.pixel_ids.assign(set.begin(), set.end());
    ds.plots.emplace(plot_id, std::move(plot));
  }
  ds.pixels = std::move(pixel_map);
  return result;
}

void write_plots(std::ostream& out, const std::vector<PlotRecord>& plots) {
  json features = json::array();
  for (const PlotRecord& p : plots) {
    json props = {{"plot_id", p.plot_id},
                  {"crop", p.claimed_label.name()},
                  {"district", p.district},
                  {"season_year", p.season_year}};
    if (!p.pixel_ids.empty()) props["pixel_ids"] = p.pixel_ids;
    features.push_back({{"type", "Feature"},
                        {"properties", props},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring_to_json(p.polygon)})}}}});
  }
  out << json{{"type", "FeatureCollection"}, {"features", features}}.dump(1) << '\n';
}

void write_masks(std::ostream& out, const std::vector<MaskLayer>& masks) {
  json features = json::array();
  for (const MaskLayer& layer : masks) {
    for (const Ring& ring : layer.polygons) {
      features.push_back({{"type", "Feature"},
                          {"properties", {{"kind", std::string(to_string(layer.kind))}}},
                          {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring_to_json(ring)})}}}});
    }
  }
  out << json{{"type", "FeatureCollection"}, {"features", features}}.dump(1) << '\n';
}

void write_pixel_series(std::ostream& out, const std::vector<PixelProfile>& pixels) {
  const bool with_position =
      !pixels.empty() && std::all_of(pixels.begin(), pixels.end(), [](const PixelProfile& p) { return p.position.has_value(); });
  out << "pixel_id,plot_id,day,red,green,blue,nir,swir2,cloudy";
  if (with_position) out << ",row,col";
  out << '\n';
  for (const PixelProfile& px : pixels) {
    for (std::size_t i = 0; i < px.sample_count(); ++i) {
      out << px.pixel_id << ',' << px.plot_id << ',' << px.bands[0][i].day;
      for (std::size_t b = 0; b < kBandCount; ++b) out << ',' << format_number(px.bands[b][i].reflectance);
      out << ',' << (px.bands[0][i].cloudy ? 1 : 0);
      if (with_position) out << ',' << px.position->row << ',' << px.position->col;
      out << '\n';
    }
  }
}

}  // namespace gtclean
