#include "gtclean/cleaning.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

namespace gtclean {
namespace {

struct PixelVerdict {
  Reason reason;
  std::string detail;
};

// Applies per-pixel eliminations, then whole-plot decimation. Pixel order of
// the survivors follows the input.
PixelFilterResult apply_pixel_verdicts(const std::vector<CleanProfile>& profiles,
                                       const std::vector<std::optional<PixelVerdict>>& verdicts, Level level,
                                       Reason decimation, double plot_survival_min) {
  PixelFilterResult result;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_plot;  // entering, kept
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    auto& [entering, kept] = per_plot[profiles[i].plot_id];
    ++entering;
    if (!verdicts[i]) ++kept;
  }
  std::set<std::string> decimated;
  for (const auto& [plot_id, counts] : per_plot) {
    const double fraction = static_cast<double>(counts.second) / static_cast<double>(counts.first);
    if (fraction < plot_survival_min) {
      decimated.insert(plot_id);
      result.decimated_plots.push_back(plot_id);
      result.eliminations.push_back({plot_id, SubjectKind::Plot, level, decimation,
                                     std::to_string(counts.second) + " of " + std::to_string(counts.first) +
                                         " pixels survived"});
    }
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const CleanProfile& p = profiles[i];
    if (verdicts[i]) {
      result.eliminations.push_back({p.pixel_id, SubjectKind::Pixel, level, verdicts[i]->reason, verdicts[i]->detail});
    } else if (decimated.contains(p.plot_id)) {
      result.eliminations.push_back(
          {p.pixel_id, SubjectKind::Pixel, level, decimation, "plot " + p.plot_id + " decimated"});
    } else {
      result.retained.push_back(p);
    }
  }
  return result;
}

}  // namespace

void L1Config::validate() const {
  if (!(mask_overlap_max >= 0.0 && mask_overlap_max <= 1.0)) throw ConfigError("mask_overlap_max must be in [0, 1]");
  if (!(plot_overlap_max >= 0.0 && plot_overlap_max <= 1.0)) throw ConfigError("plot_overlap_max must be in [0, 1]");
  if (grid_resolution < 32) throw ConfigError("grid_resolution must be >= 32");
}

PlotFilterResult l1_filter(const std::vector<PlotRecord>& plots, const std::vector<MaskLayer>& masks,
                           const L1Config& config) {
  config.validate();
  const std::size_t n = plots.size();
  std::vector<std::optional<EliminationRecord>> verdict(n);

  for (std::size_t i = 0; i < n; ++i) {
    const PlotRecord& p = plots[i];
    if (!p.claimed_label.is_crop()) {
      verdict[i] = EliminationRecord{p.plot_id, SubjectKind::Plot, Level::L1, Reason::UnknownLabel,
                                     "claimed label " + p.claimed_label.name()};
      continue;
    }
    for (const MaskLayer& layer : masks) {
      for (const Ring& ring : layer.polygons) {
        const double f = overlap_fraction(p.polygon, ring, config.grid_resolution);
        if (f > config.mask_overlap_max) {
          verdict[i] = EliminationRecord{p.plot_id, SubjectKind::Plot, Level::L1, Reason::MaskOverlap,
                                         std::string(to_string(layer.kind)) + " covers " + format_fraction(f)};
          break;
        }
      }
      if (verdict[i]) break;
    }
  }

  // Pair overlap uses all plots, including ones already failing other tests.
  std::vector<BoundingBox> boxes(n);
  for (std::size_t i = 0; i < n; ++i) boxes[i] = bounding_box(plots[i].polygon);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].min_x < boxes[b].min_x || (boxes[a].min_x == boxes[b].min_x && a < b);
  });
  std::vector<std::optional<std::string>> pair_hit(n);
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t i = order[oi];
    for (std::size_t oj = oi + 1; oj < n; ++oj) {
      const std::size_t j = order[oj];
      if (boxes[j].min_x > boxes[i].max_x) break;
      if (boxes[j].min_y > boxes[i].max_y || boxes[j].max_y < boxes[i].min_y) continue;
      const double fij = overlap_fraction(plots[i].polygon, plots[j].polygon, config.grid_resolution);
      const double fji = overlap_fraction(plots[j].polygon, plots[i].polygon, config.grid_resolution);
      if (fij > config.plot_overlap_max || fji > config.plot_overlap_max) {
        if (!pair_hit[i] || plots[j].plot_id < *pair_hit[i]) pair_hit[i] = plots[j].plot_id;
        if (!pair_hit[j] || plots[i].plot_id < *pair_hit[j]) pair_hit[j] = plots[i].plot_id;
      }
    }
  }

  PlotFilterResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (verdict[i]) {
      result.eliminations.push_back(*verdict[i]);
    } else if (pair_hit[i]) {
      result.eliminations.push_back(
          {plots[i].plot_id, SubjectKind::Plot, Level::L1, Reason::PlotOverlap, "overlaps plot " + *pair_hit[i]});
    } else {
      result.retained.push_back(plots[i]);
    }
  }
  return result;
}

PixelFilterResult l2_filter(const std::vector<CleanProfile>& profiles, double ndvi_max_min, double plot_survival_min) {
  std::vector<std::optional<PixelVerdict>> verdicts(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& ndvi = profiles[i].ndvi;
    const double peak = ndvi.empty() ? -1.0 : *std::max_element(ndvi.begin(), ndvi.end());
    if (!(peak >= ndvi_max_min)) verdicts[i] = PixelVerdict{Reason::L2LowNdvi, "peak NDVI " + format_fraction(peak)};
  }
  return apply_pixel_verdicts(profiles, verdicts, Level::L2, Reason::L2PlotDecimated, plot_survival_min);
}

PixelFilterResult l3_filter(const std::vector<CleanProfile>& profiles, const ClusterModel& model,
                            double plot_survival_min) {
  if (model.assignment.size() != profiles.size()) {
    throw DataError("l3_filter: cluster assignment does not match the profile list");
  }
  std::vector<std::optional<PixelVerdict>> verdicts(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const std::size_t c = model.assignment[i];
    const ClusterFlag flag = c < model.flags.size() ? model.flags[c] : ClusterFlag::Ok;
    if (flag == ClusterFlag::Flat) verdicts[i] = PixelVerdict{Reason::L3Flat, "cluster " + std::to_string(c)};
    if (flag == ClusterFlag::Noisy) verdicts[i] = PixelVerdict{Reason::L3Noisy, "cluster " + std::to_string(c)};
  }
  return apply_pixel_verdicts(profiles, verdicts, Level::L3, Reason::L3PlotDecimated, plot_survival_min);
}

}  // namespace gtclean
