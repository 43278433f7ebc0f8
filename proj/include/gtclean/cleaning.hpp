#pragma once

#include <string>
#include <vector>

#include "gtclean/core.hpp"
#include "gtclean/kmeans.hpp"
#include "gtclean/preprocess.hpp"

namespace gtclean {

struct L1Config {
  double mask_overlap_max = 0.05;
  double plot_overlap_max = 0.25;
  int grid_resolution = 256;

  void validate() const;
};

struct PlotFilterResult {
  std::vector<PlotRecord> retained;
  /// Plot-level records only; callers cascade to pixels.
  std::vector<EliminationRecord> eliminations;
};

/// Level 1: UNKNOWN labels, mask overlap and plot-plot overlap. Every test
/// runs against the original input set, so the outcome does not depend on
/// evaluation order. Both plots of an excessive pair are eliminated.
PlotFilterResult l1_filter(const std::vector<PlotRecord>& plots, const std::vector<MaskLayer>& masks,
                           const L1Config& config);

struct PixelFilterResult {
  std::vector<CleanProfile> retained;
  /// Pixel records, decimated-plot records and their cascaded pixel records.
  std::vector<EliminationRecord> eliminations;
  std::vector<std::string> decimated_plots;
};

/// Level 2: keep pixels whose peak NDVI reaches `ndvi_max_min`, then
/// decimate plots keeping fewer than `plot_survival_min` of their pixels.
PixelFilterResult l2_filter(const std::vector<CleanProfile>& profiles, double ndvi_max_min,
                            double plot_survival_min);

/// Level 3: drop pixels in FLAT or NOISY clusters, then decimate plots as in
/// level 2. `model.assignment` is aligned with `profiles`.
PixelFilterResult l3_filter(const std::vector<CleanProfile>& profiles, const ClusterModel& model,
                            double plot_survival_min);

}  // namespace gtclean
