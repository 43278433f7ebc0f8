#include "gtclean/verify.hpp"

#include <algorithm>
#include <cmath>

namespace gtclean {
namespace {

constexpr double kTieTolerance = 1e-12;

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("distance: vector lengths differ");
  if (a.size() < 2) throw DataError("distance: vectors need at least 2 elements");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> centred(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x -= mean;
  return out;
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Cosine: return "cosine";
    case Metric::Pearson: return "pearson";
    case Metric::Manhattan: return "manhattan";
  }
  return "?";
}

std::string_view to_string(Decision decision) {
  return decision == Decision::Confirmed ? "CONFIRMED" : "FLAGGED";
}

SpectralEmbedding embed_plot(const std::string& plot_id, std::span<const CleanProfile* const> pixels) {
  if (pixels.empty()) throw DataError("embed_plot: plot '" + plot_id + "' has no retained pixels");
  const std::size_t steps = pixels.front()->bands[0].size();
  SpectralEmbedding e;
  e.plot_id = plot_id;
  e.vector.assign(kBandCount * steps, 0.0);
  for (const CleanProfile* px : pixels) {
    for (std::size_t b = 0; b < kBandCount; ++b) {
      if (px->bands[b].size() != steps) throw DataError("embed_plot: pixel '" + px->pixel_id + "' has a different length");
      for (std::size_t t = 0; t < steps; ++t) e.vector[b * steps + t] += px->bands[b][t];
    }
  }
  for (double& v : e.vector) v /= static_cast<double>(pixels.size());
  return e;
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

MedianSet build_median_profiles(const std::vector<std::pair<SpectralEmbedding, CropLabel>>& seeds,
                                std::size_t min_support) {
  std::map<std::string, std::vector<const SpectralEmbedding*>> by_crop;
  std::size_t dim = 0;
  for (const auto& [embedding, label] : seeds) {
    if (!label.is_crop()) throw DataError("seed '" + embedding.plot_id + "' has a non-crop label");
    if (dim == 0) dim = embedding.vector.size();
    if (embedding.vector.size() != dim) throw DataError("seed embeddings differ in length");
    by_crop[label.name()].push_back(&embedding);
  }
  MedianSet out;
  for (const auto& [crop, members] : by_crop) {
    if (members.size() < min_support) {
      throw DataError("crop '" + crop + "' has " + std::to_string(members.size()) + " seed plots, needs " +
                      std::to_string(min_support));
    }
    MedianProfile m;
    m.crop = CropLabel::crop(crop);
    m.support = members.size();
    m.vector.resize(dim);
    std::vector<double> column(members.size());
    for (std::size_t d = 0; d < dim; ++d) {
      for (std::size_t i = 0; i < members.size(); ++i) column[i] = members[i]->vector[d];
      m.vector[d] = median_of(column);
    }
    out.emplace(crop, std::move(m));
  }
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw DataError("cosine similarity of a zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const std::vector<double> ca = centred(a);
  const std::vector<double> cb = centred(b);
  const double na = std::sqrt(dot(ca, ca));
  const double nb = std::sqrt(dot(cb, cb));
  if (na == 0.0 || nb == 0.0) throw DataError("pearson correlation of a constant vector");
  return std::clamp(dot(ca, cb) / (na * nb), -1.0, 1.0);
}

double manhattan_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("distance: vector lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

DistanceScores distance_scores(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  DistanceScores s;
  try {
    s.cosine_sim = cosine_similarity(a, b);
  } catch (const DataError&) {
  }
  try {
    s.pearson_r = pearson_correlation(a, b);
  } catch (const DataError&) {
  }
  s.manhattan = manhattan_distance(a, b);
  return s;
}

Verdict verify_plot(const SpectralEmbedding& embedding, const MedianSet& medians, const CropLabel& claimed) {
  if (medians.size() < 2) throw DataError("verify_plot: need medians for at least two crops");
  Verdict v;
  v.plot_id = embedding.plot_id;
  v.claimed = claimed;

  for (Metric metric : kMetrics) {
    // Higher is better for every metric after negating manhattan.
    std::vector<std::pair<double, const MedianProfile*>> scored;
    bool abstain = false;
    for (const auto& [name, median] : medians) {
      const DistanceScores s = distance_scores(embedding.vector, median.vector);
      std::optional<double> score;
      if (metric == Metric::Cosine) score = s.cosine_sim;
      if (metric == Metric::Pearson) score = s.pearson_r;
      if (metric == Metric::Manhattan) score = -s.manhattan;
      if (!score) {
        abstain = true;
        break;
      }
      scored.emplace_back(*score, &median);
    }
    if (abstain) continue;
    std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    const double gap = scored[0].first - scored[1].first;
    if (gap <= kTieTolerance * std::max(1.0, std::abs(scored[0].first))) continue;
    v.votes[static_cast<std::size_t>(metric)] = scored[0].second->crop;
  }

  int agree = 0;
  for (const auto& vote : v.votes) {
    if (vote && *vote == claimed) ++agree;
  }
  v.decision = agree >= 2 ? Decision::Confirmed : Decision::Flagged;
  return v;
}

}  // namespace gtclean
