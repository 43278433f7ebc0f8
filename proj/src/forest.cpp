#include "gtclean/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "gtclean/rng.hpp"

namespace gtclean {
namespace {

using nlohmann::json;

constexpr double kSplitTolerance = 1e-12;
constexpr const char* kFormat = "gtclean-forest";
constexpr int kFormatVersion = 1;

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<FeatureRow>& rows, const std::vector<std::uint32_t>& labels, std::size_t n_classes,
              const ForestConfig& config, std::size_t mtry)
      : rows_(rows), labels_(labels), n_classes_(n_classes), config_(config), mtry_(mtry) {}

  DecisionTree build(std::vector<std::uint32_t> sample, Rng& rng) {
    DecisionTree tree;
    struct Pending {
      int node;
      std::size_t begin, end;
      int depth;
    };
    sample_ = std::move(sample);
    tree.nodes.emplace_back();
    std::vector<Pending> stack{{0, 0, sample_.size(), 0}};
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      std::vector<std::uint32_t> counts(n_classes_, 0);
      for (std::size_t i = job.begin; i < job.end; ++i) ++counts[labels_[sample_[i]]];
      const std::size_t n = job.end - job.begin;
      const bool pure = std::count_if(counts.begin(), counts.end(), [](std::uint32_t c) { return c > 0; }) <= 1;
      const bool depth_cap = config_.max_depth > 0 && job.depth >= config_.max_depth;
      const bool too_small = n < 2 * static_cast<std::size_t>(config_.min_samples_leaf);
      std::optional<Split> split;
      if (!pure && !depth_cap && !too_small) split = best_split(job.begin, job.end, counts, rng);
      if (!split) {
        tree.nodes[static_cast<std::size_t>(job.node)].counts = std::move(counts);
        continue;
      }
      const auto mid = std::partition(sample_.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                      sample_.begin() + static_cast<std::ptrdiff_t>(job.end), [&](std::uint32_t r) {
                                        return rows_[r].features[static_cast<std::size_t>(split->feature)] <=
                                               split->threshold;
                                      });
      const auto cut = static_cast<std::size_t>(mid - sample_.begin());
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
      node.feature = split->feature;
      node.threshold = split->threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, cut, job.end, job.depth + 1});
      stack.push_back({left, job.begin, cut, job.depth + 1});
    }
    return tree;
  }

 private:
  std::optional<Split> best_split(std::size_t begin, std::size_t end, const std::vector<std::uint32_t>& parent,
                                  Rng& rng) {
    const std::size_t d = rows_.front().features.size();
    if (order_.size() != d) {
      order_.resize(d);
    }
    std::iota(order_.begin(), order_.end(), 0);
    // Partial Fisher-Yates: features are drawn in batches of mtry until one
    // batch yields a valid split or every feature has been seen.
    std::optional<Split> best;
    std::size_t drawn = 0;
    while (drawn < d) {
      const std::size_t batch_end = std::min(d, drawn + mtry_);
      for (std::size_t i = drawn; i < batch_end; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
        std::swap(order_[i], order_[j]);
      }
      std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(drawn),
                                     order_.begin() + static_cast<std::ptrdiff_t>(batch_end));
      std::sort(batch.begin(), batch.end());
      for (std::size_t f : batch) scan_feature(f, begin, end, parent, best);
      drawn = batch_end;
      if (best) break;
    }
    return best;
  }

  void scan_feature(std::size_t f, std::size_t begin, std::size_t end, const std::vector<std::uint32_t>& parent,
                    std::optional<Split>& best) {
    const std::size_t n = end - begin;
    values_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t r = sample_[begin + i];
      values_[i] = {rows_[r].features[f], labels_[r]};
    }
    std::sort(values_.begin(), values_.end());
    if (values_.front().first == values_.back().first) return;

    left_.assign(n_classes_, 0);
    right_.assign(parent.begin(), parent.end());
    double sq_left = 0.0;
    double sq_right = 0.0;
    for (std::uint32_t c : parent) sq_right += static_cast<double>(c) * c;
    const auto min_leaf = static_cast<std::size_t>(config_.min_samples_leaf);
    const auto total = static_cast<double>(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::uint32_t c = values_[i].second;
      sq_left += 2.0 * left_[c] + 1.0;
      sq_right -= 2.0 * right_[c] - 1.0;
      ++left_[c];
      --right_[c];
      const std::size_t n_left = i + 1;
      if (values_[i].first == values_[i + 1].first) continue;
      if (n_left < min_leaf || n - n_left < min_leaf) continue;
      const auto nl = static_cast<double>(n_left);
      const double nr = total - nl;
      // Weighted child Gini: (n - sum_l c^2/n_l - sum_r c^2/n_r) / n.
      const double impurity = (total - sq_left / nl - sq_right / nr) / total;
      if (!best || impurity < best->impurity - kSplitTolerance) {
        const double a = values_[i].first;
        const double b = values_[i + 1].first;
        double threshold = a + (b - a) / 2.0;
        if (!(threshold < b)) threshold = a;
        best = Split{static_cast<int>(f), threshold, impurity};
      }
    }
  }

  const std::vector<FeatureRow>& rows_;
  const std::vector<std::uint32_t>& labels_;
  std::size_t n_classes_;
  const ForestConfig& config_;
  std::size_t mtry_;
  std::vector<std::uint32_t> sample_;
  std::vector<std::size_t> order_;
  std::vector<std::pair<double, std::uint32_t>> values_;
  std::vector<std::uint32_t> left_, right_;
};

std::size_t argmax_lowest(const std::vector<std::uint32_t>& counts) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] > counts[best]) best = i;
  }
  return best;
}

std::size_t worker_count(int requested, std::size_t jobs) {
  std::size_t n = requested > 0 ? static_cast<std::size_t>(requested) : std::thread::hardware_concurrency();
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(1, jobs));
}

/// Runs fn(i) for i in [0, jobs) over a fixed stride partition.
template <typename Fn>
void parallel_for(std::size_t jobs, int threads, Fn fn) {
  const std::size_t workers = worker_count(threads, jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < jobs; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

json config_to_json(const ForestConfig& c) {
  return {{"n_trees", c.n_trees},
          {"max_depth", c.max_depth},
          {"min_samples_leaf", c.min_samples_leaf},
          {"features_per_split", c.features_per_split},
          {"bootstrap", c.bootstrap},
          {"seed", c.seed}};
}

}  // namespace

std::vector<double> pixel_features(const CleanProfile& profile) {
  std::vector<double> out;
  out.reserve((kBandCount + 1) * profile.ndvi.size());
  for (const auto& band : profile.bands) out.insert(out.end(), band.begin(), band.end());
  out.insert(out.end(), profile.ndvi.begin(), profile.ndvi.end());
  return out;
}

void ForestConfig::validate(std::size_t d) const {
  if (n_trees < 1) throw ConfigError("forest n_trees must be at least 1");
  if (max_depth < 0) throw ConfigError("forest max_depth must be non-negative (0 = unlimited)");
  if (min_samples_leaf < 1) throw ConfigError("forest min_samples_leaf must be at least 1");
  if (features_per_split < 0 || (d > 0 && static_cast<std::size_t>(features_per_split) > d)) {
    throw ConfigError("forest features_per_split must be in [1, " + std::to_string(d) + "] or 0 for sqrt(d)");
  }
}

int ForestConfig::resolved_features_per_split(std::size_t d) const {
  if (features_per_split > 0) return features_per_split;
  return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
}

double gini(const std::vector<std::uint32_t>& counts) {
  double n = 0.0;
  for (auto c : counts) n += c;
  if (n == 0.0) return 0.0;
  double s = 0.0;
  for (auto c : counts) s += (c / n) * (c / n);
  return 1.0 - s;
}

std::size_t DecisionTree::predict_index(const std::vector<double>& x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return argmax_lowest(nodes[i].counts);
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

CropLabel ForestModel::predict_one(const std::vector<double>& x) const {
  if (x.size() != n_features) {
    throw DataError("predict: feature length " + std::to_string(x.size()) + " does not match model dimension " +
                    std::to_string(n_features));
  }
  std::vector<std::uint32_t> votes(classes.size(), 0);
  for (const DecisionTree& t : trees) ++votes[t.predict_index(x)];
  return CropLabel::crop(classes[argmax_lowest(votes)]);
}

std::vector<CropLabel> ForestModel::predict(const std::vector<FeatureRow>& rows) const {
  std::vector<CropLabel> out(rows.size());
  parallel_for(rows.size(), config.threads, [&](std::size_t i) { out[i] = predict_one(rows[i].features); });
  return out;
}

ForestModel train_forest(const std::vector<FeatureRow>& rows, const ForestConfig& config) {
  if (rows.empty()) throw DataError("train_forest: no training rows");
  const std::size_t d = rows.front().features.size();
  if (d == 0) throw DataError("train_forest: rows have no features");
  config.validate(d);

  std::set<std::string> names;
  for (const FeatureRow& r : rows) {
    if (r.features.size() != d) throw DataError("train_forest: row '" + r.pixel_id + "' has a different length");
    if (!r.label.is_crop()) throw DataError("train_forest: row '" + r.pixel_id + "' has a non-crop label");
    for (double v : r.features) {
      if (!std::isfinite(v)) throw DataError("train_forest: row '" + r.pixel_id + "' has a non-finite feature");
    }
    names.insert(r.label.name());
  }
  if (names.size() < 2) throw DataError("train_forest: need at least two classes, got " + std::to_string(names.size()));

  ForestModel model;
  model.classes.assign(names.begin(), names.end());
  model.n_features = d;
  model.config = config;
  std::map<std::string, std::uint32_t> index;
  for (std::size_t i = 0; i < model.classes.size(); ++i) index[model.classes[i]] = static_cast<std::uint32_t>(i);
  std::vector<std::uint32_t> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = index.at(rows[i].label.name());

  const auto mtry = static_cast<std::size_t>(config.resolved_features_per_split(d));
  const auto n_trees = static_cast<std::size_t>(config.n_trees);
  const auto n = static_cast<std::uint32_t>(rows.size());
  model.trees.resize(n_trees);
  std::vector<std::vector<bool>> in_bag(n_trees);
  const std::uint64_t base = derive_seed(config.seed, "forest.trees");

  parallel_for(n_trees, config.threads, [&](std::size_t t) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(t)));
    std::vector<std::uint32_t> sample(n);
    if (config.bootstrap) {
      for (auto& s : sample) s = static_cast<std::uint32_t>(rng.below(n));
    } else {
      std::iota(sample.begin(), sample.end(), 0u);
    }
    in_bag[t].assign(n, false);
    for (auto s : sample) in_bag[t][s] = true;
    TreeBuilder builder(rows, labels, model.classes.size(), config, mtry);
    model.trees[t] = builder.build(std::move(sample), rng);
  });

  if (config.bootstrap) {
    std::size_t scored = 0, correct = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      std::vector<std::uint32_t> votes(model.classes.size(), 0);
      bool any = false;
      for (std::size_t t = 0; t < n_trees; ++t) {
        if (in_bag[t][i]) continue;
        ++votes[model.trees[t].predict_index(rows[i].features)];
        any = true;
      }
      if (!any) continue;
      ++scored;
      if (argmax_lowest(votes) == labels[i]) ++correct;
    }
    if (scored > 0) model.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
  }
  return model;
}

void save_forest_json(std::ostream& out, const ForestModel& model) {
  json trees = json::array();
  for (const DecisionTree& t : model.trees) {
    json nodes = json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"counts", n.counts}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  json doc = {{"format", kFormat},
              {"version", kFormatVersion},
              {"classes", model.classes},
              {"n_features", model.n_features},
              {"config", config_to_json(model.config)},
              {"trees", std::move(trees)}};
  if (model.oob_accuracy) doc["oob_accuracy"] = *model.oob_accuracy;
  out << doc.dump() << '\n';
}

ForestModel load_forest_json(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("forest model: ") + e.what());
  }
  try {
    if (doc.value("format", std::string()) != kFormat) throw ParseError("forest model: not a gtclean-forest document");
    if (!doc.contains("version")) throw ParseError("forest model: missing version");
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw ParseError("forest model: unsupported version " + doc.at("version").dump());
    }
    ForestModel m;
    m.classes = doc.at("classes").get<std::vector<std::string>>();
    m.n_features = doc.at("n_features").get<std::size_t>();
    const json& c = doc.at("config");
    m.config.n_trees = c.at("n_trees").get<int>();
    m.config.max_depth = c.at("max_depth").get<int>();
    m.config.min_samples_leaf = c.at("min_samples_leaf").get<int>();
    m.config.features_per_split = c.at("features_per_split").get<int>();
    m.config.bootstrap = c.at("bootstrap").get<bool>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    if (doc.contains("oob_accuracy")) m.oob_accuracy = doc.at("oob_accuracy").get<double>();
    for (const json& jt : doc.at("trees")) {
      DecisionTree t;
      const json& nodes = jt.at("nodes");
      for (const json& jn : nodes) {
        TreeNode n;
        if (jn.contains("counts")) {
          n.counts = jn.at("counts").get<std::vector<std::uint32_t>>();
          if (n.counts.size() != m.classes.size()) throw ParseError("forest model: leaf count length mismatch");
        } else {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
          const auto limit = static_cast<int>(nodes.size());
          if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= m.n_features || n.left <= 0 ||
              n.right <= 0 || n.left >= limit || n.right >= limit) {
            throw ParseError("forest model: invalid split node");
          }
        }
        t.nodes.push_back(std::move(n));
      }
      if (t.nodes.empty()) throw ParseError("forest model: empty tree");
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("forest model: ") + e.what());
  }
}

std::set<std::string> split_plots(const std::vector<std::pair<std::string, CropLabel>>& plots, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
  std::map<std::string, CropLabel> label_of;
  for (const auto& [id, label] : plots) {
    auto [it, inserted] = label_of.emplace(id, label);
    if (!inserted && it->second != label) throw DataError("split: plot '" + id + "' carries more than one label");
  }
  std::map<std::string, std::vector<std::string>> by_crop;
  for (const auto& [id, label] : label_of) by_crop[label.name()].push_back(id);

  std::set<std::string> test;
  const std::uint64_t base = derive_seed(seed, "split");
  for (auto& [crop, ids] : by_crop) {
    if (ids.size() < 2) throw DataError("split: crop '" + crop + "' has fewer than 2 plots, cannot stratify");
    Rng rng(derive_seed(base, stable_hash(crop)));
    rng.shuffle(std::span<std::string>(ids));
    const auto n = static_cast<double>(ids.size());
    auto n_test = static_cast<std::size_t>(std::floor(test_fraction * n + 0.5));
    n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);
    test.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  }
  return test;
}

RowSplit split_by_plot(const std::vector<FeatureRow>& rows, double test_fraction, std::uint64_t seed) {
  std::vector<std::pair<std::string, CropLabel>> plots;
  plots.reserve(rows.size());
  for (const FeatureRow& r : rows) plots.emplace_back(r.plot_id, r.label);
  const std::set<std::string> test = split_plots(plots, test_fraction, seed);
  RowSplit out;
  for (const FeatureRow& r : rows) (test.count(r.plot_id) ? out.test : out.train).push_back(r);
  return out;
}

}  // namespace gtclean
