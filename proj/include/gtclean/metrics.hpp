#pragma once

#include <string>
#include <vector>

#include "gtclean/core.hpp"

namespace gtclean {

struct ClassScores {
  std::string crop;
  std::size_t support = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// Fractions in [0, 1]; multiply by 100 for report percentages.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  /// UNCLEAN, L1, L2 or L3.
  std::string level;
  std::vector<std::string> classes;
  /// confusion[true][predicted], class order as in `classes`.
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<ClassScores> per_class;

  std::size_t total() const;
  /// Unweighted mean of per-class F1 over classes with support > 0.
  double macro_f1() const;
};

/// Per-crop precision, recall and F1 from the confusion matrix. Zero
/// denominators give 0. Labels outside the crop set are rejected.
EvalReport evaluate(const std::vector<CropLabel>& predicted, const std::vector<CropLabel>& truth,
                    const CropSet& crops, const std::string& level = "");

/// 2PR/(P+R), or 0 when both are 0.
double f1_from(double precision, double recall);

/// Integer percentage of a fraction, rounding halves upward.
int round_half_up_percent(double fraction);

}  // namespace gtclean
