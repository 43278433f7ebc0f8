#include "gtclean/metrics.hpp"

#include <cmath>

namespace gtclean {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::size_t EvalReport::total() const {
  std::size_t n = 0;
  for (const auto& row : confusion) {
    for (std::size_t c : row) n += c;
  }
  return n;
}

double EvalReport::macro_f1() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const ClassScores& s : per_class) {
    if (s.support == 0) continue;
    sum += s.f1;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double f1_from(double precision, double recall) {
  const double den = precision + recall;
  return den > 0.0 ? 2.0 * precision * recall / den : 0.0;
}

int round_half_up_percent(double fraction) {
  // The epsilon absorbs binary representation error on exact halves (52.5%).
  return static_cast<int>(std::floor(fraction * 100.0 + 0.5 + 1e-9));
}

EvalReport evaluate(const std::vector<CropLabel>& predicted, const std::vector<CropLabel>& truth,
                    const CropSet& crops, const std::string& level) {
  if (predicted.size() != truth.size()) {
    throw DataError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(truth.size()) + " labels");
  }
  EvalReport r;
  r.level = level;
  r.classes = crops.names();
  const std::size_t k = r.classes.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.confusion[crops.index_of(truth[i])][crops.index_of(predicted[i])];
  }
  for (std::size_t c = 0; c < k; ++c) {
    ClassScores s;
    s.crop = r.classes[c];
    s.tp = r.confusion[c][c];
    for (std::size_t j = 0; j < k; ++j) {
      s.support += r.confusion[c][j];
      if (j != c) {
        s.fn += r.confusion[c][j];
        s.fp += r.confusion[j][c];
      }
    }
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    s.f1 = f1_from(s.precision, s.recall);
    r.per_class.push_back(s);
  }
  return r;
}

}  // namespace gtclean
