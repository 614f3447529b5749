#include "tspe/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "tspe/error.hpp"

namespace tspe {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("roc_auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks (1-based) summed over positives. Ranks are half-integers, so the
  // sum and the U statistic below are exact in double.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        rank_sum += mid;
        ++pos;
      } else if (labels[order[t]] != 0) {
        throw InvalidArgument("roc_auc: label outside {0,1}");
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw InvalidArgument("roc_auc: both classes must be present");
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw InvalidArgument("accuracy: size mismatch");
  if (scores.empty()) throw InvalidArgument("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int predicted = scores[i] > threshold ? 1 : 0;
    hit += predicted == labels[i] ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

}  // namespace tspe
