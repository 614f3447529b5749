#pragma once

#include <span>

namespace tspe {

/// Mann-Whitney ROC AUC; tied scores count 1/2. Needs both classes.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Fraction of items with (score > threshold) == label.
double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold = 0.5);

}  // namespace tspe
