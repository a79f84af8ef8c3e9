#pragma once

// Uncertainty measures over empirical answer counts. All map into [0, 1];
// zero evidence (n = 0) maps to 1.

#include <string_view>

#include "dynscale/answer.hpp"

namespace dynscale {

enum class UncertaintyMeasure { variation_ratio, normalized_entropy, inverse_margin };

std::string_view to_string(UncertaintyMeasure m);
UncertaintyMeasure parse_uncertainty_measure(std::string_view name);

/// 1 - max_a count(a) / n.
double variation_ratio(const AnswerCounts& counts);

/// Shannon entropy of the empirical frequencies divided by ln(k), k = number
/// of distinct answers; 0 when k = 1.
double normalized_entropy(const AnswerCounts& counts);

/// 1 - (p1 - p2) for the two largest frequencies; p2 = 0 with one answer.
double inverse_margin(const AnswerCounts& counts);

double uncertainty(UncertaintyMeasure m, const AnswerCounts& counts);

}  // namespace dynscale
