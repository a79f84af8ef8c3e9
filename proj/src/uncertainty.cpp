#include "dynscale/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dynscale/error.hpp"

namespace dynscale {

std::string_view to_string(UncertaintyMeasure m)
{
    switch (m) {
    case UncertaintyMeasure::variation_ratio: return "variation_ratio";
    case UncertaintyMeasure::normalized_entropy: return "normalized_entropy";
    case UncertaintyMeasure::inverse_margin: return "inverse_margin";
    }
    return "variation_ratio";
}

UncertaintyMeasure parse_uncertainty_measure(std::string_view name)
{
    if (name == "variation_ratio") return UncertaintyMeasure::variation_ratio;
    if (name == "normalized_entropy") return UncertaintyMeasure::normalized_entropy;
    if (name == "inverse_margin") return UncertaintyMeasure::inverse_margin;
    throw Error(ErrorCode::invalid_config, "unknown uncertainty measure '" + std::string(name) + "'");
}

double variation_ratio(const AnswerCounts& counts)
{
    if (counts.n <= 0) return 1.0;
    std::int64_t top = 0;
    for (const auto& [answer, c] : counts.counts) top = std::max(top, c);
    return 1.0 - static_cast<double>(top) / static_cast<double>(counts.n);
}

double normalized_entropy(const AnswerCounts& counts)
{
    if (counts.n <= 0) return 1.0;
    const auto k = counts.counts.size();
    if (k < 2) return 0.0;
    const double n = static_cast<double>(counts.n);
    double h = 0.0;
    for (const auto& [answer, c] : counts.counts) {
        if (c <= 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return std::clamp(h / std::log(static_cast<double>(k)), 0.0, 1.0);
}

double inverse_margin(const AnswerCounts& counts)
{
    if (counts.n <= 0) return 1.0;
    std::int64_t first = 0;
    std::int64_t second = 0;
    for (const auto& [answer, c] : counts.counts) {
        if (c > first) {
            second = first;
            first = c;
        } else if (c > second) {
            second = c;
        }
    }
    const double n = static_cast<double>(counts.n);
    return 1.0 - (static_cast<double>(first) - static_cast<double>(second)) / n;
}

double uncertainty(UncertaintyMeasure m, const AnswerCounts& counts)
{
    switch (m) {
    case UncertaintyMeasure::variation_ratio: return variation_ratio(counts);
    case UncertaintyMeasure::normalized_entropy: return normalized_entropy(counts);
    case UncertaintyMeasure::inverse_margin: return inverse_margin(counts);
    }
    return variation_ratio(counts);
}

}  // namespace dynscale
