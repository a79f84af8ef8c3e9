#pragma once

// Post-hoc evaluation over run records: accuracy against budget, moving
// average smoothing, and the share of dynamic budget that went to queries
// whose current vote was wrong.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dynscale/harness.hpp"

namespace dynscale {

struct CurvePoint {
    std::int64_t budget_samples = 0;
    /// Mean output tokens actually consumed at this budget.
    double budget_tokens = 0.0;
    double accuracy = 0.0;
    int runs = 0;

    bool operator==(const CurvePoint&) const = default;
};

struct BudgetCurve {
    std::vector<CurvePoint> points;
    int smoothing_window = 1;

    bool operator==(const BudgetCurve&) const = default;
};

/// One point per distinct B_total, averaged over the records at that budget.
/// Throws Error(missing_gold) if any query lacks a gold answer.
BudgetCurve accuracy_curve(std::span<const RunRecord> records);

/// Centered moving average, truncated at the edges. window >= 1.
BudgetCurve smooth(const BudgetCurve& curve, int window);

struct AllocationRatePoint {
    int round_index = 0;
    std::int64_t used_samples = 0;
    std::int64_t output_tokens = 0;
    int funded = 0;
    int funded_incorrect = 0;
    /// Fraction of all queries that were incorrect at round start.
    double incorrect_fraction = 0.0;
    double rate = 0.0;
    double cumulative_rate = 0.0;
};

/// Per dynamic round. Throws Error(missing_gold) without correctness snapshots.
std::vector<AllocationRatePoint> effective_allocation_rate(const RunRecord& record);

void write_curve_csv(const std::filesystem::path& path, const BudgetCurve& raw, const BudgetCurve& smoothed);
void write_allocation_rate_csv(const std::filesystem::path& path, const std::string& run_id,
                               const std::vector<AllocationRatePoint>& points, bool append);

}  // namespace dynscale
