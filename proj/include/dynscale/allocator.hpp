#pragma once

// Bandit-style budget allocation across a batch. Every query is an arm; each
// round funds one sampling unit for the queries with the highest
//   priority = uncertainty + c * sqrt(ln(B_used) / B_i)
// with budgets counted in samples.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynscale/backend.hpp"
#include "dynscale/random.hpp"
#include "dynscale/sampler.hpp"
#include "dynscale/types.hpp"
#include "dynscale/uncertainty.hpp"

namespace dynscale {

struct PriorityScore {
    double exploit = 0.0;
    double explore = 0.0;
    double total = 0.0;

    bool operator==(const PriorityScore&) const = default;
};

struct AllocatorConfig {
    double exploration_ratio = 0.25;
    /// Queries funded per round; unset means max(1, m / 8).
    std::optional<int> subset_size;
    UncertaintyMeasure measure = UncertaintyMeasure::variation_ratio;
    std::uint64_t tie_break_seed = 0;

    int effective_subset_size(std::size_t query_count) const;
    void validate() const;

    bool operator==(const AllocatorConfig&) const = default;
};

enum class Correctness { correct, incorrect, unknown };

std::string_view to_string(Correctness c);
Correctness parse_correctness(std::string_view name);

enum class RoundPhase { initial, dynamic, uniform };

std::string_view to_string(RoundPhase p);
RoundPhase parse_round_phase(std::string_view name);

struct QueryPriority {
    std::string query_id;
    PriorityScore score;

    bool operator==(const QueryPriority&) const = default;
};

struct AllocationRound {
    int round_index = 0;
    RoundPhase phase = RoundPhase::dynamic;
    /// Query-set order. Empty for the initial round.
    std::vector<QueryPriority> priorities;
    std::vector<std::string> selected;
    /// Correctness of each query's current vote at round start. Filled by an
    /// evaluation observer, never read by the allocator.
    std::optional<std::map<std::string, Correctness>> correctness_snapshot;
    std::int64_t used_samples = 0;
    std::int64_t charged_samples = 0;
    std::int64_t output_tokens = 0;
    /// Slots that produced no record this round.
    int shortfall = 0;

    bool operator==(const AllocationRound&) const = default;
};

struct BudgetLedger {
    std::int64_t total_samples = 0;
    std::int64_t unit_size = 0;
    /// Samples that materialized into records; equals the sum of spent_samples.
    std::int64_t used_samples = 0;
    /// Samples committed by funded units (units x unit_size); drives the loop guard.
    std::int64_t charged_samples = 0;
    std::int64_t output_tokens = 0;
    std::vector<AllocationRound> rounds;

    bool operator==(const BudgetLedger&) const = default;
};

/// Outcome of any policy (allocator or baseline).
struct PolicyResult {
    std::vector<QueryState> states;
    BudgetLedger ledger;
    /// Index-aligned with states.
    std::vector<std::optional<std::string>> answers;
};

/// Throws Error(invalid_state) when the state has no spent samples.
PriorityScore sampling_priority(const QueryState& state, std::int64_t used_samples, const AllocatorConfig& config);

/// Ids of the subset_size highest totals; exact ties broken uniformly at random.
std::vector<std::string> select_subset(std::span<const QueryPriority> priorities, std::size_t subset_size, Rng& rng);

/// Called once per round after selection and before funding. The harness uses
/// it to attach correctness snapshots; the allocator ignores any changes other
/// than to correctness_snapshot.
using RoundObserver = std::function<void(AllocationRound&, std::span<const QueryState>)>;

PolicyResult allocate(const QuerySet& queries, Backend& backend, const SamplerConfig& sampler,
                      const AllocatorConfig& config, std::int64_t total_samples, SeedStream seed,
                      const RoundObserver& observer = {});

/// Seed of the unit-th funded unit of a query.
SeedStream unit_seed(SeedStream run_seed, const std::string& query_id, int unit);

/// Throws Error(invalid_state) if the ledger disagrees with the states.
void check_conservation(const BudgetLedger& ledger, std::span<const QueryState> states);

}  // namespace dynscale
