#include "dynscale/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "dynscale/answer.hpp"
#include "dynscale/error.hpp"

namespace dynscale {

std::string_view to_string(Correctness c)
{
    switch (c) {
    case Correctness::correct: return "correct";
    case Correctness::incorrect: return "incorrect";
    case Correctness::unknown: return "unknown";
    }
    return "unknown";
}

Correctness parse_correctness(std::string_view name)
{
    if (name == "correct") return Correctness::correct;
    if (name == "incorrect") return Correctness::incorrect;
    if (name == "unknown") return Correctness::unknown;
    throw Error(ErrorCode::schema_invalid, "unknown correctness '" + std::string(name) + "'");
}

std::string_view to_string(RoundPhase p)
{
    switch (p) {
    case RoundPhase::initial: return "initial";
    case RoundPhase::dynamic: return "dynamic";
    case RoundPhase::uniform: return "uniform";
    }
    return "dynamic";
}

RoundPhase parse_round_phase(std::string_view name)
{
    if (name == "initial") return RoundPhase::initial;
    if (name == "dynamic") return RoundPhase::dynamic;
    if (name == "uniform") return RoundPhase::uniform;
    throw Error(ErrorCode::schema_invalid, "unknown round phase '" + std::string(name) + "'");
}

int AllocatorConfig::effective_subset_size(std::size_t query_count) const
{
    if (subset_size) return *subset_size;
    return std::max(1, static_cast<int>(query_count / 8));
}

void AllocatorConfig::validate() const
{
    if (!(exploration_ratio >= 0.0) || !std::isfinite(exploration_ratio))
        throw Error(ErrorCode::invalid_config, "exploration_ratio must be finite and >= 0");
    if (subset_size && *subset_size < 1) throw Error(ErrorCode::invalid_config, "subset_size must be >= 1");
}

PriorityScore sampling_priority(const QueryState& state, std::int64_t used_samples, const AllocatorConfig& config)
{
    if (state.spent_samples < 1)
        throw Error(ErrorCode::invalid_state, "query '" + state.query.id + "' has no spent samples");
    if (used_samples < state.spent_samples)
        throw Error(ErrorCode::invalid_state, "used_samples is smaller than the query's spend");
    PriorityScore s;
    s.exploit = uncertainty(config.measure, answer_counts(state.responses));
    s.explore = config.exploration_ratio == 0.0
                    ? 0.0
                    : config.exploration_ratio * std::sqrt(std::log(static_cast<double>(used_samples)) /
                                                           static_cast<double>(state.spent_samples));
    s.total = s.exploit + s.explore;
    return s;
}

std::vector<std::string> select_subset(std::span<const QueryPriority> priorities, std::size_t subset_size, Rng& rng)
{
    std::vector<std::size_t> order(priorities.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return priorities[a].score.total > priorities[b].score.total;
    });
    const auto take = std::min(subset_size, order.size());
    std::vector<std::string> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(priorities[order[i]].query_id);
    return out;
}

SeedStream unit_seed(SeedStream run_seed, const std::string& query_id, int unit)
{
    return run_seed.derive("unit").derive(query_id).derive(static_cast<std::uint64_t>(unit));
}

void check_conservation(const BudgetLedger& ledger, std::span<const QueryState> states)
{
    std::int64_t samples = 0;
    std::int64_t tokens = 0;
    std::int64_t units = 0;
    for (const auto& s : states) {
        if (s.spent_samples != static_cast<std::int64_t>(s.responses.size()))
            throw Error(ErrorCode::invalid_state, "query '" + s.query.id + "' sample count mismatch");
        samples += s.spent_samples;
        tokens += s.spent_tokens;
        units += s.spent_units;
    }
    if (samples != ledger.used_samples)
        throw Error(ErrorCode::invalid_state, "ledger used_samples " + std::to_string(ledger.used_samples) +
                                                  " != sum of spent_samples " + std::to_string(samples));
    if (tokens != ledger.output_tokens) throw Error(ErrorCode::invalid_state, "ledger token total mismatch");
    if (ledger.unit_size > 0 && units * ledger.unit_size != ledger.charged_samples)
        throw Error(ErrorCode::invalid_state, "ledger charged_samples mismatch");
}

namespace {

struct UnitJob {
    std::size_t query_index;
    int unit;
};

// Samples the units of one round, concurrently when the backend allows it.
std::vector<UnitResult> run_units(const std::vector<UnitJob>& jobs, std::span<const QueryState> states,
                                  Backend& backend, const SamplerConfig& sampler, SeedStream seed, int round)
{
    std::vector<UnitResult> out(jobs.size());
    auto run = [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto& q = states[job.query_index].query;
        return integrated_sampling(q, backend, sampler, unit_seed(seed, q.id, job.unit), {round, job.unit});
    };
    if (backend.concurrency_cap() <= 1 || jobs.size() <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = run(i);
        return out;
    }
    std::vector<std::future<UnitResult>> pending;
    pending.reserve(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) pending.push_back(std::async(std::launch::async, run, i));
    for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = pending[i].get();
    return out;
}

void commit(std::vector<QueryState>& states, BudgetLedger& ledger, const std::vector<UnitJob>& jobs,
            std::vector<UnitResult>& results, AllocationRound& round)
{
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto& state = states[jobs[i].query_index];
        state.spent_units += 1;
        ledger.charged_samples += ledger.unit_size;
        round.shortfall += results[i].shortfall;
        for (auto& r : results[i].records) {
            ledger.used_samples += 1;
            ledger.output_tokens += r.output_tokens;
            state.append(std::move(r));
        }
    }
    round.used_samples = ledger.used_samples;
    round.charged_samples = ledger.charged_samples;
    round.output_tokens = ledger.output_tokens;
}

}  // namespace

PolicyResult allocate(const QuerySet& queries, Backend& backend, const SamplerConfig& sampler,
                      const AllocatorConfig& config, std::int64_t total_samples, SeedStream seed,
                      const RoundObserver& observer)
{
    sampler.validate();
    config.validate();
    validate_query_set(queries);
    const auto m = static_cast<std::int64_t>(queries.size());
    const std::int64_t unit = sampler.unit_size;
    if (m == 0) throw Error(ErrorCode::invalid_config, "empty query set");
    if (total_samples < m * unit)
        throw Error(ErrorCode::insufficient_budget, "B_total " + std::to_string(total_samples) + " < m * B_unit = " +
                                                        std::to_string(m * unit));

    PolicyResult result;
    result.ledger.total_samples = total_samples;
    result.ledger.unit_size = unit;
    for (const auto& q : queries) result.states.push_back(QueryState{q, {}, 0, 0, 0});

    // Round 0: one unit per query.
    {
        AllocationRound round;
        round.round_index = 0;
        round.phase = RoundPhase::initial;
        std::vector<UnitJob> jobs;
        for (std::size_t i = 0; i < queries.size(); ++i) {
            round.selected.push_back(queries[i].id);
            jobs.push_back({i, 0});
        }
        if (observer) observer(round, result.states);
        auto units = run_units(jobs, result.states, backend, sampler, seed, 0);
        commit(result.states, result.ledger, jobs, units, round);
        result.ledger.rounds.push_back(std::move(round));
        check_conservation(result.ledger, result.states);
    }

    const int subset = config.effective_subset_size(queries.size());
    const SeedStream tie_seed = seed.derive("tie_break").derive(config.tie_break_seed);
    for (int r = 1; result.ledger.charged_samples + unit <= total_samples; ++r) {
        AllocationRound round;
        round.round_index = r;
        round.phase = RoundPhase::dynamic;
        for (const auto& state : result.states) {
            PriorityScore s;
            if (state.spent_samples == 0) {
                // An arm with no evidence yet is always pulled first.
                s.exploit = 1.0;
                s.explore = std::numeric_limits<double>::infinity();
                s.total = s.explore;
            } else {
                s = sampling_priority(state, result.ledger.used_samples, config);
            }
            round.priorities.push_back({state.query.id, s});
        }
        const auto remaining_units = (total_samples - result.ledger.charged_samples) / unit;
        const auto size = static_cast<std::size_t>(std::min<std::int64_t>({subset, remaining_units, m}));
        Rng rng(tie_seed.derive(static_cast<std::uint64_t>(r)));
        round.selected = select_subset(round.priorities, size, rng);
        if (observer) observer(round, result.states);

        std::vector<UnitJob> jobs;
        for (const auto& id : round.selected) {
            const auto it = std::find_if(queries.begin(), queries.end(), [&](const Query& q) { return q.id == id; });
            const auto idx = static_cast<std::size_t>(it - queries.begin());
            jobs.push_back({idx, static_cast<int>(result.states[idx].spent_units)});
        }
        auto units = run_units(jobs, result.states, backend, sampler, seed, r);
        commit(result.states, result.ledger, jobs, units, round);
        result.ledger.rounds.push_back(std::move(round));
        check_conservation(result.ledger, result.states);
    }

    for (const auto& state : result.states) result.answers.push_back(majority_vote(state.responses));
    return result;
}

}  // namespace dynscale
