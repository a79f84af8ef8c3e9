#pragma once

// Run orchestration and persistence. A run directory holds
//   config.json    run id + full configuration snapshot (queries, profiles, patterns, seeds)
//   samples.jsonl  one ResponseRecord per line, grouped by query in sampling order
//   rounds.jsonl   one AllocationRound per line
//   summary.json   ledger counters, final answers, accuracy, token and wall-clock totals
// All four carry a schema name and version; see README for field lists.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynscale/allocator.hpp"
#include "dynscale/answer.hpp"
#include "dynscale/backend.hpp"
#include "dynscale/baselines.hpp"
#include "dynscale/http_backend.hpp"
#include "dynscale/sampler.hpp"
#include "dynscale/simulator.hpp"
#include "dynscale/types.hpp"

namespace dynscale {

inline constexpr int run_schema_version = 1;

enum class PolicyKind { dynscaling, bon, sp1 };

std::string_view to_string(PolicyKind p);
PolicyKind parse_policy_kind(std::string_view name);

struct BackendSettings {
    BackendKind kind = BackendKind::simulator;
    int concurrency_cap = 1;
    RetryPolicy retry{5, std::chrono::milliseconds(0)};
    HttpBackendConfig http;

    bool operator==(const BackendSettings&) const = default;
};

struct RunConfig {
    PolicyKind policy = PolicyKind::dynscaling;
    std::int64_t total_samples = 0;
    std::uint64_t seed = 0;
    SamplerConfig sampler;
    AllocatorConfig allocator;
    std::string trigger_phrase = "Wait";
    std::string continuation_template = default_continuation_template();
    BackendSettings backend;
    QuerySet queries;
    std::vector<SimulatorProfile> profiles;

    void validate() const;
    BaselineConfig baseline_config() const;
};

struct FinalAnswer {
    std::string query_id;
    std::optional<std::string> answer;
    std::optional<std::string> gold;
    Correctness correctness = Correctness::unknown;
    std::int64_t samples = 0;
    std::int64_t output_tokens = 0;

    bool operator==(const FinalAnswer&) const = default;
};

struct RunRecord {
    int schema_version = run_schema_version;
    std::string run_id;
    RunConfig config;
    std::vector<ResponseRecord> samples;
    BudgetLedger ledger;
    std::vector<FinalAnswer> answers;
    /// Fraction of queries answered correctly; present when every query has gold.
    std::optional<double> accuracy;
    double wall_clock_seconds = 0.0;
};

/// Deterministic id derived from the configuration snapshot.
std::string compute_run_id(const RunConfig& config);

std::unique_ptr<Backend> make_backend(const RunConfig& config);

/// Current correctness of every query's vote; gold is evaluation-only.
std::map<std::string, Correctness> correctness_snapshot(std::span<const QueryState> states);

RunRecord execute_run(const RunConfig& config);
RunRecord execute_run(const RunConfig& config, Backend& backend);

void write_run_dir(const std::filesystem::path& dir, const RunRecord& record);
RunRecord read_run_dir(const std::filesystem::path& dir);

/// Re-executes a simulator run and checks it matches field for field
/// (wall-clock time excluded). Throws Error(replay_divergence) naming the first
/// differing field, or Error(precondition_failed) for non-simulator runs.
RunRecord replay(const RunRecord& record);

/// Runs every (budget, repeat) pair with seed = base.seed + repeat.
std::vector<RunRecord> run_sweep(const RunConfig& base, const std::vector<std::int64_t>& budgets, int repeats);

}  // namespace dynscale
