#pragma once

// Seeded simulated LLM. Each query has a categorical answer distribution;
// prompts carrying a thought chain that contains a correct attempt draw from a
// distribution shifted toward the correct answer.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynscale/backend.hpp"
#include "dynscale/types.hpp"

namespace dynscale {

struct AnswerMass {
    std::string value;
    double probability = 0.0;

    bool operator==(const AnswerMass&) const = default;
};

struct SimulatorProfile {
    std::string query_id;
    std::vector<AnswerMass> answers;
    /// Probability of a completion with no extractable answer.
    double unextractable = 0.0;
    /// Defaults to the query's gold answer when absent.
    std::optional<std::string> correct;
    double conditioning_gain = 0.0;
    /// Probability that a "continue your previous response" prompt repeats the
    /// previous answer instead of drawing fresh.
    double continuation_keep = 0.0;
    double token_mean = 256.0;
    double token_stddev = 0.0;
    /// Probability that a single attempt fails transiently.
    double failure_rate = 0.0;
    /// Prompts longer than this are rejected as too long.
    std::optional<std::size_t> max_prompt_chars;

    bool operator==(const SimulatorProfile&) const = default;
};

inline constexpr int simulator_profile_version = 1;

/// Throws Error(schema_invalid) naming the offending field. When queries are
/// given, also checks every query has a profile and answers are canonical.
void validate_simulator_profiles(const std::vector<SimulatorProfile>& profiles, const QuerySet* queries);

std::vector<SimulatorProfile> load_simulator_profile(const std::filesystem::path& path,
                                                     const QuerySet* queries = nullptr);
void save_simulator_profile(const std::filesystem::path& path, const std::vector<SimulatorProfile>& profiles);

/// The draw distribution after conditioning on a chain with a correct attempt:
/// the correct answer gains `conditioning_gain` (capped at 1) and every other
/// outcome, including the unextractable mass, shrinks proportionally.
SimulatorProfile conditioned_profile(const SimulatorProfile& profile, const std::string& correct);

class SimulatorBackend final : public Backend {
public:
    SimulatorBackend(QuerySet queries, std::vector<SimulatorProfile> profiles, int concurrency_cap = 1,
                     RetryPolicy retry = {5, std::chrono::milliseconds(0)});

    const std::vector<SimulatorProfile>& profiles() const noexcept { return profiles_; }

protected:
    Completion attempt(const CompletionRequest& request, int attempt_index) override;

private:
    struct Entry {
        const Query* query;
        const SimulatorProfile* profile;
        std::optional<std::string> correct;
        std::optional<SimulatorProfile> conditioned;
    };

    QuerySet queries_;
    std::vector<SimulatorProfile> profiles_;
    std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace dynscale
