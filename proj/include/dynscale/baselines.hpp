#pragma once

// Verifier-free comparison policies run under the same sample budget:
//   bon  uniform independent samples per query, majority vote
//   sp1  half initial samples, half single-step continuations of an initial
//        response with a trigger phrase appended (round-robin pairing)

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dynscale/allocator.hpp"
#include "dynscale/answer.hpp"
#include "dynscale/backend.hpp"
#include "dynscale/random.hpp"
#include "dynscale/types.hpp"

namespace dynscale {

enum class BaselineKind { bon, sp1 };

struct BaselineConfig {
    BaselineKind kind = BaselineKind::bon;
    std::string trigger_phrase = "Wait";
    /// {query}, {response} and {trigger} are substituted.
    std::string continuation_template;
    DecodingParams decoding;
    std::shared_ptr<const PatternTable> patterns = default_pattern_table();

    BaselineConfig();
    void validate() const;
};

std::string default_continuation_template();

/// floor(B_total / m) samples per query, the remainder going one each to the
/// first queries.
std::vector<std::int64_t> uniform_split(std::int64_t total_samples, std::size_t query_count);

std::string render_continuation_prompt(const Query& query, const std::string& response, const BaselineConfig& config);

PolicyResult run_bon(const QuerySet& queries, Backend& backend, std::int64_t total_samples,
                     const BaselineConfig& config, SeedStream seed, const RoundObserver& observer = {});

PolicyResult run_sp1(const QuerySet& queries, Backend& backend, std::int64_t total_samples,
                     const BaselineConfig& config, SeedStream seed, const RoundObserver& observer = {});

}  // namespace dynscale
