#pragma once

// Integrated parallel-sequential sampling of one budget unit: half the unit
// as independent completions of the bare query, the other half each
// conditioned on a freshly drawn random chain of those completions.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dynscale/answer.hpp"
#include "dynscale/backend.hpp"
#include "dynscale/random.hpp"
#include "dynscale/types.hpp"

namespace dynscale {

struct ChainTemplate {
    /// Whole conditioned prompt; {query} and {chain} are substituted.
    std::string prompt;
    /// One chain member; {text} is substituted.
    std::string member;
    std::string separator = "\n";

    bool operator==(const ChainTemplate&) const = default;
};

ChainTemplate default_chain_template();

struct SamplerConfig {
    int unit_size = 8;
    int thought_length = 4;
    DecodingParams decoding;
    ChainTemplate chain_template = default_chain_template();
    std::shared_ptr<const PatternTable> patterns = default_pattern_table();

    /// Throws Error(invalid_config).
    void validate() const;
};

struct ThoughtChain {
    std::vector<std::string> member_ids;
    std::string rendered_text;
};

/// Picks min(k, |initial|) distinct members in uniformly random order.
ThoughtChain build_chain(std::span<const ResponseRecord> initial, int k, Rng& rng, const ChainTemplate& tmpl);

std::string render_conditioned_prompt(const Query& query, const ThoughtChain& chain, const ChainTemplate& tmpl);

/// Where a unit sits in the run; stamped into every record it produces.
struct UnitContext {
    int round = 0;
    int unit = 0;
};

struct UnitResult {
    std::vector<ResponseRecord> records;
    int requested = 0;
    /// Requested slots that produced no record.
    int shortfall = 0;
    /// Chain-conditioned slots re-issued as bare samples.
    int fallbacks = 0;
    std::vector<std::string> errors;

    /// Every call in the unit failed.
    bool unavailable() const noexcept { return records.empty() && requested > 0; }
};

std::string record_id(const std::string& query_id, int unit, int slot);

UnitResult integrated_sampling(const Query& query, Backend& backend, const SamplerConfig& config, SeedStream seed,
                               UnitContext context);

}  // namespace dynscale
