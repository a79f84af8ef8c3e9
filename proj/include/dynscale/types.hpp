#pragma once

// Domain types shared across the engine. Everything here is a plain value.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dynscale {

enum class AnswerKind { multiple_choice, integer, free_text };

std::string_view to_string(AnswerKind kind);
AnswerKind parse_answer_kind(std::string_view name);

struct AnswerDomain {
    AnswerKind kind = AnswerKind::free_text;
    /// Canonical (uppercased) choice labels; only used for multiple_choice.
    std::vector<std::string> choices;

    bool operator==(const AnswerDomain&) const = default;
};

struct CanonicalAnswer {
    std::string value;
    AnswerKind kind = AnswerKind::free_text;

    bool operator==(const CanonicalAnswer&) const = default;
};

struct Query {
    std::string id;
    std::string prompt;
    AnswerDomain domain;
    std::optional<std::string> gold_answer;

    bool operator==(const Query&) const = default;
};

using QuerySet = std::vector<Query>;

enum class Provenance { initial_parallel, chain_conditioned, baseline };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view name);

struct ResponseRecord {
    std::string id;
    std::string query_id;
    std::string text;
    std::optional<std::string> extracted_answer;
    std::int64_t output_tokens = 0;
    int round = 0;
    int unit = 0;
    int slot = 0;
    Provenance provenance = Provenance::initial_parallel;
    std::vector<std::string> chain_member_ids;
    std::optional<std::uint64_t> backend_seed;
    /// Set when a chain-conditioned slot was re-issued as a bare-query sample.
    bool fallback = false;

    bool operator==(const ResponseRecord&) const = default;
};

struct QueryState {
    Query query;
    std::vector<ResponseRecord> responses;
    std::int64_t spent_units = 0;
    std::int64_t spent_samples = 0;
    std::int64_t spent_tokens = 0;

    void append(ResponseRecord record)
    {
        spent_samples += 1;
        spent_tokens += record.output_tokens;
        responses.push_back(std::move(record));
    }
};

/// Throws Error(schema_invalid) on duplicate ids or a non-canonical gold answer.
void validate_query_set(const QuerySet& queries);

}  // namespace dynscale
