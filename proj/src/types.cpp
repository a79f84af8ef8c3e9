#include "dynscale/types.hpp"

#include <set>

#include "dynscale/answer.hpp"
#include "dynscale/error.hpp"

namespace dynscale {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::invalid_config: return "invalid_config";
    case ErrorCode::schema_invalid: return "schema_invalid";
    case ErrorCode::insufficient_budget: return "insufficient_budget";
    case ErrorCode::backend_unavailable: return "backend_unavailable";
    case ErrorCode::prompt_too_long: return "prompt_too_long";
    case ErrorCode::invalid_state: return "invalid_state";
    case ErrorCode::missing_gold: return "missing_gold";
    case ErrorCode::replay_divergence: return "replay_divergence";
    case ErrorCode::precondition_failed: return "precondition_failed";
    case ErrorCode::io_error: return "io_error";
    }
    return "unknown";
}

std::string_view to_string(AnswerKind kind)
{
    switch (kind) {
    case AnswerKind::multiple_choice: return "multiple_choice";
    case AnswerKind::integer: return "integer";
    case AnswerKind::free_text: return "free_text";
    }
    return "free_text";
}

AnswerKind parse_answer_kind(std::string_view name)
{
    if (name == "multiple_choice") return AnswerKind::multiple_choice;
    if (name == "integer") return AnswerKind::integer;
    if (name == "free_text") return AnswerKind::free_text;
    throw Error(ErrorCode::schema_invalid, "unknown answer_domain '" + std::string(name) + "'");
}

std::string_view to_string(Provenance p)
{
    switch (p) {
    case Provenance::initial_parallel: return "initial_parallel";
    case Provenance::chain_conditioned: return "chain_conditioned";
    case Provenance::baseline: return "baseline";
    }
    return "baseline";
}

Provenance parse_provenance(std::string_view name)
{
    if (name == "initial_parallel") return Provenance::initial_parallel;
    if (name == "chain_conditioned") return Provenance::chain_conditioned;
    if (name == "baseline") return Provenance::baseline;
    throw Error(ErrorCode::schema_invalid, "unknown provenance '" + std::string(name) + "'");
}

void validate_query_set(const QuerySet& queries)
{
    std::set<std::string> seen;
    for (const auto& q : queries) {
        if (q.id.empty()) throw Error(ErrorCode::schema_invalid, "query with empty id");
        if (!seen.insert(q.id).second) throw Error(ErrorCode::schema_invalid, "duplicate query id '" + q.id + "'");
        if (q.domain.kind == AnswerKind::multiple_choice && q.domain.choices.empty())
            throw Error(ErrorCode::schema_invalid, "query '" + q.id + "': multiple_choice requires choices");
        if (q.gold_answer) {
            const auto canon = normalize_answer(*q.gold_answer, q.domain);
            if (!canon || *canon != *q.gold_answer)
                throw Error(ErrorCode::schema_invalid,
                            "query '" + q.id + "': gold_answer '" + *q.gold_answer + "' is not canonical");
        }
    }
}

}  // namespace dynscale
