#include "dynscale/baselines.hpp"

#include "dynscale/error.hpp"
#include "dynscale/prompt_markers.hpp"

namespace dynscale {
namespace {

ResponseRecord to_record(const Query& q, const Completion& c, const BaselineConfig& config, int slot,
                         std::uint64_t seed)
{
    ResponseRecord r;
    r.id = record_id(q.id, 0, slot);
    r.query_id = q.id;
    r.text = c.text;
    if (auto a = config.patterns->extract(c.text, q.domain)) r.extracted_answer = std::move(a->value);
    r.output_tokens = c.output_tokens;
    r.round = 0;
    r.unit = 0;
    r.slot = slot;
    r.provenance = Provenance::baseline;
    r.backend_seed = seed;
    return r;
}

SeedStream query_seed(SeedStream seed, const Query& q)
{
    return seed.derive("baseline").derive(q.id);
}

PolicyResult start(const QuerySet& queries, std::int64_t total_samples, const std::vector<std::int64_t>& split,
                   const RoundObserver& observer, AllocationRound& round)
{
    PolicyResult result;
    result.ledger.total_samples = total_samples;
    result.ledger.unit_size = 1;
    for (const auto& q : queries) {
        result.states.push_back(QueryState{q, {}, 0, 0, 0});
        round.selected.push_back(q.id);
    }
    round.round_index = 0;
    round.phase = RoundPhase::uniform;
    if (observer) observer(round, result.states);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        result.states[i].spent_units = split[i];
        result.ledger.charged_samples += split[i];
    }
    return result;
}

void finish(PolicyResult& result, AllocationRound& round)
{
    for (const auto& s : result.states) {
        result.ledger.used_samples += s.spent_samples;
        result.ledger.output_tokens += s.spent_tokens;
        round.shortfall += static_cast<int>(s.spent_units - s.spent_samples);
    }
    round.used_samples = result.ledger.used_samples;
    round.charged_samples = result.ledger.charged_samples;
    round.output_tokens = result.ledger.output_tokens;
    result.ledger.rounds.push_back(std::move(round));
    check_conservation(result.ledger, result.states);
    for (const auto& s : result.states) result.answers.push_back(majority_vote(s.responses));
}

}  // namespace

std::string default_continuation_template()
{
    return std::string("{query}\n\n") + std::string(markers::previous_open) + "\n{response}\n" +
           std::string(markers::previous_close) + "\n{trigger}";
}

BaselineConfig::BaselineConfig() : continuation_template(default_continuation_template()) {}

void BaselineConfig::validate() const
{
    if (kind == BaselineKind::sp1 && trigger_phrase.empty())
        throw Error(ErrorCode::invalid_config, "sp1 requires a non-empty trigger phrase");
    if (!patterns) throw Error(ErrorCode::invalid_config, "missing extraction pattern table");
    if (continuation_template.find("{response}") == std::string::npos ||
        continuation_template.find("{trigger}") == std::string::npos)
        throw Error(ErrorCode::invalid_config, "continuation template must contain {response} and {trigger}");
}

std::vector<std::int64_t> uniform_split(std::int64_t total_samples, std::size_t query_count)
{
    std::vector<std::int64_t> out(query_count, 0);
    if (query_count == 0) return out;
    const auto m = static_cast<std::int64_t>(query_count);
    for (std::int64_t i = 0; i < m; ++i)
        out[static_cast<std::size_t>(i)] = total_samples / m + (i < total_samples % m ? 1 : 0);
    return out;
}

std::string render_continuation_prompt(const Query& query, const std::string& response, const BaselineConfig& config)
{
    // Single left-to-right pass so substituted text is never re-scanned.
    const std::string& t = config.continuation_template;
    std::string out;
    for (std::size_t i = 0; i < t.size();) {
        if (t.compare(i, 7, "{query}") == 0) {
            out += query.prompt;
            i += 7;
        } else if (t.compare(i, 10, "{response}") == 0) {
            out += response;
            i += 10;
        } else if (t.compare(i, 9, "{trigger}") == 0) {
            out += config.trigger_phrase;
            i += 9;
        } else {
            out.push_back(t[i++]);
        }
    }
    return out;
}

PolicyResult run_bon(const QuerySet& queries, Backend& backend, std::int64_t total_samples,
                     const BaselineConfig& config, SeedStream seed, const RoundObserver& observer)
{
    config.validate();
    validate_query_set(queries);
    if (queries.empty()) throw Error(ErrorCode::invalid_config, "empty query set");
    const auto split = uniform_split(total_samples, queries.size());
    if (total_samples / static_cast<std::int64_t>(queries.size()) < 1)
        throw Error(ErrorCode::insufficient_budget, "bon needs at least one sample per query");

    AllocationRound round;
    auto result = start(queries, total_samples, split, observer, round);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        const auto qs = query_seed(seed, q);
        const auto n = static_cast<int>(split[i]);
        const auto done = backend.sample(q.id, q.prompt, n, config.decoding, qs);
        for (int s = 0; s < n; ++s) {
            const auto& c = done[static_cast<std::size_t>(s)];
            if (c.ok())
                result.states[i].append(to_record(q, c, config, s, qs.derive(static_cast<std::uint64_t>(s)).value()));
        }
    }
    finish(result, round);
    return result;
}

PolicyResult run_sp1(const QuerySet& queries, Backend& backend, std::int64_t total_samples,
                     const BaselineConfig& config, SeedStream seed, const RoundObserver& observer)
{
    config.validate();
    validate_query_set(queries);
    if (queries.empty()) throw Error(ErrorCode::invalid_config, "empty query set");
    const auto split = uniform_split(total_samples, queries.size());
    if (total_samples / static_cast<std::int64_t>(queries.size()) < 2)
        throw Error(ErrorCode::insufficient_budget, "sp1 needs at least two samples per query");

    AllocationRound round;
    auto result = start(queries, total_samples, split, observer, round);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        const auto qs = query_seed(seed, q);
        const int budget = static_cast<int>(split[i]);
        const int n_initial = (budget + 1) / 2;
        const int n_cont = budget - n_initial;

        const auto init_seed = qs.derive("initial");
        const auto initial = backend.sample(q.id, q.prompt, n_initial, config.decoding, init_seed);
        std::vector<ResponseRecord> initial_records;
        for (int s = 0; s < n_initial; ++s) {
            const auto& c = initial[static_cast<std::size_t>(s)];
            if (c.ok())
                initial_records.push_back(
                    to_record(q, c, config, s, init_seed.derive(static_cast<std::uint64_t>(s)).value()));
        }

        std::vector<CompletionRequest> requests;
        std::vector<std::string> parents;
        const auto cont_seed = qs.derive("continuation");
        for (int j = 0; j < n_cont; ++j) {
            const auto s = cont_seed.derive(static_cast<std::uint64_t>(j)).value();
            if (initial_records.empty()) {
                requests.push_back({q.id, q.prompt, config.decoding, s});
                parents.emplace_back();
            } else {
                const auto& parent = initial_records[static_cast<std::size_t>(j) % initial_records.size()];
                requests.push_back({q.id, render_continuation_prompt(q, parent.text, config), config.decoding, s});
                parents.push_back(parent.id);
            }
        }
        const auto cont = backend.complete(requests);

        for (auto& r : initial_records) result.states[i].append(std::move(r));
        for (int j = 0; j < n_cont; ++j) {
            const auto& c = cont[static_cast<std::size_t>(j)];
            if (!c.ok()) continue;
            auto r = to_record(q, c, config, n_initial + j, requests[static_cast<std::size_t>(j)].seed);
            r.fallback = parents[static_cast<std::size_t>(j)].empty();
            result.states[i].append(std::move(r));
        }
    }
    finish(result, round);
    return result;
}

}  // namespace dynscale
