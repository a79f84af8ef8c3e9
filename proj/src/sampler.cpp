#include "dynscale/sampler.hpp"

#include <numeric>

#include "dynscale/error.hpp"
#include "dynscale/prompt_markers.hpp"

namespace dynscale {
namespace {

void replace_all(std::string& text, std::string_view key, std::string_view value)
{
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
        text.replace(pos, key.size(), value);
}

ResponseRecord make_record(const Query& q, const Completion& c, const SamplerConfig& config, UnitContext ctx,
                           int slot, Provenance provenance, std::uint64_t seed)
{
    ResponseRecord r;
    r.id = record_id(q.id, ctx.unit, slot);
    r.query_id = q.id;
    r.text = c.text;
    if (auto a = config.patterns->extract(c.text, q.domain)) r.extracted_answer = std::move(a->value);
    r.output_tokens = c.output_tokens;
    r.round = ctx.round;
    r.unit = ctx.unit;
    r.slot = slot;
    r.provenance = provenance;
    r.backend_seed = seed;
    return r;
}

}  // namespace

ChainTemplate default_chain_template()
{
    ChainTemplate t;
    t.prompt = std::string("{query}\n\n") + std::string(markers::chain_open) +
               "\nHere are some earlier attempts at this problem:\n{chain}\n" + std::string(markers::chain_close) +
               "\n\nReconsider the problem in light of these attempts, then give your final answer on the last "
               "line in the form \"Answer: X\".";
    t.member = std::string(markers::attempt_open) + "\n{text}\n" + std::string(markers::attempt_close);
    t.separator = "\n";
    return t;
}

void SamplerConfig::validate() const
{
    if (unit_size < 2 || unit_size % 2 != 0)
        throw Error(ErrorCode::invalid_config, "unit_size must be even and >= 2");
    if (thought_length < 1 || thought_length > unit_size / 2)
        throw Error(ErrorCode::invalid_config, "thought_length must lie in [1, unit_size/2]");
    if (decoding.max_output_tokens < 1) throw Error(ErrorCode::invalid_config, "max_output_tokens must be >= 1");
    if (decoding.temperature < 0.0) throw Error(ErrorCode::invalid_config, "temperature must be >= 0");
    if (!patterns) throw Error(ErrorCode::invalid_config, "missing extraction pattern table");
    const auto& t = chain_template;
    if (t.prompt.find("{query}") == std::string::npos || t.prompt.find("{chain}") == std::string::npos)
        throw Error(ErrorCode::invalid_config, "chain template must contain {query} and {chain}");
    if (t.member.find("{text}") == std::string::npos)
        throw Error(ErrorCode::invalid_config, "chain member template must contain {text}");
    if (t.prompt.find(markers::chain_open) == std::string::npos ||
        t.member.find(markers::attempt_open) == std::string::npos)
        throw Error(ErrorCode::invalid_config, "chain template must keep the <earlier_attempts>/<attempt> markers");
}

std::string record_id(const std::string& query_id, int unit, int slot)
{
    return query_id + ":u" + std::to_string(unit) + ":s" + std::to_string(slot);
}

ThoughtChain build_chain(std::span<const ResponseRecord> initial, int k, Rng& rng, const ChainTemplate& tmpl)
{
    if (initial.empty()) throw Error(ErrorCode::invalid_state, "build_chain needs at least one initial response");
    std::vector<std::size_t> order(initial.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // A full shuffle truncated to k is a uniform ordered draw without replacement.
    rng.shuffle(std::span<std::size_t>(order));
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), order.size());
    ThoughtChain chain;
    for (std::size_t i = 0; i < take; ++i) {
        const auto& member = initial[order[i]];
        chain.member_ids.push_back(member.id);
        std::string block = tmpl.member;
        replace_all(block, "{text}", member.text);
        if (i > 0) chain.rendered_text += tmpl.separator;
        chain.rendered_text += block;
    }
    return chain;
}

std::string render_conditioned_prompt(const Query& query, const ThoughtChain& chain, const ChainTemplate& tmpl)
{
    // Substitute {chain} first so a query containing "{chain}" is left alone.
    std::string out = tmpl.prompt;
    const auto q = out.find("{query}");
    const auto c = out.find("{chain}");
    if (c != std::string::npos && q != std::string::npos) {
        if (c > q) {
            out.replace(c, 7, chain.rendered_text);
            out.replace(q, 7, query.prompt);
        } else {
            out.replace(q, 7, query.prompt);
            out.replace(c, 7, chain.rendered_text);
        }
    }
    return out;
}

UnitResult integrated_sampling(const Query& query, Backend& backend, const SamplerConfig& config, SeedStream seed,
                               UnitContext context)
{
    config.validate();
    const int half = config.unit_size / 2;
    UnitResult result;
    result.requested = config.unit_size;

    const SeedStream initial_seed = seed.derive("initial");
    const auto initial = backend.sample(query.id, query.prompt, half, config.decoding, initial_seed);
    std::vector<ResponseRecord> initial_records;
    for (int i = 0; i < half; ++i) {
        const auto& c = initial[static_cast<std::size_t>(i)];
        if (!c.ok()) {
            result.errors.push_back(c.error);
            continue;
        }
        initial_records.push_back(make_record(query, c, config, context, i, Provenance::initial_parallel,
                                              initial_seed.derive(static_cast<std::uint64_t>(i)).value()));
    }

    struct Slot {
        int slot;
        std::vector<std::string> members;
        bool fallback;
    };
    std::vector<CompletionRequest> requests;
    std::vector<Slot> slots;
    const SeedStream cond_seed = seed.derive("conditioned");
    for (int j = 0; j < half; ++j) {
        const auto slot_seed = cond_seed.derive(static_cast<std::uint64_t>(j));
        Slot s{half + j, {}, false};
        std::string prompt;
        if (initial_records.empty()) {
            prompt = query.prompt;
            s.fallback = true;
        } else {
            Rng rng(slot_seed.derive("chain"));
            auto chain = build_chain(initial_records, config.thought_length, rng, config.chain_template);
            prompt = render_conditioned_prompt(query, chain, config.chain_template);
            s.members = std::move(chain.member_ids);
        }
        requests.push_back({query.id, std::move(prompt), config.decoding, slot_seed.derive("sample").value()});
        slots.push_back(std::move(s));
    }
    auto conditioned = backend.complete(requests);

    // Prompts the backend could not fit fall back to the bare query.
    std::vector<std::size_t> retry_bare;
    for (std::size_t j = 0; j < conditioned.size(); ++j)
        if (conditioned[j].status == CompletionStatus::prompt_too_long) retry_bare.push_back(j);
    if (!retry_bare.empty()) {
        std::vector<CompletionRequest> bare;
        for (auto j : retry_bare) {
            auto r = requests[j];
            r.prompt = query.prompt;
            r.seed = SeedStream(r.seed).derive("bare").value();
            bare.push_back(std::move(r));
        }
        auto done = backend.complete(bare);
        for (std::size_t t = 0; t < retry_bare.size(); ++t) {
            const auto j = retry_bare[t];
            requests[j] = bare[t];
            conditioned[j] = std::move(done[t]);
            slots[j].members.clear();
            slots[j].fallback = true;
        }
    }

    result.records = std::move(initial_records);
    for (std::size_t j = 0; j < conditioned.size(); ++j) {
        const auto& c = conditioned[j];
        if (!c.ok()) {
            result.errors.push_back(c.error);
            continue;
        }
        const bool chained = !slots[j].fallback;
        auto r = make_record(query, c, config, context, slots[j].slot,
                             chained ? Provenance::chain_conditioned : Provenance::initial_parallel, requests[j].seed);
        r.chain_member_ids = std::move(slots[j].members);
        r.fallback = slots[j].fallback;
        if (r.fallback) ++result.fallbacks;
        result.records.push_back(std::move(r));
    }
    result.shortfall = result.requested - static_cast<int>(result.records.size());
    return result;
}

}  // namespace dynscale
