#include "dynscale/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dynscale/answer.hpp"
#include "dynscale/error.hpp"
#include "dynscale/prompt_markers.hpp"
#include "dynscale/serialization.hpp"

namespace dynscale {
namespace {

constexpr double kMassTolerance = 1e-9;

std::string field(std::size_t index, std::string_view name)
{
    return "profiles[" + std::to_string(index) + "]." + std::string(name);
}

void check_probability(double p, std::size_t index, std::string_view name)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw Error(ErrorCode::schema_invalid, field(index, name) + ": must lie in [0, 1], got " + std::to_string(p));
}

// Every attempt body between the chain markers.
std::vector<std::string_view> chain_attempts(std::string_view prompt)
{
    std::vector<std::string_view> out;
    const auto open = prompt.find(markers::chain_open);
    if (open == std::string_view::npos) return out;
    auto close = prompt.find(markers::chain_close, open);
    if (close == std::string_view::npos) close = prompt.size();
    std::string_view chain = prompt.substr(open, close - open);
    for (auto pos = chain.find(markers::attempt_open); pos != std::string_view::npos;
         pos = chain.find(markers::attempt_open, pos)) {
        pos += markers::attempt_open.size();
        auto end = chain.find(markers::attempt_close, pos);
        if (end == std::string_view::npos) end = chain.size();
        out.push_back(chain.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

std::optional<std::string_view> previous_response(std::string_view prompt)
{
    const auto open = prompt.find(markers::previous_open);
    if (open == std::string_view::npos) return std::nullopt;
    const auto begin = open + markers::previous_open.size();
    auto close = prompt.find(markers::previous_close, begin);
    if (close == std::string_view::npos) close = prompt.size();
    return prompt.substr(begin, close - begin);
}

std::optional<std::string> draw_answer(const SimulatorProfile& p, double u)
{
    double acc = 0.0;
    for (const auto& a : p.answers) {
        acc += a.probability;
        if (u < acc) return a.value;
    }
    if (p.unextractable > 0.0) return std::nullopt;
    // Rounding slack lands on the last listed answer.
    if (!p.answers.empty()) return p.answers.back().value;
    return std::nullopt;
}

std::string render(const std::optional<std::string>& answer)
{
    if (!answer) return "I could not settle on a final answer.";
    return "Answer: " + *answer;
}

}  // namespace

void validate_simulator_profiles(const std::vector<SimulatorProfile>& profiles, const QuerySet* queries)
{
    std::map<std::string, const Query*> by_id;
    if (queries)
        for (const auto& q : *queries) by_id[q.id] = &q;

    std::set<std::string> seen;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto& p = profiles[i];
        if (p.query_id.empty()) throw Error(ErrorCode::schema_invalid, field(i, "query_id") + ": missing");
        if (!seen.insert(p.query_id).second)
            throw Error(ErrorCode::schema_invalid, field(i, "query_id") + ": duplicate '" + p.query_id + "'");
        double total = p.unextractable;
        check_probability(p.unextractable, i, "unextractable");
        std::set<std::string> values;
        for (std::size_t a = 0; a < p.answers.size(); ++a) {
            const auto name = "answers[" + std::to_string(a) + "]";
            check_probability(p.answers[a].probability, i, name + ".probability");
            if (!values.insert(p.answers[a].value).second)
                throw Error(ErrorCode::schema_invalid, field(i, name + ".value") + ": duplicate answer");
            total += p.answers[a].probability;
        }
        if (std::abs(total - 1.0) > kMassTolerance) {
            std::ostringstream os;
            os << field(i, "answers") << ": probabilities sum to " << total << " (expected 1 within 1e-9)";
            throw Error(ErrorCode::schema_invalid, os.str());
        }
        check_probability(p.conditioning_gain, i, "conditioning_gain");
        check_probability(p.continuation_keep, i, "continuation_keep");
        check_probability(p.failure_rate, i, "failure_rate");
        if (p.failure_rate >= 1.0)
            throw Error(ErrorCode::schema_invalid, field(i, "failure_rate") + ": must be < 1");
        if (!(p.token_mean >= 1.0)) throw Error(ErrorCode::schema_invalid, field(i, "tokens.mean") + ": must be >= 1");
        if (!(p.token_stddev >= 0.0))
            throw Error(ErrorCode::schema_invalid, field(i, "tokens.stddev") + ": must be >= 0");

        if (queries) {
            const auto it = by_id.find(p.query_id);
            if (it == by_id.end())
                throw Error(ErrorCode::schema_invalid,
                            field(i, "query_id") + ": '" + p.query_id + "' is not in the query set");
            const Query& q = *it->second;
            for (std::size_t a = 0; a < p.answers.size(); ++a) {
                const auto canon = normalize_answer(p.answers[a].value, q.domain);
                if (!canon || *canon != p.answers[a].value)
                    throw Error(ErrorCode::schema_invalid, field(i, "answers[" + std::to_string(a) + "].value") +
                                                               ": '" + p.answers[a].value +
                                                               "' is not canonical for query '" + q.id + "'");
            }
            if (p.correct) {
                const auto canon = normalize_answer(*p.correct, q.domain);
                if (!canon || *canon != *p.correct)
                    throw Error(ErrorCode::schema_invalid, field(i, "correct") + ": not canonical");
            }
        }
    }
    if (queries) {
        for (const auto& q : *queries)
            if (!seen.contains(q.id))
                throw Error(ErrorCode::schema_invalid, "no simulator profile for query id '" + q.id + "'");
    }
}

std::vector<SimulatorProfile> load_simulator_profile(const std::filesystem::path& path, const QuerySet* queries)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open simulator profile '" + path.string() + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema_invalid, path.string() + ": " + e.what());
    }
    auto profiles = profiles_from_json(doc);
    validate_simulator_profiles(profiles, queries);
    return profiles;
}

void save_simulator_profile(const std::filesystem::path& path, const std::vector<SimulatorProfile>& profiles)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
    out << profiles_to_json(profiles).dump(2) << '\n';
}

SimulatorProfile conditioned_profile(const SimulatorProfile& profile, const std::string& correct)
{
    SimulatorProfile out = profile;
    double pc = 0.0;
    bool listed = false;
    for (const auto& a : profile.answers) {
        if (a.value == correct) {
            pc = a.probability;
            listed = true;
        }
    }
    const double target = std::min(1.0, pc + profile.conditioning_gain);
    const double rest = 1.0 - pc;
    const double scale = rest > 0.0 ? (1.0 - target) / rest : 0.0;
    for (auto& a : out.answers) a.probability = a.value == correct ? target : std::max(0.0, a.probability * scale);
    out.unextractable = std::max(0.0, profile.unextractable * scale);
    if (!listed) out.answers.push_back({correct, target});
    // Renormalize away rounding error.
    double total = out.unextractable;
    for (const auto& a : out.answers) total += a.probability;
    if (total > 0.0) {
        for (auto& a : out.answers) a.probability /= total;
        out.unextractable /= total;
    }
    return out;
}

SimulatorBackend::SimulatorBackend(QuerySet queries, std::vector<SimulatorProfile> profiles, int concurrency_cap,
                                   RetryPolicy retry)
    : Backend(BackendKind::simulator, concurrency_cap, retry), queries_(std::move(queries)),
      profiles_(std::move(profiles))
{
    validate_simulator_profiles(profiles_, &queries_);
    std::map<std::string, const Query*> by_id;
    for (const auto& q : queries_) by_id[q.id] = &q;
    for (const auto& p : profiles_) {
        Entry e{by_id.at(p.query_id), &p, p.correct, std::nullopt};
        if (!e.correct) e.correct = e.query->gold_answer;
        if (e.correct && p.conditioning_gain > 0.0) e.conditioned = conditioned_profile(p, *e.correct);
        entries_.emplace(p.query_id, std::move(e));
    }
}

Completion SimulatorBackend::attempt(const CompletionRequest& request, int attempt_index)
{
    const auto it = entries_.find(request.query_id);
    if (it == entries_.end())
        throw BackendFailure(FailureKind::fatal, "simulator has no profile for query '" + request.query_id + "'");
    const Entry& e = it->second;
    const SimulatorProfile& base = *e.profile;
    const SeedStream seed(request.seed);

    if (base.max_prompt_chars && request.prompt.size() > *base.max_prompt_chars)
        throw BackendFailure(FailureKind::prompt_too_long, "prompt of " + std::to_string(request.prompt.size()) +
                                                               " chars exceeds " +
                                                               std::to_string(*base.max_prompt_chars));
    if (base.failure_rate > 0.0) {
        Rng fail(seed.derive("failure").derive(static_cast<std::uint64_t>(attempt_index)));
        if (fail.uniform() < base.failure_rate) throw BackendFailure(FailureKind::transient, "injected failure");
    }

    const SimulatorProfile* dist = &base;
    if (e.conditioned) {
        for (auto attempt_text : chain_attempts(request.prompt)) {
            const auto a = extract_answer(attempt_text, e.query->domain);
            if (a && a->value == *e.correct) {
                dist = &*e.conditioned;
                break;
            }
        }
    }

    Rng answer_rng(seed.derive("answer"));
    std::optional<std::string> answer;
    bool drawn = false;
    if (base.continuation_keep > 0.0) {
        if (const auto prev = previous_response(request.prompt)) {
            if (answer_rng.uniform() < base.continuation_keep) {
                if (const auto a = extract_answer(*prev, e.query->domain)) answer = a->value;
                drawn = true;
            }
        }
    }
    if (!drawn) answer = draw_answer(*dist, answer_rng.uniform());

    Rng token_rng(seed.derive("tokens"));
    const double tokens = std::round(token_rng.normal(base.token_mean, base.token_stddev));
    Completion c;
    c.text = render(answer);
    c.output_tokens = static_cast<std::int64_t>(std::max(1.0, tokens));
    if (c.output_tokens > request.params.max_output_tokens) c.output_tokens = request.params.max_output_tokens;
    c.output_tokens = std::max<std::int64_t>(1, c.output_tokens);
    return c;
}

}  // namespace dynscale
