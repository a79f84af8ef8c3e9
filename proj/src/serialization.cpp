#include "dynscale/serialization.hpp"

#include <cmath>
#include <limits>

#include "dynscale/error.hpp"

namespace dynscale {
namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out)
{
    if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->template get<T>();
}

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out)
{
    if (auto it = j.find(key); it != j.end() && !it->is_null())
        out = it->template get<T>();
    else
        out.reset();
}

template <typename T>
json opt_json(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

}  // namespace

json double_to_json(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double double_from_json(const json& j)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw Error(ErrorCode::schema_invalid, "expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

void to_json(json& j, const Query& q)
{
    j = json{{"id", q.id}, {"prompt", q.prompt}, {"answer_domain", to_string(q.domain.kind)}};
    if (q.domain.kind == AnswerKind::multiple_choice) j["choices"] = q.domain.choices;
    if (q.gold_answer) j["gold_answer"] = *q.gold_answer;
}

void from_json(const json& j, Query& q)
{
    if (!j.is_object()) throw Error(ErrorCode::schema_invalid, "query record must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key != "id" && key != "prompt" && key != "answer_domain" && key != "choices" && key != "gold_answer")
            throw Error(ErrorCode::schema_invalid, "unknown field '" + key + "'");
    }
    for (const char* key : {"id", "prompt", "answer_domain"}) {
        if (!j.contains(key) || !j[key].is_string())
            throw Error(ErrorCode::schema_invalid, std::string("field '") + key + "' must be a string");
    }
    q.id = j["id"].get<std::string>();
    q.prompt = j["prompt"].get<std::string>();
    q.domain.kind = parse_answer_kind(j["answer_domain"].get<std::string>());
    q.domain.choices.clear();
    if (auto it = j.find("choices"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw Error(ErrorCode::schema_invalid, "field 'choices' must be an array of strings");
        for (const auto& c : *it) {
            if (!c.is_string()) throw Error(ErrorCode::schema_invalid, "field 'choices' must be an array of strings");
            auto label = c.get<std::string>();
            for (auto& ch : label) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            q.domain.choices.push_back(std::move(label));
        }
    }
    q.gold_answer.reset();
    if (auto it = j.find("gold_answer"); it != j.end() && !it->is_null()) {
        if (it->is_number_integer())
            q.gold_answer = std::to_string(it->get<std::int64_t>());
        else if (it->is_string())
            q.gold_answer = it->get<std::string>();
        else
            throw Error(ErrorCode::schema_invalid, "field 'gold_answer' must be a string");
    }
}

void to_json(json& j, const ResponseRecord& r)
{
    j = json{{"id", r.id},
             {"query_id", r.query_id},
             {"round", r.round},
             {"unit", r.unit},
             {"slot", r.slot},
             {"provenance", to_string(r.provenance)},
             {"chain_member_ids", r.chain_member_ids},
             {"fallback", r.fallback},
             {"extracted_answer", opt_json(r.extracted_answer)},
             {"output_tokens", r.output_tokens},
             {"backend_seed", opt_json(r.backend_seed)},
             {"text", r.text}};
}

void from_json(const json& j, ResponseRecord& r)
{
    r.id = j.at("id").get<std::string>();
    r.query_id = j.at("query_id").get<std::string>();
    r.round = j.at("round").get<int>();
    r.unit = j.at("unit").get<int>();
    r.slot = j.at("slot").get<int>();
    r.provenance = parse_provenance(j.at("provenance").get<std::string>());
    r.chain_member_ids = j.at("chain_member_ids").get<std::vector<std::string>>();
    r.fallback = j.value("fallback", false);
    read_opt(j, "extracted_answer", r.extracted_answer);
    r.output_tokens = j.at("output_tokens").get<std::int64_t>();
    read_opt(j, "backend_seed", r.backend_seed);
    r.text = j.at("text").get<std::string>();
    if ((r.provenance == Provenance::chain_conditioned) != !r.chain_member_ids.empty())
        throw Error(ErrorCode::schema_invalid, "record '" + r.id + "': chain_member_ids must be non-empty exactly "
                                                                  "for chain_conditioned records");
}

void to_json(json& j, const PriorityScore& s)
{
    j = json{{"exploit", double_to_json(s.exploit)},
             {"explore", double_to_json(s.explore)},
             {"total", double_to_json(s.total)}};
}

void from_json(const json& j, PriorityScore& s)
{
    s.exploit = double_from_json(j.at("exploit"));
    s.explore = double_from_json(j.at("explore"));
    s.total = double_from_json(j.at("total"));
}

void to_json(json& j, const AllocationRound& r)
{
    json pri = json::array();
    for (const auto& p : r.priorities) {
        json e = p.score;
        e["query_id"] = p.query_id;
        pri.push_back(std::move(e));
    }
    j = json{{"round_index", r.round_index},
             {"phase", to_string(r.phase)},
             {"priorities", std::move(pri)},
             {"selected", r.selected},
             {"used_samples", r.used_samples},
             {"charged_samples", r.charged_samples},
             {"output_tokens", r.output_tokens},
             {"shortfall", r.shortfall}};
    if (r.correctness_snapshot) {
        json snap = json::object();
        for (const auto& [id, c] : *r.correctness_snapshot) snap[id] = to_string(c);
        j["correctness_snapshot"] = std::move(snap);
    } else {
        j["correctness_snapshot"] = nullptr;
    }
}

void from_json(const json& j, AllocationRound& r)
{
    r.round_index = j.at("round_index").get<int>();
    r.phase = parse_round_phase(j.at("phase").get<std::string>());
    r.priorities.clear();
    for (const auto& e : j.at("priorities")) r.priorities.push_back({e.at("query_id").get<std::string>(), e.get<PriorityScore>()});
    r.selected = j.at("selected").get<std::vector<std::string>>();
    r.used_samples = j.at("used_samples").get<std::int64_t>();
    r.charged_samples = j.at("charged_samples").get<std::int64_t>();
    r.output_tokens = j.at("output_tokens").get<std::int64_t>();
    r.shortfall = j.value("shortfall", 0);
    r.correctness_snapshot.reset();
    if (auto it = j.find("correctness_snapshot"); it != j.end() && !it->is_null()) {
        std::map<std::string, Correctness> snap;
        for (const auto& [id, c] : it->items()) snap[id] = parse_correctness(c.get<std::string>());
        r.correctness_snapshot = std::move(snap);
    }
}

void to_json(json& j, const ExtractionPattern& p)
{
    std::vector<std::string> kinds;
    for (auto k : p.kinds) kinds.emplace_back(to_string(k));
    j = json{{"name", p.name},
             {"regex", p.regex},
             {"domains", kinds},
             {"tier", p.tier},
             {"case_insensitive", p.case_insensitive}};
}

void from_json(const json& j, ExtractionPattern& p)
{
    p.name = j.at("name").get<std::string>();
    p.regex = j.at("regex").get<std::string>();
    p.kinds.clear();
    for (const auto& k : j.at("domains")) p.kinds.push_back(parse_answer_kind(k.get<std::string>()));
    p.tier = j.value("tier", 0);
    p.case_insensitive = j.value("case_insensitive", true);
}

void to_json(json& j, const SimulatorProfile& p)
{
    json answers = json::array();
    for (const auto& a : p.answers) answers.push_back({{"value", a.value}, {"probability", a.probability}});
    j = json{{"query_id", p.query_id},
             {"answers", std::move(answers)},
             {"unextractable", p.unextractable},
             {"correct", opt_json(p.correct)},
             {"conditioning_gain", p.conditioning_gain},
             {"continuation_keep", p.continuation_keep},
             {"tokens", {{"mean", p.token_mean}, {"stddev", p.token_stddev}}},
             {"failure_rate", p.failure_rate},
             {"max_prompt_chars", opt_json(p.max_prompt_chars)}};
}

void from_json(const json& j, SimulatorProfile& p)
{
    p = SimulatorProfile{};
    p.query_id = j.at("query_id").get<std::string>();
    for (const auto& a : j.at("answers")) p.answers.push_back({a.at("value").get<std::string>(), a.at("probability").get<double>()});
    read_opt(j, "unextractable", p.unextractable);
    read_opt(j, "correct", p.correct);
    read_opt(j, "conditioning_gain", p.conditioning_gain);
    read_opt(j, "continuation_keep", p.continuation_keep);
    if (auto it = j.find("tokens"); it != j.end() && it->is_object()) {
        read_opt(*it, "mean", p.token_mean);
        read_opt(*it, "stddev", p.token_stddev);
    }
    read_opt(j, "failure_rate", p.failure_rate);
    read_opt(j, "max_prompt_chars", p.max_prompt_chars);
}

void to_json(json& j, const FinalAnswer& a)
{
    j = json{{"query_id", a.query_id},
             {"answer", opt_json(a.answer)},
             {"gold", opt_json(a.gold)},
             {"correctness", to_string(a.correctness)},
             {"samples", a.samples},
             {"output_tokens", a.output_tokens}};
}

void from_json(const json& j, FinalAnswer& a)
{
    a.query_id = j.at("query_id").get<std::string>();
    read_opt(j, "answer", a.answer);
    read_opt(j, "gold", a.gold);
    a.correctness = parse_correctness(j.at("correctness").get<std::string>());
    a.samples = j.at("samples").get<std::int64_t>();
    a.output_tokens = j.at("output_tokens").get<std::int64_t>();
}

void to_json(json& j, const RunConfig& c)
{
    const auto& s = c.sampler;
    const auto& a = c.allocator;
    const auto& b = c.backend;
    j = json{
        {"policy", to_string(c.policy)},
        {"total_samples", c.total_samples},
        {"seed", c.seed},
        {"sampler",
         {{"unit_size", s.unit_size},
          {"thought_length", s.thought_length},
          {"temperature", s.decoding.temperature},
          {"max_output_tokens", s.decoding.max_output_tokens},
          {"chain_template",
           {{"prompt", s.chain_template.prompt},
            {"member", s.chain_template.member},
            {"separator", s.chain_template.separator}}}}},
        {"allocator",
         {{"exploration_ratio", a.exploration_ratio},
          {"subset_size", opt_json(a.subset_size)},
          {"measure", to_string(a.measure)},
          {"tie_break_seed", a.tie_break_seed}}},
        {"baseline", {{"trigger_phrase", c.trigger_phrase}, {"continuation_template", c.continuation_template}}},
        {"backend",
         {{"kind", to_string(b.kind)},
          {"concurrency_cap", b.concurrency_cap},
          {"retry", {{"max_attempts", b.retry.max_attempts}, {"backoff_base_ms", b.retry.backoff_base.count()}}},
          {"http",
           {{"endpoint", b.http.endpoint},
            {"model", b.http.model},
            {"auth_env", b.http.auth_env},
            {"timeout_s", b.http.timeout.count()}}}}},
        {"extraction_patterns", patterns_to_json(s.patterns ? s.patterns->patterns() : default_extraction_patterns())},
        {"queries", c.queries},
        {"profiles", c.profiles},
    };
}

void from_json(const json& j, RunConfig& c)
{
    c = RunConfig{};
    if (j.contains("policy")) c.policy = parse_policy_kind(j["policy"].get<std::string>());
    read_opt(j, "total_samples", c.total_samples);
    read_opt(j, "seed", c.seed);
    if (auto it = j.find("sampler"); it != j.end()) {
        const auto& s = *it;
        read_opt(s, "unit_size", c.sampler.unit_size);
        read_opt(s, "thought_length", c.sampler.thought_length);
        read_opt(s, "temperature", c.sampler.decoding.temperature);
        read_opt(s, "max_output_tokens", c.sampler.decoding.max_output_tokens);
        if (auto t = s.find("chain_template"); t != s.end() && t->is_object()) {
            read_opt(*t, "prompt", c.sampler.chain_template.prompt);
            read_opt(*t, "member", c.sampler.chain_template.member);
            read_opt(*t, "separator", c.sampler.chain_template.separator);
        }
    }
    if (auto it = j.find("allocator"); it != j.end()) {
        const auto& a = *it;
        read_opt(a, "exploration_ratio", c.allocator.exploration_ratio);
        read_opt(a, "subset_size", c.allocator.subset_size);
        if (a.contains("measure")) c.allocator.measure = parse_uncertainty_measure(a["measure"].get<std::string>());
        read_opt(a, "tie_break_seed", c.allocator.tie_break_seed);
    }
    if (auto it = j.find("baseline"); it != j.end()) {
        read_opt(*it, "trigger_phrase", c.trigger_phrase);
        read_opt(*it, "continuation_template", c.continuation_template);
    }
    if (auto it = j.find("backend"); it != j.end()) {
        const auto& b = *it;
        if (b.contains("kind")) c.backend.kind = parse_backend_kind(b["kind"].get<std::string>());
        read_opt(b, "concurrency_cap", c.backend.concurrency_cap);
        if (auto r = b.find("retry"); r != b.end()) {
            read_opt(*r, "max_attempts", c.backend.retry.max_attempts);
            if (r->contains("backoff_base_ms"))
                c.backend.retry.backoff_base = std::chrono::milliseconds((*r)["backoff_base_ms"].get<std::int64_t>());
        }
        if (auto h = b.find("http"); h != b.end()) {
            read_opt(*h, "endpoint", c.backend.http.endpoint);
            read_opt(*h, "model", c.backend.http.model);
            read_opt(*h, "auth_env", c.backend.http.auth_env);
            if (h->contains("timeout_s")) c.backend.http.timeout = std::chrono::seconds((*h)["timeout_s"].get<std::int64_t>());
        }
    }
    if (auto it = j.find("extraction_patterns"); it != j.end() && !it->is_null())
        c.sampler.patterns = std::make_shared<const PatternTable>(patterns_from_json(*it));
    if (auto it = j.find("queries"); it != j.end()) c.queries = it->get<QuerySet>();
    if (auto it = j.find("profiles"); it != j.end()) c.profiles = it->get<std::vector<SimulatorProfile>>();
}

json profiles_to_json(const std::vector<SimulatorProfile>& profiles)
{
    return json{{"schema", "dynscale.simulator_profile"},
                {"version", simulator_profile_version},
                {"profiles", profiles}};
}

std::vector<SimulatorProfile> profiles_from_json(const json& doc)
{
    try {
        if (!doc.is_object()) throw Error(ErrorCode::schema_invalid, "profile document must be an object");
        if (doc.value("schema", std::string()) != "dynscale.simulator_profile")
            throw Error(ErrorCode::schema_invalid, "schema: expected 'dynscale.simulator_profile'");
        if (doc.value("version", 0) != simulator_profile_version)
            throw Error(ErrorCode::schema_invalid, "version: unsupported simulator profile version");
        if (!doc.contains("profiles") || !doc["profiles"].is_array())
            throw Error(ErrorCode::schema_invalid, "profiles: must be an array");
        std::vector<SimulatorProfile> out;
        const auto& arr = doc["profiles"];
        for (std::size_t i = 0; i < arr.size(); ++i) {
            try {
                out.push_back(arr[i].get<SimulatorProfile>());
            } catch (const json::exception& e) {
                throw Error(ErrorCode::schema_invalid, "profiles[" + std::to_string(i) + "]: " + e.what());
            }
        }
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema_invalid, e.what());
    }
}

json patterns_to_json(const std::vector<ExtractionPattern>& patterns)
{
    return json(patterns);
}

std::vector<ExtractionPattern> patterns_from_json(const json& doc)
{
    const json& arr = doc.is_object() ? doc.at("patterns") : doc;
    return arr.get<std::vector<ExtractionPattern>>();
}

json record_to_json(const RunRecord& record, bool include_wall_clock)
{
    const auto& l = record.ledger;
    json j{{"schema_version", record.schema_version},
           {"run_id", record.run_id},
           {"config", record.config},
           {"samples", record.samples},
           {"rounds", l.rounds},
           {"ledger",
            {{"total_samples", l.total_samples},
             {"unit_size", l.unit_size},
             {"used_samples", l.used_samples},
             {"charged_samples", l.charged_samples},
             {"output_tokens", l.output_tokens}}},
           {"answers", record.answers},
           {"accuracy", record.accuracy ? double_to_json(*record.accuracy) : json(nullptr)}};
    if (include_wall_clock) j["wall_clock_seconds"] = record.wall_clock_seconds;
    return j;
}

}  // namespace dynscale
