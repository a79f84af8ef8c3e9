#include "dynscale/harness.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dynscale/error.hpp"
#include "dynscale/serialization.hpp"

namespace dynscale {
namespace {

constexpr const char* kConfigFile = "config.json";
constexpr const char* kSamplesFile = "samples.jsonl";
constexpr const char* kRoundsFile = "rounds.jsonl";
constexpr const char* kSummaryFile = "summary.json";

json config_json(const RunConfig& c)
{
    return json(c);
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
    out << text;
}

json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema_invalid, path.string() + ": " + e.what());
    }
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
    std::vector<T> out;
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line).get<T>());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::schema_invalid, path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void check_schema(const json& doc, const std::string& name, const std::filesystem::path& path)
{
    if (doc.value("schema", std::string()) != name)
        throw Error(ErrorCode::schema_invalid, path.string() + ": expected schema '" + name + "'");
    if (doc.value("version", 0) != run_schema_version)
        throw Error(ErrorCode::schema_invalid, path.string() + ": unsupported version");
}

// Path of the first difference between two documents, or empty when equal.
std::string first_difference(const json& a, const json& b, const std::string& path)
{
    if (a.type() != b.type()) return path.empty() ? "/" : path;
    if (a.is_object()) {
        for (const auto& [key, value] : a.items()) {
            if (!b.contains(key)) return path + "/" + key;
            auto d = first_difference(value, b[key], path + "/" + key);
            if (!d.empty()) return d;
        }
        for (const auto& [key, value] : b.items())
            if (!a.contains(key)) return path + "/" + key;
        return {};
    }
    if (a.is_array()) {
        const auto n = std::min(a.size(), b.size());
        for (std::size_t i = 0; i < n; ++i) {
            auto d = first_difference(a[i], b[i], path + "/" + std::to_string(i));
            if (!d.empty()) return d;
        }
        if (a.size() != b.size()) return path + "/" + std::to_string(n);
        return {};
    }
    return a == b ? std::string() : (path.empty() ? "/" : path);
}

}  // namespace

std::string_view to_string(PolicyKind p)
{
    switch (p) {
    case PolicyKind::dynscaling: return "dynscaling";
    case PolicyKind::bon: return "bon";
    case PolicyKind::sp1: return "sp1";
    }
    return "dynscaling";
}

PolicyKind parse_policy_kind(std::string_view name)
{
    if (name == "dynscaling") return PolicyKind::dynscaling;
    if (name == "bon") return PolicyKind::bon;
    if (name == "sp1") return PolicyKind::sp1;
    throw Error(ErrorCode::invalid_config, "unknown policy '" + std::string(name) + "'");
}

void RunConfig::validate() const
{
    validate_query_set(queries);
    if (queries.empty()) throw Error(ErrorCode::invalid_config, "empty query set");
    if (total_samples < 1) throw Error(ErrorCode::invalid_config, "total_samples must be >= 1");
    sampler.validate();
    allocator.validate();
    baseline_config().validate();
    if (backend.kind == BackendKind::simulator) validate_simulator_profiles(profiles, &queries);
}

BaselineConfig RunConfig::baseline_config() const
{
    BaselineConfig b;
    b.kind = policy == PolicyKind::sp1 ? BaselineKind::sp1 : BaselineKind::bon;
    b.trigger_phrase = trigger_phrase;
    b.continuation_template = continuation_template;
    b.decoding = sampler.decoding;
    b.patterns = sampler.patterns;
    return b;
}

std::string compute_run_id(const RunConfig& config)
{
    std::ostringstream os;
    os << to_string(config.policy) << "-b" << config.total_samples << "-s" << config.seed << '-' << std::hex
       << std::setw(8) << std::setfill('0') << (fnv1a64(config_json(config).dump()) & 0xffffffffULL);
    return os.str();
}

std::unique_ptr<Backend> make_backend(const RunConfig& config)
{
    if (config.backend.kind == BackendKind::simulator)
        return std::make_unique<SimulatorBackend>(config.queries, config.profiles, config.backend.concurrency_cap,
                                                  config.backend.retry);
    auto http = config.backend.http;
    http.concurrency_cap = config.backend.concurrency_cap;
    http.retry = config.backend.retry;
    return std::make_unique<HttpBackend>(std::move(http));
}

std::map<std::string, Correctness> correctness_snapshot(std::span<const QueryState> states)
{
    std::map<std::string, Correctness> out;
    for (const auto& s : states) {
        if (!s.query.gold_answer) {
            out[s.query.id] = Correctness::unknown;
            continue;
        }
        const auto vote = majority_vote(s.responses);
        out[s.query.id] = vote && *vote == *s.query.gold_answer ? Correctness::correct : Correctness::incorrect;
    }
    return out;
}

RunRecord execute_run(const RunConfig& config)
{
    config.validate();
    auto backend = make_backend(config);
    return execute_run(config, *backend);
}

RunRecord execute_run(const RunConfig& config, Backend& backend)
{
    config.validate();
    const auto started = std::chrono::steady_clock::now();

    bool any_gold = false;
    for (const auto& q : config.queries) any_gold |= q.gold_answer.has_value();
    RoundObserver observer;
    if (any_gold) observer = [](AllocationRound& round, std::span<const QueryState> states) {
        round.correctness_snapshot = correctness_snapshot(states);
    };

    const SeedStream seed(config.seed);
    PolicyResult result;
    switch (config.policy) {
    case PolicyKind::dynscaling:
        result = allocate(config.queries, backend, config.sampler, config.allocator, config.total_samples, seed,
                          observer);
        break;
    case PolicyKind::bon:
        result = run_bon(config.queries, backend, config.total_samples, config.baseline_config(), seed, observer);
        break;
    case PolicyKind::sp1:
        result = run_sp1(config.queries, backend, config.total_samples, config.baseline_config(), seed, observer);
        break;
    }

    RunRecord record;
    record.run_id = compute_run_id(config);
    record.config = config;
    record.ledger = std::move(result.ledger);
    bool all_gold = true;
    int correct = 0;
    for (std::size_t i = 0; i < result.states.size(); ++i) {
        const auto& s = result.states[i];
        FinalAnswer a;
        a.query_id = s.query.id;
        a.answer = result.answers[i];
        a.gold = s.query.gold_answer;
        if (a.gold)
            a.correctness = a.answer && *a.answer == *a.gold ? Correctness::correct : Correctness::incorrect;
        else
            all_gold = false;
        correct += a.correctness == Correctness::correct;
        a.samples = s.spent_samples;
        a.output_tokens = s.spent_tokens;
        record.answers.push_back(std::move(a));
        record.samples.insert(record.samples.end(), s.responses.begin(), s.responses.end());
    }
    if (all_gold) record.accuracy = static_cast<double>(correct) / static_cast<double>(result.states.size());
    record.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return record;
}

void write_run_dir(const std::filesystem::path& dir, const RunRecord& record)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot create '" + dir.string() + "': " + ec.message());

    json config{{"schema", "dynscale.run_config"},
                {"version", run_schema_version},
                {"run_id", record.run_id},
                {"config", record.config}};
    write_text(dir / kConfigFile, config.dump(2) + "\n");

    std::string samples;
    for (const auto& r : record.samples) samples += json(r).dump() + "\n";
    write_text(dir / kSamplesFile, samples);

    std::string rounds;
    for (const auto& r : record.ledger.rounds) rounds += json(r).dump() + "\n";
    write_text(dir / kRoundsFile, rounds);

    const auto& l = record.ledger;
    std::int64_t tokens = 0;
    for (const auto& r : record.samples) tokens += r.output_tokens;
    json summary{{"schema", "dynscale.run_summary"},
                 {"version", run_schema_version},
                 {"run_id", record.run_id},
                 {"policy", to_string(record.config.policy)},
                 {"ledger",
                  {{"total_samples", l.total_samples},
                   {"unit_size", l.unit_size},
                   {"used_samples", l.used_samples},
                   {"charged_samples", l.charged_samples},
                   {"output_tokens", l.output_tokens}}},
                 {"rounds", l.rounds.size()},
                 {"answers", record.answers},
                 {"accuracy", record.accuracy ? double_to_json(*record.accuracy) : json(nullptr)},
                 {"sample_output_tokens", tokens},
                 {"wall_clock_seconds", record.wall_clock_seconds}};
    write_text(dir / kSummaryFile, summary.dump(2) + "\n");
}

RunRecord read_run_dir(const std::filesystem::path& dir)
{
    RunRecord record;
    const auto config_path = dir / kConfigFile;
    const auto config = read_json_file(config_path);
    check_schema(config, "dynscale.run_config", config_path);
    try {
        record.run_id = config.at("run_id").get<std::string>();
        record.config = config.at("config").get<RunConfig>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema_invalid, config_path.string() + ": " + e.what());
    }
    record.schema_version = config.at("version").get<int>();
    record.samples = read_jsonl<ResponseRecord>(dir / kSamplesFile);

    const auto summary_path = dir / kSummaryFile;
    const auto summary = read_json_file(summary_path);
    check_schema(summary, "dynscale.run_summary", summary_path);
    try {
        const auto& l = summary.at("ledger");
        record.ledger.total_samples = l.at("total_samples").get<std::int64_t>();
        record.ledger.unit_size = l.at("unit_size").get<std::int64_t>();
        record.ledger.used_samples = l.at("used_samples").get<std::int64_t>();
        record.ledger.charged_samples = l.at("charged_samples").get<std::int64_t>();
        record.ledger.output_tokens = l.at("output_tokens").get<std::int64_t>();
        record.answers = summary.at("answers").get<std::vector<FinalAnswer>>();
        if (!summary.at("accuracy").is_null()) record.accuracy = double_from_json(summary["accuracy"]);
        record.wall_clock_seconds = summary.at("wall_clock_seconds").get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema_invalid, summary_path.string() + ": " + e.what());
    }
    record.ledger.rounds = read_jsonl<AllocationRound>(dir / kRoundsFile);
    return record;
}

RunRecord replay(const RunRecord& record)
{
    if (record.config.backend.kind != BackendKind::simulator)
        throw Error(ErrorCode::precondition_failed, "replay requires a simulator run; run '" + record.run_id +
                                                        "' used the " + std::string(to_string(record.config.backend.kind)) +
                                                        " backend");
    RunRecord fresh = execute_run(record.config);
    const auto want = record_to_json(record, false);
    const auto got = record_to_json(fresh, false);
    if (const auto diff = first_difference(want, got, ""); !diff.empty())
        throw Error(ErrorCode::replay_divergence, "run '" + record.run_id + "' diverges at " + diff);
    fresh.wall_clock_seconds = record.wall_clock_seconds;
    return fresh;
}

std::vector<RunRecord> run_sweep(const RunConfig& base, const std::vector<std::int64_t>& budgets, int repeats)
{
    if (repeats < 1) throw Error(ErrorCode::invalid_config, "repeats must be >= 1");
    std::vector<RunRecord> out;
    for (const auto b : budgets) {
        for (int r = 0; r < repeats; ++r) {
            RunConfig c = base;
            c.total_samples = b;
            c.seed = base.seed + static_cast<std::uint64_t>(r);
            out.push_back(execute_run(c));
        }
    }
    return out;
}

}  // namespace dynscale
