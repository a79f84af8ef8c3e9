// dynscale command line: run, sweep, metrics, replay.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dynscale/dataset.hpp"
#include "dynscale/error.hpp"
#include "dynscale/harness.hpp"
#include "dynscale/metrics.hpp"
#include "dynscale/serialization.hpp"

namespace fs = std::filesystem;
using namespace dynscale;

namespace {

struct RunOptions {
    std::string dataset;
    std::string backend = "simulator";
    std::string profile;
    std::string policy = "dynscaling";
    std::string config_file;
    std::string patterns_file;
    std::int64_t b_total = 0;
    int b_unit = 8;
    int k = 4;
    double c = 0.25;
    std::optional<int> subset_size;
    std::string measure = "variation_ratio";
    std::uint64_t seed = 0;
    double temperature = 0.6;
    int max_tokens = 8192;
    std::string trigger = "Wait";
    std::string endpoint;
    std::string model;
    std::string auth_env;
    int concurrency = 0;
    std::string out;
};

void add_run_flags(CLI::App& cmd, RunOptions& o, bool with_budget)
{
    cmd.add_option("--dataset", o.dataset, "Query set (JSON Lines)")->required();
    cmd.add_option("--backend", o.backend, "Completion backend")->check(CLI::IsMember({"http", "simulator"}));
    cmd.add_option("--profile", o.profile, "Simulator profile (JSON)");
    cmd.add_option("--policy", o.policy, "Sampling policy")->check(CLI::IsMember({"dynscaling", "bon", "sp1"}));
    cmd.add_option("--config", o.config_file, "Run configuration file; flags override it");
    cmd.add_option("--patterns", o.patterns_file, "Answer extraction pattern table (JSON)");
    if (with_budget) cmd.add_option("--b-total", o.b_total, "Total budget in samples")->required();
    cmd.add_option("--b-unit", o.b_unit, "Samples per budget unit");
    cmd.add_option("--k", o.k, "Thought chain length");
    cmd.add_option("--c", o.c, "Exploration ratio");
    cmd.add_option("--subset-size", o.subset_size, "Queries funded per round (default max(1, m/8))");
    cmd.add_option("--measure", o.measure, "Uncertainty measure")
        ->check(CLI::IsMember({"variation_ratio", "normalized_entropy", "inverse_margin"}));
    cmd.add_option("--seed", o.seed, "Run seed");
    cmd.add_option("--temperature", o.temperature, "Sampling temperature");
    cmd.add_option("--max-tokens", o.max_tokens, "Max output tokens per completion");
    cmd.add_option("--trigger", o.trigger, "SP1 trigger phrase");
    cmd.add_option("--endpoint", o.endpoint, "HTTP chat-completion endpoint URL");
    cmd.add_option("--model", o.model, "HTTP model name");
    cmd.add_option("--auth-env", o.auth_env, "Environment variable holding the bearer token");
    cmd.add_option("--concurrency", o.concurrency, "Max in-flight backend requests");
    cmd.add_option("--out", o.out, "Output directory")->required();
}

RunConfig build_config(const RunOptions& o, CLI::App& cmd)
{
    RunConfig c;
    if (!o.config_file.empty()) {
        std::ifstream in(o.config_file);
        if (!in) throw Error(ErrorCode::io_error, "cannot open config '" + o.config_file + "'");
        auto doc = json::parse(in);
        if (doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
        c = doc.get<RunConfig>();
    }
    auto given = [&](const char* flag) {
        const auto* opt = cmd.get_option_no_throw(flag);
        return opt && opt->count() > 0;
    };
    c.queries = load_query_set(o.dataset);
    if (given("--backend") || o.config_file.empty()) c.backend.kind = parse_backend_kind(o.backend);
    if (given("--policy") || o.config_file.empty()) c.policy = parse_policy_kind(o.policy);
    if (given("--b-total")) c.total_samples = o.b_total;
    if (given("--b-unit") || o.config_file.empty()) c.sampler.unit_size = o.b_unit;
    if (given("--k") || o.config_file.empty()) c.sampler.thought_length = o.k;
    if (given("--c") || o.config_file.empty()) c.allocator.exploration_ratio = o.c;
    if (o.subset_size) c.allocator.subset_size = o.subset_size;
    if (given("--measure") || o.config_file.empty()) c.allocator.measure = parse_uncertainty_measure(o.measure);
    if (given("--seed") || o.config_file.empty()) c.seed = o.seed;
    if (given("--temperature") || o.config_file.empty()) c.sampler.decoding.temperature = o.temperature;
    if (given("--max-tokens") || o.config_file.empty()) c.sampler.decoding.max_output_tokens = o.max_tokens;
    if (given("--trigger") || o.config_file.empty()) c.trigger_phrase = o.trigger;
    if (!o.endpoint.empty()) c.backend.http.endpoint = o.endpoint;
    if (!o.model.empty()) c.backend.http.model = o.model;
    if (!o.auth_env.empty()) c.backend.http.auth_env = o.auth_env;
    if (o.concurrency > 0) c.backend.concurrency_cap = o.concurrency;
    else if (o.config_file.empty() && c.backend.kind == BackendKind::http) c.backend.concurrency_cap = 4;
    if (c.backend.kind == BackendKind::http && !given("--config")) c.backend.retry.backoff_base = std::chrono::milliseconds(200);
    if (!o.patterns_file.empty()) {
        std::ifstream in(o.patterns_file);
        if (!in) throw Error(ErrorCode::io_error, "cannot open patterns '" + o.patterns_file + "'");
        c.sampler.patterns = std::make_shared<const PatternTable>(patterns_from_json(json::parse(in)));
    }
    if (c.backend.kind == BackendKind::simulator) {
        if (o.profile.empty() && c.profiles.empty())
            throw Error(ErrorCode::invalid_config, "--profile is required with the simulator backend");
        if (!o.profile.empty()) c.profiles = load_simulator_profile(o.profile, &c.queries);
    }
    return c;
}

void print_summary(const RunRecord& r, const fs::path& dir)
{
    std::cout << r.run_id << ": " << r.ledger.used_samples << "/" << r.ledger.total_samples << " samples, "
              << r.ledger.output_tokens << " output tokens, " << r.ledger.rounds.size() << " rounds";
    if (r.accuracy) std::cout << ", accuracy " << *r.accuracy;
    std::cout << " -> " << dir.string() << '\n';
}

std::vector<std::int64_t> parse_budgets(const std::string& text)
{
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item.empty()) continue;
        out.push_back(std::stoll(item));
    }
    if (out.empty()) throw Error(ErrorCode::invalid_config, "empty budget grid");
    return out;
}

std::vector<fs::path> collect_run_dirs(const std::vector<std::string>& inputs)
{
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::exists(p / "config.json")) {
            out.push_back(p);
            continue;
        }
        if (!fs::is_directory(p)) throw Error(ErrorCode::io_error, "'" + in + "' is not a run directory");
        std::vector<fs::path> found;
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_directory() && fs::exists(e.path() / "config.json")) found.push_back(e.path());
        std::sort(found.begin(), found.end());
        out.insert(out.end(), found.begin(), found.end());
    }
    return out;
}

void write_metrics(const std::vector<RunRecord>& records, int window, const fs::path& out)
{
    fs::create_directories(out);
    std::map<std::string, std::vector<RunRecord>> by_policy;
    for (const auto& r : records) by_policy[std::string(to_string(r.config.policy))].push_back(r);

    json summary{{"schema", "dynscale.metrics_summary"}, {"version", 1}, {"smoothing_window", window}};
    json curves = json::object();
    for (const auto& [policy, recs] : by_policy) {
        const auto raw = accuracy_curve(recs);
        const auto smoothed = smooth(raw, window);
        write_curve_csv(out / ("curve_" + policy + ".csv"), raw, smoothed);
        json pts = json::array();
        for (std::size_t i = 0; i < raw.points.size(); ++i)
            pts.push_back({{"budget_samples", raw.points[i].budget_samples},
                           {"budget_tokens", raw.points[i].budget_tokens},
                           {"accuracy", raw.points[i].accuracy},
                           {"accuracy_smoothed", smoothed.points[i].accuracy},
                           {"runs", raw.points[i].runs}});
        curves[policy] = std::move(pts);
    }
    summary["curves"] = std::move(curves);

    const auto rate_path = out / "allocation_rate.csv";
    fs::remove(rate_path);
    json rates = json::object();
    for (const auto& r : records) {
        if (r.config.policy != PolicyKind::dynscaling) continue;
        const auto pts = effective_allocation_rate(r);
        write_allocation_rate_csv(rate_path, r.run_id, pts, true);
        if (!pts.empty()) rates[r.run_id] = pts.back().cumulative_rate;
    }
    summary["cumulative_allocation_rate"] = std::move(rates);
    std::ofstream(out / "metrics_summary.json") << summary.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Budgeted batch inference scaling with bandit budget allocation"};
    app.require_subcommand(1);

    RunOptions run_opts;
    auto* run = app.add_subcommand("run", "Execute one run and write its run directory");
    add_run_flags(*run, run_opts, true);

    RunOptions sweep_opts;
    std::string budgets;
    int repeats = 3;
    int sweep_window = 3;
    auto* sweep = app.add_subcommand("sweep", "Run a budget grid with repeated seeds");
    add_run_flags(*sweep, sweep_opts, false);
    sweep->add_option("--budgets", budgets, "Comma-separated B_total values in samples")->required();
    sweep->add_option("--repeats", repeats, "Seeds per budget (seed, seed+1, ...)");
    sweep->add_option("--window", sweep_window, "Smoothing window for the emitted curve");

    std::vector<std::string> metric_inputs;
    int window = 3;
    std::string metrics_out;
    auto* metrics = app.add_subcommand("metrics", "Accuracy curve and allocation rate from run directories");
    metrics->add_option("runs", metric_inputs, "Run directories or directories containing them")->required();
    metrics->add_option("--window", window, "Smoothing window");
    metrics->add_option("--out", metrics_out, "Output directory")->required();

    std::string replay_dir;
    auto* replay_cmd = app.add_subcommand("replay", "Re-execute a simulator run and verify it matches");
    replay_cmd->add_option("run_dir", replay_dir, "Run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto config = build_config(run_opts, *run);
            const auto record = execute_run(config);
            write_run_dir(run_opts.out, record);
            print_summary(record, run_opts.out);
        } else if (*sweep) {
            const auto base = build_config(sweep_opts, *sweep);
            const auto records = run_sweep(base, parse_budgets(budgets), repeats);
            const fs::path out(sweep_opts.out);
            for (const auto& r : records) {
                const auto dir = out / r.run_id;
                write_run_dir(dir, r);
                print_summary(r, dir);
            }
            bool gold = true;
            for (const auto& q : base.queries) gold &= q.gold_answer.has_value();
            if (gold) write_metrics(records, sweep_window, out / "metrics");
        } else if (*metrics) {
            std::vector<RunRecord> records;
            for (const auto& dir : collect_run_dirs(metric_inputs)) records.push_back(read_run_dir(dir));
            if (records.empty()) throw Error(ErrorCode::io_error, "no run directories found");
            write_metrics(records, window, metrics_out);
            std::cout << "metrics for " << records.size() << " runs -> " << metrics_out << '\n';
        } else if (*replay_cmd) {
            const auto record = read_run_dir(replay_dir);
            replay(record);
            std::cout << record.run_id << ": replay identical\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::replay_divergence ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
