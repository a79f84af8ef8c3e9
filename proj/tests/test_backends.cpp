#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "dynscale/error.hpp"
#include "dynscale/http_backend.hpp"
#include "dynscale/sampler.hpp"
#include "dynscale/simulator.hpp"
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace dynscale;
using dynscale::testing::mc_query;
using dynscale::testing::profile;
using dynscale::testing::ScriptedBackend;

namespace {

const AnswerDomain kChoice{AnswerKind::multiple_choice, {"A", "B", "C", "D"}};

std::filesystem::path temp_file(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "dynscale_backend_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

double frequency_of(const std::vector<Completion>& cs, const std::string& answer)
{
    int hits = 0;
    for (const auto& c : cs) {
        const auto a = extract_answer(c.text, kChoice);
        hits += a && a->value == answer;
    }
    return hits / static_cast<double>(cs.size());
}

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::io_error;
}

class MockServer {
public:
    MockServer()
    {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer()
    {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string chat_body(const std::string& content, int tokens)
{
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                          {"usage", {{"completion_tokens", tokens}}}}
        .dump();
}

}  // namespace

TEST(Simulator, DeterministicDistribution)
{
    QuerySet qs{mc_query("q1", "A")};
    SimulatorBackend backend(qs, {profile("q1", {{"A", 1.0}})});
    const auto cs = backend.sample("q1", qs[0].prompt, 3, DecodingParams{}, SeedStream(1));
    ASSERT_EQ(cs.size(), 3u);
    for (const auto& c : cs) {
        EXPECT_TRUE(c.ok());
        EXPECT_EQ(c.text, "Answer: A");
        EXPECT_GE(c.output_tokens, 1);
    }
}

TEST(Simulator, LawOfLargeNumbers)
{
    QuerySet qs{mc_query("q1", "A")};
    SimulatorBackend backend(qs, {profile("q1", {{"A", 0.6}, {"B", 0.4}})});
    const auto cs = backend.sample("q1", qs[0].prompt, 10000, DecodingParams{}, SeedStream(2024));
    EXPECT_NEAR(frequency_of(cs, "A"), 0.6, 0.01);
}

TEST(Simulator, ConditioningShift)
{
    const auto base = profile("q1", {{"A", 0.4}, {"B", 0.6}}, 0.2);
    const auto shifted = conditioned_profile(base, "A");
    ASSERT_EQ(shifted.answers.size(), 2u);
    EXPECT_NEAR(shifted.answers[0].probability, 0.6, 1e-12);
    EXPECT_NEAR(shifted.answers[1].probability, 0.4, 1e-12);

    const auto capped = conditioned_profile(profile("q", {{"A", 0.9}, {"B", 0.1}}, 0.5), "A");
    EXPECT_NEAR(capped.answers[0].probability, 1.0, 1e-12);
    EXPECT_NEAR(capped.answers[1].probability, 0.0, 1e-12);

    QuerySet qs{mc_query("q1", "A")};
    SimulatorBackend backend(qs, {base});
    std::vector<ResponseRecord> chain_with_a{dynscale::testing::answered("x0", "A"),
                                             dynscale::testing::answered("x1", "B")};
    std::vector<ResponseRecord> chain_without_a{dynscale::testing::answered("x0", "B"),
                                                dynscale::testing::answered("x1", "C")};
    const auto tmpl = default_chain_template();
    Rng rng(SeedStream(1));
    const auto with = render_conditioned_prompt(qs[0], build_chain(chain_with_a, 2, rng, tmpl), tmpl);
    const auto without = render_conditioned_prompt(qs[0], build_chain(chain_without_a, 2, rng, tmpl), tmpl);
    EXPECT_NEAR(frequency_of(backend.sample("q1", with, 10000, DecodingParams{}, SeedStream(5)), "A"), 0.6, 0.015);
    EXPECT_NEAR(frequency_of(backend.sample("q1", without, 10000, DecodingParams{}, SeedStream(5)), "A"), 0.4,
                0.015);
}

TEST(Simulator, UnextractableMassAndTokens)
{
    QuerySet qs{mc_query("q1", "A")};
    auto p = profile("q1", {{"A", 0.5}}, 0.0, 0.5);
    p.token_mean = 300;
    p.token_stddev = 30;
    SimulatorBackend backend(qs, {p});
    DecodingParams params;
    params.max_output_tokens = 310;
    const auto cs = backend.sample("q1", qs[0].prompt, 4000, params, SeedStream(3));
    int missing = 0;
    double tokens = 0;
    for (const auto& c : cs) {
        missing += !extract_answer(c.text, kChoice).has_value();
        EXPECT_LE(c.output_tokens, 310);
        tokens += static_cast<double>(c.output_tokens);
    }
    EXPECT_NEAR(missing / 4000.0, 0.5, 0.03);
    EXPECT_NEAR(tokens / 4000.0, 290.0, 10.0);
}

TEST(SimulatorProfile, FileRoundTripAndValidation)
{
    QuerySet qs{mc_query("q1", "A"), mc_query("q2", "B")};
    std::vector<SimulatorProfile> ps{profile("q1", {{"A", 0.7}, {"B", 0.3}}, 0.1),
                                     profile("q2", {{"B", 0.5}, {"C", 0.25}}, 0.0, 0.25)};
    ps[1].max_prompt_chars = 4096;
    ps[1].continuation_keep = 0.5;
    const auto path = temp_file("profile.json");
    save_simulator_profile(path, ps);
    const auto loaded = load_simulator_profile(path, &qs);
    EXPECT_EQ(loaded, ps);

    auto bad = ps;
    bad[0].answers[1].probability = 0.2;
    EXPECT_EQ(code_of([&] { validate_simulator_profiles(bad, &qs); }), ErrorCode::schema_invalid);
    try {
        validate_simulator_profiles(bad, nullptr);
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("profiles[0].answers"), std::string::npos) << e.what();
    }

    QuerySet more = qs;
    more.push_back(mc_query("q3"));
    try {
        validate_simulator_profiles(ps, &more);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::schema_invalid);
        EXPECT_NE(std::string(e.what()).find("'q3'"), std::string::npos);
    }

    auto neg = ps;
    neg[0].answers[0].probability = -0.1;
    neg[0].answers[1].probability = 1.1;
    EXPECT_EQ(code_of([&] { validate_simulator_profiles(neg, nullptr); }), ErrorCode::schema_invalid);

    std::ofstream(path) << R"({"schema":"dynscale.simulator_profile","version":1,"profiles":[{"query_id":"q1","answers":[{"value":"A","probability":0.9}]}]})";
    EXPECT_EQ(code_of([&] { load_simulator_profile(path); }), ErrorCode::schema_invalid);
    EXPECT_EQ(code_of([&] { load_simulator_profile(temp_file("absent.json")); }), ErrorCode::io_error);
}

TEST(Backend, ConcurrencyCapIsRespected)
{
    std::atomic<int> live{0};
    std::atomic<int> worst{0};
    ScriptedBackend backend(
        [&](const CompletionRequest& r, int) {
            const int now = live.fetch_add(1) + 1;
            int w = worst.load();
            while (now > w && !worst.compare_exchange_weak(w, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
            live.fetch_sub(1);
            return dynscale::testing::ok_completion("Answer: " + std::to_string(r.seed % 10));
        },
        3);
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < 60; ++i) reqs.push_back({"q", "p", DecodingParams{}, static_cast<std::uint64_t>(i)});
    const auto out = backend.complete(reqs);
    ASSERT_EQ(out.size(), 60u);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].text, "Answer: " + std::to_string(i % 10));
    EXPECT_LE(worst.load(), 3);
    EXPECT_LE(backend.peak_in_flight(), 3);
    EXPECT_GE(backend.peak_in_flight(), 2);
}

TEST(Backend, RetriesTransientFailures)
{
    std::mutex mu;
    std::map<std::uint64_t, int> calls;
    ScriptedBackend backend([&](const CompletionRequest& r, int attempt) {
        {
            std::lock_guard lock(mu);
            ++calls[r.seed];
        }
        if (attempt < 2) throw BackendFailure(FailureKind::rate_limited, "slow down");
        return dynscale::testing::ok_completion("Answer: A");
    });
    const auto out = backend.sample("q", "p", 2, DecodingParams{}, SeedStream(1));
    for (const auto& c : out) {
        EXPECT_TRUE(c.ok());
        EXPECT_EQ(c.attempts, 3);
    }
    EXPECT_EQ(backend.attempts_made(), 6);

    ScriptedBackend fatal([](const CompletionRequest&, int) -> Completion {
        throw BackendFailure(FailureKind::fatal, "bad request");
    });
    const auto f = fatal.sample("q", "p", 1, DecodingParams{}, SeedStream(1));
    EXPECT_EQ(f[0].status, CompletionStatus::unavailable);
    EXPECT_EQ(f[0].attempts, 1);

    ScriptedBackend exhausted([](const CompletionRequest&, int) -> Completion {
        throw BackendFailure(FailureKind::transient, "down");
    });
    const auto e = exhausted.sample("q", "p", 1, DecodingParams{}, SeedStream(1));
    EXPECT_EQ(e[0].status, CompletionStatus::unavailable);
    EXPECT_EQ(e[0].attempts, 5);
}

TEST(Backend, WorkerExceptionsPropagate)
{
    ScriptedBackend backend([](const CompletionRequest&, int) -> Completion { throw std::logic_error("bug"); }, 2);
    std::vector<CompletionRequest> reqs(4, CompletionRequest{"q", "p", DecodingParams{}, 1});
    EXPECT_THROW(backend.complete(reqs), std::logic_error);
}

TEST(Http, WireHelpers)
{
    const auto e = parse_endpoint("https://api.example.com:8443/v1/chat/completions");
    EXPECT_EQ(e.origin, "https://api.example.com:8443");
    EXPECT_EQ(e.path, "/v1/chat/completions");
    EXPECT_EQ(parse_endpoint("http://localhost").path, "/");
    EXPECT_THROW(parse_endpoint("localhost:80"), Error);
    EXPECT_THROW(parse_endpoint("ftp://x/y"), Error);

    CompletionRequest req{"q", "hello", DecodingParams{0.7, 512}, 9};
    const auto body = build_chat_request("m", req);
    EXPECT_EQ(body["model"], "m");
    EXPECT_EQ(body["messages"][0]["content"], "hello");
    EXPECT_EQ(body["max_tokens"], 512);
    EXPECT_EQ(body["seed"], 9);

    EXPECT_EQ(parse_chat_response(chat_body("Answer: B", 17)).output_tokens, 17);
    EXPECT_EQ(parse_chat_response(R"({"choices":[{"message":{"content":"abcdefgh"}}]})").output_tokens, 2);
    EXPECT_THROW(parse_chat_response("{}"), BackendFailure);
    EXPECT_THROW(parse_chat_response("not json"), BackendFailure);

    EXPECT_EQ(classify_http_failure(429, ""), FailureKind::rate_limited);
    EXPECT_EQ(classify_http_failure(503, ""), FailureKind::transient);
    EXPECT_EQ(classify_http_failure(413, ""), FailureKind::prompt_too_long);
    EXPECT_EQ(classify_http_failure(400, "maximum context length exceeded"), FailureKind::prompt_too_long);
    EXPECT_EQ(classify_http_failure(401, "unauthorized"), FailureKind::fatal);
}

TEST(Http, MockServerRetriesAndAuth)
{
    MockServer mock;
    std::atomic<int> hits{0};
    std::mutex mu;
    std::string seen_auth;
    nlohmann::json seen_body;
    mock.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = hits.fetch_add(1);
        {
            std::lock_guard lock(mu);
            seen_auth = req.get_header_value("Authorization");
            seen_body = nlohmann::json::parse(req.body);
        }
        if (n == 0) {
            res.status = 500;
            res.set_content("boom", "text/plain");
        } else if (n == 1) {
            res.status = 429;
            res.set_content("slow", "text/plain");
        } else if (seen_body["messages"][0]["content"].get<std::string>().size() > 100) {
            res.status = 400;
            res.set_content(R"({"error":"prompt is too long for the context window"})", "application/json");
        } else {
            res.set_content(chat_body("Reasoning... Answer: C", 42), "application/json");
        }
    });

    ::setenv("DYNSCALE_TEST_TOKEN", "sekrit", 1);
    HttpBackendConfig cfg;
    cfg.endpoint = mock.url();
    cfg.model = "tiny";
    cfg.auth_env = "DYNSCALE_TEST_TOKEN";
    cfg.concurrency_cap = 1;
    cfg.retry = {5, std::chrono::milliseconds(1)};
    cfg.timeout = std::chrono::seconds(5);
    HttpBackend backend(cfg);

    const auto out = backend.sample("q", "short prompt", 1, DecodingParams{}, SeedStream(1));
    ASSERT_TRUE(out[0].ok()) << out[0].error;
    EXPECT_EQ(out[0].attempts, 3);
    EXPECT_EQ(out[0].output_tokens, 42);
    EXPECT_EQ(extract_answer(out[0].text, kChoice)->value, "C");
    EXPECT_EQ(seen_auth, "Bearer sekrit");
    EXPECT_EQ(seen_body["model"], "tiny");

    const auto too_long = backend.sample("q", std::string(200, 'x'), 1, DecodingParams{}, SeedStream(2));
    EXPECT_EQ(too_long[0].status, CompletionStatus::prompt_too_long);
    EXPECT_EQ(too_long[0].attempts, 1);

    // Chain-conditioned prompts over the limit are re-issued as bare samples.
    SamplerConfig sc;
    sc.unit_size = 4;
    sc.thought_length = 2;
    const auto unit = integrated_sampling(mc_query("q1"), backend, sc, SeedStream(3), {0, 0});
    ASSERT_EQ(unit.records.size(), 4u);
    EXPECT_EQ(unit.fallbacks, 2);
    for (const auto& r : unit.records) EXPECT_EQ(r.extracted_answer, "C");
}

TEST(Http, UnreachableServerIsUnavailable)
{
    HttpBackendConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    cfg.auth_env = "";
    cfg.retry = {2, std::chrono::milliseconds(1)};
    cfg.timeout = std::chrono::seconds(1);
    HttpBackend backend(cfg);
    const auto out = backend.sample("q", "p", 1, DecodingParams{}, SeedStream(1));
    EXPECT_EQ(out[0].status, CompletionStatus::unavailable);
    EXPECT_EQ(out[0].attempts, 2);
}
