#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dynscale/allocator.hpp"
#include "dynscale/error.hpp"
#include "dynscale/simulator.hpp"
#include "test_support.hpp"

using namespace dynscale;
using dynscale::testing::answered;
using dynscale::testing::mc_query;
using dynscale::testing::profile;

namespace {

QueryState state_with(std::vector<std::optional<std::string>> answers)
{
    QueryState s;
    s.query = mc_query("q");
    int i = 0;
    for (auto& a : answers) s.append(answered(std::to_string(i++), std::move(a)));
    return s;
}

QueryPriority prio(const std::string& id, double total) { return {id, {total, 0.0, total}}; }

SamplerConfig sampler(int unit = 8, int k = 4)
{
    SamplerConfig c;
    c.unit_size = unit;
    c.thought_length = k;
    return c;
}

}  // namespace

TEST(SamplingPriority, HandComputedValues)
{
    AllocatorConfig cfg;
    cfg.exploration_ratio = 0.25;
    // u = 0.5: counts {A:4, B:2, C:2}.
    auto s = state_with({"A", "A", "A", "A", "B", "B", "C", "C"});
    const auto p = sampling_priority(s, 16, cfg);
    EXPECT_NEAR(p.exploit, 0.5, 1e-12);
    EXPECT_NEAR(p.total, 0.6472, 1e-4);

    auto unanimous = state_with({"A", "A", "A", "A", "A", "A", "A", "A"});
    EXPECT_NEAR(sampling_priority(unanimous, 8, cfg).total, 0.1275, 1e-4);

    cfg.exploration_ratio = 0.0;
    for (std::int64_t used : {8, 100, 100000}) {
        const auto z = sampling_priority(s, used, cfg);
        EXPECT_DOUBLE_EQ(z.total, z.exploit);
        EXPECT_DOUBLE_EQ(z.explore, 0.0);
    }
}

TEST(SamplingPriority, RejectsEmptyState)
{
    QueryState s;
    s.query = mc_query("q");
    EXPECT_THROW(sampling_priority(s, 8, AllocatorConfig{}), Error);
}

TEST(SelectSubset, Examples)
{
    Rng rng(SeedStream(1));
    std::vector<QueryPriority> ps{prio("q1", 0.9), prio("q2", 0.1), prio("q3", 0.5)};
    EXPECT_EQ(select_subset(ps, 1, rng), std::vector<std::string>{"q1"});
    EXPECT_EQ(select_subset(ps, 2, rng), (std::vector<std::string>{"q1", "q3"}));
    EXPECT_EQ(select_subset(ps, 5, rng).size(), 3u);

    std::vector<QueryPriority> tie{prio("q1", 0.9), prio("q2", 0.9)};
    Rng a(SeedStream(42));
    Rng b(SeedStream(42));
    EXPECT_EQ(select_subset(tie, 1, a), select_subset(tie, 1, b));
}

TEST(SelectSubset, TiesAreBrokenFairly)
{
    std::vector<QueryPriority> tie{prio("q1", 0.9), prio("q2", 0.9), prio("q3", 0.9), prio("q4", 0.1)};
    std::map<std::string, int> hist;
    Rng rng(SeedStream(8));
    for (int i = 0; i < 6000; ++i) ++hist[select_subset(tie, 1, rng).front()];
    EXPECT_EQ(hist.count("q4"), 0u);
    for (const auto* id : {"q1", "q2", "q3"}) EXPECT_NEAR(hist[id] / 6000.0, 1.0 / 3.0, 0.03);
}

TEST(Allocate, TwoQueryLoopArithmetic)
{
    QuerySet qs{mc_query("q1", "A"), mc_query("q2", "B")};
    SimulatorBackend backend(qs, {profile("q1", {{"A", 0.5}, {"B", 0.5}}), profile("q2", {{"B", 1.0}})});
    AllocatorConfig cfg;
    cfg.subset_size = 1;
    const auto res = allocate(qs, backend, sampler(), cfg, 32, SeedStream(3));
    ASSERT_EQ(res.ledger.rounds.size(), 3u);
    EXPECT_EQ(res.ledger.rounds[0].phase, RoundPhase::initial);
    EXPECT_EQ(res.ledger.rounds[0].used_samples, 16);
    EXPECT_EQ(res.ledger.rounds[0].selected.size(), 2u);
    for (int r = 1; r <= 2; ++r) {
        const auto& round = res.ledger.rounds[static_cast<std::size_t>(r)];
        EXPECT_EQ(round.phase, RoundPhase::dynamic);
        ASSERT_EQ(round.selected.size(), 1u);
        double best = -1.0;
        for (const auto& p : round.priorities) best = std::max(best, p.score.total);
        for (const auto& p : round.priorities)
            if (p.query_id == round.selected[0]) {
                EXPECT_EQ(p.score.total, best);
            }
    }
    EXPECT_EQ(res.ledger.used_samples, 32);
    EXPECT_EQ(res.ledger.charged_samples, 32);
    EXPECT_NO_THROW(check_conservation(res.ledger, res.states));
}

TEST(Allocate, MinimalBudgetMatchesOneUnitPerQuery)
{
    QuerySet qs{mc_query("q1", "A"), mc_query("q2", "B"), mc_query("q3", "C")};
    std::vector<SimulatorProfile> ps{profile("q1", {{"A", 0.5}, {"B", 0.5}}, 0.1),
                                     profile("q2", {{"B", 0.6}, {"C", 0.4}}, 0.1),
                                     profile("q3", {{"C", 0.3}, {"D", 0.7}}, 0.1)};
    SimulatorBackend a(qs, ps);
    SimulatorBackend b(qs, ps);
    const auto seed = SeedStream(11);
    const auto res = allocate(qs, a, sampler(), AllocatorConfig{}, 24, seed);
    EXPECT_EQ(res.ledger.rounds.size(), 1u);
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const auto unit = integrated_sampling(qs[i], b, sampler(), unit_seed(seed, qs[i].id, 0), {0, 0});
        EXPECT_EQ(res.states[i].responses, unit.records);
        EXPECT_EQ(res.answers[i], majority_vote(unit.records));
    }
}

TEST(Allocate, RejectsInsufficientBudget)
{
    QuerySet qs{mc_query("q1"), mc_query("q2")};
    SimulatorBackend backend(qs, {profile("q1", {{"A", 1.0}}), profile("q2", {{"A", 1.0}})});
    try {
        allocate(qs, backend, sampler(), AllocatorConfig{}, 15, SeedStream(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::insufficient_budget);
    }
}

TEST(Allocate, PartialFinalRoundStaysWithinBudget)
{
    QuerySet qs;
    std::vector<SimulatorProfile> ps;
    for (int i = 0; i < 16; ++i) {
        const auto id = "q" + std::to_string(i);
        qs.push_back(mc_query(id, "A"));
        ps.push_back(profile(id, {{"A", 0.5}, {"B", 0.5}}));
    }
    SimulatorBackend backend(qs, ps);
    // m/8 = 2 per round; 16 units initially plus 3 more fit into 19 units.
    const auto res = allocate(qs, backend, sampler(), AllocatorConfig{}, 19 * 8 + 5, SeedStream(2));
    EXPECT_EQ(res.ledger.charged_samples, 19 * 8);
    EXPECT_EQ(res.ledger.rounds.back().selected.size(), 1u);
}

TEST(Allocate, BackendFailuresKeepConservation)
{
    QuerySet qs{mc_query("q1", "A"), mc_query("q2", "B")};
    dynscale::testing::ScriptedBackend backend(
        [](const CompletionRequest& r, int) -> Completion {
            if (r.query_id == "q2" || r.seed % 3 == 0) throw BackendFailure(FailureKind::transient, "down");
            return dynscale::testing::ok_completion("Answer: A");
        },
        1, RetryPolicy{1, std::chrono::milliseconds(0)});
    const auto res = allocate(qs, backend, sampler(), AllocatorConfig{}, 80, SeedStream(4));
    EXPECT_NO_THROW(check_conservation(res.ledger, res.states));
    EXPECT_EQ(res.ledger.charged_samples, 80);
    EXPECT_LT(res.ledger.used_samples, 80);
    EXPECT_GT(res.ledger.used_samples, 0);
    EXPECT_EQ(res.states[1].spent_samples, 0);
    EXPECT_FALSE(res.answers[1]);
    EXPECT_EQ(res.answers[0], "A");
}

TEST(Allocate, GreedyFundsMaxUncertaintyAfterRoundZero)
{
    std::mt19937 gen(21);
    for (int trial = 0; trial < 50; ++trial) {
        QuerySet qs;
        std::vector<SimulatorProfile> ps;
        const int m = 8 + static_cast<int>(gen() % 9);
        for (int i = 0; i < m; ++i) {
            const auto id = "q" + std::to_string(i);
            qs.push_back(mc_query(id, "A"));
            const double pa = 0.3 + 0.7 * (gen() % 100) / 100.0;
            ps.push_back(profile(id, {{"A", pa}, {"B", 1.0 - pa}}));
        }
        SimulatorBackend backend(qs, ps);
        AllocatorConfig cfg;
        cfg.exploration_ratio = 0.0;
        cfg.subset_size = 1 + static_cast<int>(gen() % 3);
        bool seen = false;
        auto observer = [&](AllocationRound& round, std::span<const QueryState> states) {
            if (round.round_index != 1) return;
            seen = true;
            std::vector<double> u;
            for (const auto& s : states) u.push_back(variation_ratio(answer_counts(s.responses)));
            double worst_selected = 2.0;
            for (const auto& id : round.selected)
                for (std::size_t i = 0; i < states.size(); ++i)
                    if (states[i].query.id == id) worst_selected = std::min(worst_selected, u[i]);
            for (std::size_t i = 0; i < states.size(); ++i) {
                const bool picked =
                    std::find(round.selected.begin(), round.selected.end(), states[i].query.id) != round.selected.end();
                if (!picked) {
                    EXPECT_LE(u[i], worst_selected);
                }
            }
        };
        allocate(qs, backend, sampler(), cfg, (m + 3) * 8, SeedStream(static_cast<std::uint64_t>(trial)), observer);
        EXPECT_TRUE(seen);
    }
}

TEST(Allocate, ExplorationReachesConfidentArm)
{
    QuerySet qs{mc_query("sure", "A"), mc_query("lost", "A")};
    SimulatorBackend backend(qs, {profile("sure", {{"A", 1.0}}), profile("lost", {}, 0.0, 1.0)});
    AllocatorConfig cfg;
    cfg.exploration_ratio = 2.0;
    cfg.subset_size = 1;
    const auto res = allocate(qs, backend, sampler(), cfg, 400 * 8, SeedStream(6));
    EXPECT_GE(res.states[0].spent_units, 2);
    EXPECT_EQ(res.states[0].spent_units + res.states[1].spent_units, 400);
}
