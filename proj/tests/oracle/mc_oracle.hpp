#pragma once

// Direct Monte-Carlo simulation of the bandit allocator and uniform BoN over
// categorical answer distributions. Shares no code with the engine: answers
// are drawn as labels (no text rendering or extraction), randomness comes
// from std::mt19937_64 with std::discrete_distribution.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace dynscale::testing {

struct OracleResult {
    double dyn_accuracy = 0.0;
    double bon_accuracy = 0.0;
    double first_round_rate = 0.0;
    double first_round_base_rate = 0.0;
};

namespace oracle_detail {

inline std::string draw(const std::vector<std::pair<std::string, double>>& dist, std::mt19937_64& gen)
{
    std::vector<double> w;
    for (const auto& [label, p] : dist) w.push_back(p);
    std::discrete_distribution<int> d(w.begin(), w.end());
    return dist[static_cast<std::size_t>(d(gen))].first;
}

inline std::vector<std::pair<std::string, double>> shifted(const ScenarioQuery& q)
{
    double pc = 0.0;
    for (const auto& [label, p] : q.distribution)
        if (label == q.correct) pc = p;
    const double target = std::min(1.0, pc + q.conditioning_gain);
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [label, p] : q.distribution) {
        if (label == q.correct)
            out.emplace_back(label, target);
        else
            out.emplace_back(label, pc < 1.0 ? p * (1.0 - target) / (1.0 - pc) : 0.0);
    }
    return out;
}

// Earliest-first tie break over sampling order.
inline std::string vote(const std::vector<std::string>& answers)
{
    std::map<std::string, int> counts;
    for (const auto& a : answers) ++counts[a];
    std::string best;
    int best_count = 0;
    for (const auto& a : answers) {
        if (counts[a] > best_count) {
            best = a;
            best_count = counts[a];
        }
    }
    return best;
}

inline double variation_ratio(const std::vector<std::string>& answers)
{
    std::map<std::string, int> counts;
    int top = 0;
    for (const auto& a : answers) top = std::max(top, ++counts[a]);
    return 1.0 - static_cast<double>(top) / static_cast<double>(answers.size());
}

inline void fund_unit(const ScenarioQuery& q, std::vector<std::string>& answers, int unit, int k,
                      std::mt19937_64& gen)
{
    std::vector<std::string> initial;
    for (int i = 0; i < unit / 2; ++i) initial.push_back(draw(q.distribution, gen));
    const auto conditioned = shifted(q);
    std::vector<std::string> cond;
    for (int j = 0; j < unit / 2; ++j) {
        std::vector<int> idx(initial.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), gen);
        bool has_correct = false;
        for (int t = 0; t < std::min<int>(k, static_cast<int>(idx.size())); ++t)
            has_correct |= initial[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])] == q.correct;
        cond.push_back(draw(has_correct ? conditioned : q.distribution, gen));
    }
    answers.insert(answers.end(), initial.begin(), initial.end());
    answers.insert(answers.end(), cond.begin(), cond.end());
}

}  // namespace oracle_detail

/// Seed-averaged accuracy of the bandit allocator and of uniform BoN at
/// B_total = budget_units * unit samples, plus the first dynamic round's
/// incorrect-funding rate vs the fraction of incorrect queries at that time.
inline OracleResult run_oracle(const std::vector<ScenarioQuery>& qs, int unit, int k, double c, int subset,
                               int budget_units, int runs, unsigned long long seed)
{
    using namespace oracle_detail;
    std::mt19937_64 gen(seed);
    const int m = static_cast<int>(qs.size());
    const int total = budget_units * unit;
    OracleResult res;
    int rate_rounds = 0;
    for (int run = 0; run < runs; ++run) {
        std::vector<std::vector<std::string>> answers(static_cast<std::size_t>(m));
        std::vector<int> spent(static_cast<std::size_t>(m), 0);
        int used = 0;
        for (int i = 0; i < m; ++i) {
            fund_unit(qs[static_cast<std::size_t>(i)], answers[static_cast<std::size_t>(i)], unit, k, gen);
            spent[static_cast<std::size_t>(i)] += unit;
            used += unit;
        }
        bool first = true;
        while (used + unit <= total) {
            std::vector<std::pair<double, int>> pri;
            for (int i = 0; i < m; ++i) {
                const auto s = static_cast<std::size_t>(i);
                const double a = variation_ratio(answers[s]) +
                                 c * std::sqrt(std::log(static_cast<double>(used)) / spent[s]);
                pri.emplace_back(a, i);
            }
            std::shuffle(pri.begin(), pri.end(), gen);
            std::stable_sort(pri.begin(), pri.end(), [](auto& x, auto& y) { return x.first > y.first; });
            const int n = std::min({subset, (total - used) / unit, m});
            if (first) {
                int wrong = 0;
                for (int i = 0; i < m; ++i)
                    wrong += vote(answers[static_cast<std::size_t>(i)]) != qs[static_cast<std::size_t>(i)].correct;
                int funded_wrong = 0;
                for (int t = 0; t < n; ++t) {
                    const auto s = static_cast<std::size_t>(pri[static_cast<std::size_t>(t)].second);
                    funded_wrong += vote(answers[s]) != qs[s].correct;
                }
                res.first_round_rate += static_cast<double>(funded_wrong) / n;
                res.first_round_base_rate += static_cast<double>(wrong) / m;
                ++rate_rounds;
                first = false;
            }
            for (int t = 0; t < n; ++t) {
                const auto s = static_cast<std::size_t>(pri[static_cast<std::size_t>(t)].second);
                fund_unit(qs[s], answers[s], unit, k, gen);
                spent[s] += unit;
                used += unit;
            }
        }
        int correct = 0;
        for (int i = 0; i < m; ++i)
            correct += vote(answers[static_cast<std::size_t>(i)]) == qs[static_cast<std::size_t>(i)].correct;
        res.dyn_accuracy += static_cast<double>(correct) / m;

        int bon_correct = 0;
        for (int i = 0; i < m; ++i) {
            const int n = total / m + (i < total % m ? 1 : 0);
            std::vector<std::string> a;
            for (int t = 0; t < n; ++t) a.push_back(draw(qs[static_cast<std::size_t>(i)].distribution, gen));
            bon_correct += vote(a) == qs[static_cast<std::size_t>(i)].correct;
        }
        res.bon_accuracy += static_cast<double>(bon_correct) / m;
    }
    res.dyn_accuracy /= runs;
    res.bon_accuracy /= runs;
    if (rate_rounds > 0) {
        res.first_round_rate /= rate_rounds;
        res.first_round_base_rate /= rate_rounds;
    }
    return res;
}

}  // namespace dynscale::testing
