#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <functional>
#include <random>

#include "dynscale/uncertainty.hpp"
#include "test_support.hpp"

using namespace dynscale;

namespace {

AnswerCounts counts(std::vector<std::pair<std::string, std::int64_t>> c)
{
    AnswerCounts out;
    out.counts = std::move(c);
    for (const auto& [a, k] : out.counts) out.n += k;
    return out;
}

AnswerCounts random_counts(std::mt19937& gen)
{
    std::vector<std::pair<std::string, std::int64_t>> c;
    const int k = static_cast<int>(gen() % 6);
    for (int i = 0; i < k; ++i) c.emplace_back(std::string(1, static_cast<char>('A' + i)), 1 + gen() % 9);
    return counts(std::move(c));
}

}  // namespace

TEST(VariationRatio, Examples)
{
    EXPECT_DOUBLE_EQ(variation_ratio(counts({{"A", 4}})), 0.0);
    EXPECT_NEAR(variation_ratio(counts({{"A", 2}, {"B", 1}, {"C", 1}})), 0.5, 1e-12);
    EXPECT_NEAR(variation_ratio(counts({{"A", 1}, {"B", 1}, {"C", 1}, {"D", 1}})), 0.75, 1e-12);
    EXPECT_DOUBLE_EQ(variation_ratio(AnswerCounts{}), 1.0);
}

TEST(NormalizedEntropy, Examples)
{
    EXPECT_DOUBLE_EQ(normalized_entropy(counts({{"A", 4}})), 0.0);
    EXPECT_NEAR(normalized_entropy(counts({{"A", 2}, {"B", 2}})), 1.0, 1e-12);
    // -(0.75 ln 0.75 + 0.25 ln 0.25) / ln 2 = 0.811278...
    EXPECT_NEAR(normalized_entropy(counts({{"A", 3}, {"B", 1}})), 0.8113, 1e-4);
    EXPECT_DOUBLE_EQ(normalized_entropy(AnswerCounts{}), 1.0);
}

TEST(InverseMargin, Examples)
{
    EXPECT_DOUBLE_EQ(inverse_margin(counts({{"A", 4}})), 0.0);
    EXPECT_NEAR(inverse_margin(counts({{"A", 2}, {"B", 2}})), 1.0, 1e-12);
    EXPECT_NEAR(inverse_margin(counts({{"A", 3}, {"B", 1}})), 0.5, 1e-12);
    EXPECT_NEAR(inverse_margin(counts({{"B", 1}, {"A", 3}})), 0.5, 1e-12);
    EXPECT_DOUBLE_EQ(inverse_margin(AnswerCounts{}), 1.0);
}

TEST(Uncertainty, ParseNames)
{
    EXPECT_EQ(parse_uncertainty_measure("normalized_entropy"), UncertaintyMeasure::normalized_entropy);
    EXPECT_EQ(to_string(UncertaintyMeasure::inverse_margin), "inverse_margin");
    EXPECT_ANY_THROW(parse_uncertainty_measure("bogus"));
}

TEST(UncertaintyProperties, RangeUnanimityScale)
{
    std::mt19937 gen(3);
    for (int trial = 0; trial < 5000; ++trial) {
        const auto c = random_counts(gen);
        const std::int64_t factor = 1 + gen() % 5;
        auto scaled = c;
        scaled.n = 0;
        for (auto& [a, k] : scaled.counts) {
            k *= factor;
            scaled.n += k;
        }
        for (auto m : {UncertaintyMeasure::variation_ratio, UncertaintyMeasure::normalized_entropy,
                       UncertaintyMeasure::inverse_margin}) {
            const double u = uncertainty(m, c);
            EXPECT_GE(u, 0.0);
            EXPECT_LE(u, 1.0);
            const bool unanimous = c.n >= 1 && c.counts.size() == 1;
            EXPECT_EQ(u == 0.0, unanimous) << to_string(m);
            EXPECT_NEAR(uncertainty(m, scaled), u, 1e-12) << to_string(m);
        }
    }
}

TEST(UncertaintyProperties, VariationRatioMatchesRecount)
{
    std::mt19937 gen(5);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<ResponseRecord> rs;
        const int n = static_cast<int>(gen() % 12);
        for (int i = 0; i < n; ++i) {
            std::optional<std::string> a;
            if (gen() % 5 != 0) a = std::string(1, static_cast<char>('A' + gen() % 4));
            rs.push_back(dynscale::testing::answered(std::to_string(i), a));
        }
        // Brute-force oracle: tally with a map, no shared code.
        std::map<std::string, int> tally;
        int total = 0;
        for (const auto& r : rs)
            if (r.extracted_answer) {
                ++tally[*r.extracted_answer];
                ++total;
            }
        int top = 0;
        for (const auto& [a, k] : tally) top = std::max(top, k);
        const double expected = total == 0 ? 1.0 : 1.0 - static_cast<double>(top) / total;
        EXPECT_NEAR(variation_ratio(answer_counts(rs)), expected, 1e-12);
    }
}
