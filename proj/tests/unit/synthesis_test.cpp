#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mogphmm/synthesis.hpp"

using namespace mogphmm;

namespace {

// Closed-form mean of N(mu, sigma^2) conditioned on x >= 0.
double truncated_mean(double mu, double sigma)
{
    double const a = -mu / sigma;
    double const pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    double const cdf = 0.5 * std::erfc(-a / std::numbers::sqrt2);
    return mu + sigma * pdf / (1.0 - cdf);
}

LabeledSequence two_day_sequence()
{
    LabeledSequence seq;
    ActivityRecord a{*parse_iso_date("2016-01-01"), 100.0, 100.0, 100.0};
    ActivityRecord b{*parse_iso_date("2016-01-02"), 300.0, 300.0, 100.0};
    seq.records = {a, b};
    seq.labels = std::vector<int>{1, 2};
    return seq;
}

double disagreement(const LabeledSequence& a, const LabeledSequence& b)
{
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (*a.labels)[i] != (*b.labels)[i] ? 1 : 0;
    }
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

} // namespace

TEST(TruncatedNormal, ZeroSigmaIsExact)
{
    Rng rng(1);
    EXPECT_EQ(sample_nonnegative_normal(2.5, 0.0, rng), 2.5);
    EXPECT_EQ(sample_nonnegative_normal(0.0, 0.0, rng), 0.0);
    EXPECT_THROW(sample_nonnegative_normal(-1.0, 0.0, rng), SamplingError);
    EXPECT_THROW(sample_nonnegative_normal(1.0, -1.0, rng), ConfigError);
}

TEST(TruncatedNormal, ExhaustedRejectionThrows)
{
    Rng rng(2);
    EXPECT_THROW(sample_nonnegative_normal(-100.0, 1.0, rng), SamplingError);
}

TEST(TruncatedNormal, MeanMatchesClosedForm)
{
    for (auto [mu, sigma] : {std::pair{1.0, 1.0}, std::pair{0.0, 2.0}, std::pair{-0.5, 1.0}, std::pair{3.0, 0.5}}) {
        Rng rng(3);
        std::vector<double> xs;
        for (int i = 0; i < 100'000; ++i) {
            double const x = sample_nonnegative_normal(mu, sigma, rng);
            ASSERT_GE(x, 0.0);
            xs.push_back(x);
        }
        auto const s = sample_stats(xs);
        double const se = s.stddev / std::sqrt(static_cast<double>(xs.size()));
        EXPECT_NEAR(s.mean, truncated_mean(mu, sigma), 3.0 * se) << "mu=" << mu << " sigma=" << sigma;
    }
}

TEST(EstimateParams, WorkedExample)
{
    auto const p = estimate_synthesis_params(two_day_sequence(), 2);
    EXPECT_DOUBLE_EQ(p.mu_h, 2.0);
    EXPECT_DOUBLE_EQ(p.sigma_h, std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(p.mu_r, 2.0);
    EXPECT_TRUE(p.fallback_classes.empty());
    EXPECT_EQ(p.duration_pools[0], std::vector<double>{100.0});
}

TEST(EstimateParams, EmptyClassBorrowsGlobalPool)
{
    auto const p = estimate_synthesis_params(two_day_sequence(), 3);
    EXPECT_EQ(p.fallback_classes, std::vector<int>{3});
    EXPECT_EQ(p.duration_pools[2].size(), 2u);
}

TEST(EstimateParams, NeedsTwoUsableRecords)
{
    auto seq = two_day_sequence();
    seq.records[1] = {seq.records[1].date, 0.0, 0.0, 0.0};
    EXPECT_THROW(estimate_synthesis_params(seq, 2), DataError);
}

TEST(Synthesize, BalancedNonNegativeAndDeterministic)
{
    auto p = estimate_synthesis_params(demo_participant(), 5);
    p.samples_per_class = 50;
    p.seed = 9;
    auto const a = synthesize(p);
    ASSERT_EQ(a.size(), 250u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ((*a.labels)[i], static_cast<int>(i / 50) + 1);
        EXPECT_TRUE(record_problem(a.records[i]).empty());
    }
    EXPECT_EQ(synthesize(p), a);
    p.seed = 10;
    EXPECT_NE(synthesize(p), a);
}

TEST(Synthesize, DegenerateRatiosReproduceRatiosExactly)
{
    SynthesisParams p;
    p.mu_h = 1.5;
    p.mu_r = 2.0;
    p.duration_pools = {{100.0}, {200.0}};
    p.samples_per_class = 3;
    auto const s = synthesize(p);
    for (const ActivityRecord& r : s.records) {
        EXPECT_DOUBLE_EQ(r.distance, 1.5 * r.duration);
        EXPECT_DOUBLE_EQ(r.steps, 2.0 * r.duration);
    }
}

TEST(Noise, ZeroLevelKeepsLabels)
{
    auto const demo = demo_participant();
    auto const noisy = perturb_and_relabel(demo, 0.0, {}, 7);
    EXPECT_EQ(noisy.labels, demo.labels);
    EXPECT_EQ(noisy.records, demo.records);
}

TEST(Noise, PositiveLevelChangesSomeLabels)
{
    auto const demo = demo_participant();
    auto const noisy = perturb_and_relabel(demo, 0.2, {}, 7);
    EXPECT_GT(disagreement(demo, noisy), 0.0);
    EXPECT_EQ(noisy.records, demo.records);
    auto const moved = perturb_and_relabel(demo, 0.2, {}, 7, true);
    EXPECT_NE(moved.records, demo.records);
    EXPECT_EQ(moved.labels, noisy.labels);
}

TEST(Noise, DisagreementGrowsWithLevel)
{
    auto const demo = demo_participant();
    double previous = -1.0;
    for (double level : {0.0, 0.05, 0.1, 0.2}) {
        double total = 0.0;
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            total += disagreement(demo, perturb_and_relabel(demo, level, {}, seed));
        }
        EXPECT_GT(total / 30.0, previous);
        previous = total / 30.0;
    }
}

TEST(Noise, DefaultGrid)
{
    auto const g = default_noise_grid();
    ASSERT_EQ(g.size(), 21u);
    EXPECT_EQ(g.front(), 0.0);
    EXPECT_DOUBLE_EQ(g.back(), 0.2);
}

TEST(Demo, ReproducibleAndCoversAllClasses)
{
    auto const a = demo_participant();
    EXPECT_EQ(a, demo_participant());
    EXPECT_EQ(a.size(), 365u);
    std::vector<int> counts(6, 0);
    for (int l : *a.labels) {
        ++counts[static_cast<std::size_t>(l)];
    }
    for (int k = 1; k <= 5; ++k) {
        EXPECT_GT(counts[static_cast<std::size_t>(k)], 0) << "class " << k;
    }
}
