#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <vector>

#include "mogphmm/experiment.hpp"

using namespace mogphmm;

namespace {

LabeledSequence labeled_days(const std::vector<int>& labels)
{
    LabeledSequence seq;
    seq.participant_id = "t";
    Date const start = *parse_iso_date("2016-01-01");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double const steps = 3000.0 * labels[i] - 1500.0;
        seq.records.push_back({add_days(start, static_cast<int>(i)), steps, steps * 0.7, steps / 1.8});
    }
    seq.labels = labels;
    return seq;
}

// Maps a record straight to its true label: B becomes the identity.
struct OracleObserver {
    LabelRule rule;
    [[nodiscard]] int observation_count() const { return rule.score_count() + 1; }
    [[nodiscard]] int classify(std::span<const double> x) const
    {
        ActivityRecord r;
        r.steps = x[0];
        r.distance = x[1];
        r.duration = x[2];
        return rule.score(r);
    }
};

ExperimentConfig tiny_config()
{
    ExperimentConfig cfg;
    cfg.evolution.population_size = 20;
    cfg.evolution.max_evaluations = 200;
    cfg.samples_per_class = 20;
    cfg.folds = 5;
    cfg.noise.grid = {0.0, 0.1};
    return cfg;
}

} // namespace

TEST(SplitHalf, StratifiedEvenCounts)
{
    std::vector<int> labels;
    for (int k = 1; k <= 5; ++k) {
        labels.insert(labels.end(), 20, k);
    }
    auto const s = split_half(labeled_days(labels), 3);
    EXPECT_EQ(s.train.size(), 50u);
    EXPECT_EQ(s.validation.size(), 50u);
    for (int k = 1; k <= 5; ++k) {
        EXPECT_EQ(std::count(s.train.labels->begin(), s.train.labels->end(), k), 10);
    }
}

TEST(SplitHalf, OddCountsFavourTrain)
{
    auto const s = split_half(labeled_days({2, 2, 2}), 3);
    EXPECT_EQ(s.train.size(), 2u);
    EXPECT_EQ(s.validation.size(), 1u);
}

TEST(SplitHalf, SingletonGoesToTrainWithNotice)
{
    auto const s = split_half(labeled_days({1, 1, 3}), 3);
    EXPECT_EQ(s.singleton_labels, std::vector<int>{3});
    EXPECT_EQ(std::count(s.train.labels->begin(), s.train.labels->end(), 3), 1);
}

TEST(SplitHalf, PropertyUnionIsInput)
{
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> label(1, 5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> labels(37);
        for (int& l : labels) {
            l = label(rng);
        }
        auto const data = labeled_days(labels);
        auto const s = split_half(data, static_cast<std::uint64_t>(trial));
        std::vector<std::string> all;
        std::vector<std::string> parts;
        for (const auto& r : data.records) {
            all.push_back(format_iso_date(r.date));
        }
        for (const auto* side : {&s.train, &s.validation}) {
            for (const auto& r : side->records) {
                parts.push_back(format_iso_date(r.date));
            }
        }
        std::sort(parts.begin(), parts.end());
        EXPECT_EQ(parts, all);
    }
}

TEST(SplitHalf, Errors)
{
    EXPECT_THROW(split_half(labeled_days({1}), 1), DataError);
    EXPECT_THROW(split_half(labeled_days({1, 2}), 1, 1.0), ConfigError);
}

TEST(FoldBlocks, PartitionInOrder)
{
    for (std::size_t n : {10u, 11u, 365u}) {
        auto const blocks = fold_blocks(n, 10);
        ASSERT_EQ(blocks.size(), 10u);
        std::size_t expected_begin = 0;
        for (auto [b, e] : blocks) {
            EXPECT_EQ(b, expected_begin);
            EXPECT_GE(e - b, n / 10);
            EXPECT_LE(e - b, n / 10 + 1);
            expected_begin = e;
        }
        EXPECT_EQ(expected_begin, n);
    }
    EXPECT_THROW(fold_blocks(9, 10), DataError);
    EXPECT_THROW(fold_blocks(9, 1), ConfigError);
}

TEST(CrossValidate, PerfectObserverGivesZeroError)
{
    auto const demo = demo_participant();
    auto const r = cross_validate_hmm(demo, OracleObserver{}, CvOptions{});
    ASSERT_EQ(r.fold_errors.size(), 10u);
    for (double e : r.fold_errors) {
        EXPECT_EQ(e, 0.0);
    }
    EXPECT_EQ(r.mean_error, 0.0);
}

TEST(CrossValidate, LeaveOneDayOut)
{
    auto const seq = labeled_days({1, 2, 3, 4, 5, 4, 3, 2});
    CvOptions opts;
    opts.folds = seq.size();
    auto const r = cross_validate_hmm(seq, OracleObserver{}, opts);
    ASSERT_EQ(r.fold_errors.size(), seq.size());
    for (std::size_t f = 0; f < seq.size(); ++f) {
        EXPECT_EQ(r.predictions[f].fold, f);
    }
}

TEST(CrossValidate, FoldErrorIsMismatchFraction)
{
    auto const demo = demo_participant();
    std::vector<BinaryClassifier> stages;
    for (int k = 5; k >= 1; --k) {
        stages.push_back({GpTree::leaf(Node::feature_ref(0)), 3000.0 * (k - 1) + 500.0, 0.01 * (5 - k), k});
    }
    CascadeClassifier const cascade(stages);
    for (bool shuffled : {false, true}) {
        CvOptions opts;
        opts.shuffled = shuffled;
        auto const r = cross_validate_hmm(demo, cascade, opts);
        std::vector<std::size_t> wrong(10, 0);
        std::vector<std::size_t> n(10, 0);
        for (const DayPrediction& p : r.predictions) {
            wrong[p.fold] += p.predicted != p.label ? 1 : 0;
            ++n[p.fold];
        }
        double sum = 0.0;
        for (std::size_t f = 0; f < 10; ++f) {
            EXPECT_EQ(r.fold_errors[f], static_cast<double>(wrong[f]) / static_cast<double>(n[f]));
            sum += r.fold_errors[f];
        }
        EXPECT_DOUBLE_EQ(r.mean_error, sum / 10.0);
    }
}

TEST(CrossValidate, TooShort)
{
    EXPECT_THROW(cross_validate_hmm(labeled_days({1, 2, 3}), OracleObserver{}, CvOptions{}), DataError);
}

TEST(RankModels, TableRowExample)
{
    std::vector<SummaryRow> rows{{"p", 0.0, "a", 0.0119, 0},
                                 {"p", 0.0, "b", 0.0085, 0},
                                 {"p", 0.0, "c", 0.0261, 0},
                                 {"p", 0.0, "d", 0.0283, 0}};
    auto const ranked = rank_models(rows);
    std::vector<int> ranks;
    for (const auto& r : ranked) {
        ranks.push_back(r.rank);
    }
    EXPECT_EQ(ranks, (std::vector<int>{2, 1, 3, 4}));
}

TEST(RankModels, SingleModelAlwaysFirst)
{
    std::vector<SummaryRow> rows{{"p", 0.0, "a", 0.3, 0}, {"p", 0.1, "a", 0.1, 0}};
    for (const auto& r : rank_models(rows)) {
        EXPECT_EQ(r.rank, 1);
    }
}

TEST(RankModels, TiesShareMinimumRank)
{
    std::vector<SummaryRow> rows{{"p", 0.0, "a", 0.1, 0}, {"p", 0.0, "b", 0.1, 0}, {"p", 0.0, "c", 0.2, 0}};
    auto const ranked = rank_models(rows);
    EXPECT_EQ(ranked[0].rank, 1);
    EXPECT_EQ(ranked[1].rank, 1);
    EXPECT_EQ(ranked[2].rank, 3);
}

TEST(RankModels, MatchesSortOracle)
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> err(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<SummaryRow> rows;
        for (int m = 0; m < 5; ++m) {
            rows.push_back({"p", 0.05, std::string(1, static_cast<char>('a' + m)), err(rng), 0});
        }
        auto sorted = rows;
        std::sort(sorted.begin(), sorted.end(),
                  [](const SummaryRow& a, const SummaryRow& b) { return a.mean_error < b.mean_error; });
        auto const ranked = rank_models(rows);
        for (const auto& r : ranked) {
            auto const pos = std::find_if(sorted.begin(), sorted.end(),
                                          [&](const SummaryRow& s) { return s.model == r.model; }) -
                             sorted.begin();
            EXPECT_EQ(r.rank, pos + 1);
        }
    }
}

TEST(RankModels, GridMismatch)
{
    std::vector<SummaryRow> rows{{"p", 0.0, "a", 0.1, 0}, {"p", 0.0, "b", 0.2, 0}, {"p", 0.1, "a", 0.3, 0}};
    EXPECT_THROW(rank_models(rows), DataError);
}

TEST(AverageRanks, PerModel)
{
    std::vector<SummaryRow> rows{{"p", 0.0, "a", 0.1, 1}, {"p", 0.1, "a", 0.3, 2}};
    auto const avg = average_ranks(rows);
    ASSERT_EQ(avg.size(), 1u);
    EXPECT_DOUBLE_EQ(avg[0].mean_rank, 1.5);
    EXPECT_DOUBLE_EQ(avg[0].mean_error, 0.2);
}

TEST(Spearman, KnownValues)
{
    EXPECT_DOUBLE_EQ(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
    EXPECT_DOUBLE_EQ(spearman_rho({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
    EXPECT_DOUBLE_EQ(spearman_rho({1, 2, 3}, {5, 5, 5}), 0.0);
    EXPECT_NEAR(spearman_rho({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}), 0.8, 1e-12);
    EXPECT_THROW(spearman_rho({1}, {1}), DataError);
}

TEST(NoiseGrid, ReportShapeAndRegeneration)
{
    auto const cfg = tiny_config();
    auto const report = run_noise_grid(cfg, demo_participant());
    EXPECT_EQ(report.summary.size(), 4u);
    EXPECT_EQ(report.folds.size(), 4u * cfg.folds);
    EXPECT_EQ(report.predictions.size(), 4u * 365u);
    auto const [folds, summary] = summarize_predictions(report.predictions);
    ASSERT_EQ(summary.size(), report.summary.size());
    for (std::size_t i = 0; i < summary.size(); ++i) {
        EXPECT_EQ(summary[i].mean_error, report.summary[i].mean_error);
        EXPECT_EQ(summary[i].rank, report.summary[i].rank);
    }
}

TEST(NoiseGrid, SingleLevelSingleModel)
{
    auto cfg = tiny_config();
    cfg.noise.grid = {0.0};
    cfg.include_baseline = false;
    auto const report = run_noise_grid(cfg, demo_participant());
    ASSERT_EQ(report.summary.size(), 1u);
    EXPECT_EQ(report.summary[0].model, kMogpModelName);
}

TEST(NoiseGrid, Deterministic)
{
    auto const cfg = tiny_config();
    auto const a = run_noise_grid(cfg, demo_participant());
    auto const b = run_noise_grid(cfg, demo_participant());
    std::ostringstream sa;
    std::ostringstream sb;
    write_report_csv(a, sa);
    write_summary_csv(a, sa);
    write_predictions_csv(a, sa);
    write_report_csv(b, sb);
    write_summary_csv(b, sb);
    write_predictions_csv(b, sb);
    EXPECT_EQ(sa.str(), sb.str());
}

TEST(NoiseGrid, RankingsCsvLayout)
{
    EvaluationReport report;
    report.summary = {{"p1", 0.0, "a", 0.1, 1}, {"p1", 0.0, "b", 0.2, 2}, {"p2", 0.0, "a", 0.3, 2},
                      {"p2", 0.0, "b", 0.1, 1}};
    std::ostringstream out;
    write_rankings_csv(report, out);
    EXPECT_EQ(out.str(), "model,participant,mean_rank,rank_cdf\n"
                         "a,p1,1,0.5\na,p2,2,1\nb,p2,1,0.5\nb,p1,2,1\n");
}

TEST(ExperimentConfig, Validation)
{
    ExperimentConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.folds = 1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.noise.grid = {0.5};
    EXPECT_THROW(cfg.validate(), ConfigError);
}
