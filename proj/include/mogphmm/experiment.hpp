#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mogphmm/baseline.hpp"
#include "mogphmm/cascade.hpp"
#include "mogphmm/errors.hpp"
#include "mogphmm/evolve.hpp"
#include "mogphmm/hmm.hpp"
#include "mogphmm/lifelog.hpp"
#include "mogphmm/parallel.hpp"
#include "mogphmm/random.hpp"
#include "mogphmm/synthesis.hpp"

namespace mogphmm {

// ---------------------------------------------------------------------------
// Train / validation split

struct Split {
    LabeledSequence train;
    LabeledSequence validation;
    std::vector<int> singleton_labels; // labels with one record, sent to train
};

// Stratified random split. Each label group sends ceil(n * fraction) records
// to train and the rest to validation; both sides keep the input order.
inline Split split_half(const LabeledSequence& data, std::uint64_t seed, double fraction = 0.5)
{
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("split fraction must lie in (0, 1)");
    }
    const auto& labels = data.require_labels();
    if (data.size() < 2) {
        throw DataError("split_half: need at least 2 records");
    }
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        groups[labels[i]].push_back(i);
    }
    Rng rng(seed);
    Split out;
    std::vector<bool> to_train(data.size(), false);
    for (auto& [label, idx] : groups) {
        if (idx.size() == 1) {
            out.singleton_labels.push_back(label);
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        auto n_train = static_cast<std::size_t>(std::ceil(static_cast<double>(idx.size()) * fraction - 1e-9));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size());
        for (std::size_t k = 0; k < n_train; ++k) {
            to_train[idx[k]] = true;
        }
    }
    for (LabeledSequence* side : {&out.train, &out.validation}) {
        side->participant_id = data.participant_id;
        side->labels.emplace();
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        LabeledSequence& side = to_train[i] ? out.train : out.validation;
        side.records.push_back(data.records[i]);
        side.labels->push_back(labels[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cross-validation of the HMM stage

// Contiguous, order-preserving blocks [begin, end); sizes differ by at most
// one, the earlier blocks taking the remainder.
inline std::vector<std::pair<std::size_t, std::size_t>> fold_blocks(std::size_t n, std::size_t folds)
{
    if (folds < 2) {
        throw ConfigError("folds must be >= 2");
    }
    if (n < folds) {
        throw DataError("sequence of " + std::to_string(n) + " days is shorter than " + std::to_string(folds) +
                        " folds");
    }
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    std::size_t const base = n / folds;
    std::size_t const extra = n % folds;
    std::size_t begin = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::size_t const len = base + (f < extra ? 1 : 0);
        blocks.emplace_back(begin, begin + len);
        begin += len;
    }
    return blocks;
}

struct CvOptions {
    std::size_t folds = 10;
    CountingOptions counting{};
    int class_count = kMaxScore;
    // Random day-to-fold assignment instead of contiguous blocks; runs of
    // consecutive days form the sequences on both sides.
    bool shuffled = false;
    std::uint64_t seed = 1;
};

struct DayPrediction {
    std::size_t fold = 0;
    std::size_t day = 0;
    int observation = 0;
    int predicted = 0;
    int label = 0;
};

struct CvResult {
    std::vector<double> fold_errors;
    double mean_error = 0.0;
    std::vector<DayPrediction> predictions; // in day order
};

namespace detail {

// Maximal runs of consecutive days whose fold assignment satisfies pred.
template <class Pred>
std::vector<std::pair<std::size_t, std::size_t>> runs_where(std::size_t n, Pred pred)
{
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t i = 0;
    while (i < n) {
        if (!pred(i)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && pred(j)) {
            ++j;
        }
        runs.emplace_back(i, j);
        i = j;
    }
    return runs;
}

} // namespace detail

// For each held-out fold: estimate the HMM by counting on the other folds
// (each block its own sequence, so no transition spans a cut), decode the
// held-out days, and score the fraction of days whose state differs from the
// label.
template <ObservationModel Model>
CvResult cross_validate_hmm(const LabeledSequence& real, const Model& observer, const CvOptions& options)
{
    const auto& labels = real.require_labels();
    std::size_t const n = real.size();
    auto const blocks = fold_blocks(n, options.folds);
    int const M = observer.observation_count();
    std::vector<int> const observations = classify_sequence(observer, real.features());

    std::vector<std::size_t> fold_of(n, 0);
    if (options.shuffled) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(options.seed);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t f = 0; f < blocks.size(); ++f) {
            for (std::size_t p = blocks[f].first; p < blocks[f].second; ++p) {
                fold_of[perm[p]] = f;
            }
        }
    } else {
        for (std::size_t f = 0; f < blocks.size(); ++f) {
            for (std::size_t i = blocks[f].first; i < blocks[f].second; ++i) {
                fold_of[i] = f;
            }
        }
    }

    auto slice = [&](std::size_t b, std::size_t e) {
        ObservedSequence s;
        s.states.assign(labels.begin() + static_cast<std::ptrdiff_t>(b), labels.begin() + static_cast<std::ptrdiff_t>(e));
        s.observations.assign(observations.begin() + static_cast<std::ptrdiff_t>(b),
                              observations.begin() + static_cast<std::ptrdiff_t>(e));
        return s;
    };

    CvResult result;
    result.predictions.resize(n);
    for (std::size_t f = 0; f < blocks.size(); ++f) {
        std::vector<ObservedSequence> training;
        if (options.shuffled) {
            for (auto [b, e] : detail::runs_where(n, [&](std::size_t i) { return fold_of[i] != f; })) {
                training.push_back(slice(b, e));
            }
        } else {
            for (std::size_t g = 0; g < blocks.size(); ++g) {
                if (g != f) {
                    training.push_back(slice(blocks[g].first, blocks[g].second));
                }
            }
        }
        HmmModel const model = estimate_counting(training, options.class_count, M, options.counting).model;

        std::size_t wrong = 0;
        std::size_t count = 0;
        for (auto [b, e] : detail::runs_where(n, [&](std::size_t i) { return fold_of[i] == f; })) {
            std::vector<int> const obs(observations.begin() + static_cast<std::ptrdiff_t>(b),
                                       observations.begin() + static_cast<std::ptrdiff_t>(e));
            std::vector<int> const decoded = viterbi_decode(model, obs);
            for (std::size_t i = b; i < e; ++i) {
                int const z = decoded[i - b];
                result.predictions[i] = {f, i, observations[i], z, labels[i]};
                wrong += z != labels[i] ? 1 : 0;
                ++count;
            }
        }
        result.fold_errors.push_back(static_cast<double>(wrong) / static_cast<double>(count));
    }
    result.mean_error = std::accumulate(result.fold_errors.begin(), result.fold_errors.end(), 0.0) /
                        static_cast<double>(result.fold_errors.size());
    return result;
}

// ---------------------------------------------------------------------------
// Noise grid

struct ExperimentConfig {
    EvolutionConfig evolution{};
    NoiseConfig noise{};
    LabelRule rule{};
    std::size_t samples_per_class = 200;
    std::size_t folds = 10;
    double split_fraction = 0.5;
    CountingOptions hmm{};
    bool shuffled_folds = false;
    bool include_baseline = true;
    std::uint64_t seed = 1;
    unsigned threads = 1;

    void validate() const
    {
        evolution.validate();
        noise.validate();
        rule.validate();
        if (folds < 2) {
            throw ConfigError("folds must be >= 2");
        }
        if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
            throw ConfigError("split_fraction must lie in (0, 1)");
        }
        if (samples_per_class < 2) {
            throw ConfigError("samples_per_class must be >= 2");
        }
        if (!(hmm.alpha >= 0.0)) {
            throw ConfigError("hmm alpha must be >= 0");
        }
    }
};

inline constexpr const char* kMogpModelName = "MOGP-HMM";
inline constexpr const char* kBaselineModelName = "centroid-HMM";

struct FoldRow {
    std::string participant;
    double lambda = 0.0;
    std::string model;
    std::size_t fold = 0;
    double error = 0.0;
};

struct SummaryRow {
    std::string participant;
    double lambda = 0.0;
    std::string model;
    double mean_error = 0.0;
    int rank = 0;
};

struct PredictionRow {
    std::string participant;
    double lambda = 0.0;
    std::string model;
    std::size_t fold = 0;
    Date date{};
    int observation = 0;
    int predicted = 0;
    int label = 0;
};

struct EvaluationReport {
    std::vector<FoldRow> folds;
    std::vector<SummaryRow> summary;
    std::vector<PredictionRow> predictions;
    std::vector<std::string> warnings;
};

// Seeds for one (participant, level) cell, all derived from the config seeds.
struct CellSeeds {
    std::uint64_t relabel = 0;
    std::uint64_t synthesis = 0;
    std::uint64_t split = 0;
    std::uint64_t evolution = 0;
    std::uint64_t folds = 0;
};

inline CellSeeds cell_seeds(const ExperimentConfig& cfg, std::size_t participant, std::size_t level)
{
    std::uint64_t const cell = static_cast<std::uint64_t>(participant) * 1000 + level;
    return {derive_seed(cfg.noise.seed, cell), derive_seed(cfg.seed, 5 * cell + 0),
            derive_seed(cfg.seed, 5 * cell + 1), derive_seed(cfg.seed, 5 * cell + 2),
            derive_seed(cfg.seed, 5 * cell + 3)};
}

namespace detail {

struct CellOutcome {
    std::vector<std::pair<std::string, CvResult>> models;
    std::vector<std::string> warnings;
};

inline CellOutcome run_cell(const ExperimentConfig& cfg, const LabeledSequence& raw, std::size_t participant,
                            std::size_t level_index, unsigned stage_threads)
{
    double const lambda = cfg.noise.grid[level_index];
    CellSeeds const seeds = cell_seeds(cfg, participant, level_index);
    int const K = cfg.rule.score_count();
    CellOutcome out;

    LabeledSequence const relabeled =
        perturb_and_relabel(raw, lambda, cfg.rule, seeds.relabel, cfg.noise.perturb_features);
    SynthesisParams params = estimate_synthesis_params(relabeled, K);
    params.samples_per_class = cfg.samples_per_class;
    params.seed = seeds.synthesis;
    for (int k : params.fallback_classes) {
        out.warnings.push_back(raw.participant_id + " lambda=" + format_double(lambda) + ": class " +
                               std::to_string(k) + " has no records, synthesized from the global duration pool");
    }
    Split const split = split_half(synthesize(params), seeds.split, cfg.split_fraction);
    LabeledDataset const train = to_dataset(split.train);
    LabeledDataset const validation = to_dataset(split.validation);

    EvolutionConfig evo = cfg.evolution;
    evo.seed = seeds.evolution;
    CascadeClassifier const cascade = build_cascade(train, validation, evo, K, stage_threads).cascade;

    CvOptions cv;
    cv.folds = cfg.folds;
    cv.counting = cfg.hmm;
    cv.class_count = K;
    cv.shuffled = cfg.shuffled_folds;
    cv.seed = seeds.folds;
    out.models.emplace_back(kMogpModelName, cross_validate_hmm(relabeled, cascade, cv));
    if (cfg.include_baseline) {
        out.models.emplace_back(kBaselineModelName, cross_validate_hmm(relabeled, NearestCentroid(train, K), cv));
    }
    return out;
}

} // namespace detail

// Ranks models within each (participant, lambda) cell by ascending mean error.
// Equal errors share the smallest rank; rows come out ordered by cell, then
// model name.
inline std::vector<SummaryRow> rank_models(std::vector<SummaryRow> rows)
{
    using Cell = std::pair<std::string, double>;
    std::map<Cell, std::vector<std::size_t>> cells;
    std::map<std::string, std::size_t> model_cells;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        cells[{rows[i].participant, rows[i].lambda}].push_back(i);
        ++model_cells[rows[i].model];
    }
    for (auto& [cell, idx] : cells) {
        if (idx.size() != model_cells.size()) {
            throw DataError("rank_models: grid mismatch, cell (" + cell.first + ", " + format_double(cell.second) +
                            ") has " + std::to_string(idx.size()) + " of " + std::to_string(model_cells.size()) +
                            " models");
        }
        for (std::size_t i : idx) {
            int better = 0;
            for (std::size_t j : idx) {
                better += rows[j].mean_error < rows[i].mean_error ? 1 : 0;
            }
            rows[i].rank = better + 1;
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
        return std::tie(a.participant, a.lambda, a.model) < std::tie(b.participant, b.lambda, b.model);
    });
    return rows;
}

struct ModelAverage {
    std::string model;
    double mean_rank = 0.0;
    double mean_error = 0.0;
};

// Per-model averages over all ranked rows (the "Average" line of a ranking table).
inline std::vector<ModelAverage> average_ranks(const std::vector<SummaryRow>& ranked)
{
    std::map<std::string, std::tuple<double, double, std::size_t>> acc;
    for (const SummaryRow& r : ranked) {
        auto& [rank_sum, err_sum, n] = acc[r.model];
        rank_sum += r.rank;
        err_sum += r.mean_error;
        ++n;
    }
    std::vector<ModelAverage> out;
    for (const auto& [model, a] : acc) {
        auto const& [rank_sum, err_sum, n] = a;
        out.push_back({model, rank_sum / static_cast<double>(n), err_sum / static_cast<double>(n)});
    }
    return out;
}

// Full protocol for one participant over every noise level in the grid.
inline EvaluationReport run_noise_grid(const ExperimentConfig& config, const LabeledSequence& raw,
                                       std::size_t participant_index = 0)
{
    config.validate();
    raw.validate();
    (void)raw.require_labels();
    std::size_t const levels = config.noise.grid.size();
    std::vector<detail::CellOutcome> outcomes(levels);
    unsigned const cell_threads = std::max(1U, config.threads);
    unsigned const stage_threads = levels == 1 ? cell_threads : 1U;
    parallel_for(levels, levels == 1 ? 1U : cell_threads, [&](std::size_t g) {
        outcomes[g] = detail::run_cell(config, raw, participant_index, g, stage_threads);
    });

    EvaluationReport report;
    std::vector<SummaryRow> summary;
    for (std::size_t g = 0; g < levels; ++g) {
        double const lambda = config.noise.grid[g];
        for (auto& w : outcomes[g].warnings) {
            report.warnings.push_back(std::move(w));
        }
        for (const auto& [model, cv] : outcomes[g].models) {
            for (std::size_t f = 0; f < cv.fold_errors.size(); ++f) {
                report.folds.push_back({raw.participant_id, lambda, model, f, cv.fold_errors[f]});
            }
            summary.push_back({raw.participant_id, lambda, model, cv.mean_error, 0});
            for (const DayPrediction& p : cv.predictions) {
                report.predictions.push_back({raw.participant_id, lambda, model, p.fold, raw.records[p.day].date,
                                              p.observation, p.predicted, p.label});
            }
        }
    }
    report.summary = rank_models(std::move(summary));
    return report;
}

inline void append_report(EvaluationReport& into, EvaluationReport&& from)
{
    auto move_all = [](auto& dst, auto& src) {
        dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
    };
    move_all(into.folds, from.folds);
    move_all(into.summary, from.summary);
    move_all(into.predictions, from.predictions);
    move_all(into.warnings, from.warnings);
}

// Rebuilds fold rows and per-cell mean errors from persisted day-level
// predictions; must match what run_noise_grid reported.
inline std::pair<std::vector<FoldRow>, std::vector<SummaryRow>>
summarize_predictions(const std::vector<PredictionRow>& predictions)
{
    using Key = std::tuple<std::string, double, std::string>;
    std::map<Key, std::map<std::size_t, std::pair<std::size_t, std::size_t>>> tally; // fold -> (wrong, n)
    std::vector<Key> order;
    for (const PredictionRow& p : predictions) {
        Key const key{p.participant, p.lambda, p.model};
        if (!tally.contains(key)) {
            order.push_back(key);
        }
        auto& [wrong, n] = tally[key][p.fold];
        wrong += p.predicted != p.label ? 1 : 0;
        ++n;
    }
    std::vector<FoldRow> folds;
    std::vector<SummaryRow> summary;
    for (const Key& key : order) {
        auto const& [participant, lambda, model] = key;
        double sum = 0.0;
        for (const auto& [fold, counts] : tally[key]) {
            double const e = static_cast<double>(counts.first) / static_cast<double>(counts.second);
            folds.push_back({participant, lambda, model, fold, e});
            sum += e;
        }
        summary.push_back({participant, lambda, model, sum / static_cast<double>(tally[key].size()), 0});
    }
    return {std::move(folds), rank_models(std::move(summary))};
}

// Spearman rank correlation with average ranks for ties.
inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw DataError("spearman_rho: need two equal-length samples of size >= 2");
    }
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        std::size_t i = 0;
        while (i < idx.size()) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
                ++j;
            }
            double const avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        return r;
    };
    auto const rx = ranks(x);
    auto const ry = ranks(y);
    double const mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
    double const my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// CSV reports

inline void write_report_csv(const EvaluationReport& report, std::ostream& out)
{
    out << "participant,lambda,model,fold,error\n";
    for (const FoldRow& r : report.folds) {
        out << r.participant << ',' << format_double(r.lambda) << ',' << r.model << ',' << r.fold << ','
            << format_double(r.error) << '\n';
    }
}

inline void write_summary_csv(const EvaluationReport& report, std::ostream& out)
{
    out << "participant,lambda,model,mean_error,rank\n";
    for (const SummaryRow& r : report.summary) {
        out << r.participant << ',' << format_double(r.lambda) << ',' << r.model << ','
            << format_double(r.mean_error) << ',' << r.rank << '\n';
    }
}

inline void write_predictions_csv(const EvaluationReport& report, std::ostream& out)
{
    out << "participant,lambda,model,fold,date,observation,predicted_state,label\n";
    for (const PredictionRow& r : report.predictions) {
        out << r.participant << ',' << format_double(r.lambda) << ',' << r.model << ',' << r.fold << ','
            << format_iso_date(r.date) << ',' << r.observation << ',' << r.predicted << ',' << r.label << '\n';
    }
}

// Per (model, participant): mean rank over noise levels, with the empirical
// CDF of those averages across participants for each model.
inline void write_rankings_csv(const EvaluationReport& report, std::ostream& out)
{
    std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> acc;
    for (const SummaryRow& r : report.summary) {
        auto& [sum, n] = acc[r.model][r.participant];
        sum += r.rank;
        ++n;
    }
    out << "model,participant,mean_rank,rank_cdf\n";
    for (const auto& [model, per_participant] : acc) {
        std::vector<std::pair<double, std::string>> points;
        for (const auto& [participant, a] : per_participant) {
            points.emplace_back(a.first / static_cast<double>(a.second), participant);
        }
        std::sort(points.begin(), points.end());
        for (std::size_t i = 0; i < points.size(); ++i) {
            double const cdf = static_cast<double>(i + 1) / static_cast<double>(points.size());
            out << model << ',' << points[i].second << ',' << format_double(points[i].first) << ','
                << format_double(cdf) << '\n';
        }
    }
}

} // namespace mogphmm
