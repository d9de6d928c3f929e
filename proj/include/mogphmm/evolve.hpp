#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mogphmm/dataset.hpp"
#include "mogphmm/errors.hpp"
#include "mogphmm/gp_tree.hpp"
#include "mogphmm/pareto.hpp"
#include "mogphmm/random.hpp"

namespace mogphmm {

struct EvolutionConfig {
    std::size_t population_size = 100;
    // One evaluation = one threshold fit of one tree, initial population included.
    std::size_t max_evaluations = 80'000;
    double crossover_probability = 0.9;
    double mutation_probability = 0.1;
    int tree_depth = 4;
    std::size_t tournament_size = 2;
    // 0 disables the cap; otherwise over-deep offspring are replaced by their first parent.
    int max_offspring_depth = 0;
    bool use_constants = true;
    // Z-score features on the training set before evolving; the classifier
    // carries the map and applies it to every input.
    bool standardize_features = true;
    double response_sentinel = kDefaultResponseSentinel;
    std::uint64_t seed = 1;

    void validate() const
    {
        if (population_size < 2) {
            throw ConfigError("evolution: population_size must be >= 2");
        }
        if (!(crossover_probability >= 0.0 && crossover_probability <= 1.0) ||
            !(mutation_probability >= 0.0 && mutation_probability <= 1.0)) {
            throw ConfigError("evolution: probabilities must lie in [0, 1]");
        }
        if (tree_depth < 1) {
            throw ConfigError("evolution: tree_depth must be >= 1");
        }
        if (tournament_size < 1) {
            throw ConfigError("evolution: tournament_size must be >= 1");
        }
        if (max_offspring_depth < 0) {
            throw ConfigError("evolution: max_offspring_depth must be >= 0");
        }
    }
};

struct ThresholdFit {
    double threshold = 0.0;
    double error = 0.0;
    std::size_t mismatches = 0;
};

// Threshold search over the tree's own responses: among candidates y* = y_n,
// with the rule "predict 1 iff y > y*", pick the one with the fewest
// mismatches; ties go to the smallest data index n.
//
// Runs in O(N log N): after sorting, the mismatch count of a candidate value v
// is (#positives with y <= v) + (#negatives with y > v).
inline ThresholdFit fit_threshold(std::span<const double> responses, std::span<const std::uint8_t> labels)
{
    if (responses.empty()) {
        throw DataError("fit_threshold: empty data");
    }
    if (responses.size() != labels.size()) {
        throw StructuralError("fit_threshold: responses and labels differ in length");
    }
    std::size_t const n = responses.size();
    thread_local std::vector<std::pair<double, std::uint32_t>> order;
    order.clear();
    order.reserve(n);
    std::size_t negatives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(responses[i])) {
            throw DataError("fit_threshold: NaN response at index " + std::to_string(i));
        }
        if (labels[i] > 1) {
            throw DataError("fit_threshold: label at index " + std::to_string(i) + " is not 0/1");
        }
        negatives += labels[i] == 0 ? 1 : 0;
        order.emplace_back(responses[i], static_cast<std::uint32_t>(i));
    }
    // (value, index) order: the first entry of each equal-value group carries
    // that value's smallest data index.
    std::sort(order.begin(), order.end());

    std::size_t best_mismatch = std::numeric_limits<std::size_t>::max();
    std::size_t best_index = std::numeric_limits<std::size_t>::max();
    double best_value = 0.0;
    std::size_t pos_le = 0;
    std::size_t neg_le = 0;
    std::size_t g = 0;
    while (g < n) {
        double const v = order[g].first;
        std::size_t const first_index = order[g].second;
        std::size_t e = g;
        while (e < n && order[e].first == v) {
            if (labels[order[e].second] == 1) {
                ++pos_le;
            } else {
                ++neg_le;
            }
            ++e;
        }
        std::size_t const mismatch = pos_le + (negatives - neg_le);
        if (mismatch < best_mismatch || (mismatch == best_mismatch && first_index < best_index)) {
            best_mismatch = mismatch;
            best_index = first_index;
            best_value = v;
        }
        g = e;
    }
    return {best_value, static_cast<double>(best_mismatch) / static_cast<double>(n), best_mismatch};
}

inline void tree_responses(const GpTree& tree, const FeatureMatrix& x, std::vector<double>& out,
                           double sentinel = kDefaultResponseSentinel)
{
    out.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out[i] = evaluate_tree(tree, x.row(i), sentinel);
    }
}

inline ThresholdFit fit_threshold(const GpTree& tree, const BinaryDataset& data,
                                  double sentinel = kDefaultResponseSentinel)
{
    thread_local std::vector<double> responses;
    tree_responses(tree, data.features, responses, sentinel);
    return fit_threshold(responses, data.labels);
}

struct BinaryClassifier {
    GpTree tree;
    double threshold = 0.0;
    double error = 0.0; // training error of the threshold fit
    int target_class = 1;
    double response_sentinel = kDefaultResponseSentinel;
    FeatureScaling scaling{};

    [[nodiscard]] double response(std::span<const double> x) const
    {
        if (scaling.identity()) {
            return evaluate_tree(tree, x, response_sentinel);
        }
        thread_local std::vector<double> scaled;
        scaling.apply(x, scaled);
        return evaluate_tree(tree, scaled, response_sentinel);
    }

    [[nodiscard]] int classify(std::span<const double> x) const { return response(x) > threshold ? 1 : 0; }

    friend bool operator==(const BinaryClassifier&, const BinaryClassifier&) = default;
};

inline int classify(const BinaryClassifier& classifier, std::span<const double> x)
{
    return classifier.classify(x);
}

inline double classification_error(const BinaryClassifier& classifier, const BinaryDataset& data)
{
    if (data.size() == 0) {
        throw DataError("classification_error: empty data");
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        wrong += classifier.classify(data.features.row(i)) != data.labels[i] ? 1 : 0;
    }
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

struct Individual {
    GpTree tree;
    ThresholdFit fit;

    [[nodiscard]] ObjectiveVector objectives() const { return {fit.error, tree.size()}; }
};

struct GenerationStats {
    int generation = 0;
    double best_error = 0.0;
    std::size_t frontier_size = 0;
    double mean_size = 0.0;
    std::size_t evaluations = 0;
};

struct EvolutionResult {
    BinaryClassifier classifier;
    double validation_error = 0.0;
    std::vector<Individual> frontier; // rank-1 members of the final population
    std::vector<GenerationStats> log;
    std::size_t evaluations = 0;
    int generations = 0;
    bool converged = false; // a tree reached zero training error
};

namespace detail {

inline std::vector<ObjectiveVector> objectives_of(std::span<const Individual> pop)
{
    std::vector<ObjectiveVector> out;
    out.reserve(pop.size());
    for (const Individual& ind : pop) {
        out.push_back(ind.objectives());
    }
    return out;
}

inline GenerationStats stats_of(int generation, std::span<const Individual> pop, std::span<const int> ranks,
                                std::size_t evaluations)
{
    GenerationStats s;
    s.generation = generation;
    s.best_error = std::numeric_limits<double>::infinity();
    double size_sum = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        s.best_error = std::min(s.best_error, pop[i].fit.error);
        size_sum += static_cast<double>(pop[i].tree.size());
        s.frontier_size += ranks[i] == 1 ? 1 : 0;
    }
    s.mean_size = size_sum / static_cast<double>(pop.size());
    s.evaluations = evaluations;
    return s;
}

// Binary (or k-ary) tournament on Pareto rank; ties go to the smaller tree,
// then uniformly at random among the still-tied entrants.
inline std::size_t tournament(std::span<const Individual> pop, std::span<const int> ranks, std::size_t k,
                              Rng& rng)
{
    std::size_t best = uniform_index(rng, pop.size());
    std::size_t ties = 1;
    for (std::size_t t = 1; t < k; ++t) {
        std::size_t const c = uniform_index(rng, pop.size());
        auto const key_c = std::pair(ranks[c], pop[c].tree.size());
        auto const key_b = std::pair(ranks[best], pop[best].tree.size());
        if (key_c < key_b) {
            best = c;
            ties = 1;
        } else if (key_c == key_b) {
            ++ties;
            if (uniform_index(rng, ties) == 0) {
                best = c;
            }
        }
    }
    return best;
}

} // namespace detail

// Two-objective GP for one binary problem. Objectives are (training 0/1 loss,
// node count). The run stops once any tree hits zero training error or the
// evaluation budget is spent; the returned model is the frontier member with
// the lowest validation error (then smallest, then lowest training error).
inline EvolutionResult evolve_binary(const BinaryDataset& train, const BinaryDataset& validation,
                                     const EvolutionConfig& config, int target_class = 1)
{
    config.validate();
    if (train.size() == 0 || validation.size() == 0) {
        throw DataError("evolve_binary: train and validation must be non-empty");
    }
    if (train.dimension() != validation.dimension()) {
        throw StructuralError("evolve_binary: train has dimension " + std::to_string(train.dimension()) +
                              ", validation has " + std::to_string(validation.dimension()));
    }

    FeatureScaling const scaling = config.standardize_features ? standardization(train.features) : FeatureScaling{};
    BinaryDataset const scaled_train{scaling.apply(train.features), train.labels};

    Rng rng(config.seed);
    TreeGenConfig const gen{train.dimension(), config.use_constants, -1.0, 1.0};
    std::size_t const pop_size = config.population_size;

    EvolutionResult result;
    auto evaluate = [&](GpTree tree) {
        ++result.evaluations;
        ThresholdFit const fit = fit_threshold(tree, scaled_train, config.response_sentinel);
        return Individual{std::move(tree), fit};
    };

    std::vector<Individual> population;
    population.reserve(2 * pop_size);
    for (GpTree& t : init_population(pop_size, config.tree_depth, gen, rng)) {
        population.push_back(evaluate(std::move(t)));
    }
    auto objectives = detail::objectives_of(population);
    auto ranks = pareto_rank(objectives);
    result.log.push_back(detail::stats_of(0, population, ranks, result.evaluations));

    auto converged = [&] { return result.log.back().best_error == 0.0; };

    int generation = 0;
    while (!converged() && result.evaluations < config.max_evaluations) {
        ++generation;
        std::size_t const n_offspring = std::min(pop_size, config.max_evaluations - result.evaluations);
        std::vector<Individual> combined = population;
        combined.reserve(pop_size + n_offspring);
        for (std::size_t o = 0; o < n_offspring; ++o) {
            double const u = uniform01(rng);
            std::size_t const a = detail::tournament(population, ranks, config.tournament_size, rng);
            GpTree child;
            if (u < config.crossover_probability) {
                std::size_t const b = detail::tournament(population, ranks, config.tournament_size, rng);
                child = point_crossover(population[a].tree, population[b].tree, rng);
            } else if (u < config.crossover_probability + config.mutation_probability) {
                child = point_mutation(population[a].tree, config.tree_depth, gen, rng);
            } else {
                child = population[a].tree;
            }
            if (config.max_offspring_depth > 0 && child.depth() > config.max_offspring_depth) {
                child = population[a].tree;
            }
            combined.push_back(evaluate(std::move(child)));
        }

        // Rank truncation: whole fronts first, the last admitted front thinned
        // by crowding distance, remaining ties by position.
        auto const comb_obj = detail::objectives_of(combined);
        auto const comb_rank = pareto_rank(comb_obj);
        auto const crowd = crowding_distance(comb_obj, comb_rank);
        std::vector<std::size_t> order(combined.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
            if (comb_rank[i] != comb_rank[j]) {
                return comb_rank[i] < comb_rank[j];
            }
            return crowd[i] > crowd[j];
        });
        std::vector<Individual> next;
        next.reserve(2 * pop_size);
        for (std::size_t k = 0; k < pop_size; ++k) {
            next.push_back(std::move(combined[order[k]]));
        }
        population = std::move(next);
        objectives = detail::objectives_of(population);
        ranks = pareto_rank(objectives);
        result.log.push_back(detail::stats_of(generation, population, ranks, result.evaluations));
    }
    result.generations = generation;
    result.converged = converged();

    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < population.size(); ++i) {
        if (ranks[i] != 1) {
            continue;
        }
        const Individual& ind = population[i];
        result.frontier.push_back(ind);
        BinaryClassifier candidate{ind.tree, ind.fit.threshold, ind.fit.error, target_class,
                                   config.response_sentinel, scaling};
        double const v = classification_error(candidate, validation);
        bool better = best == std::numeric_limits<std::size_t>::max();
        if (!better) {
            auto const key_new = std::tuple(v, ind.tree.size(), ind.fit.error);
            auto const key_old =
                std::tuple(result.validation_error, result.classifier.tree.size(), result.classifier.error);
            better = key_new < key_old;
        }
        if (better) {
            best = i;
            result.classifier = std::move(candidate);
            result.validation_error = v;
        }
    }
    return result;
}

} // namespace mogphmm
