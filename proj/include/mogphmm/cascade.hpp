#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mogphmm/dataset.hpp"
#include "mogphmm/errors.hpp"
#include "mogphmm/evolve.hpp"
#include "mogphmm/parallel.hpp"
#include "mogphmm/random.hpp"

namespace mogphmm {

// Anything that maps a feature vector to an observation symbol in
// 1..observation_count().
template <class T>
concept ObservationModel = requires(const T& m, std::span<const double> x) {
    { m.observation_count() } -> std::convertible_to<int>;
    { m.classify(x) } -> std::convertible_to<int>;
};

// K one-vs-rest classifiers applied in ascending order of training error. The
// first stage that fires assigns its target class; if none fires the record
// falls through to "class 0", encoded as symbol K+1.
class CascadeClassifier {
public:
    CascadeClassifier() = default;

    explicit CascadeClassifier(std::vector<BinaryClassifier> stages) : stages_(std::move(stages)) { validate(); }

    [[nodiscard]] const std::vector<BinaryClassifier>& stages() const noexcept { return stages_; }
    [[nodiscard]] int class_count() const noexcept { return static_cast<int>(stages_.size()); }
    [[nodiscard]] int observation_count() const noexcept { return class_count() + 1; }
    [[nodiscard]] int fallthrough_symbol() const noexcept { return class_count() + 1; }

    [[nodiscard]] int classify(std::span<const double> x) const
    {
        for (const BinaryClassifier& stage : stages_) {
            if (stage.classify(x) == 1) {
                return stage.target_class;
            }
        }
        return fallthrough_symbol();
    }

    friend bool operator==(const CascadeClassifier&, const CascadeClassifier&) = default;

private:
    void validate() const
    {
        int const k = class_count();
        if (k < 1) {
            throw StructuralError("cascade needs at least one stage");
        }
        std::vector<bool> seen(static_cast<std::size_t>(k) + 1, false);
        for (std::size_t i = 0; i < stages_.size(); ++i) {
            int const t = stages_[i].target_class;
            if (t < 1 || t > k || seen[static_cast<std::size_t>(t)]) {
                throw StructuralError("cascade stage target classes must be a permutation of 1..K");
            }
            seen[static_cast<std::size_t>(t)] = true;
            if (i > 0 && stages_[i - 1].error > stages_[i].error) {
                throw StructuralError("cascade stages must be sorted by ascending error");
            }
        }
    }

    std::vector<BinaryClassifier> stages_;
};

static_assert(ObservationModel<CascadeClassifier>);

inline int classify_observation(const CascadeClassifier& cascade, std::span<const double> x)
{
    return cascade.classify(x);
}

template <ObservationModel Model>
std::vector<int> classify_sequence(const Model& model, const FeatureMatrix& records)
{
    std::vector<int> out;
    out.reserve(records.rows());
    for (std::size_t i = 0; i < records.rows(); ++i) {
        out.push_back(model.classify(records.row(i)));
    }
    return out;
}

struct CascadeTraining {
    CascadeClassifier cascade;
    // Indexed by class - 1 (training order, before sorting).
    std::vector<EvolutionResult> runs;
};

// One evolve_binary run per class k on the "class k vs rest" relabeling, with
// seed base_seed + k; stages are then sorted by training error (ties by class).
inline CascadeTraining build_cascade(const LabeledDataset& train, const LabeledDataset& validation,
                                     const EvolutionConfig& config, int class_count, unsigned threads = 1)
{
    if (class_count < 2) {
        throw ConfigError("build_cascade: need at least 2 classes");
    }
    std::vector<std::size_t> present(static_cast<std::size_t>(class_count) + 1, 0);
    for (int label : train.labels) {
        if (label < 1 || label > class_count) {
            throw DataError("build_cascade: training label " + std::to_string(label) + " outside 1.." +
                            std::to_string(class_count));
        }
        ++present[static_cast<std::size_t>(label)];
    }
    for (int k = 1; k <= class_count; ++k) {
        if (present[static_cast<std::size_t>(k)] == 0) {
            throw DataError("build_cascade: class " + std::to_string(k) + " missing from training data");
        }
    }

    CascadeTraining out;
    out.runs.resize(static_cast<std::size_t>(class_count));
    parallel_for(static_cast<std::size_t>(class_count), threads, [&](std::size_t i) {
        int const k = static_cast<int>(i) + 1;
        EvolutionConfig cfg = config;
        cfg.seed = config.seed + static_cast<std::uint64_t>(k);
        out.runs[i] = evolve_binary(one_vs_rest(train, k), one_vs_rest(validation, k), cfg, k);
    });

    std::vector<BinaryClassifier> stages;
    stages.reserve(out.runs.size());
    for (const EvolutionResult& r : out.runs) {
        stages.push_back(r.classifier);
    }
    std::stable_sort(stages.begin(), stages.end(),
                     [](const BinaryClassifier& a, const BinaryClassifier& b) { return a.error < b.error; });
    out.cascade = CascadeClassifier(std::move(stages));
    return out;
}

// Batch form of the cascade: stage 1 classifies everything, its positives are
// removed, stage 2 sees only what is left, and so on; survivors of the last
// stage become class 0 (symbol K+1). Must agree with pointwise classify().
inline std::vector<int> sequential_exclusion(const CascadeClassifier& cascade, const FeatureMatrix& data)
{
    std::vector<int> assigned(data.rows(), cascade.fallthrough_symbol());
    std::vector<std::size_t> remaining(data.rows());
    for (std::size_t i = 0; i < remaining.size(); ++i) {
        remaining[i] = i;
    }
    for (const BinaryClassifier& stage : cascade.stages()) {
        std::vector<std::size_t> rest;
        for (std::size_t i : remaining) {
            if (stage.classify(data.row(i)) == 1) {
                assigned[i] = stage.target_class;
            } else {
                rest.push_back(i);
            }
        }
        remaining = std::move(rest);
    }
    return assigned;
}

} // namespace mogphmm
