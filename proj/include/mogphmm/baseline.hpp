#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mogphmm/dataset.hpp"
#include "mogphmm/errors.hpp"

namespace mogphmm {

// Nearest class centroid on standardized features. Only a reference point for
// the experiment harness; it never emits the fall-through symbol but reports
// K+1 symbols so that it plugs into the same HMM shape as a cascade.
class NearestCentroid {
public:
    NearestCentroid() = default;

    NearestCentroid(const LabeledDataset& train, int class_count) : class_count_(class_count)
    {
        if (class_count < 1 || train.size() == 0) {
            throw DataError("nearest centroid: need classes and data");
        }
        std::size_t const d = train.dimension();
        std::vector<double> mean(d, 0.0);
        for (std::size_t i = 0; i < train.size(); ++i) {
            for (std::size_t c = 0; c < d; ++c) {
                mean[c] += train.features.row(i)[c];
            }
        }
        for (double& m : mean) {
            m /= static_cast<double>(train.size());
        }
        scale_.assign(d, 0.0);
        for (std::size_t i = 0; i < train.size(); ++i) {
            for (std::size_t c = 0; c < d; ++c) {
                double const v = train.features.row(i)[c] - mean[c];
                scale_[c] += v * v;
            }
        }
        for (double& s : scale_) {
            s = std::sqrt(s / static_cast<double>(train.size()));
            s = s > 0.0 ? 1.0 / s : 1.0;
        }
        centroids_.assign(static_cast<std::size_t>(class_count) * d, 0.0);
        std::vector<std::size_t> counts(static_cast<std::size_t>(class_count), 0);
        for (std::size_t i = 0; i < train.size(); ++i) {
            int const k = train.labels[i];
            if (k < 1 || k > class_count) {
                throw DataError("nearest centroid: label outside 1.." + std::to_string(class_count));
            }
            auto const kk = static_cast<std::size_t>(k - 1);
            ++counts[kk];
            for (std::size_t c = 0; c < d; ++c) {
                centroids_[kk * d + c] += train.features.row(i)[c] * scale_[c];
            }
        }
        present_.assign(static_cast<std::size_t>(class_count), false);
        for (std::size_t k = 0; k < counts.size(); ++k) {
            present_[k] = counts[k] > 0;
            for (std::size_t c = 0; c < d && counts[k] > 0; ++c) {
                centroids_[k * d + c] /= static_cast<double>(counts[k]);
            }
        }
    }

    [[nodiscard]] int observation_count() const noexcept { return class_count_ + 1; }

    [[nodiscard]] int classify(std::span<const double> x) const
    {
        std::size_t const d = scale_.size();
        if (x.size() != d) {
            throw StructuralError("nearest centroid: dimension mismatch");
        }
        int best = class_count_ + 1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < present_.size(); ++k) {
            if (!present_[k]) {
                continue;
            }
            double dist = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                double const v = x[c] * scale_[c] - centroids_[k * d + c];
                dist += v * v;
            }
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(k) + 1;
            }
        }
        return best;
    }

private:
    int class_count_ = 0;
    std::vector<double> scale_;
    std::vector<double> centroids_;
    std::vector<bool> present_;
};

} // namespace mogphmm
