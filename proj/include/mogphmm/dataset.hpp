#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mogphmm/errors.hpp"

namespace mogphmm {

// Row-major dense feature matrix; one row per instance.
class FeatureMatrix {
public:
    FeatureMatrix() = default;

    explicit FeatureMatrix(std::size_t dimension) : dimension_(dimension) {}

    FeatureMatrix(std::size_t rows, std::size_t dimension)
        : dimension_(dimension), values_(rows * dimension, 0.0)
    {
    }

    [[nodiscard]] std::size_t rows() const noexcept
    {
        return dimension_ == 0 ? 0 : values_.size() / dimension_;
    }
    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept
    {
        return {values_.data() + i * dimension_, dimension_};
    }
    [[nodiscard]] std::span<double> row(std::size_t i) noexcept
    {
        return {values_.data() + i * dimension_, dimension_};
    }

    void push_back(std::span<const double> x)
    {
        if (x.size() != dimension_) {
            throw StructuralError("feature row has dimension " + std::to_string(x.size()) +
                                  ", matrix expects " + std::to_string(dimension_));
        }
        values_.insert(values_.end(), x.begin(), x.end());
    }

    void reserve(std::size_t rows) { values_.reserve(rows * dimension_); }

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    std::size_t dimension_ = 0;
    std::vector<double> values_;
};

// Per-feature affine map x -> (x - offset) / scale. Empty means identity.
struct FeatureScaling {
    std::vector<double> offset;
    std::vector<double> scale;

    [[nodiscard]] bool identity() const noexcept { return offset.empty(); }

    // Writes the scaled row into out (resized to x.size()).
    void apply(std::span<const double> x, std::vector<double>& out) const
    {
        if (x.size() != offset.size()) {
            throw StructuralError("feature row has dimension " + std::to_string(x.size()) + ", scaling expects " +
                                  std::to_string(offset.size()));
        }
        out.resize(x.size());
        for (std::size_t c = 0; c < x.size(); ++c) {
            out[c] = (x[c] - offset[c]) / scale[c];
        }
    }

    [[nodiscard]] FeatureMatrix apply(const FeatureMatrix& x) const
    {
        if (identity()) {
            return x;
        }
        FeatureMatrix out(x.dimension());
        out.reserve(x.rows());
        std::vector<double> row;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            apply(x.row(i), row);
            out.push_back(row);
        }
        return out;
    }

    friend bool operator==(const FeatureScaling&, const FeatureScaling&) = default;
};

// Column means and sample standard deviations; constant columns keep scale 1.
inline FeatureScaling standardization(const FeatureMatrix& x)
{
    std::size_t const d = x.dimension();
    std::size_t const n = x.rows();
    FeatureScaling s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    if (n == 0) {
        return s;
    }
    for (std::size_t c = 0; c < d; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += x.row(i)[c];
        }
        double const mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ss += (x.row(i)[c] - mean) * (x.row(i)[c] - mean);
        }
        double const sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        s.offset[c] = mean;
        s.scale[c] = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
    }
    return s;
}

// Features with 0/1 labels, 1 meaning "target class".
struct BinaryDataset {
    FeatureMatrix features;
    std::vector<std::uint8_t> labels;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return features.dimension(); }
};

// Features with class labels 1..K.
struct LabeledDataset {
    FeatureMatrix features;
    std::vector<int> labels;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return features.dimension(); }
};

// One-vs-rest relabeling: 1 where label == target, else 0.
inline BinaryDataset one_vs_rest(const LabeledDataset& data, int target)
{
    BinaryDataset out{data.features, {}};
    out.labels.reserve(data.size());
    for (int label : data.labels) {
        out.labels.push_back(label == target ? 1 : 0);
    }
    return out;
}

} // namespace mogphmm
