#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mogphmm/cascade.hpp"
#include "mogphmm/errors.hpp"

namespace mogphmm {

// Dense row-major matrix, just enough for the HMM tables.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept
    {
        return {data_.data() + r * cols_, cols_};
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// First-order discrete HMM. States are 1..K and symbols 1..M at the API
// boundary; pi, A (K x K) and B (K x M) are stored 0-based.
struct HmmModel {
    int K = 0;
    int M = 0;
    std::vector<double> pi;
    Matrix A;
    Matrix B;
    double alpha = 0.0; // smoothing the model was estimated with

    friend bool operator==(const HmmModel&, const HmmModel&) = default;

    void validate_shape() const
    {
        if (K < 1 || M < 1) {
            throw StructuralError("HMM needs K >= 1 and M >= 1");
        }
        auto const k = static_cast<std::size_t>(K);
        if (pi.size() != k || A.rows() != k || A.cols() != k || B.rows() != k ||
            B.cols() != static_cast<std::size_t>(M)) {
            throw StructuralError("HMM table shapes do not match K=" + std::to_string(K) +
                                  ", M=" + std::to_string(M));
        }
    }
};

// A fully labeled training sequence: hidden states and emitted symbols.
struct ObservedSequence {
    std::vector<int> states;
    std::vector<int> observations;
};

struct CountingOptions {
    double alpha = 1e-3;
    // false: pi_i = #(Z_n = i) / N over every position.
    // true: count only the first position of each sequence.
    bool initial_from_sequence_start = false;
};

struct CountingEstimate {
    HmmModel model;
    // 1-based states whose rows had zero total count (only possible with
    // alpha = 0); such rows are left all-zero.
    std::vector<int> undefined_transition_rows;
    std::vector<int> undefined_emission_rows;
    bool initial_undefined = false;
};

// Maximum-likelihood estimation by frequency counts over labeled sequences,
// with additive smoothing alpha on every count. Transitions are only counted
// between adjacent positions of the same sequence.
inline CountingEstimate estimate_counting(std::span<const ObservedSequence> sequences, int K, int M,
                                          const CountingOptions& options = {})
{
    if (K < 1 || M < 1) {
        throw ConfigError("estimate_counting: K and M must be >= 1");
    }
    if (!(options.alpha >= 0.0) || !std::isfinite(options.alpha)) {
        throw ConfigError("estimate_counting: alpha must be a finite non-negative number");
    }
    auto const k = static_cast<std::size_t>(K);
    auto const m = static_cast<std::size_t>(M);
    std::vector<double> init(k, 0.0);
    Matrix trans(k, k);
    Matrix emit(k, m);
    std::size_t positions = 0;
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const ObservedSequence& seq = sequences[s];
        if (seq.states.size() != seq.observations.size()) {
            throw DataError("estimate_counting: sequence " + std::to_string(s) +
                            " has mismatched state/observation lengths");
        }
        for (std::size_t n = 0; n < seq.states.size(); ++n) {
            int const z = seq.states[n];
            int const o = seq.observations[n];
            if (z < 1 || z > K) {
                throw DataError("estimate_counting: state " + std::to_string(z) + " at sequence " +
                                std::to_string(s) + ", position " + std::to_string(n) + " outside 1.." +
                                std::to_string(K));
            }
            if (o < 1 || o > M) {
                throw DataError("estimate_counting: observation " + std::to_string(o) + " at sequence " +
                                std::to_string(s) + ", position " + std::to_string(n) + " outside 1.." +
                                std::to_string(M));
            }
            auto const zi = static_cast<std::size_t>(z - 1);
            if (!options.initial_from_sequence_start || n == 0) {
                init[zi] += 1.0;
            }
            emit(zi, static_cast<std::size_t>(o - 1)) += 1.0;
            if (n > 0) {
                trans(static_cast<std::size_t>(seq.states[n - 1] - 1), zi) += 1.0;
            }
            ++positions;
        }
    }
    if (positions == 0) {
        throw DataError("estimate_counting: no labeled positions");
    }

    CountingEstimate out;
    HmmModel& model = out.model;
    model.K = K;
    model.M = M;
    model.alpha = options.alpha;
    model.pi.assign(k, 0.0);
    model.A = Matrix(k, k);
    model.B = Matrix(k, m);

    double init_total = 0.0;
    for (double c : init) {
        init_total += c + options.alpha;
    }
    if (init_total > 0.0) {
        for (std::size_t i = 0; i < k; ++i) {
            model.pi[i] = (init[i] + options.alpha) / init_total;
        }
    } else {
        out.initial_undefined = true;
    }
    auto normalize = [&](const Matrix& counts, Matrix& probs, std::vector<int>& undefined) {
        for (std::size_t i = 0; i < counts.rows(); ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < counts.cols(); ++j) {
                total += counts(i, j) + options.alpha;
            }
            if (total <= 0.0) {
                undefined.push_back(static_cast<int>(i) + 1);
                continue;
            }
            for (std::size_t j = 0; j < counts.cols(); ++j) {
                probs(i, j) = (counts(i, j) + options.alpha) / total;
            }
        }
    };
    normalize(trans, model.A, out.undefined_transition_rows);
    normalize(emit, model.B, out.undefined_emission_rows);
    return out;
}

namespace detail {

inline void check_observations(const HmmModel& model, std::span<const int> observations)
{
    for (std::size_t n = 0; n < observations.size(); ++n) {
        if (observations[n] < 1 || observations[n] > model.M) {
            throw DataError("observation " + std::to_string(observations[n]) + " at position " +
                            std::to_string(n) + " outside 1.." + std::to_string(model.M));
        }
    }
}

inline double safe_log(double p) noexcept
{
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

} // namespace detail

// log P(Z_{1:N}, O_{1:N}) = log pi_{Z1} + sum log A_{Z(n-1),Zn} + sum log B_{Zn,On}.
// -infinity when any factor is zero.
inline double sequence_log_likelihood(const HmmModel& model, std::span<const int> states,
                                      std::span<const int> observations)
{
    model.validate_shape();
    if (states.size() != observations.size()) {
        throw DataError("sequence_log_likelihood: state and observation lengths differ");
    }
    if (states.empty()) {
        throw DataError("sequence_log_likelihood: empty sequence");
    }
    detail::check_observations(model, observations);
    for (std::size_t n = 0; n < states.size(); ++n) {
        if (states[n] < 1 || states[n] > model.K) {
            throw DataError("state " + std::to_string(states[n]) + " at position " + std::to_string(n) +
                            " outside 1.." + std::to_string(model.K));
        }
    }
    auto idx = [](int v) { return static_cast<std::size_t>(v - 1); };
    double ll = detail::safe_log(model.pi[idx(states[0])]);
    for (std::size_t n = 1; n < states.size(); ++n) {
        ll += detail::safe_log(model.A(idx(states[n - 1]), idx(states[n])));
    }
    for (std::size_t n = 0; n < states.size(); ++n) {
        ll += detail::safe_log(model.B(idx(states[n]), idx(observations[n])));
    }
    return ll;
}

struct ViterbiTrellis {
    Matrix delta;                  // N x K log-probabilities
    std::vector<int> backpointer;  // N x K row-major, 1-based predecessor states (row 0 unused: 0)
};

// Log-domain Viterbi recursion. Every argmax breaks ties toward the smallest
// state index.
inline ViterbiTrellis viterbi_trellis(const HmmModel& model, std::span<const int> observations)
{
    model.validate_shape();
    if (observations.empty()) {
        throw DataError("viterbi: need at least one observation");
    }
    detail::check_observations(model, observations);
    auto const k = static_cast<std::size_t>(model.K);
    std::size_t const n_obs = observations.size();

    Matrix log_a(k, k);
    Matrix log_b(k, static_cast<std::size_t>(model.M));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            log_a(i, j) = detail::safe_log(model.A(i, j));
        }
        for (std::size_t j = 0; j < static_cast<std::size_t>(model.M); ++j) {
            log_b(i, j) = detail::safe_log(model.B(i, j));
        }
    }

    ViterbiTrellis t{Matrix(n_obs, k), std::vector<int>(n_obs * k, 0)};
    auto const o0 = static_cast<std::size_t>(observations[0] - 1);
    for (std::size_t i = 0; i < k; ++i) {
        t.delta(0, i) = detail::safe_log(model.pi[i]) + log_b(i, o0);
    }
    for (std::size_t n = 1; n < n_obs; ++n) {
        auto const o = static_cast<std::size_t>(observations[n] - 1);
        for (std::size_t j = 0; j < k; ++j) {
            std::size_t best = 0;
            double best_score = t.delta(n - 1, 0) + log_a(0, j);
            for (std::size_t i = 1; i < k; ++i) {
                double const s = t.delta(n - 1, i) + log_a(i, j);
                if (s > best_score) {
                    best_score = s;
                    best = i;
                }
            }
            t.delta(n, j) = best_score + log_b(j, o);
            t.backpointer[n * k + j] = static_cast<int>(best) + 1;
        }
    }
    return t;
}

// Most probable state sequence Z*_{1:N} (1-based states).
inline std::vector<int> viterbi_decode(const HmmModel& model, std::span<const int> observations)
{
    ViterbiTrellis const t = viterbi_trellis(model, observations);
    auto const k = static_cast<std::size_t>(model.K);
    std::size_t const n_obs = observations.size();
    std::size_t last = 0;
    for (std::size_t i = 1; i < k; ++i) {
        if (t.delta(n_obs - 1, i) > t.delta(n_obs - 1, last)) {
            last = i;
        }
    }
    std::vector<int> states(n_obs);
    states[n_obs - 1] = static_cast<int>(last) + 1;
    for (std::size_t n = n_obs - 1; n > 0; --n) {
        states[n - 1] = t.backpointer[n * k + static_cast<std::size_t>(states[n] - 1)];
    }
    return states;
}

// Stage-two entry point: observation model then Viterbi.
template <ObservationModel Model>
std::vector<int> predict_status(const HmmModel& model, const Model& observer, const FeatureMatrix& records)
{
    if (observer.observation_count() != model.M) {
        throw StructuralError("observation model emits " + std::to_string(observer.observation_count()) +
                              " symbols but the HMM expects M=" + std::to_string(model.M));
    }
    if (records.rows() == 0) {
        throw DataError("predict_status: empty record list");
    }
    return viterbi_decode(model, classify_sequence(observer, records));
}

} // namespace mogphmm
