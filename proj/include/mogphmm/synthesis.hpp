#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mogphmm/errors.hpp"
#include "mogphmm/lifelog.hpp"
#include "mogphmm/random.hpp"

namespace mogphmm {

inline constexpr int kMaxRejections = 10'000;

// Normal(mu, sigma^2) conditioned on x >= 0, by rejection.
inline double sample_nonnegative_normal(double mu, double sigma, Rng& rng, int max_tries = kMaxRejections)
{
    if (!(sigma >= 0.0) || !std::isfinite(mu) || !std::isfinite(sigma)) {
        throw ConfigError("truncated normal: need finite mu and sigma >= 0");
    }
    if (sigma == 0.0) {
        if (mu >= 0.0) {
            return mu;
        }
        throw SamplingError("truncated normal: degenerate distribution at negative mean");
    }
    std::normal_distribution<double> normal(mu, sigma);
    for (int t = 0; t < max_tries; ++t) {
        double const x = normal(rng);
        if (x >= 0.0) {
            return x;
        }
    }
    throw SamplingError("truncated normal: no non-negative draw after " + std::to_string(max_tries) +
                        " attempts (mu=" + std::to_string(mu) + ", sigma=" + std::to_string(sigma) + ")");
}

// Ratios H = distance/duration (m/s) and R = steps/duration (steps/s), plus
// per-class pools of observed durations to bootstrap from.
struct SynthesisParams {
    double mu_h = 0.0;
    double sigma_h = 0.0;
    double mu_r = 0.0;
    double sigma_r = 0.0;
    std::vector<std::vector<double>> duration_pools; // index = class - 1
    std::vector<int> fallback_classes;               // classes that borrowed the global pool
    std::size_t samples_per_class = 200;
    std::uint64_t seed = 1;

    [[nodiscard]] int class_count() const noexcept { return static_cast<int>(duration_pools.size()); }

    void validate() const
    {
        if (!(sigma_h >= 0.0) || !(sigma_r >= 0.0)) {
            throw ConfigError("synthesis: standard deviations must be >= 0");
        }
        if (duration_pools.empty()) {
            throw ConfigError("synthesis: no classes to synthesize");
        }
        for (std::size_t k = 0; k < duration_pools.size(); ++k) {
            if (duration_pools[k].empty()) {
                throw DataError("synthesis: empty duration pool for class " + std::to_string(k + 1));
            }
        }
    }
};

struct SampleStats {
    double mean = 0.0;
    double stddev = 0.0; // unbiased (n - 1)
};

inline SampleStats sample_stats(const std::vector<double>& v)
{
    SampleStats s;
    if (v.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) {
            ss += (x - s.mean) * (x - s.mean);
        }
        s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

// Ratio statistics over records with positive duration; duration pools split
// by label. A class with no raw records borrows the pool of all durations and
// is listed in fallback_classes.
inline SynthesisParams estimate_synthesis_params(const LabeledSequence& raw, int class_count = kMaxScore)
{
    const auto& labels = raw.require_labels();
    std::vector<double> h;
    std::vector<double> r;
    for (const ActivityRecord& rec : raw.records) {
        if (rec.duration > 0.0) {
            h.push_back(rec.distance / rec.duration);
            r.push_back(rec.steps / rec.duration);
        }
    }
    if (h.size() < 2) {
        throw DataError("estimate_synthesis_params: need at least 2 records with positive duration");
    }
    SynthesisParams p;
    auto const hs = sample_stats(h);
    auto const rs = sample_stats(r);
    p.mu_h = hs.mean;
    p.sigma_h = hs.stddev;
    p.mu_r = rs.mean;
    p.sigma_r = rs.stddev;
    p.duration_pools.assign(static_cast<std::size_t>(class_count), {});
    std::vector<double> all;
    for (std::size_t i = 0; i < raw.records.size(); ++i) {
        int const k = labels[i];
        if (k < 1 || k > class_count) {
            throw DataError("estimate_synthesis_params: label " + std::to_string(k) + " outside 1.." +
                            std::to_string(class_count));
        }
        p.duration_pools[static_cast<std::size_t>(k - 1)].push_back(raw.records[i].duration);
        all.push_back(raw.records[i].duration);
    }
    for (int k = 1; k <= class_count; ++k) {
        auto& pool = p.duration_pools[static_cast<std::size_t>(k - 1)];
        if (pool.empty()) {
            pool = all;
            p.fallback_classes.push_back(k);
        }
    }
    return p;
}

inline const Date kSyntheticStartDate{std::chrono::year{2000}, std::chrono::January, std::chrono::day{1}};

// Balanced synthetic data: samples_per_class records per class, class-major
// order, on consecutive dates. Each record bootstraps a duration from its
// class pool and scales it by non-negative draws of H and R. Class k uses the
// independent stream derive_seed(seed, k).
inline LabeledSequence synthesize(const SynthesisParams& params)
{
    params.validate();
    LabeledSequence out;
    out.participant_id = "synthetic";
    out.labels.emplace();
    std::size_t const total = params.samples_per_class * params.duration_pools.size();
    out.records.reserve(total);
    out.labels->reserve(total);
    int day = 0;
    for (std::size_t k = 0; k < params.duration_pools.size(); ++k) {
        const auto& pool = params.duration_pools[k];
        Rng rng(derive_seed(params.seed, k + 1));
        for (std::size_t s = 0; s < params.samples_per_class; ++s) {
            ActivityRecord rec;
            rec.date = add_days(kSyntheticStartDate, day++);
            rec.duration = pool[uniform_index(rng, pool.size())];
            double const h = sample_nonnegative_normal(params.mu_h, params.sigma_h, rng);
            double const r = sample_nonnegative_normal(params.mu_r, params.sigma_r, rng);
            rec.distance = rec.duration * h;
            rec.steps = rec.duration * r;
            out.records.push_back(rec);
            out.labels->push_back(static_cast<int>(k) + 1);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Label noise

inline std::vector<double> default_noise_grid()
{
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) {
        grid.push_back(static_cast<double>(i) / 100.0);
    }
    return grid;
}

struct NoiseConfig {
    double level = 0.0;
    std::vector<double> grid = default_noise_grid();
    std::uint64_t seed = 7;
    bool perturb_features = false;

    void validate() const
    {
        auto bad = [](double l) { return !(l >= 0.0 && l <= 0.2); };
        if (bad(level)) {
            throw ConfigError("noise level must lie in [0, 0.2]");
        }
        if (grid.empty()) {
            throw ConfigError("noise grid must not be empty");
        }
        for (double l : grid) {
            if (bad(l)) {
                throw ConfigError("noise grid levels must lie in [0, 0.2]");
            }
        }
    }
};

// Relabels the sequence from noisy copies of its features: each of steps,
// distance and duration gets additive N(0, (level * sd)^2) noise, sd being
// that feature's sample standard deviation over the sequence, clamped at 0.
// The returned records are the originals unless perturb_features is set.
inline LabeledSequence perturb_and_relabel(const LabeledSequence& seq, double level, const LabelRule& rule,
                                           std::uint64_t seed, bool perturb_features = false)
{
    rule.validate();
    if (!(level >= 0.0) || !std::isfinite(level)) {
        throw ConfigError("noise level must be a finite non-negative number");
    }
    if (seq.records.empty()) {
        throw DataError("perturb_and_relabel: empty sequence");
    }
    std::array<std::vector<double>, kFeatureCount> columns;
    for (const ActivityRecord& r : seq.records) {
        auto const f = r.features();
        for (std::size_t c = 0; c < kFeatureCount; ++c) {
            columns[c].push_back(f[c]);
        }
    }
    std::array<double, kFeatureCount> sd{};
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
        sd[c] = level * sample_stats(columns[c]).stddev;
    }

    Rng rng(seed);
    LabeledSequence out = seq;
    out.labels.emplace();
    out.labels->reserve(seq.size());
    for (std::size_t i = 0; i < seq.records.size(); ++i) {
        ActivityRecord noisy = seq.records[i];
        double* fields[] = {&noisy.steps, &noisy.distance, &noisy.duration};
        for (std::size_t c = 0; c < kFeatureCount; ++c) {
            double eps = 0.0;
            if (sd[c] > 0.0) {
                eps = std::normal_distribution<double>(0.0, sd[c])(rng);
            }
            *fields[c] = std::max(0.0, *fields[c] + eps);
        }
        if (noisy.duration == 0.0) {
            noisy.steps = 0.0;
            noisy.distance = 0.0;
        }
        out.labels->push_back(rule.score(noisy));
        if (perturb_features) {
            out.records[i] = noisy;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bundled demo participant. These numbers are fixture choices for offline
// runs, not measurements of any real person.

struct DemoProfile {
    std::size_t days = 365;
    std::uint64_t seed = 20160101;
    Date start{std::chrono::year{2016}, std::chrono::January, std::chrono::day{1}};
    std::array<double, 5> level_step_mean{1500.0, 4500.0, 7500.0, 10500.0, 14000.0};
    double level_step_sd = 700.0;
    double stay_probability = 0.75;
    double cadence_mean = 1.75; // steps per second
    double cadence_sd = 0.06;
    double speed_mean = 1.35;   // meters per second
    double speed_sd = 0.08;
};

// A year of days driven by a sticky random walk over five activity levels,
// labeled with `rule`.
inline LabeledSequence demo_participant(const DemoProfile& profile = {}, const LabelRule& rule = {})
{
    Rng rng(profile.seed);
    LabeledSequence seq;
    seq.participant_id = "demo";
    int level = 2; // 0-based
    int const top = static_cast<int>(profile.level_step_mean.size()) - 1;
    for (std::size_t d = 0; d < profile.days; ++d) {
        if (d > 0 && uniform01(rng) >= profile.stay_probability) {
            int const step = uniform01(rng) < 0.8 ? 1 : 2;
            level += uniform01(rng) < 0.5 ? -step : step;
            level = std::clamp(level, 0, top);
        }
        ActivityRecord rec;
        rec.date = add_days(profile.start, static_cast<int>(d));
        double const steps = sample_nonnegative_normal(profile.level_step_mean[static_cast<std::size_t>(level)],
                                                       profile.level_step_sd, rng);
        double const cadence = sample_nonnegative_normal(profile.cadence_mean, profile.cadence_sd, rng);
        double const speed = sample_nonnegative_normal(profile.speed_mean, profile.speed_sd, rng);
        rec.duration = cadence > 0.0 ? std::round(steps / cadence) : 0.0;
        rec.steps = rec.duration > 0.0 ? std::round(steps) : 0.0;
        rec.distance = std::round(rec.duration * speed * 10.0) / 10.0;
        seq.records.push_back(rec);
    }
    seq.labels = label_sequence(seq, rule);
    return seq;
}

} // namespace mogphmm
