#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace mogphmm {

// The two minimized objectives of a binary GP classifier.
struct ObjectiveVector {
    double error = 0.0;    // 0/1 loss in [0, 1]
    std::size_t size = 1;  // node count

    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

// p dominates q: no worse in both objectives and strictly better in one.
constexpr bool dominates(const ObjectiveVector& p, const ObjectiveVector& q) noexcept
{
    bool const no_worse = p.error <= q.error && p.size <= q.size;
    bool const better = p.error < q.error || p.size < q.size;
    return no_worse && better;
}

// Non-dominated sorting. Rank 1 is the Pareto frontier; rank r is the frontier
// of what remains once ranks < r are removed.
inline std::vector<int> pareto_rank(std::span<const ObjectiveVector> objectives)
{
    std::size_t const n = objectives.size();
    std::vector<int> rank(n, 0);
    std::vector<std::size_t> dominated_by_count(n, 0);
    std::vector<std::vector<std::size_t>> dominated_set(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dominates(objectives[i], objectives[j])) {
                dominated_set[i].push_back(j);
                ++dominated_by_count[j];
            } else if (dominates(objectives[j], objectives[i])) {
                dominated_set[j].push_back(i);
                ++dominated_by_count[i];
            }
        }
    }
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < n; ++i) {
        if (dominated_by_count[i] == 0) {
            front.push_back(i);
        }
    }
    int r = 1;
    while (!front.empty()) {
        std::vector<std::size_t> next;
        for (std::size_t i : front) {
            rank[i] = r;
            for (std::size_t j : dominated_set[i]) {
                if (--dominated_by_count[j] == 0) {
                    next.push_back(j);
                }
            }
        }
        std::sort(next.begin(), next.end());
        front = std::move(next);
        ++r;
    }
    return rank;
}

// NSGA-II crowding distance, computed within each rank. Front extremes get
// +infinity; an objective with zero spread contributes nothing.
inline std::vector<double> crowding_distance(std::span<const ObjectiveVector> objectives,
                                             std::span<const int> ranks)
{
    std::size_t const n = objectives.size();
    std::vector<double> distance(n, 0.0);
    int const max_rank = n == 0 ? 0 : *std::max_element(ranks.begin(), ranks.end());
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (int r = 1; r <= max_rank; ++r) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < n; ++i) {
            if (ranks[i] == r) {
                front.push_back(i);
            }
        }
        if (front.size() <= 2) {
            for (std::size_t i : front) {
                distance[i] = inf;
            }
            continue;
        }
        auto accumulate = [&](auto key) {
            std::stable_sort(front.begin(), front.end(),
                             [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
            double const lo = key(front.front());
            double const hi = key(front.back());
            distance[front.front()] = inf;
            distance[front.back()] = inf;
            if (hi <= lo) {
                return;
            }
            for (std::size_t k = 1; k + 1 < front.size(); ++k) {
                distance[front[k]] += (key(front[k + 1]) - key(front[k - 1])) / (hi - lo);
            }
        };
        accumulate([&](std::size_t i) { return objectives[i].error; });
        accumulate([&](std::size_t i) { return static_cast<double>(objectives[i].size); });
    }
    return distance;
}

} // namespace mogphmm
