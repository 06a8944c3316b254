#pragma once

// Reference computations written directly from the metric definitions, kept
// independent of the library code they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace revel::oracle {

inline double excess_percent(long long bins, long long lb) {
    return (static_cast<double>(bins) - static_cast<double>(lb)) / static_cast<double>(lb) * 100.0;
}

inline double gap_percent(double length, double reference) { return (length - reference) / reference * 100.0; }

/// Fewest bins of the given capacity that hold all items (exhaustive search).
inline int min_bins(const std::vector<int>& items, int capacity) {
    std::vector<int> sorted = items;
    std::sort(sorted.rbegin(), sorted.rend());
    int best = static_cast<int>(sorted.size());
    std::vector<int> loads;
    std::function<void(std::size_t)> place = [&](std::size_t i) {
        if (static_cast<int>(loads.size()) >= best) return;
        if (i == sorted.size()) {
            best = static_cast<int>(loads.size());
            return;
        }
        for (std::size_t b = 0; b < loads.size(); ++b) {
            if (loads[b] + sorted[i] > capacity) continue;
            loads[b] += sorted[i];
            place(i + 1);
            loads[b] -= sorted[i];
        }
        loads.push_back(sorted[i]);
        place(i + 1);
        loads.pop_back();
    };
    place(0);
    return best;
}

inline double euclid(const std::pair<double, double>& a, const std::pair<double, double>& b) {
    return std::hypot(a.first - b.first, a.second - b.second);
}

inline double closed_tour(const std::vector<std::pair<double, double>>& pts, const std::vector<int>& order) {
    double total = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) total += euclid(pts[order[i]], pts[order[(i + 1) % order.size()]]);
    return total;
}

/// Optimal closed-tour length by enumerating all permutations that start at node 0.
inline double optimal_tour(const std::vector<std::pair<double, double>>& pts) {
    std::vector<int> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        best = std::min(best, closed_tour(pts, order));
    } while (std::next_permutation(order.begin() + 1, order.end()));
    return best;
}

/// Shannon entropy (natural log) of weights normalised to sum 1.
inline double entropy(const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double h = 0.0;
    for (double w : weights)
        if (w > 0) h -= (w / total) * std::log(w / total);
    return h;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 && nb == 0) return 1.0;
    if (na == 0 || nb == 0) return 0.0;
    return dot / std::sqrt(na * nb);
}

}  // namespace revel::oracle
