#pragma once

// Ranking helpers shared by activation aggregation, influence aggregation
// and attribution-graph extraction. All orderings are by value descending,
// ties broken by the lower index, so results never depend on input order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace attrigraph {

/// Relative slack when comparing a cumulative sum with its threshold, so
/// that e.g. three entries of 0.01 reach a 0.03 share despite rounding.
inline constexpr double kCumulativeSlack = 1e-12;

template <class T>
bool is_excluded(T v) {
    return v == -std::numeric_limits<T>::infinity();
}

/// Eligible indices (not -inf) sorted by value descending, ties by index.
template <class T>
std::vector<std::size_t> descending_order(std::span<const T> values) {
    std::vector<std::size_t> idx;
    idx.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!is_excluded(values[i])) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    return idx;
}

/// Indices of the k largest entries in selection order. Entries equal to
/// -inf are never selected, so fewer than k may come back.
template <class T>
std::vector<std::size_t> top_k_indices(std::span<const T> values, std::size_t k) {
    std::vector<std::size_t> idx;
    idx.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!is_excluded(values[i])) idx.push_back(i);
    }
    const std::size_t take = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (values[a] != values[b]) return values[a] > values[b];
                          return a < b;
                      });
    idx.resize(take);
    return idx;
}

/// Shortest descending prefix whose share of the total mass meets or
/// exceeds `fraction`; the crossing entry is included. Negative entries
/// carry no mass and are never selected. An all-zero input selects nothing.
template <class T>
std::vector<std::size_t> cumulative_share_prefix(std::span<const T> values, double fraction) {
    double total = 0.0;
    for (T v : values) {
        if (v > T(0)) total += static_cast<double>(v);
    }
    if (!(total > 0.0)) return {};

    const double threshold = fraction * total * (1.0 - kCumulativeSlack);
    std::vector<std::size_t> out;
    double cum = 0.0;
    for (std::size_t i : descending_order(values)) {
        if (!(values[i] > T(0))) break;
        out.push_back(i);
        cum += static_cast<double>(values[i]);
        if (cum >= threshold) break;
    }
    return out;
}

}  // namespace attrigraph
