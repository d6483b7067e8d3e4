#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "atree/common.hpp"
#include "atree/segmentation.hpp"

namespace atree {

inline constexpr std::size_t kDefaultOptimalCap = 100'000;

// Minimum-count segmentation by dynamic programming. A segment [j, k] is
// feasible iff every point in it lies within `error` of the straight line through
// points j and k (a segment whose endpoints share a key is flat at its first
// location). T[k] = 1 + min over feasible [j, k] of T[j - 1].
//
// For each endpoint k the start j is scanned backwards while the slopes through k
// that satisfy the intermediate points are kept as an interval, so the whole run
// is O(n^2) time and O(n) memory. Inputs larger than `max_points` are refused.
template <IndexKey Key>
std::vector<Segment<Key>> optimal_segmentation(std::span<const Point<Key>> points,
                                               ErrorThreshold error,
                                               std::size_t max_points = kDefaultOptimalCap) {
    detail::check_points(points);
    const std::size_t n = points.size();
    if (n > max_points) {
        throw capacity_error("optimal segmentation is capped at " + std::to_string(max_points) +
                             " points, got " + std::to_string(n));
    }

    // Widening in locations; keeps endpoint-feasible greedy segments feasible here
    // despite rounding in the slope arithmetic.
    constexpr double kTol = 1e-9;
    const double err = error.as_real();
    constexpr double kInf = std::numeric_limits<double>::infinity();

    // best[k + 1]: minimal segments covering points[0..k]; start[k]: first point of
    // the last segment in that solution.
    std::vector<std::uint64_t> best(n + 1, 0);
    std::vector<std::size_t> start(n, 0);

    for (std::size_t k = 0; k < n; ++k) {
        const Point<Key>& end = points[k];
        best[k + 1] = best[k] + 1;
        start[k] = k;

        double lo = -kInf;
        double hi = kInf;
        for (std::size_t j = k; j-- > 0;) {
            const Point<Key>& p = points[j];
            const double dy = static_cast<double>(end.loc - p.loc);
            bool feasible = false;
            if (p.key == end.key) {
                feasible = dy <= err + kTol;
            } else {
                const double slope = dy / key_delta(end.key, p.key);
                feasible = slope >= lo && slope <= hi;
            }
            if (feasible && best[j] + 1 < best[k + 1]) {
                best[k + 1] = best[j] + 1;
                start[k] = j;
            }

            // p becomes an intermediate point for every smaller j.
            if (p.key == end.key) {
                if (dy > err + kTol) {
                    break;
                }
            } else {
                const double dx = key_delta(end.key, p.key);
                lo = std::max(lo, (dy - err - kTol) / dx);
                hi = std::min(hi, (dy + err + kTol) / dx);
                if (lo > hi) {
                    break;
                }
            }
        }
    }

    std::vector<Segment<Key>> out;
    for (std::size_t k = n; k > 0;) {
        const std::size_t last = k - 1;
        const std::size_t first = start[last];
        const Point<Key>& a = points[first];
        const Point<Key>& b = points[last];
        const double slope = a.key == b.key ? 0.0
                                            : static_cast<double>(b.loc - a.loc) /
                                                  key_delta(b.key, a.key);
        out.push_back(Segment<Key>{a.key, a.loc, slope, static_cast<std::uint64_t>(last - first + 1),
                                   b.key});
        k = first;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace atree
