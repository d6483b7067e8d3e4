#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "atree/common.hpp"

namespace atree {

// One entry of the monotone key -> location function.
template <IndexKey Key>
struct Point {
    Key key{};
    std::uint64_t loc = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

// A linear piece of the key -> location function. Locations covered are
// [start_loc, start_loc + n_locs).
template <IndexKey Key>
struct Segment {
    Key start_key{};
    std::uint64_t start_loc = 0;
    double slope = 0.0;
    std::uint64_t n_locs = 0;
    Key end_key{};

    // Offset from start_loc predicted for `key`; negative before the segment.
    double predicted_offset(Key key) const noexcept { return key_delta(key, start_key) * slope; }

    double interpolate(Key key) const noexcept {
        return static_cast<double>(start_loc) + predicted_offset(key);
    }

    std::uint64_t end_loc() const noexcept { return start_loc + n_locs; }

    friend bool operator==(const Segment&, const Segment&) = default;
};

// Greedy segmentation state: an origin plus the interval of slopes that keep
// every accepted point within the error threshold.
//
// A candidate is accepted iff the line from the origin through it is itself a
// feasible slope, i.e. it would not break any earlier point if it closed the
// segment. A candidate sharing the origin's key is accepted without touching the
// slopes when it sits at most `error` locations after the origin.
template <IndexKey Key>
class Cone {
public:
    Cone(Point<Key> origin, ErrorThreshold error) : origin_(origin), error_(error.as_real()) {}

    const Point<Key>& origin() const noexcept { return origin_; }
    double sl_high() const noexcept { return sl_high_; }
    double sl_low() const noexcept { return sl_low_; }

    // Returns false and leaves the cone unchanged when `p` falls outside.
    bool try_extend(const Point<Key>& p) noexcept {
        const double dy = static_cast<double>(p.loc - origin_.loc);
        if (p.key == origin_.key) {
            return dy <= error_;
        }
        const double dx = key_delta(p.key, origin_.key);
        const double slope = dy / dx;
        if (slope < sl_low_ || slope > sl_high_) {
            return false;
        }
        sl_high_ = std::min(sl_high_, (dy + error_) / dx);
        sl_low_ = std::max(sl_low_, (dy - error_) / dx);
        return true;
    }

    // Slope for a segment that ends at `last`: the endpoint line, kept inside the cone.
    double closing_slope(const Point<Key>& last) const noexcept {
        if (last.key == origin_.key) {
            return 0.0;
        }
        const double endpoint =
            static_cast<double>(last.loc - origin_.loc) / key_delta(last.key, origin_.key);
        return std::clamp(endpoint, sl_low_, sl_high_);
    }

private:
    Point<Key> origin_;
    double error_;
    double sl_high_ = std::numeric_limits<double>::infinity();
    double sl_low_ = 0.0;
};

namespace detail {

// Greedy segmentation of n points whose keys come from key_at(i) and whose
// locations are base_loc + i. Inputs are assumed validated.
template <IndexKey Key, typename KeyAt>
std::vector<Segment<Key>> shrinking_cone_impl(std::size_t n, KeyAt&& key_at, ErrorThreshold error,
                                              std::uint64_t base_loc) {
    std::vector<Segment<Key>> out;
    if (n == 0) {
        return out;
    }
    auto point_at = [&](std::size_t i) { return Point<Key>{key_at(i), base_loc + i}; };
    auto close = [&](std::size_t first, std::size_t last, const Cone<Key>& cone) {
        const Point<Key> end = point_at(last);
        out.push_back(Segment<Key>{cone.origin().key, cone.origin().loc, cone.closing_slope(end),
                                   static_cast<std::uint64_t>(last - first + 1), end.key});
    };

    std::size_t first = 0;
    Cone<Key> cone(point_at(0), error);
    for (std::size_t i = 1; i < n; ++i) {
        const Point<Key> p = point_at(i);
        if (!cone.try_extend(p)) {
            close(first, i - 1, cone);
            first = i;
            cone = Cone<Key>(p, error);
        }
    }
    close(first, n - 1, cone);
    return out;
}

template <IndexKey Key>
void check_points(std::span<const Point<Key>> points) {
    if (points.empty()) {
        throw empty_input_error("segmentation input is empty");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!key_is_valid(points[i].key)) {
            throw malformed_input_error("non-finite key at index " + std::to_string(i));
        }
        if (points[i].loc != points[0].loc + i) {
            throw malformed_input_error("locations must increase by one; mismatch at index " +
                                        std::to_string(i));
        }
        if (i > 0 && points[i].key < points[i - 1].key) {
            throw malformed_input_error("keys decrease at index " + std::to_string(i));
        }
    }
}

// |predicted - true| for a point against a segment, in locations.
template <IndexKey Key>
double deviation(const Segment<Key>& seg, const Point<Key>& p) noexcept {
    const double true_offset = p.loc >= seg.start_loc
                                   ? static_cast<double>(p.loc - seg.start_loc)
                                   : -static_cast<double>(seg.start_loc - p.loc);
    return std::abs(seg.predicted_offset(p.key) - true_offset);
}

}  // namespace detail

// Single-pass greedy segmentation (the shrinking cone). Throws empty_input_error
// or malformed_input_error on invalid input.
template <IndexKey Key>
std::vector<Segment<Key>> shrinking_cone(std::span<const Point<Key>> points, ErrorThreshold error) {
    detail::check_points(points);
    return detail::shrinking_cone_impl<Key>(
        points.size(), [&](std::size_t i) { return points[i].key; }, error, points.front().loc);
}

// Segments a sorted run of records, taking keys through `key_of`. Locations are
// base_loc, base_loc + 1, ... Throws on unsorted or non-finite keys.
template <IndexKey Key, typename T, typename KeyOf>
std::vector<Segment<Key>> shrinking_cone_by(std::span<const T> items, KeyOf&& key_of,
                                            ErrorThreshold error, std::uint64_t base_loc = 0) {
    if (items.empty()) {
        throw empty_input_error("segmentation input is empty");
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Key k = key_of(items[i]);
        if (!key_is_valid(k)) {
            throw malformed_input_error("non-finite key at index " + std::to_string(i));
        }
        if (i > 0 && k < key_of(items[i - 1])) {
            throw malformed_input_error("keys decrease at index " + std::to_string(i));
        }
    }
    return detail::shrinking_cone_impl<Key>(
        items.size(), [&](std::size_t i) { return key_of(items[i]); }, error, base_loc);
}

// True iff every point lies within `error` of the segment's interpolation.
// `points` should be exactly the points the segment covers; a size mismatch is
// reported as invalid.
template <IndexKey Key>
bool validate_segment(std::span<const Point<Key>> points, const Segment<Key>& seg,
                      ErrorThreshold error) {
    if (points.size() != seg.n_locs || !(seg.slope >= 0.0) || !std::isfinite(seg.slope)) {
        return false;
    }
    const double limit = error.as_real() + kLocationSlack;
    return std::all_of(points.begin(), points.end(),
                       [&](const Point<Key>& p) { return detail::deviation(seg, p) <= limit; });
}

// Realized maximum deviation across a segmentation, floored to whole locations.
// Throws malformed_input_error when the segments do not tile the points.
template <IndexKey Key>
std::uint64_t max_error(std::span<const Point<Key>> points, std::span<const Segment<Key>> segs) {
    std::size_t offset = 0;
    double worst = 0.0;
    for (const auto& seg : segs) {
        if (seg.n_locs == 0 || offset + seg.n_locs > points.size() ||
            points[offset].loc != seg.start_loc) {
            throw malformed_input_error("segments do not cover the points contiguously");
        }
        for (std::size_t i = offset; i < offset + seg.n_locs; ++i) {
            worst = std::max(worst, detail::deviation(seg, points[i]));
        }
        offset += seg.n_locs;
    }
    if (offset != points.size()) {
        throw malformed_input_error("segments cover " + std::to_string(offset) + " of " +
                                    std::to_string(points.size()) + " points");
    }
    return static_cast<std::uint64_t>(std::floor(worst + kLocationSlack));
}

// floor(min(n_keys / 2, n_locs / (error + 1))), at least 1.
inline std::uint64_t segment_count_bound(std::uint64_t n_keys, std::uint64_t n_locs,
                                         ErrorThreshold error) {
    if (n_keys == 0 || n_locs < n_keys) {
        throw malformed_input_error("segment_count_bound needs 1 <= n_keys <= n_locs");
    }
    const std::uint64_t by_keys = n_keys / 2;
    const std::uint64_t by_locs = n_locs / (error.value() + 1);
    return std::max<std::uint64_t>(1, std::min(by_keys, by_locs));
}

template <IndexKey Key>
std::uint64_t count_distinct_keys(std::span<const Point<Key>> points) noexcept {
    std::uint64_t n = points.empty() ? 0 : 1;
    for (std::size_t i = 1; i < points.size(); ++i) {
        n += points[i].key != points[i - 1].key ? 1 : 0;
    }
    return n;
}

// Greedy segment count normalized by the worst case for a dataset of the same
// size, ceil(n / (error + 1)).
template <IndexKey Key>
double non_linearity_ratio(std::span<const Point<Key>> points, ErrorThreshold error) {
    const auto segs = shrinking_cone(points, error);
    const std::uint64_t worst = detail::ceil_div(points.size(), error.value() + 1);
    return static_cast<double>(segs.size()) / static_cast<double>(worst);
}

// Points for a sorted key sequence, located at base_loc, base_loc + 1, ...
template <IndexKey Key>
std::vector<Point<Key>> points_from_keys(std::span<const Key> keys, std::uint64_t base_loc = 0) {
    std::vector<Point<Key>> out;
    out.reserve(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out.push_back(Point<Key>{keys[i], base_loc + i});
    }
    return out;
}

}  // namespace atree
