#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atree/accounting.hpp"
#include "atree/common.hpp"
#include "atree/segmentation.hpp"

namespace atree {

struct CostParams {
    double c_ns = 50.0;        // latency of one cache miss
    double fanout = 16.0;      // inner-tree fanout b
    double fill = 0.5;         // inner-tree fill ratio f
    // Buffer capacity. Unset means the index default of half the error.
    std::optional<std::uint64_t> buffer_size;
    // Fraction of a cache miss paid per entry moved when inserting into a sorted array.
    double array_shift_factor = 0.25;

    std::uint64_t buffer_for(ErrorThreshold e) const noexcept {
        return buffer_size.value_or(e.value() / 2);
    }

    void validate() const {
        if (!(c_ns > 0.0) || !std::isfinite(c_ns)) {
            throw config_error("cache-miss latency c must be positive");
        }
        if (!(fanout >= 2.0) || !std::isfinite(fanout)) {
            throw config_error("fanout b must be at least 2");
        }
        if (!(fill > 0.0 && fill <= 1.0)) {
            throw config_error("fill ratio f must lie in (0, 1]");
        }
        if (!(array_shift_factor >= 0.0) || !std::isfinite(array_shift_factor)) {
            throw config_error("array shift factor must be non-negative");
        }
    }
};

// Measured relation between error threshold and segment count.
struct SegmentCountProfile {
    std::map<std::uint64_t, std::uint64_t> samples;  // e -> S_e
    std::uint64_t n_entries = 0;                     // 0 when unknown (e.g. imported)

    std::uint64_t segments_at(ErrorThreshold e) const {
        const auto it = samples.find(e.value());
        if (it == samples.end()) {
            throw missing_sample_error("no segment count profiled for error " +
                                       std::to_string(e.value()));
        }
        return it->second;
    }

    std::vector<ErrorThreshold> errors() const {
        std::vector<ErrorThreshold> out;
        out.reserve(samples.size());
        for (const auto& [e, s] : samples) {
            out.emplace_back(e);
        }
        return out;
    }

    // True when S_e never grows with e.
    bool is_non_increasing() const noexcept {
        std::optional<std::uint64_t> prev;
        for (const auto& [e, s] : samples) {
            if (prev && s > *prev) {
                return false;
            }
            prev = s;
        }
        return true;
    }
};

template <IndexKey Key>
SegmentCountProfile profile_segments(std::span<const Point<Key>> points,
                                     std::span<const ErrorThreshold> candidates) {
    if (candidates.empty()) {
        throw config_error("candidate error set is empty");
    }
    detail::check_points(points);
    SegmentCountProfile profile;
    profile.n_entries = points.size();
    for (const ErrorThreshold e : candidates) {
        profile.samples[e.value()] = shrinking_cone(points, e).size();
    }
    return profile;
}

inline double latency_estimate(ErrorThreshold e, const SegmentCountProfile& profile,
                               const CostParams& params) {
    const double s = static_cast<double>(profile.segments_at(e));
    const double tree = detail::floored_log(s, params.fanout);
    const double segment = detail::floored_log(e.as_real(), 2.0);
    const double buffer = detail::floored_log(static_cast<double>(params.buffer_for(e)), 2.0);
    return params.c_ns * (tree + segment + buffer);
}

inline double size_estimate(ErrorThreshold e, const SegmentCountProfile& profile,
                            const CostParams& params) {
    const double s = static_cast<double>(profile.segments_at(e));
    const double tree = params.fill * s * detail::floored_log(s, params.fanout) *
                        static_cast<double>(kTreeSlotBytes);
    return tree + s * static_cast<double>(kSegmentDescriptorBytes);
}

// Tree descent plus a sorted-buffer insertion that shifts half the buffer on average.
inline double insert_latency_estimate(ErrorThreshold e, const SegmentCountProfile& profile,
                                      const CostParams& params) {
    const double s = static_cast<double>(profile.segments_at(e));
    const double buff = static_cast<double>(params.buffer_for(e));
    return params.c_ns * (detail::floored_log(s, params.fanout) + buff / 2.0 * params.array_shift_factor);
}

// Cost of one merge-and-resegment pass, spread over the inserts that fill a
// buffer. A split touches the segment's data plus its full buffer,
// d = n_entries / S_e + buff entries.
inline double amortized_split_estimate(ErrorThreshold e, const SegmentCountProfile& profile,
                                       const CostParams& params) {
    const double s = static_cast<double>(profile.segments_at(e));
    const double buff = std::max(1.0, static_cast<double>(params.buffer_for(e)));
    const double d = static_cast<double>(profile.n_entries) / s + buff;
    const double merge_cost = params.c_ns * d * params.array_shift_factor;
    return merge_cost / buff;
}

namespace detail {

inline void check_candidates(std::span<const ErrorThreshold> candidates) {
    if (candidates.empty()) {
        throw config_error("candidate error set is empty");
    }
}

}  // namespace detail

// Smallest estimated size among candidates meeting the latency limit; ties go
// to the larger error.
inline ErrorThreshold pick_error_for_latency(double latency_limit_ns,
                                             std::span<const ErrorThreshold> candidates,
                                             const SegmentCountProfile& profile,
                                             const CostParams& params) {
    detail::check_candidates(candidates);
    std::optional<ErrorThreshold> best;
    double best_size = 0.0;
    double fastest = std::numeric_limits<double>::infinity();
    for (const ErrorThreshold e : candidates) {
        const double lat = latency_estimate(e, profile, params);
        fastest = std::min(fastest, lat);
        if (!(lat <= latency_limit_ns)) {
            continue;
        }
        const double size = size_estimate(e, profile, params);
        if (!best || size < best_size || (size == best_size && e > *best)) {
            best = e;
            best_size = size;
        }
    }
    if (!best) {
        throw infeasible_error("no candidate error meets the latency limit of " +
                                   std::to_string(latency_limit_ns) + " ns",
                               fastest);
    }
    return *best;
}

// Smallest estimated latency among candidates within the size budget; ties go
// to the smaller error.
inline ErrorThreshold pick_error_for_budget(double budget_bytes,
                                            std::span<const ErrorThreshold> candidates,
                                            const SegmentCountProfile& profile,
                                            const CostParams& params) {
    detail::check_candidates(candidates);
    std::optional<ErrorThreshold> best;
    double best_latency = 0.0;
    double smallest = std::numeric_limits<double>::infinity();
    for (const ErrorThreshold e : candidates) {
        const double size = size_estimate(e, profile, params);
        smallest = std::min(smallest, size);
        if (!(size <= budget_bytes)) {
            continue;
        }
        const double lat = latency_estimate(e, profile, params);
        if (!best || lat < best_latency || (lat == best_latency && e < *best)) {
            best = e;
            best_latency = lat;
        }
    }
    if (!best) {
        throw infeasible_error("no candidate error fits the budget of " +
                                   std::to_string(budget_bytes) + " bytes",
                               smallest);
    }
    return *best;
}

// Two-column CSV: header "error,segment_count", one row per sample.
inline void write_profile_csv(const SegmentCountProfile& profile, std::ostream& out) {
    out << "error,segment_count\n";
    for (const auto& [e, s] : profile.samples) {
        out << e << ',' << s << '\n';
    }
}

inline SegmentCountProfile read_profile_csv(std::istream& in) {
    SegmentCountProfile profile;
    std::string line;
    std::size_t line_no = 0;
    auto parse = [&](std::string_view field, const char* what) {
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc{} || ptr != field.data() + field.size()) {
            throw malformed_input_error("profile line " + std::to_string(line_no) + ": bad " + what +
                                        " '" + std::string(field) + "'");
        }
        return v;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || (line_no == 1 && line == "error,segment_count")) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw malformed_input_error("profile line " + std::to_string(line_no) +
                                        ": expected two columns");
        }
        const std::string_view view(line);
        const std::uint64_t e = parse(view.substr(0, comma), "error");
        const std::uint64_t s = parse(view.substr(comma + 1), "segment count");
        if (s == 0) {
            throw malformed_input_error("profile line " + std::to_string(line_no) +
                                        ": segment count must be at least 1");
        }
        if (!profile.samples.emplace(e, s).second) {
            throw malformed_input_error("profile line " + std::to_string(line_no) +
                                        ": duplicate error " + std::to_string(e));
        }
    }
    if (profile.samples.empty()) {
        throw empty_input_error("profile has no samples");
    }
    return profile;
}

}  // namespace atree
