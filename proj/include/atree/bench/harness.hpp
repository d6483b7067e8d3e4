#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "atree/common.hpp"

namespace atree::bench {

struct TimingOptions {
    std::size_t warmup_rounds = 3;
    std::size_t measured_rounds = 5;
    // Operations timed together; per-operation latency is batch time / batch.
    std::size_t batch = 16;

    void validate() const {
        if (warmup_rounds < 3 || measured_rounds < 5) {
            throw config_error("timing needs at least 3 warmup and 5 measured rounds");
        }
        if (batch == 0) {
            throw config_error("timing batch must be at least 1");
        }
    }
};

struct LatencySummary {
    double mean_ns = 0.0;
    double median_ns = 0.0;
    double p99_ns = 0.0;
    std::size_t operations = 0;  // per measured round
    double seconds = 0.0;        // mean wall time of one measured round
};

namespace detail {

inline std::uint64_t& sink() {
    static std::uint64_t value = 0;
    return value;
}

// Keeps `v` observable so timed work is not optimized away.
template <typename T>
void consume(const T& v) {
    asm volatile("" : : "g"(&v) : "memory");
}

inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const double rank = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (rank - static_cast<double>(lo));
}

}  // namespace detail

// Times `count` operations per round. `prepare(round)` runs untimed before every
// round (warmup included); `op(i)` performs operation i. Mean latency is total
// measured time over total operations; median and p99 are over per-batch
// averages.
template <typename Prepare, typename Op>
LatencySummary time_rounds(std::size_t count, const TimingOptions& options, Prepare&& prepare, Op&& op) {
    options.validate();
    using clock = std::chrono::steady_clock;
    LatencySummary out;
    out.operations = count;
    if (count == 0) {
        return out;
    }
    std::vector<double> batch_ns;
    double total_ns = 0.0;
    const std::size_t rounds = options.warmup_rounds + options.measured_rounds;
    for (std::size_t round = 0; round < rounds; ++round) {
        prepare(round);
        const bool measured = round >= options.warmup_rounds;
        for (std::size_t i = 0; i < count; i += options.batch) {
            const std::size_t end = std::min(count, i + options.batch);
            const auto t0 = clock::now();
            for (std::size_t j = i; j < end; ++j) {
                op(j);
            }
            const auto t1 = clock::now();
            if (measured) {
                const double ns = std::chrono::duration<double, std::nano>(t1 - t0).count();
                total_ns += ns;
                batch_ns.push_back(ns / static_cast<double>(end - i));
            }
        }
    }
    const double ops = static_cast<double>(count * options.measured_rounds);
    out.mean_ns = total_ns / ops;
    out.median_ns = detail::percentile(batch_ns, 0.5);
    out.p99_ns = detail::percentile(batch_ns, 0.99);
    out.seconds = total_ns / 1e9 / static_cast<double>(options.measured_rounds);
    return out;
}

template <typename Op>
LatencySummary time_rounds(std::size_t count, const TimingOptions& options, Op&& op) {
    return time_rounds(count, options, [](std::size_t) {}, std::forward<Op>(op));
}

// Cost of one dependent random memory access, by chasing a single random cycle
// through a `bytes`-sized array (Sattolo's permutation). Use an array well above
// the last-level cache.
inline double measure_random_access_ns(std::size_t bytes = std::size_t{256} << 20,
                                       std::size_t steps = 4'000'000, std::uint64_t seed = 1) {
    const std::size_t n = std::max<std::size_t>(2, bytes / sizeof(std::uint64_t));
    std::vector<std::uint64_t> next(n);
    std::iota(next.begin(), next.end(), std::uint64_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        std::swap(next[i], next[j]);
    }
    std::uint64_t at = 0;
    for (std::size_t i = 0; i < std::min(steps, n); ++i) {
        at = next[at];
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < steps; ++i) {
        at = next[at];
    }
    const auto t1 = std::chrono::steady_clock::now();
    detail::sink() += at;
    return std::chrono::duration<double, std::nano>(t1 - t0).count() / static_cast<double>(steps);
}

}  // namespace atree::bench
