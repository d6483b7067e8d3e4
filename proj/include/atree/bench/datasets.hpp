#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "atree/common.hpp"
#include "atree/index.hpp"
#include "atree/segmentation.hpp"

namespace atree::bench {

template <IndexKey Key>
struct Dataset {
    std::string name;
    std::vector<Entry<Key>> entries;  // sorted by key
    std::map<std::string, std::string> provenance;

    std::size_t size() const noexcept { return entries.size(); }

    std::vector<Point<Key>> points() const {
        std::vector<Point<Key>> out;
        out.reserve(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out.push_back(Point<Key>{entries[i].key, i});
        }
        return out;
    }

    std::vector<Key> keys() const {
        std::vector<Key> out;
        out.reserve(entries.size());
        for (const auto& e : entries) {
            out.push_back(e.key);
        }
        return out;
    }

    bool has_duplicates() const noexcept {
        return std::adjacent_find(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
                   return a.key == b.key;
               }) != entries.end();
    }
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) {
        throw config_error(what);
    }
}

inline Dataset<std::uint64_t> positional(std::string name, const std::vector<std::uint64_t>& keys,
                                         std::map<std::string, std::string> provenance) {
    Dataset<std::uint64_t> d{std::move(name), {}, std::move(provenance)};
    d.entries.reserve(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        d.entries.push_back(Entry<std::uint64_t>{keys[i], i});
    }
    return d;
}

}  // namespace detail

// Evenly spaced keys from a seeded start and stride.
inline Dataset<std::uint64_t> gen_linear(std::size_t n, std::uint64_t seed) {
    detail::require(n >= 1, "gen_linear: n must be at least 1");
    std::mt19937_64 rng(seed);
    const std::uint64_t start = std::uniform_int_distribution<std::uint64_t>(0, 1'000'000)(rng);
    const std::uint64_t stride = std::uniform_int_distribution<std::uint64_t>(1, 1000)(rng);
    std::vector<std::uint64_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
        keys[i] = start + i * stride;
    }
    return detail::positional("linear", keys,
                              {{"generator", "linear"},
                               {"n", std::to_string(n)},
                               {"seed", std::to_string(seed)},
                               {"stride", std::to_string(stride)}});
}

// Plateaus of step_size consecutive integer keys; consecutive plateaus start
// key_gap apart. The seed only shifts the first key.
inline Dataset<std::uint64_t> gen_step(std::size_t n, std::uint64_t step_size, std::uint64_t key_gap,
                                       std::uint64_t seed) {
    detail::require(n >= 1, "gen_step: n must be at least 1");
    detail::require(step_size >= 1, "gen_step: step size must be at least 1");
    detail::require(key_gap > step_size, "gen_step: key gap must exceed the step size");
    std::mt19937_64 rng(seed);
    const std::uint64_t start = std::uniform_int_distribution<std::uint64_t>(0, 1'000'000)(rng);
    std::vector<std::uint64_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
        keys[i] = start + (i / step_size) * key_gap + i % step_size;
    }
    return detail::positional("step", keys,
                              {{"generator", "step"},
                               {"n", std::to_string(n)},
                               {"step", std::to_string(step_size)},
                               {"gap", std::to_string(key_gap)},
                               {"seed", std::to_string(seed)}});
}

// Key gaps follow 1 + amplitude * (1 + sin(2 pi i / period)) plus seeded jitter
// of up to a tenth of the amplitude, so key density oscillates with the period.
inline Dataset<std::uint64_t> gen_periodic(std::size_t n, double period, double amplitude,
                                           std::uint64_t seed) {
    detail::require(n >= 1, "gen_periodic: n must be at least 1");
    detail::require(period > 0.0 && std::isfinite(period), "gen_periodic: period must be positive");
    detail::require(amplitude > 0.0 && std::isfinite(amplitude),
                    "gen_periodic: amplitude must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.0, std::max(1.0, amplitude / 10.0));
    std::vector<std::uint64_t> keys(n);
    std::uint64_t key = std::uniform_int_distribution<std::uint64_t>(0, 1'000'000)(rng);
    for (std::size_t i = 0; i < n; ++i) {
        const double wave = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period);
        const double gap = 1.0 + amplitude * (1.0 + wave) + jitter(rng);
        key += i == 0 ? 0 : static_cast<std::uint64_t>(std::llround(gap));
        keys[i] = key;
    }
    return detail::positional("periodic", keys,
                              {{"generator", "periodic"},
                               {"n", std::to_string(n)},
                               {"period", std::to_string(period)},
                               {"amplitude", std::to_string(amplitude)},
                               {"seed", std::to_string(seed)}});
}

// Keys floor(exp(N(0, sigma)) * 10^6), sorted; duplicates are possible, so this
// suits the non-clustered layout. Payload is the row id, the draw order.
inline Dataset<std::uint64_t> gen_lognormal(std::size_t n, double sigma, std::uint64_t seed) {
    detail::require(n >= 1, "gen_lognormal: n must be at least 1");
    detail::require(sigma > 0.0 && std::isfinite(sigma), "gen_lognormal: sigma must be positive");
    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> dist(0.0, sigma);
    constexpr double kMax = 1.8e19;
    Dataset<std::uint64_t> d{"lognormal",
                             {},
                             {{"generator", "lognormal"},
                              {"n", std::to_string(n)},
                              {"sigma", std::to_string(sigma)},
                              {"seed", std::to_string(seed)}}};
    d.entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::min(std::floor(dist(rng) * 1e6), kMax);
        d.entries.push_back(Entry<std::uint64_t>{static_cast<std::uint64_t>(v), i});
    }
    std::stable_sort(d.entries.begin(), d.entries.end(),
                     [](const auto& a, const auto& b) { return a.key < b.key; });
    return d;
}

// The construction on which greedy segmentation needs N + 2 segments: three keys
// E/2 apart; then N + 1 blocks, each a key repeated E + 1 times followed by a
// single key 1/E later (the first block's repeated key sits 1/E after the third
// key, later ones E after the previous single key); then a closing key E/2 on.
// Payload is the location.
inline Dataset<double> adversarial_input(std::uint64_t error, std::uint64_t n_blocks) {
    detail::require(error >= 2, "adversarial_input: E must be at least 2");
    detail::require(n_blocks >= 1, "adversarial_input: N must be at least 1");
    const double e = static_cast<double>(error);
    Dataset<double> d{"adversarial",
                      {},
                      {{"generator", "adversarial"}, {"E", std::to_string(error)},
                       {"N", std::to_string(n_blocks)}}};
    auto emit = [&](double key) {
        d.entries.push_back(Entry<double>{key, static_cast<std::uint64_t>(d.entries.size())});
    };
    double x = 0.0;
    emit(x);
    x += e / 2.0;
    emit(x);
    x += e / 2.0;
    emit(x);
    for (std::uint64_t block = 0; block <= n_blocks; ++block) {
        x += block == 0 ? 1.0 / e : e;
        for (std::uint64_t r = 0; r <= error; ++r) {
            emit(x);
        }
        x += 1.0 / e;
        emit(x);
    }
    x += e / 2.0;
    emit(x);
    return d;
}

// Deviation at the first repeated key when the opening segment is stretched to the
// first single key, measured on the generated data. Greedy segmentation rejects that
// single key exactly when this exceeds E.
inline double adversarial_prelude_violation(std::uint64_t error) {
    const auto d = adversarial_input(error, 1);
    const auto& first = d.entries[0];
    const auto& repeated = d.entries[3];
    const auto& single = d.entries[3 + error + 1];
    const double slope = static_cast<double>(single.payload - first.payload) / (single.key - first.key);
    return static_cast<double>(first.payload) + slope * (repeated.key - first.key) -
           static_cast<double>(repeated.payload);
}

// Same check for a middle block: a segment opened at a single key and stretched
// to the next single key misses the first copy of the repeated key in between.
inline double adversarial_block_violation(std::uint64_t error) {
    const auto d = adversarial_input(error, 1);
    const std::size_t origin = 3 + error + 1;
    const auto& single = d.entries[origin];
    const auto& repeated = d.entries[origin + 1];
    const auto& next = d.entries[origin + error + 2];
    const double slope = static_cast<double>(next.payload - single.payload) / (next.key - single.key);
    return slope * (repeated.key - single.key) -
           static_cast<double>(repeated.payload - single.payload);
}

}  // namespace atree::bench
