#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "atree/bench/baselines.hpp"
#include "atree/bench/datasets.hpp"
#include "atree/bench/harness.hpp"
#include "atree/index.hpp"
#include "atree/optimal_segmentation.hpp"
#include "atree/segmentation.hpp"
#include "json.hpp"

namespace atree::bench {

enum class StructureKind { atree, fixed_paging, full_index, binary_search };

inline const char* to_string(StructureKind k) noexcept {
    switch (k) {
        case StructureKind::atree: return "atree";
        case StructureKind::fixed_paging: return "fixed";
        case StructureKind::full_index: return "full";
        case StructureKind::binary_search: return "binary";
    }
    return "?";
}

struct StructureConfig {
    StructureKind kind = StructureKind::atree;
    std::uint64_t error = 0;                   // A-Tree error threshold
    std::optional<std::uint64_t> buffer_size;  // A-Tree buffer; unset means error / 2
    std::uint64_t page_size = 0;               // fixed paging
    std::uint64_t fanout = 16;
    Layout layout = Layout::clustered;

    static StructureConfig atree(std::uint64_t error, std::optional<std::uint64_t> buffer = std::nullopt,
                                 Layout layout = Layout::clustered) {
        return StructureConfig{StructureKind::atree, error, buffer, 0, 16, layout};
    }
    static StructureConfig fixed(std::uint64_t page_size, Layout layout = Layout::clustered) {
        return StructureConfig{StructureKind::fixed_paging, 0, std::nullopt, page_size, 16, layout};
    }
    static StructureConfig full(Layout layout = Layout::clustered) {
        return StructureConfig{StructureKind::full_index, 0, std::nullopt, 0, 16, layout};
    }
    static StructureConfig binary(Layout layout = Layout::clustered) {
        return StructureConfig{StructureKind::binary_search, 0, std::nullopt, 0, 16, layout};
    }

    IndexConfig index_config() const {
        return IndexConfig{error, buffer_size.value_or(error / 2), fanout, layout};
    }

    // Error threshold (A-Tree) or page size (fixed paging); 0 otherwise.
    std::uint64_t parameter() const noexcept {
        switch (kind) {
            case StructureKind::atree: return error;
            case StructureKind::fixed_paging: return page_size;
            default: return 0;
        }
    }

    std::uint64_t effective_buffer() const noexcept {
        switch (kind) {
            case StructureKind::atree: return buffer_size.value_or(error / 2);
            case StructureKind::fixed_paging: return std::max<std::uint64_t>(1, page_size / 2);
            default: return 0;
        }
    }
};

struct BenchRow {
    std::string dataset;
    std::string workload;  // "lookup" or "insert"
    std::string structure;
    std::uint64_t parameter = 0;  // error or page size
    std::uint64_t buffer_size = 0;
    std::uint64_t index_bytes = 0;
    std::uint64_t units = 0;  // segments, pages, or indexed keys
    std::uint64_t operations = 0;
    double mean_ns = 0.0;
    double median_ns = 0.0;
    double p99_ns = 0.0;
    double throughput_ops_s = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    std::map<std::string, std::string> metadata;

    void append(const BenchReport& other) {
        rows.insert(rows.end(), other.rows.begin(), other.rows.end());
        for (const auto& [k, v] : other.metadata) {
            metadata.emplace(k, v);
        }
    }

    void write_csv(std::ostream& out) const {
        out << "dataset,workload,structure,parameter,buffer_size,index_bytes,units,operations,"
               "mean_ns,median_ns,p99_ns,throughput_ops_s\n";
        for (const auto& r : rows) {
            out << r.dataset << ',' << r.workload << ',' << r.structure << ',' << r.parameter << ','
                << r.buffer_size << ',' << r.index_bytes << ',' << r.units << ',' << r.operations << ','
                << r.mean_ns << ',' << r.median_ns << ',' << r.p99_ns << ',' << r.throughput_ops_s << '\n';
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json rows_json = nlohmann::json::array();
        for (const auto& r : rows) {
            rows_json.push_back({{"dataset", r.dataset},
                                 {"workload", r.workload},
                                 {"structure", r.structure},
                                 {"parameter", r.parameter},
                                 {"buffer_size", r.buffer_size},
                                 {"index_bytes", r.index_bytes},
                                 {"units", r.units},
                                 {"operations", r.operations},
                                 {"mean_ns", r.mean_ns},
                                 {"median_ns", r.median_ns},
                                 {"p99_ns", r.p99_ns},
                                 {"throughput_ops_s", r.throughput_ops_s}});
        }
        return {{"metadata", metadata}, {"rows", rows_json}};
    }
};

struct BenchOptions {
    std::size_t queries = 100'000;
    std::uint64_t seed = 1;
    TimingOptions timing;
};

struct SegmenterComparison {
    std::uint64_t error = 0;
    std::uint64_t greedy = 0;
    std::uint64_t optimal = 0;
    double ratio = 0.0;  // greedy / optimal
};

namespace detail {

template <IndexKey Key>
std::uint64_t structure_bytes(const ATree<Key>& t) {
    return t.stats().measured_bytes;
}
template <typename S>
std::uint64_t structure_bytes(const S& s) {
    return s.index_bytes();
}

template <IndexKey Key>
std::uint64_t structure_units(const ATree<Key>& t) {
    return t.segment_count();
}
template <typename S>
std::uint64_t structure_units(const S& s) {
    return s.unit_count();
}

// Builds the configured structure over `entries` and hands it to fn.
template <IndexKey Key, typename Fn>
void with_structure(const StructureConfig& cfg, std::span<const Entry<Key>> entries, Fn&& fn) {
    switch (cfg.kind) {
        case StructureKind::atree: {
            auto t = ATree<Key>::bulk_load(entries, cfg.index_config());
            fn(t);
            return;
        }
        case StructureKind::fixed_paging: {
            FixedPaging<Key> s(entries, cfg.page_size, cfg.layout, cfg.fanout);
            fn(s);
            return;
        }
        case StructureKind::full_index: {
            FullIndex<Key> s(entries, cfg.layout, cfg.fanout);
            fn(s);
            return;
        }
        case StructureKind::binary_search: {
            BinarySearch<Key> s(entries, cfg.layout);
            fn(s);
            return;
        }
    }
}

template <IndexKey Key>
void check_dataset(const Dataset<Key>& d) {
    if (d.entries.empty()) {
        throw config_error("benchmark dataset '" + d.name + "' is empty or missing");
    }
}

template <IndexKey Key>
BenchRow row_for(const Dataset<Key>& d, const char* workload, const StructureConfig& cfg) {
    BenchRow r;
    r.dataset = d.name;
    r.workload = workload;
    r.structure = to_string(cfg.kind);
    r.parameter = cfg.parameter();
    r.buffer_size = cfg.effective_buffer();
    return r;
}

template <IndexKey Key>
void add_metadata(BenchReport& report, const Dataset<Key>& d, const BenchOptions& options) {
    for (const auto& [k, v] : d.provenance) {
        report.metadata["dataset." + k] = v;
    }
    report.metadata["query_seed"] = std::to_string(options.seed);
    report.metadata["warmup_rounds"] = std::to_string(options.timing.warmup_rounds);
    report.metadata["measured_rounds"] = std::to_string(options.timing.measured_rounds);
    report.metadata["timing_batch"] = std::to_string(options.timing.batch);
}

template <IndexKey Key>
bool entries_equal_as_multiset(std::vector<Entry<Key>> a, std::vector<Entry<Key>> b) {
    const auto order = [](const Entry<Key>& x, const Entry<Key>& y) {
        return x.key < y.key || (x.key == y.key && x.payload < y.payload);
    };
    std::sort(a.begin(), a.end(), order);
    std::sort(b.begin(), b.end(), order);
    return a == b;
}

}  // namespace detail

// Query keys drawn uniformly from the dataset's entries with a fixed seed.
template <IndexKey Key>
std::vector<Key> sample_queries(const Dataset<Key>& d, std::size_t count, std::uint64_t seed) {
    detail::check_dataset(d);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, d.entries.size() - 1);
    std::vector<Key> out(count);
    for (auto& k : out) {
        k = d.entries[pick(rng)].key;
    }
    return out;
}

// Point-lookup latency for each configuration. Every structure must answer every
// query like a binary search over the dataset before it is timed.
template <IndexKey Key>
BenchReport run_lookup_bench(const Dataset<Key>& d, std::span<const StructureConfig> configs,
                             const BenchOptions& options = {}) {
    detail::check_dataset(d);
    options.timing.validate();
    const auto queries = sample_queries(d, options.queries, options.seed);
    std::vector<std::uint64_t> expected(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        expected[i] = detail::lower_entry(d.entries, queries[i])->payload;
    }
    BenchReport report;
    detail::add_metadata(report, d, options);
    for (const auto& cfg : configs) {
        detail::with_structure<Key>(cfg, d.entries, [&](auto& s) {
            for (std::size_t i = 0; i < queries.size(); ++i) {
                const auto got = s.lookup(queries[i]);
                if (!got || *got != expected[i]) {
                    throw error(std::string("validation failed: ") + to_string(cfg.kind) +
                                " answered a lookup differently from the oracle");
                }
            }
            std::uint64_t checksum = 0;
            const auto t = time_rounds(queries.size(), options.timing, [&](std::size_t i) {
                checksum += s.lookup(queries[i]).value_or(0);
            });
            detail::consume(checksum);
            BenchRow r = detail::row_for(d, "lookup", cfg);
            r.index_bytes = detail::structure_bytes(s);
            r.units = detail::structure_units(s);
            r.operations = queries.size();
            r.mean_ns = t.mean_ns;
            r.median_ns = t.median_ns;
            r.p99_ns = t.p99_ns;
            r.throughput_ops_s = t.mean_ns > 0 ? 1e9 / t.mean_ns : 0.0;
            report.rows.push_back(r);
        });
    }
    return report;
}

// Holds out `insert_fraction` of the dataset (seeded), bulk loads the rest, and
// times inserting the held-out entries in random order. Each round starts from a
// fresh bulk load; the final contents are checked against the dataset first.
template <IndexKey Key>
BenchReport run_insert_bench(const Dataset<Key>& d, std::span<const StructureConfig> configs,
                             double insert_fraction, const BenchOptions& options = {}) {
    detail::check_dataset(d);
    options.timing.validate();
    if (!(insert_fraction > 0.0 && insert_fraction < 1.0)) {
        throw config_error("insert fraction must lie strictly between 0 and 1");
    }
    std::vector<std::size_t> order(d.entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(options.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto held = static_cast<std::size_t>(insert_fraction * static_cast<double>(d.entries.size()));
    if (held == 0 || held == d.entries.size()) {
        throw config_error("insert fraction leaves no inserts or no base data");
    }
    std::vector<Entry<Key>> inserts;
    inserts.reserve(held);
    for (std::size_t i = 0; i < held; ++i) {
        inserts.push_back(d.entries[order[i]]);
    }
    std::vector<std::size_t> base_idx(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
    std::sort(base_idx.begin(), base_idx.end());
    std::vector<Entry<Key>> base;
    base.reserve(base_idx.size());
    for (const std::size_t i : base_idx) {
        base.push_back(d.entries[i]);
    }

    const Key lowest = std::numeric_limits<Key>::lowest();
    const Key highest = std::numeric_limits<Key>::max();
    BenchReport report;
    detail::add_metadata(report, d, options);
    report.metadata["insert_fraction"] = std::to_string(insert_fraction);
    for (const auto& cfg : configs) {
        detail::with_structure<Key>(cfg, base, [&](auto& gate) {
            for (const auto& e : inserts) {
                gate.insert(e);
            }
            if (!detail::entries_equal_as_multiset(gate.range(lowest, highest), d.entries)) {
                throw error(std::string("validation failed: ") + to_string(cfg.kind) +
                            " lost or altered entries during inserts");
            }
        });
        std::uint64_t bytes = 0;
        std::uint64_t units = 0;
        LatencySummary t;
        detail::with_structure<Key>(cfg, base, [&](auto& first) {
            using S = std::decay_t<decltype(first)>;
            std::optional<S> live;
            t = time_rounds(
                inserts.size(), options.timing,
                [&](std::size_t round) {
                    if (round == 0) {
                        live.emplace(std::move(first));
                    } else {
                        detail::with_structure<Key>(cfg, base, [&](auto& fresh) {
                            if constexpr (std::is_same_v<std::decay_t<decltype(fresh)>, S>) {
                                live.emplace(std::move(fresh));
                            }
                        });
                    }
                },
                [&](std::size_t i) { live->insert(inserts[i]); });
            bytes = detail::structure_bytes(*live);
            units = detail::structure_units(*live);
        });
        BenchRow r = detail::row_for(d, "insert", cfg);
        r.index_bytes = bytes;
        r.units = units;
        r.operations = inserts.size();
        r.mean_ns = t.mean_ns;
        r.median_ns = t.median_ns;
        r.p99_ns = t.p99_ns;
        r.throughput_ops_s = t.seconds > 0 ? static_cast<double>(inserts.size()) / t.seconds : 0.0;
        report.rows.push_back(r);
    }
    return report;
}

// Greedy and optimal segment counts per error threshold. The optimal oracle
// refuses datasets above `optimal_cap` points.
template <IndexKey Key>
std::vector<SegmenterComparison> compare_segmenters(const Dataset<Key>& d,
                                                    std::span<const ErrorThreshold> errors,
                                                    std::size_t optimal_cap = kDefaultOptimalCap) {
    detail::check_dataset(d);
    const auto pts = d.points();
    std::vector<SegmenterComparison> out;
    for (const ErrorThreshold e : errors) {
        SegmenterComparison c;
        c.error = e.value();
        c.greedy = shrinking_cone<Key>(pts, e).size();
        c.optimal = optimal_segmentation<Key>(pts, e, optimal_cap).size();
        c.ratio = static_cast<double>(c.greedy) / static_cast<double>(c.optimal);
        out.push_back(c);
    }
    return out;
}

inline void write_comparison_csv(std::span<const SegmenterComparison> rows, std::ostream& out) {
    out << "error,greedy,optimal,ratio\n";
    for (const auto& r : rows) {
        out << r.error << ',' << r.greedy << ',' << r.optimal << ',' << r.ratio << '\n';
    }
}

inline nlohmann::json comparison_json(std::span<const SegmenterComparison> rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"error", r.error}, {"greedy", r.greedy}, {"optimal", r.optimal}, {"ratio", r.ratio}});
    }
    return out;
}

// Insert throughput of the A-Tree at one error threshold across buffer sizes.
template <IndexKey Key>
BenchReport fill_factor_sweep(const Dataset<Key>& d, std::uint64_t error,
                              std::span<const std::uint64_t> buffer_sizes, double insert_fraction,
                              const BenchOptions& options = {}, Layout layout = Layout::clustered) {
    std::vector<StructureConfig> configs;
    for (const std::uint64_t b : buffer_sizes) {
        auto cfg = StructureConfig::atree(error, b, layout);
        cfg.index_config().validate();
        configs.push_back(cfg);
    }
    return run_insert_bench(d, std::span<const StructureConfig>(configs), insert_fraction, options);
}

}  // namespace atree::bench
