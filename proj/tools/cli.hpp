#pragma once

#include "atree/atree.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace atree::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,  // bad arguments, configuration or I/O
    kNotFound = 2,
    kInfeasible = 3,
    kMalformed = 4,  // malformed or empty input
    kCapacity = 5,
    kConstraint = 6,
};

using Json = nlohmann::ordered_json;
using AnyDataset = std::variant<bench::Dataset<std::uint64_t>, bench::Dataset<double>>;

struct DataOptions {
    std::string path;
    std::string gen;
    std::string format = "binary-le-u64";
    std::string key_type;  // "u64" or "f64"; empty picks from the format
    bool sort = false;
    std::uint64_t seed = 1;
};

namespace detail {

// "name:k=v,k=v" generator descriptions.
struct GenSpec {
    std::string name;
    std::map<std::string, std::string> params;
};

inline GenSpec parse_gen_spec(std::string_view text) {
    GenSpec spec;
    const auto colon = text.find(':');
    spec.name = std::string(text.substr(0, colon));
    if (spec.name.empty()) {
        throw config_error("generator name is empty in '" + std::string(text) + "'");
    }
    if (colon == std::string_view::npos) {
        return spec;
    }
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw config_error("generator parameter '" + std::string(item) + "' is not key=value");
        }
        spec.params[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    return spec;
}

class GenParams {
public:
    explicit GenParams(GenSpec spec) : spec_(std::move(spec)) {}

    std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
        used_.insert(key);
        const auto it = spec_.params.find(key);
        if (it == spec_.params.end()) {
            return fallback;
        }
        // Accept scientific notation such as n=1e6 as long as it is integral.
        const double v = real_value(key, it->second);
        if (v < 0 || v != std::floor(v) || v > 1e18) {
            throw config_error(spec_.name + ": " + key + " must be a non-negative integer");
        }
        return static_cast<std::uint64_t>(v);
    }

    double real(const std::string& key, double fallback) {
        used_.insert(key);
        const auto it = spec_.params.find(key);
        return it == spec_.params.end() ? fallback : real_value(key, it->second);
    }

    void reject_unknown() const {
        for (const auto& [k, v] : spec_.params) {
            if (!used_.contains(k)) {
                throw config_error(spec_.name + ": unknown parameter '" + k + "'");
            }
        }
    }

private:
    double real_value(const std::string& key, const std::string& text) const {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
            throw config_error(spec_.name + ": " + key + "='" + text + "' is not a number");
        }
        return v;
    }

    GenSpec spec_;
    std::set<std::string> used_;
};

inline AnyDataset generate(const std::string& text, std::uint64_t seed) {
    GenSpec spec = parse_gen_spec(text);
    const std::string name = spec.name;
    GenParams p(std::move(spec));
    if (name == "linear") {
        const auto n = p.integer("n", 100'000);
        p.reject_unknown();
        return bench::gen_linear(n, seed);
    }
    if (name == "step") {
        const auto n = p.integer("n", 100'000);
        const auto step = p.integer("step", 100);
        const auto gap = p.integer("gap", 1'000'000);
        p.reject_unknown();
        return bench::gen_step(n, step, gap, seed);
    }
    if (name == "periodic") {
        const auto n = p.integer("n", 100'000);
        const double period = p.real("period", 1000);
        const double amplitude = p.real("amplitude", 50);
        p.reject_unknown();
        return bench::gen_periodic(n, period, amplitude, seed);
    }
    if (name == "lognormal") {
        const auto n = p.integer("n", 100'000);
        const double sigma = p.real("sigma", 1.0);
        p.reject_unknown();
        return bench::gen_lognormal(n, sigma, seed);
    }
    if (name == "adversarial") {
        const auto e = p.integer("E", 100);
        const auto blocks = p.integer("N", 10);
        p.reject_unknown();
        return bench::adversarial_input(e, blocks);
    }
    throw config_error("unknown generator '" + name + "' (linear, step, periodic, lognormal, adversarial)");
}

inline AnyDataset load_data(const DataOptions& o, std::ostream& err) {
    if (o.path.empty() == o.gen.empty()) {
        throw config_error("give exactly one of --data or --gen");
    }
    if (!o.gen.empty()) {
        return generate(o.gen, o.seed);
    }
    const auto format = bench::parse_dataset_format(o.format);
    bench::LoadOptions options;
    options.sort_unsorted = o.sort;
    options.warnings = &err;
    const bool f64 = o.key_type.empty() ? format == bench::DatasetFormat::binary_le_f64 : o.key_type == "f64";
    if (f64) {
        return bench::load_dataset<double>(o.path, format, options);
    }
    return bench::load_dataset<std::uint64_t>(o.path, format, options);
}

inline Layout parse_layout(const std::string& s) {
    if (s == "clustered") {
        return Layout::clustered;
    }
    if (s == "non-clustered") {
        return Layout::non_clustered;
    }
    throw config_error("unknown layout '" + s + "' (clustered, non-clustered)");
}

// Non-negative number, or "inf".
inline double parse_limit(const std::string& s, const char* what) {
    if (s == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !(v >= 0.0) || std::isnan(v)) {
        throw config_error(std::string(what) + " must be a non-negative number or 'inf', got '" + s + "'");
    }
    return v;
}

inline Json limit_json(double v) {
    return std::isinf(v) ? Json("inf") : Json(v);
}

template <IndexKey Key>
Key parse_key(const std::string& s) {
    Key k{};
    if (!bench::detail::parse_field<Key>(s, k) || !key_is_valid(k)) {
        throw config_error("'" + s + "' is not a valid key");
    }
    return k;
}

template <typename Fn>
decltype(auto) with_index_key_type(const std::string& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw config_error("cannot open index file '" + path + "'");
    }
    switch (peek_index_key_type(in)) {
        case 0: return fn(std::uint64_t{});
        case 1: return fn(double{});
        default: throw malformed_input_error(path + ": index key type is not supported by this tool");
    }
}

// Writes to `path`, or to `fallback` when the path is empty.
inline void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& write) {
    if (path.empty()) {
        write(fallback);
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw config_error("cannot open output file '" + path + "'");
    }
    write(file);
    if (!file) {
        throw config_error("failed writing '" + path + "'");
    }
}

template <IndexKey Key>
Json segment_json(const Segment<Key>& s) {
    return Json{{"start_key", s.start_key},
                {"start_loc", s.start_loc},
                {"slope", s.slope},
                {"n_locs", s.n_locs},
                {"end_key", s.end_key}};
}

inline Json stats_json(const IndexStats& s) {
    return Json{{"n_entries", s.n_entries},     {"n_segments", s.n_segments},
                {"buffered_entries", s.buffered_entries}, {"measured_bytes", s.measured_bytes},
                {"segment_bytes", s.segment_bytes}, {"tree_bytes", s.tree_bytes},
                {"leaf_fill", s.leaf_fill}};
}

inline Json config_json(const IndexConfig& c) {
    return Json{{"error", c.error}, {"buffer_size", c.buffer_size}, {"fanout", c.fanout},
                {"layout", to_string(c.layout)}};
}

inline std::vector<ErrorThreshold> to_thresholds(const std::vector<std::uint64_t>& v) {
    std::vector<ErrorThreshold> out;
    out.reserve(v.size());
    for (const auto e : v) {
        out.emplace_back(e);
    }
    return out;
}

// ---------------------------------------------------------------- segment

struct SegmentArgs {
    std::uint64_t error = 100;
    bool optimal = false;
    std::string out;
};

template <IndexKey Key>
int run_segment(const bench::Dataset<Key>& d, const SegmentArgs& a, bool csv, std::ostream& out,
                std::ostream& err) {
    const auto points = d.points();
    const ErrorThreshold e(a.error);
    const auto segs = shrinking_cone<Key>(points, e);
    const std::uint64_t worst = max_error<Key>(points, segs);
    const std::uint64_t distinct = count_distinct_keys<Key>(points);
    std::optional<std::vector<Segment<Key>>> best;
    if (a.optimal) {
        best = optimal_segmentation<Key>(points, e);
    }
    if (csv) {
        emit(a.out, out, [&](std::ostream& os) {
            os << "start_key,start_loc,slope,n_locs,end_key\n" << std::setprecision(17);
            for (const auto& s : segs) {
                os << bench::detail::format_key(s.start_key) << ',' << s.start_loc << ',' << s.slope << ','
                   << s.n_locs << ',' << bench::detail::format_key(s.end_key) << '\n';
            }
        });
        err << "segments=" << segs.size() << " max_error=" << worst;
        if (best) {
            err << " optimal_segments=" << best->size();
        }
        err << '\n';
        return kOk;
    }
    Json j;
    j["dataset"] = d.name;
    j["n"] = d.size();
    j["distinct_keys"] = distinct;
    j["error"] = a.error;
    j["segment_count"] = segs.size();
    j["max_error"] = worst;
    j["segment_count_bound"] = segment_count_bound(distinct, d.size(), e);
    j["non_linearity_ratio"] = static_cast<double>(segs.size()) /
                               static_cast<double>(atree::detail::ceil_div(d.size(), a.error + 1));
    if (best) {
        j["optimal"] = Json{{"segment_count", best->size()},
                            {"max_error", max_error<Key>(points, *best)},
                            {"ratio", static_cast<double>(segs.size()) / static_cast<double>(best->size())}};
    }
    Json list = Json::array();
    for (const auto& s : segs) {
        list.push_back(segment_json(s));
    }
    j["segments"] = std::move(list);
    emit(a.out, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    return kOk;
}

// ---------------------------------------------------------------- build

struct BuildArgs {
    std::string index;
    std::uint64_t error = 100;
    std::optional<std::uint64_t> buffer_size;
    std::uint64_t fanout = 16;
    std::string layout = "clustered";
};

template <IndexKey Key>
int run_build(const bench::Dataset<Key>& d, const BuildArgs& a, std::ostream& out) {
    const IndexConfig config{a.error, a.buffer_size.value_or(a.error / 2), a.fanout, parse_layout(a.layout)};
    const auto tree = ATree<Key>::bulk_load(std::span<const Entry<Key>>(d.entries), config);
    save_index(tree, a.index);
    Json j;
    j["index"] = a.index;
    j["dataset"] = d.name;
    j["config"] = config_json(config);
    j["stats"] = stats_json(tree.stats());
    out << j.dump(2) << '\n';
    return kOk;
}

// ---------------------------------------------------------------- query / range

inline int run_query(const std::string& index, const std::string& key_text, bool csv, std::ostream& out,
                     std::ostream& err) {
    return with_index_key_type(index, [&](auto tag) {
        using Key = decltype(tag);
        const auto tree = load_index<Key>(index);
        const Key key = parse_key<Key>(key_text);
        const auto hit = tree.lookup(key);
        if (csv) {
            if (hit) {
                out << "key,payload\n" << bench::detail::format_key(key) << ',' << *hit << '\n';
            }
        } else {
            Json j{{"key", key}, {"found", hit.has_value()}};
            if (hit) {
                j["payload"] = *hit;
            }
            out << j.dump(2) << '\n';
        }
        if (!hit) {
            err << "key " << key_text << " not found\n";
            return static_cast<int>(kNotFound);
        }
        return static_cast<int>(kOk);
    });
}

inline int run_range(const std::string& index, const std::string& lo_text, const std::string& hi_text, bool csv,
                     std::ostream& out) {
    return with_index_key_type(index, [&](auto tag) {
        using Key = decltype(tag);
        const auto tree = load_index<Key>(index);
        const Key lo = parse_key<Key>(lo_text);
        const Key hi = parse_key<Key>(hi_text);
        const auto rows = tree.range(lo, hi);
        if (csv) {
            out << "key,payload\n";
            for (const auto& r : rows) {
                out << bench::detail::format_key(r.key) << ',' << r.payload << '\n';
            }
        } else {
            Json list = Json::array();
            for (const auto& r : rows) {
                list.push_back(Json::array({r.key, r.payload}));
            }
            out << Json{{"lo", lo}, {"hi", hi}, {"count", rows.size()}, {"entries", std::move(list)}}.dump(2)
                << '\n';
        }
        return static_cast<int>(kOk);
    });
}

// ---------------------------------------------------------------- insert-file

struct InsertArgs {
    std::string index;
    std::string keys;
    std::string format = "csv";
    std::string out;
};

inline int run_insert_file(const InsertArgs& a, std::ostream& out) {
    return with_index_key_type(a.index, [&](auto tag) {
        using Key = decltype(tag);
        auto tree = load_index<Key>(a.index);
        bench::LoadOptions options;
        options.keep_order = true;
        const auto batch = bench::load_dataset<Key>(a.keys, bench::parse_dataset_format(a.format), options);
        std::uint64_t merges = 0;
        std::uint64_t created = 0;
        for (const auto& e : batch.entries) {
            const auto outcome = tree.insert(e);
            merges += outcome.merged ? 1 : 0;
            created += outcome.created.size();
        }
        const std::string target = a.out.empty() ? a.index : a.out;
        save_index(tree, target);
        Json j;
        j["index"] = target;
        j["inserted"] = batch.size();
        j["merges"] = merges;
        j["nodes_created"] = created;
        j["config"] = config_json(tree.config());
        j["stats"] = stats_json(tree.stats());
        out << j.dump(2) << '\n';
        return static_cast<int>(kOk);
    });
}

// ---------------------------------------------------------------- cost

struct CostArgs {
    std::vector<std::uint64_t> errors;
    std::string latency_ns;
    std::string budget_bytes;
    double c_ns = 50.0;
    bool calibrate = false;
    double fanout = 16.0;
    double fill = 0.5;
    std::optional<std::uint64_t> buffer_size;
    double shift_factor = 0.25;
    std::string profile_in;
    std::string profile_out;
};

inline const std::vector<std::uint64_t>& default_errors() {
    static const std::vector<std::uint64_t> v{16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
    return v;
}

inline int run_cost(const DataOptions& data, const CostArgs& a, bool csv, std::ostream& out, std::ostream& err) {
    if (!a.latency_ns.empty() && !a.budget_bytes.empty()) {
        throw config_error("give at most one of --latency-ns and --budget-bytes");
    }
    CostParams params;
    params.c_ns = a.c_ns;
    params.fanout = a.fanout;
    params.fill = a.fill;
    params.buffer_size = a.buffer_size;
    params.array_shift_factor = a.shift_factor;
    if (a.calibrate) {
        params.c_ns = bench::measure_random_access_ns();
    }
    params.validate();

    SegmentCountProfile profile;
    std::vector<ErrorThreshold> candidates;
    if (!a.profile_in.empty()) {
        if (!data.path.empty() || !data.gen.empty()) {
            throw config_error("--profile-in replaces --data/--gen; give only one");
        }
        std::ifstream in(a.profile_in);
        if (!in) {
            throw config_error("cannot open profile '" + a.profile_in + "'");
        }
        profile = read_profile_csv(in);
        candidates = a.errors.empty() ? profile.errors() : to_thresholds(a.errors);
    } else {
        candidates = to_thresholds(a.errors.empty() ? default_errors() : a.errors);
        const AnyDataset d = load_data(data, err);
        profile = std::visit(
            [&](const auto& ds) {
                const auto pts = ds.points();
                using P = typename std::decay_t<decltype(pts)>::value_type;
                return profile_segments(std::span<const P>(pts), std::span<const ErrorThreshold>(candidates));
            },
            d);
    }
    if (!a.profile_out.empty()) {
        emit(a.profile_out, out, [&](std::ostream& os) { write_profile_csv(profile, os); });
    }

    Json table = Json::array();
    for (const auto e : candidates) {
        table.push_back(Json{{"error", e.value()},
                             {"segment_count", profile.segments_at(e)},
                             {"buffer_size", params.buffer_for(e)},
                             {"latency_ns", latency_estimate(e, profile, params)},
                             {"size_bytes", size_estimate(e, profile, params)},
                             {"insert_ns", insert_latency_estimate(e, profile, params)},
                             {"amortized_split_ns", amortized_split_estimate(e, profile, params)}});
    }
    Json j;
    j["params"] = Json{{"c_ns", params.c_ns},
                       {"fanout", params.fanout},
                       {"fill", params.fill},
                       {"buffer_size", params.buffer_size ? Json(*params.buffer_size) : Json("error/2")},
                       {"array_shift_factor", params.array_shift_factor}};
    j["n_entries"] = profile.n_entries;
    j["profile_non_increasing"] = profile.is_non_increasing();
    j["candidates"] = table;

    int code = kOk;
    const auto select = [&](const char* kind, double limit, auto pick) {
        j["constraint"] = Json{{"kind", kind}, {"limit", limit_json(limit)}};
        try {
            const ErrorThreshold chosen = pick(limit);
            j["selected"] = chosen.value();
            j["selected_latency_ns"] = latency_estimate(chosen, profile, params);
            j["selected_size_bytes"] = size_estimate(chosen, profile, params);
        } catch (const infeasible_error& ex) {
            j["selected"] = nullptr;
            j["best_achievable"] = ex.best_achievable();
            err << "infeasible: " << ex.what() << "; best achievable " << ex.best_achievable() << '\n';
            code = kInfeasible;
        }
    };
    const std::span<const ErrorThreshold> cands(candidates);
    if (!a.latency_ns.empty()) {
        select("latency_ns", parse_limit(a.latency_ns, "--latency-ns"),
               [&](double lim) { return pick_error_for_latency(lim, cands, profile, params); });
    } else if (!a.budget_bytes.empty()) {
        select("size_bytes", parse_limit(a.budget_bytes, "--budget-bytes"),
               [&](double lim) { return pick_error_for_budget(lim, cands, profile, params); });
    }

    if (csv) {
        out << "error,segment_count,buffer_size,latency_ns,size_bytes,insert_ns,amortized_split_ns\n";
        for (const auto& row : table) {
            out << row["error"] << ',' << row["segment_count"] << ',' << row["buffer_size"] << ','
                << row["latency_ns"] << ',' << row["size_bytes"] << ',' << row["insert_ns"] << ','
                << row["amortized_split_ns"] << '\n';
        }
        if (j.contains("selected") && !j["selected"].is_null()) {
            err << "selected error " << j["selected"] << " under " << j["constraint"]["kind"].get<std::string>()
                << " <= " << j["constraint"]["limit"] << '\n';
        }
    } else {
        out << j.dump(2) << '\n';
    }
    return code;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    std::string suite = "lookup";
    std::vector<std::uint64_t> errors{16, 64, 256, 1024};
    std::vector<std::uint64_t> page_sizes;  // empty: one page size per error, matching its data window
    std::vector<std::uint64_t> buffer_sizes;
    std::vector<std::string> structures;
    std::string layout = "clustered";
    std::size_t queries = 100'000;
    double insert_fraction = 0.1;
    std::size_t segmenter_points = 10'000;
    std::size_t warmup = 3;
    std::size_t rounds = 5;
    std::string out;
};

// Fixed page holding as many entries as the A-Tree data window 2 * (e - buff) + 1.
inline std::uint64_t matched_page_size(std::uint64_t error) {
    const std::uint64_t data_error = error - error / 2;
    return 2 * data_error + 1;
}

inline std::vector<bench::StructureConfig> bench_configs(const BenchArgs& a, bool with_binary) {
    const Layout layout = parse_layout(a.layout);
    std::set<std::string> wanted(a.structures.begin(), a.structures.end());
    for (const auto& s : wanted) {
        if (s != "atree" && s != "fixed" && s != "full" && s != "binary") {
            throw config_error("unknown structure '" + s + "' (atree, fixed, full, binary)");
        }
    }
    if (wanted.empty()) {
        wanted = {"atree", "fixed", "full"};
        if (with_binary) {
            wanted.insert("binary");
        }
    }
    std::vector<bench::StructureConfig> configs;
    if (wanted.contains("atree")) {
        for (const auto e : a.errors) {
            configs.push_back(bench::StructureConfig::atree(e, std::nullopt, layout));
        }
    }
    if (wanted.contains("fixed")) {
        std::vector<std::uint64_t> pages = a.page_sizes;
        if (pages.empty()) {
            for (const auto e : a.errors) {
                pages.push_back(matched_page_size(e));
            }
        }
        for (const auto p : pages) {
            configs.push_back(bench::StructureConfig::fixed(p, layout));
        }
    }
    if (wanted.contains("full")) {
        configs.push_back(bench::StructureConfig::full(layout));
    }
    if (wanted.contains("binary")) {
        configs.push_back(bench::StructureConfig::binary(layout));
    }
    return configs;
}

inline std::vector<std::uint64_t> fill_buffers(const BenchArgs& a, std::uint64_t error) {
    if (!a.buffer_sizes.empty()) {
        return a.buffer_sizes;
    }
    std::set<std::uint64_t> b{1, error / 8, error / 4, error / 2};
    b.erase(0);
    return {b.begin(), b.end()};
}

inline void write_summary(const bench::BenchReport& r, std::ostream& out) {
    for (const auto& row : r.rows) {
        out << std::left << std::setw(7) << row.workload << ' ' << std::setw(7) << row.structure
            << " param=" << std::setw(6) << row.parameter << " buff=" << std::setw(5) << row.buffer_size
            << " bytes=" << std::setw(10) << row.index_bytes << " units=" << std::setw(8) << row.units
            << std::right << std::fixed << std::setprecision(1) << " mean=" << row.mean_ns
            << "ns median=" << row.median_ns << "ns p99=" << row.p99_ns << "ns\n"
            << std::defaultfloat;
    }
}

template <IndexKey Key>
int run_bench(const bench::Dataset<Key>& d, const BenchArgs& a, std::uint64_t seed, bool csv, std::ostream& out) {
    static const std::set<std::string> suites{"lookup", "insert", "segmenters", "fill", "all"};
    if (!suites.contains(a.suite)) {
        throw config_error("unknown suite '" + a.suite + "' (lookup, insert, segmenters, fill, all)");
    }
    if (a.errors.empty()) {
        throw config_error("--errors must not be empty");
    }
    const bool all = a.suite == "all";
    bench::BenchOptions options;
    options.queries = a.queries;
    options.seed = seed;
    options.timing.warmup_rounds = a.warmup;
    options.timing.measured_rounds = a.rounds;
    options.timing.validate();

    bench::BenchReport report;
    Json j;
    if (all || a.suite == "lookup") {
        const auto configs = bench_configs(a, true);
        const auto r = bench::run_lookup_bench(d, std::span<const bench::StructureConfig>(configs), options);
        j["lookup"] = r.to_json();
        report.append(r);
    }
    if (all || a.suite == "insert") {
        const auto configs = bench_configs(a, false);
        const auto r = bench::run_insert_bench(d, std::span<const bench::StructureConfig>(configs),
                                               a.insert_fraction, options);
        j["insert"] = r.to_json();
        report.append(r);
    }
    if (all || a.suite == "fill") {
        for (const auto e : a.errors) {
            const auto buffers = fill_buffers(a, e);
            const auto r = bench::fill_factor_sweep(d, e, std::span<const std::uint64_t>(buffers), a.insert_fraction,
                                                    options, parse_layout(a.layout));
            j["fill"].push_back(Json(r.to_json()));
            report.append(r);
        }
    }
    std::vector<bench::SegmenterComparison> comparison;
    if (all || a.suite == "segmenters") {
        bench::Dataset<Key> prefix{d.name, {}, d.provenance};
        const std::size_t n = std::min(d.size(), a.segmenter_points);
        prefix.entries.assign(d.entries.begin(), d.entries.begin() + static_cast<std::ptrdiff_t>(n));
        prefix.provenance["segmenter_points"] = std::to_string(n);
        const auto thresholds = to_thresholds(a.errors);
        comparison = bench::compare_segmenters(prefix, std::span<const ErrorThreshold>(thresholds));
        j["segmenters"] = bench::comparison_json(std::span<const bench::SegmenterComparison>(comparison));
    }
    if (j.contains("lookup") || j.contains("insert") || j.contains("fill")) {
        j["metadata"] = report.metadata;
    }

    const auto write_csv = [&](std::ostream& os) {
        if (!report.rows.empty()) {
            report.write_csv(os);
        }
        if (!comparison.empty()) {
            if (!report.rows.empty()) {
                os << '\n';
            }
            bench::write_comparison_csv(std::span<const bench::SegmenterComparison>(comparison), os);
        }
    };
    if (a.out.empty()) {
        if (csv) {
            write_csv(out);
        } else {
            out << j.dump(2) << '\n';
        }
        return kOk;
    }
    emit(a.out + ".csv", out, write_csv);
    emit(a.out + ".json", out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    write_summary(report, out);
    for (const auto& c : comparison) {
        out << "segmenters e=" << c.error << " greedy=" << c.greedy << " optimal=" << c.optimal
            << " ratio=" << c.ratio << '\n';
    }
    out << "wrote " << a.out << ".csv and " << a.out << ".json\n";
    return kOk;
}

inline void add_data_options(CLI::App* cmd, DataOptions& o) {
    cmd->add_option("--data", o.path, "Dataset file");
    cmd->add_option("--gen", o.gen,
                    "Generated dataset, e.g. step:n=100000,step=100,gap=1000000 "
                    "(linear, step, periodic, lognormal, adversarial)");
    cmd->add_option("--format", o.format, "Dataset format: binary-le-u64, binary-le-f64, csv")
        ->capture_default_str();
    cmd->add_option("--key-type", o.key_type, "Key type for CSV input: u64 or f64")
        ->check(CLI::IsMember({"u64", "f64"}));
    cmd->add_flag("--sort", o.sort, "Sort unsorted input instead of rejecting it");
    cmd->add_option("--seed", o.seed, "Generator and query seed")->capture_default_str();
}

}  // namespace detail

// Runs the command line `args` (without the program name). Returns the exit code.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"A-Tree: error-bounded approximate index"};
    app.name("atree_cli");
    app.require_subcommand(1);

    bool json = false;
    bool csv = false;
    const auto add_output_flags = [&](CLI::App* cmd) {
        auto* j = cmd->add_flag("--json", json, "JSON output (default)");
        auto* c = cmd->add_flag("--csv", csv, "CSV output");
        j->excludes(c);
    };

    std::function<int()> action;
    DataOptions data;

    detail::SegmentArgs seg;
    auto* segment = app.add_subcommand("segment", "Segment a dataset and report the segments");
    detail::add_data_options(segment, data);
    add_output_flags(segment);
    segment->add_option("--error", seg.error, "Error threshold")->capture_default_str();
    segment->add_flag("--optimal", seg.optimal, "Also run the optimal segmentation");
    segment->add_option("--out", seg.out, "Write the report to this file");
    segment->callback([&] {
        action = [&] {
            return std::visit([&](const auto& d) { return detail::run_segment(d, seg, csv, out, err); },
                              detail::load_data(data, err));
        };
    });

    detail::BuildArgs build_args;
    auto* build = app.add_subcommand("build", "Bulk-load an index and save it");
    detail::add_data_options(build, data);
    build->add_option("--index", build_args.index, "Output index file")->required();
    build->add_option("--error", build_args.error, "Error threshold")->capture_default_str();
    build->add_option("--buffer-size", build_args.buffer_size, "Insert buffer capacity (default error/2)");
    build->add_option("--fanout", build_args.fanout, "Inner tree fanout")->capture_default_str();
    build->add_option("--layout", build_args.layout, "clustered or non-clustered")->capture_default_str();
    build->callback([&] {
        action = [&] {
            return std::visit([&](const auto& d) { return detail::run_build(d, build_args, out); },
                              detail::load_data(data, err));
        };
    });

    std::string index_path;
    std::string key_text;
    auto* query = app.add_subcommand("query", "Look up one key in a saved index");
    query->add_option("--index", index_path, "Index file")->required();
    query->add_option("--key", key_text, "Key to look up")->required();
    add_output_flags(query);
    query->callback([&] { action = [&] { return detail::run_query(index_path, key_text, csv, out, err); }; });

    std::string lo_text;
    std::string hi_text;
    auto* range = app.add_subcommand("range", "Report all entries with lo <= key <= hi");
    range->add_option("--index", index_path, "Index file")->required();
    range->add_option("--lo", lo_text, "Lower key")->required();
    range->add_option("--hi", hi_text, "Upper key")->required();
    add_output_flags(range);
    range->callback([&] { action = [&] { return detail::run_range(index_path, lo_text, hi_text, csv, out); }; });

    detail::InsertArgs ins;
    auto* insert = app.add_subcommand("insert-file", "Insert entries from a file, in file order");
    insert->add_option("--index", ins.index, "Index file")->required();
    insert->add_option("--keys", ins.keys, "Entries to insert")->required();
    insert->add_option("--format", ins.format, "Format of the entries file")->capture_default_str();
    insert->add_option("--out", ins.out, "Write the updated index here (default: overwrite --index)");
    insert->callback([&] { action = [&] { return detail::run_insert_file(ins, out); }; });

    detail::CostArgs cost_args;
    auto* cost = app.add_subcommand("cost", "Estimate latency and size per error and pick one");
    detail::add_data_options(cost, data);
    add_output_flags(cost);
    cost->add_option("--errors", cost_args.errors, "Candidate errors (comma separated)")->delimiter(',');
    cost->add_option("--latency-ns", cost_args.latency_ns, "Pick the smallest index within this latency");
    cost->add_option("--budget-bytes", cost_args.budget_bytes, "Pick the fastest index within this size");
    cost->add_option("--c-ns", cost_args.c_ns, "Cache-miss latency in ns")->capture_default_str();
    cost->add_flag("--calibrate", cost_args.calibrate, "Measure the cache-miss latency instead of --c-ns");
    cost->add_option("--fanout", cost_args.fanout, "Inner tree fanout")->capture_default_str();
    cost->add_option("--fill", cost_args.fill, "Inner tree fill ratio")->capture_default_str();
    cost->add_option("--buffer-size", cost_args.buffer_size, "Buffer size (default error/2)");
    cost->add_option("--shift-factor", cost_args.shift_factor, "Cost per shifted entry, in cache misses")
        ->capture_default_str();
    cost->add_option("--profile-in", cost_args.profile_in, "Read the segment-count profile from CSV");
    cost->add_option("--profile-out", cost_args.profile_out, "Write the segment-count profile to CSV");
    cost->callback([&] { action = [&] { return detail::run_cost(data, cost_args, csv, out, err); }; });

    detail::BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Run benchmark suites against the baselines");
    detail::add_data_options(bench_cmd, data);
    add_output_flags(bench_cmd);
    bench_cmd->add_option("--suite", bench_args.suite, "lookup, insert, segmenters, fill or all")
        ->capture_default_str();
    bench_cmd->add_option("--errors", bench_args.errors, "A-Tree errors")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--page-sizes", bench_args.page_sizes, "Fixed-paging page sizes (default: matched)")
        ->delimiter(',');
    bench_cmd->add_option("--buffer-sizes", bench_args.buffer_sizes, "Fill suite buffer sizes")->delimiter(',');
    bench_cmd->add_option("--structures", bench_args.structures, "Subset of atree,fixed,full,binary")
        ->delimiter(',');
    bench_cmd->add_option("--layout", bench_args.layout, "clustered or non-clustered")->capture_default_str();
    bench_cmd->add_option("--queries", bench_args.queries, "Lookups per round")->capture_default_str();
    bench_cmd->add_option("--insert-fraction", bench_args.insert_fraction, "Share of the data held out for inserts")
        ->capture_default_str();
    bench_cmd->add_option("--segmenter-points", bench_args.segmenter_points,
                          "Prefix length used by the segmenters suite")
        ->capture_default_str();
    bench_cmd->add_option("--warmup", bench_args.warmup, "Warm-up rounds (>= 3)")->capture_default_str();
    bench_cmd->add_option("--rounds", bench_args.rounds, "Measured rounds (>= 5)")->capture_default_str();
    bench_cmd->add_option("--out", bench_args.out, "Write PREFIX.csv and PREFIX.json plus a summary");
    bench_cmd->callback([&] {
        action = [&] {
            return std::visit([&](const auto& d) { return detail::run_bench(d, bench_args, data.seed, csv, out); },
                              detail::load_data(data, err));
        };
    });

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        return action();
    } catch (const infeasible_error& e) {
        err << "error: " << e.what() << "; best achievable " << e.best_achievable() << '\n';
        return kInfeasible;
    } catch (const malformed_input_error& e) {
        err << "error: " << e.what() << '\n';
        return kMalformed;
    } catch (const empty_input_error& e) {
        err << "error: " << e.what() << '\n';
        return kMalformed;
    } catch (const capacity_error& e) {
        err << "error: " << e.what() << '\n';
        return kCapacity;
    } catch (const constraint_error& e) {
        err << "error: " << e.what() << '\n';
        return kConstraint;
    } catch (const error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
}

}  // namespace atree::cli
