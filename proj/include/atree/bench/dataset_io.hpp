#pragma once

// Dataset files.
//   binary-le-u64 / binary-le-f64: a bare array of 8-byte little-endian keys; the
//     payload of each key is its row number in the file.
//   csv: optional header "key" or "key,payload", then one row per entry. Rows
//     without a payload get their row number (0-based, header excluded).

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "atree/bench/datasets.hpp"

namespace atree::bench {

enum class DatasetFormat { binary_le_u64, binary_le_f64, csv };

inline DatasetFormat parse_dataset_format(std::string_view s) {
    if (s == "binary-le-u64") {
        return DatasetFormat::binary_le_u64;
    }
    if (s == "binary-le-f64") {
        return DatasetFormat::binary_le_f64;
    }
    if (s == "csv") {
        return DatasetFormat::csv;
    }
    throw config_error("unknown dataset format '" + std::string(s) +
                       "' (expected binary-le-u64, binary-le-f64 or csv)");
}

inline const char* to_string(DatasetFormat f) noexcept {
    switch (f) {
        case DatasetFormat::binary_le_u64: return "binary-le-u64";
        case DatasetFormat::binary_le_f64: return "binary-le-f64";
        case DatasetFormat::csv: return "csv";
    }
    return "?";
}

struct LoadOptions {
    // Sort unsorted input (stable, by key) instead of rejecting it.
    bool sort_unsorted = false;
    // Receives a warning line when input had to be sorted.
    std::ostream* warnings = nullptr;
    // Keep rows in file order without checking it (insert replay files).
    bool keep_order = false;
};

namespace detail {

template <IndexKey Key>
void check_binary_key_type(DatasetFormat format) {
    const bool ok = (format == DatasetFormat::binary_le_u64 && std::same_as<Key, std::uint64_t>) ||
                    (format == DatasetFormat::binary_le_f64 && std::same_as<Key, double>);
    if (!ok) {
        throw config_error(std::string("format ") + to_string(format) +
                           " does not match the requested key type");
    }
}

template <IndexKey Key>
bool parse_field(std::string_view field, Key& out) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
        field.remove_prefix(1);
    }
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) {
        field.remove_suffix(1);
    }
    if (field.empty()) {
        return false;
    }
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
    return ec == std::errc{} && ptr == field.data() + field.size();
}

template <IndexKey Key>
std::string format_key(Key k) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), k);
    return std::string(buf.data(), ptr);
}

template <IndexKey Key>
void finish_load(Dataset<Key>& d, const LoadOptions& options) {
    for (std::size_t i = 0; i < d.entries.size(); ++i) {
        if (!key_is_valid(d.entries[i].key)) {
            throw malformed_input_error(d.name + ": non-finite key at row " + std::to_string(i));
        }
    }
    if (options.keep_order) {
        return;
    }
    const auto order = [](const Entry<Key>& a, const Entry<Key>& b) { return a.key < b.key; };
    const auto bad = std::is_sorted_until(d.entries.begin(), d.entries.end(), order);
    if (bad == d.entries.end()) {
        return;
    }
    const auto row = static_cast<std::size_t>(bad - d.entries.begin());
    if (!options.sort_unsorted) {
        throw malformed_input_error(d.name + ": keys are not sorted (row " + std::to_string(row) + ")");
    }
    if (options.warnings != nullptr) {
        *options.warnings << "warning: " << d.name << " is not sorted (first at row " << row
                          << "); sorting by key\n";
    }
    std::stable_sort(d.entries.begin(), d.entries.end(), order);
}

}  // namespace detail

template <IndexKey Key>
Dataset<Key> read_dataset(std::istream& in, DatasetFormat format, const std::string& name,
                          const LoadOptions& options = {}) {
    Dataset<Key> d{name, {}, {{"source", name}, {"format", to_string(format)}}};
    if (format != DatasetFormat::csv) {
        detail::check_binary_key_type<Key>(format);
        std::array<unsigned char, 8> b{};
        std::uint64_t row = 0;
        while (true) {
            in.read(reinterpret_cast<char*>(b.data()), b.size());
            const auto got = in.gcount();
            if (got == 0) {
                break;
            }
            if (got != 8) {
                throw malformed_input_error(name + ": file size is not a multiple of 8 bytes");
            }
            std::uint64_t v = 0;
            for (std::size_t i = 0; i < 8; ++i) {
                v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
            }
            Key k{};
            if constexpr (std::floating_point<Key>) {
                k = std::bit_cast<Key>(v);
            } else {
                k = static_cast<Key>(v);
            }
            d.entries.push_back(Entry<Key>{k, row++});
        }
    } else {
        std::string line;
        std::size_t line_no = 0;
        std::uint64_t row = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty()) {
                continue;
            }
            if (line_no == 1 && (line == "key" || line == "key,payload")) {
                continue;
            }
            const std::string_view view(line);
            const auto comma = view.find(',');
            Entry<Key> e{Key{}, row};
            const bool key_ok = detail::parse_field(view.substr(0, comma), e.key);
            bool payload_ok = true;
            if (comma != std::string_view::npos) {
                payload_ok = detail::parse_field(view.substr(comma + 1), e.payload);
            }
            if (!key_ok || !payload_ok) {
                throw malformed_input_error(name + ": line " + std::to_string(line_no) +
                                            ": cannot parse '" + line + "'");
            }
            d.entries.push_back(e);
            ++row;
        }
    }
    detail::finish_load(d, options);
    return d;
}

template <IndexKey Key>
Dataset<Key> load_dataset(const std::string& path, DatasetFormat format, const LoadOptions& options = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw config_error("cannot open dataset " + path);
    }
    return read_dataset<Key>(in, format, path, options);
}

template <IndexKey Key>
void write_dataset(const Dataset<Key>& d, std::ostream& out, DatasetFormat format) {
    if (format == DatasetFormat::csv) {
        out << "key,payload\n";
        for (const auto& e : d.entries) {
            out << detail::format_key(e.key) << ',' << e.payload << '\n';
        }
    } else {
        detail::check_binary_key_type<Key>(format);
        for (const auto& e : d.entries) {
            std::uint64_t v = 0;
            if constexpr (std::floating_point<Key>) {
                v = std::bit_cast<std::uint64_t>(e.key);
            } else {
                v = static_cast<std::uint64_t>(e.key);
            }
            std::array<char, 8> b{};
            for (std::size_t i = 0; i < 8; ++i) {
                b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
            }
            out.write(b.data(), b.size());
        }
    }
    if (!out) {
        throw error("failed writing dataset " + d.name);
    }
}

template <IndexKey Key>
void save_dataset(const Dataset<Key>& d, const std::string& path, DatasetFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw error("cannot open " + path + " for writing");
    }
    write_dataset(d, out, format);
}

}  // namespace atree::bench
