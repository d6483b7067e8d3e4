#pragma once

// Index file layout. Every integer is little-endian; doubles are stored as their
// IEEE-754 bit pattern in a 64-bit little-endian word.
//
//   header (56 bytes)
//     [0, 8)    magic "ATREEIDX"
//     [8, 12)   format version (u32), currently 1
//     [12]      layout: 0 clustered, 1 non-clustered
//     [13]      key type: 0 u64, 1 f64, 2 i64
//     [14, 16)  reserved, zero
//     [16, 24)  error
//     [24, 32)  buffer_size
//     [32, 40)  fanout
//     [40, 48)  segment count S
//     [48, 56)  entry count N
//   S segment records, 40 bytes each
//     start_key, start_loc, slope, n_locs, n_buffered
//   N entries, 16 bytes each: key, payload
//     grouped per segment: its n_locs data entries, then its n_buffered buffer entries
//
// start_loc is written as the segment's offset in the entry array, so
// save(load(bytes)) reproduces bytes exactly.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "atree/index.hpp"

namespace atree {

inline constexpr std::array<char, 8> kIndexMagic = {'A', 'T', 'R', 'E', 'E', 'I', 'D', 'X'};
inline constexpr std::uint32_t kIndexFormatVersion = 1;
inline constexpr std::size_t kIndexHeaderBytes = 56;
inline constexpr std::size_t kSegmentRecordBytes = 40;

namespace detail {

template <IndexKey Key>
constexpr std::uint8_t key_type_tag() {
    if constexpr (std::floating_point<Key>) {
        return 1;
    } else if constexpr (std::is_signed_v<Key>) {
        return 2;
    } else {
        return 0;
    }
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b{};
    for (std::size_t i = 0; i < 8; ++i) {
        b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    }
    out.write(b.data(), b.size());
}

inline std::uint64_t get_u64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
        throw malformed_input_error("index file truncated");
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return v;
}

template <IndexKey Key>
std::uint64_t key_bits(Key k) {
    if constexpr (std::floating_point<Key>) {
        return std::bit_cast<std::uint64_t>(k);
    } else {
        return static_cast<std::uint64_t>(k);
    }
}

template <IndexKey Key>
Key key_from_bits(std::uint64_t v) {
    if constexpr (std::floating_point<Key>) {
        return std::bit_cast<Key>(v);
    } else {
        return static_cast<Key>(v);
    }
}

}  // namespace detail

template <IndexKey Key>
void save_index(const ATree<Key>& tree, std::ostream& out) {
    const IndexConfig& cfg = tree.config();
    out.write(kIndexMagic.data(), kIndexMagic.size());
    const std::array<char, 8> meta = {
        static_cast<char>(kIndexFormatVersion & 0xFF), static_cast<char>((kIndexFormatVersion >> 8) & 0xFF),
        static_cast<char>((kIndexFormatVersion >> 16) & 0xFF), static_cast<char>((kIndexFormatVersion >> 24) & 0xFF),
        static_cast<char>(cfg.layout), static_cast<char>(detail::key_type_tag<Key>()), 0, 0};
    out.write(meta.data(), meta.size());
    detail::put_u64(out, cfg.error);
    detail::put_u64(out, cfg.buffer_size);
    detail::put_u64(out, cfg.fanout);
    detail::put_u64(out, tree.segment_count());
    detail::put_u64(out, tree.size());

    std::uint64_t offset = 0;
    tree.for_each_node([&](const SegmentNode<Key>& node) {
        detail::put_u64(out, detail::key_bits(node.seg.start_key));
        detail::put_u64(out, offset);
        detail::put_u64(out, std::bit_cast<std::uint64_t>(node.seg.slope));
        detail::put_u64(out, node.seg.n_locs);
        detail::put_u64(out, node.buffer.size());
        offset += node.size();
    });
    tree.for_each_node([&](const SegmentNode<Key>& node) {
        for (const auto* part : {&node.data, &node.buffer}) {
            for (const auto& e : *part) {
                detail::put_u64(out, detail::key_bits(e.key));
                detail::put_u64(out, e.payload);
            }
        }
    });
    if (!out) {
        throw error("failed writing index");
    }
}

template <IndexKey Key>
ATree<Key> load_index(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kIndexMagic) {
        throw malformed_input_error("not an index file (bad magic)");
    }
    std::array<unsigned char, 8> meta{};
    if (!in.read(reinterpret_cast<char*>(meta.data()), meta.size())) {
        throw malformed_input_error("index file truncated");
    }
    const std::uint32_t version = static_cast<std::uint32_t>(meta[0]) |
                                  (static_cast<std::uint32_t>(meta[1]) << 8) |
                                  (static_cast<std::uint32_t>(meta[2]) << 16) |
                                  (static_cast<std::uint32_t>(meta[3]) << 24);
    if (version != kIndexFormatVersion) {
        throw malformed_input_error("unsupported index format version " + std::to_string(version));
    }
    if (meta[4] > 1) {
        throw malformed_input_error("unknown layout tag " + std::to_string(meta[4]));
    }
    if (meta[5] != detail::key_type_tag<Key>()) {
        throw malformed_input_error("index key type tag " + std::to_string(meta[5]) +
                                    " does not match the requested key type");
    }
    IndexConfig cfg;
    cfg.layout = static_cast<Layout>(meta[4]);
    cfg.error = detail::get_u64(in);
    cfg.buffer_size = detail::get_u64(in);
    cfg.fanout = detail::get_u64(in);
    try {
        cfg.validate();
    } catch (const config_error& e) {
        throw malformed_input_error(std::string("stored configuration invalid: ") + e.what());
    }
    const std::uint64_t n_segments = detail::get_u64(in);
    const std::uint64_t n_entries = detail::get_u64(in);
    constexpr std::uint64_t kSanityLimit = std::uint64_t{1} << 40;
    if (n_segments > n_entries || n_entries > kSanityLimit) {
        throw malformed_input_error("implausible segment/entry counts");
    }

    std::vector<SegmentNode<Key>> nodes(n_segments);
    std::vector<std::uint64_t> buffered(n_segments);
    std::uint64_t expected = 0;
    for (std::uint64_t i = 0; i < n_segments; ++i) {
        auto& seg = nodes[i].seg;
        seg.start_key = detail::key_from_bits<Key>(detail::get_u64(in));
        seg.start_loc = detail::get_u64(in);
        seg.slope = std::bit_cast<double>(detail::get_u64(in));
        seg.n_locs = detail::get_u64(in);
        buffered[i] = detail::get_u64(in);
        if (seg.start_loc != expected || seg.n_locs == 0 || seg.n_locs > n_entries ||
            buffered[i] > n_entries) {
            throw malformed_input_error("segment record " + std::to_string(i) + " is inconsistent");
        }
        expected += seg.n_locs + buffered[i];
        if (expected > n_entries) {
            throw malformed_input_error("segment records cover more entries than stored");
        }
    }
    if (expected != n_entries) {
        throw malformed_input_error("segment records do not cover every entry");
    }
    auto read_entries = [&](std::vector<Entry<Key>>& dst, std::uint64_t count) {
        dst.resize(count);
        for (auto& e : dst) {
            e.key = detail::key_from_bits<Key>(detail::get_u64(in));
            e.payload = detail::get_u64(in);
        }
    };
    for (std::uint64_t i = 0; i < n_segments; ++i) {
        read_entries(nodes[i].data, nodes[i].seg.n_locs);
        read_entries(nodes[i].buffer, buffered[i]);
        nodes[i].seg.end_key = nodes[i].data.back().key;
    }
    return ATree<Key>::from_nodes(cfg, std::move(nodes));
}

template <IndexKey Key>
void save_index(const ATree<Key>& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw error("cannot open " + path + " for writing");
    }
    save_index(tree, out);
}

template <IndexKey Key>
ATree<Key> load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw malformed_input_error("cannot open index file " + path);
    }
    return load_index<Key>(in);
}

// Key type tag of a stored index without loading it.
inline std::uint8_t peek_index_key_type(std::istream& in) {
    std::array<char, 14> head{};
    if (!in.read(head.data(), head.size()) ||
        !std::equal(kIndexMagic.begin(), kIndexMagic.end(), head.begin())) {
        throw malformed_input_error("not an index file (bad magic)");
    }
    return static_cast<std::uint8_t>(head[13]);
}

}  // namespace atree
