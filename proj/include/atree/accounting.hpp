#pragma once

#include <cstdint>

#include "atree/common.hpp"

namespace atree {

// Size conventions shared by the index and the baselines so their byte counts
// compare like with like.
inline constexpr std::uint64_t kSegmentDescriptorBytes = 24;  // start key, slope, data reference
inline constexpr std::uint64_t kPageDescriptorBytes = 16;     // first key, data reference
inline constexpr std::uint64_t kTreeSlotBytes = 16;           // 8-byte separator + 8-byte child

// Footprint of a bulk-packed B+ tree whose leaf level holds `leaf_entries`
// descriptors, `fanout` per node. Leaf descriptors are charged by the caller;
// inner_bytes covers the separator/child slots of every level above the leaves.
struct TreeFootprint {
    std::uint64_t leaf_nodes = 0;
    std::uint64_t inner_bytes = 0;
    double leaf_fill = 0.0;
};

inline TreeFootprint packed_tree_footprint(std::uint64_t leaf_entries, std::uint64_t fanout) {
    TreeFootprint fp;
    if (leaf_entries == 0) {
        return fp;
    }
    fp.leaf_nodes = detail::ceil_div(leaf_entries, fanout);
    fp.leaf_fill = static_cast<double>(leaf_entries) / static_cast<double>(fp.leaf_nodes * fanout);
    std::uint64_t children = fp.leaf_nodes;
    while (children > 1) {
        fp.inner_bytes += children * kTreeSlotBytes;
        children = detail::ceil_div(children, fanout);
    }
    return fp;
}

}  // namespace atree
