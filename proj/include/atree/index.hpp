#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atree/accounting.hpp"
#include "atree/common.hpp"
#include "atree/segmentation.hpp"

namespace atree {

enum class Layout : std::uint8_t { clustered = 0, non_clustered = 1 };

inline const char* to_string(Layout l) noexcept {
    return l == Layout::clustered ? "clustered" : "non-clustered";
}

// Payload is the row location (clustered) or an opaque row id (non-clustered).
template <IndexKey Key>
struct Entry {
    Key key{};
    std::uint64_t payload = 0;

    friend bool operator==(const Entry&, const Entry&) = default;
};

struct IndexConfig {
    std::uint64_t error = 100;
    std::uint64_t buffer_size = 50;
    std::uint64_t fanout = 16;
    Layout layout = Layout::clustered;

    // Half of the error goes to the insert buffer.
    static IndexConfig for_error(std::uint64_t error, Layout layout = Layout::clustered) {
        return IndexConfig{error, error / 2, 16, layout};
    }

    // Threshold the segmenter runs at, so data plus buffer stay within `error`.
    ErrorThreshold segmentation_error() const noexcept {
        return ErrorThreshold(error - buffer_size);
    }

    void validate() const {
        if (error > 0 && buffer_size >= error) {
            throw config_error("buffer_size (" + std::to_string(buffer_size) +
                               ") must be smaller than error (" + std::to_string(error) + ")");
        }
        if (error == 0 && buffer_size != 0) {
            throw config_error("buffer_size must be 0 when error is 0");
        }
        if (fanout < 2) {
            throw config_error("fanout must be at least 2");
        }
    }

    friend bool operator==(const IndexConfig&, const IndexConfig&) = default;
};

template <IndexKey Key>
struct SegmentNode {
    Segment<Key> seg;
    std::vector<Entry<Key>> data;
    std::vector<Entry<Key>> buffer;

    Key max_key() const noexcept {
        const Key d = data.back().key;
        return buffer.empty() ? d : std::max(d, buffer.back().key);
    }
    std::size_t size() const noexcept { return data.size() + buffer.size(); }
};

struct IndexStats {
    std::uint64_t n_segments = 0;
    std::uint64_t n_entries = 0;
    std::uint64_t buffered_entries = 0;
    std::uint64_t measured_bytes = 0;
    std::uint64_t segment_bytes = 0;
    std::uint64_t tree_bytes = 0;
    double leaf_fill = 0.0;
};

// Data positions [first, last) that a search for a key inspects inside a segment.
struct SearchWindow {
    std::size_t first = 0;
    std::size_t last = 0;
    double predicted = 0.0;

    std::size_t size() const noexcept { return last - first; }
};

namespace detail {

template <IndexKey Key>
struct KeyLess {
    bool operator()(const Entry<Key>& e, Key k) const noexcept { return e.key < k; }
    bool operator()(Key k, const Entry<Key>& e) const noexcept { return k < e.key; }
};

}  // namespace detail

// Error-bounded approximate index: an ordered map from segment start keys to
// segment nodes, each holding the covered entries plus a sorted insert buffer.
//
// Readers may run concurrently; insert needs exclusive access.
template <IndexKey Key>
class ATree {
public:
    using entry_type = Entry<Key>;
    using node_type = SegmentNode<Key>;

    struct InsertOutcome {
        bool merged = false;
        // Nodes produced by the merge, in key order. Valid until the next insert.
        std::vector<const node_type*> created;
    };

    ATree() = default;
    explicit ATree(IndexConfig config) : config_(config) { config_.validate(); }

    static ATree bulk_load(std::span<const entry_type> entries, IndexConfig config) {
        ATree tree(config);
        tree.check_sorted(entries);
        if (entries.empty()) {
            return tree;
        }
        const auto segs = shrinking_cone_by<Key>(
            entries, [](const entry_type& e) { return e.key; }, config.segmentation_error(), 0);
        std::size_t offset = 0;
        for (const auto& seg : segs) {
            node_type node{seg,
                           {entries.begin() + static_cast<std::ptrdiff_t>(offset),
                            entries.begin() + static_cast<std::ptrdiff_t>(offset + seg.n_locs)},
                           {}};
            tree.inner_.emplace_hint(tree.inner_.end(), seg.start_key, std::move(node));
            offset += seg.n_locs;
        }
        tree.count_ = entries.size();
        return tree;
    }

    // Rebuilds a tree from stored nodes (deserialization). Throws
    // malformed_input_error when the nodes break any structural invariant.
    static ATree from_nodes(IndexConfig config, std::vector<node_type> nodes) {
        ATree tree(config);
        for (auto& node : nodes) {
            tree.count_ += node.size();
            const Key start = node.seg.start_key;
            tree.inner_.emplace_hint(tree.inner_.end(), start, std::move(node));
        }
        if (auto why = tree.check_invariants(); !why.empty()) {
            throw malformed_input_error("stored index is inconsistent: " + why);
        }
        return tree;
    }

    const IndexConfig& config() const noexcept { return config_; }
    std::size_t size() const noexcept { return count_; }
    bool empty() const noexcept { return count_ == 0; }
    std::size_t segment_count() const noexcept { return inner_.size(); }

    // Payload of the lowest-positioned entry with this key.
    std::optional<std::uint64_t> lookup(Key key) const {
        const entry_type* e = find(key);
        if (e == nullptr) {
            return std::nullopt;
        }
        return e->payload;
    }

    const entry_type* find(Key key) const {
        if (inner_.empty()) {
            return nullptr;
        }
        const node_type& node = locate(key)->second;
        const SearchWindow w = window(node, key);
        const auto first = node.data.begin() + static_cast<std::ptrdiff_t>(w.first);
        const auto last = node.data.begin() + static_cast<std::ptrdiff_t>(w.last);
        const auto it = std::lower_bound(first, last, key, detail::KeyLess<Key>{});
        if (it != last && it->key == key) {
            return &*it;
        }
        const auto b = std::lower_bound(node.buffer.begin(), node.buffer.end(), key,
                                        detail::KeyLess<Key>{});
        if (b != node.buffer.end() && b->key == key) {
            return &*b;
        }
        return nullptr;
    }

    // Entries with lo <= key <= hi in key order.
    std::vector<entry_type> range(Key lo, Key hi) const {
        std::vector<entry_type> out;
        scan(lo, hi, [&](const entry_type& e) { out.push_back(e); });
        return out;
    }

    template <typename Fn>
    void scan(Key lo, Key hi, Fn&& fn) const {
        if (hi < lo) {
            throw malformed_input_error("range lower bound exceeds upper bound");
        }
        if (inner_.empty()) {
            return;
        }
        auto it = locate(lo);
        bool first_node = true;
        for (; it != inner_.end(); ++it) {
            const node_type& node = it->second;
            std::size_t di = 0;
            std::size_t bi = 0;
            if (first_node) {
                const SearchWindow w = window(node, lo);
                di = static_cast<std::size_t>(
                    std::lower_bound(node.data.begin() + static_cast<std::ptrdiff_t>(w.first),
                                     node.data.begin() + static_cast<std::ptrdiff_t>(w.last), lo,
                                     detail::KeyLess<Key>{}) -
                    node.data.begin());
                bi = static_cast<std::size_t>(std::lower_bound(node.buffer.begin(),
                                                               node.buffer.end(), lo,
                                                               detail::KeyLess<Key>{}) -
                                              node.buffer.begin());
                first_node = false;
            }
            while (di < node.data.size() || bi < node.buffer.size()) {
                const bool take_data =
                    bi == node.buffer.size() ||
                    (di < node.data.size() && !(node.buffer[bi].key < node.data[di].key));
                const entry_type& e = take_data ? node.data[di++] : node.buffer[bi++];
                if (hi < e.key) {
                    return;
                }
                fn(e);
            }
        }
    }

    InsertOutcome insert(const entry_type& entry) {
        if (!key_is_valid(entry.key)) {
            throw malformed_input_error("cannot insert a non-finite key");
        }
        if (config_.layout == Layout::clustered && find(entry.key) != nullptr) {
            throw constraint_error("duplicate key in clustered index");
        }
        InsertOutcome outcome;
        if (inner_.empty()) {
            node_type node{Segment<Key>{entry.key, 0, 0.0, 1, entry.key}, {entry}, {}};
            auto it = inner_.emplace(entry.key, std::move(node));
            ++count_;
            outcome.created.push_back(&it->second);
            return outcome;
        }
        auto it = route(entry.key);
        auto& buffer = it->second.buffer;
        buffer.insert(std::upper_bound(buffer.begin(), buffer.end(), entry.key,
                                       detail::KeyLess<Key>{}),
                      entry);
        ++count_;
        if (buffer.size() >= config_.buffer_size) {
            outcome.merged = true;
            outcome.created = split(it);
        }
        return outcome;
    }

    IndexStats stats() const {
        IndexStats s;
        s.n_segments = inner_.size();
        s.n_entries = count_;
        for (const auto& [k, node] : inner_) {
            s.buffered_entries += node.buffer.size();
        }
        const TreeFootprint fp = packed_tree_footprint(s.n_segments, config_.fanout);
        s.segment_bytes = s.n_segments * kSegmentDescriptorBytes;
        s.tree_bytes = fp.inner_bytes;
        s.measured_bytes = s.segment_bytes + s.tree_bytes;
        s.leaf_fill = fp.leaf_fill;
        return s;
    }

    template <typename Fn>
    void for_each_node(Fn&& fn) const {
        for (const auto& [k, node] : inner_) {
            fn(node);
        }
    }

    // All entries in key order.
    std::vector<entry_type> entries() const {
        std::vector<entry_type> out;
        out.reserve(count_);
        for (const auto& [k, node] : inner_) {
            std::merge(node.data.begin(), node.data.end(), node.buffer.begin(), node.buffer.end(),
                       std::back_inserter(out),
                       [](const entry_type& a, const entry_type& b) { return a.key < b.key; });
        }
        return out;
    }

    // The node a lookup for `key` searches.
    const node_type* owning_node(Key key) const {
        return inner_.empty() ? nullptr : &locate(key)->second;
    }

    // Positions of node.data a lookup for `key` inspects: the predicted offset,
    // clamped into the segment, widened by the segmentation error.
    SearchWindow window(const node_type& node, Key key) const noexcept {
        const std::size_t n = node.data.size();
        const double top = static_cast<double>(n - 1);
        double pred = node.seg.predicted_offset(key);
        pred = std::clamp(std::isnan(pred) ? 0.0 : pred, 0.0, top);
        const double e = config_.segmentation_error().as_real();
        SearchWindow w;
        w.predicted = pred;
        const double lo = std::ceil(pred - e - kLocationSlack);
        const double hi = std::floor(pred + e + kLocationSlack);
        w.first = lo <= 0.0 ? 0 : static_cast<std::size_t>(lo);
        w.last = hi >= top ? n : static_cast<std::size_t>(hi) + 1;
        return w;
    }

    // Empty when every structural invariant holds, otherwise a description of the
    // first violation found.
    std::string check_invariants() const {
        const ErrorThreshold seg_err = config_.segmentation_error();
        const bool strict = config_.layout == Layout::clustered;
        std::size_t total = 0;
        const node_type* prev = nullptr;
        std::size_t index = 0;
        for (const auto& [start, node] : inner_) {
            const std::string where = "node " + std::to_string(index++) + ": ";
            if (node.data.empty()) {
                return where + "empty data";
            }
            if (start != node.seg.start_key || node.data.front().key != start ||
                node.seg.end_key != node.data.back().key || node.seg.n_locs != node.data.size()) {
                return where + "segment descriptor does not match its data";
            }
            if (!std::is_sorted(node.data.begin(), node.data.end(), key_order) ||
                !std::is_sorted(node.buffer.begin(), node.buffer.end(), key_order)) {
                return where + "unsorted data or buffer";
            }
            if (!node.buffer.empty() && node.buffer.size() >= std::max<std::uint64_t>(config_.buffer_size, 1)) {
                return where + "buffer reached its capacity without a merge";
            }
            for (std::size_t i = 0; i < node.data.size(); ++i) {
                const Point<Key> p{node.data[i].key, node.seg.start_loc + i};
                if (detail::deviation(node.seg, p) > seg_err.as_real() + kLocationSlack) {
                    return where + "entry " + std::to_string(i) + " exceeds the error bound";
                }
            }
            if (prev != nullptr) {
                if (start < prev->seg.start_key || (strict && start == prev->seg.start_key)) {
                    return where + "start keys out of order";
                }
                if (!node.buffer.empty() && node.buffer.front().key < start) {
                    return where + "buffered key below the segment start";
                }
                if (!prev->buffer.empty() && !(prev->buffer.back().key < start)) {
                    return where + "previous buffer holds a key owned by this segment";
                }
                const Key lowest = node.buffer.empty()
                                       ? node.data.front().key
                                       : std::min(node.data.front().key, node.buffer.front().key);
                if (lowest < prev->max_key() || (strict && lowest == prev->max_key())) {
                    return where + "entries overlap the previous segment";
                }
            }
            if (strict) {
                const auto all = merged(node);
                if (std::adjacent_find(all.begin(), all.end(), [](const auto& a, const auto& b) {
                        return a.key == b.key;
                    }) != all.end()) {
                    return where + "duplicate key in clustered layout";
                }
            }
            total += node.size();
            prev = &node;
        }
        if (total != count_) {
            return "entry count " + std::to_string(count_) + " does not match stored " +
                   std::to_string(total);
        }
        return {};
    }

private:
    using map_type = std::multimap<Key, node_type>;

    static bool key_order(const entry_type& a, const entry_type& b) noexcept {
        return a.key < b.key;
    }

    static std::vector<entry_type> merged(const node_type& node) {
        std::vector<entry_type> out;
        out.reserve(node.size());
        std::merge(node.data.begin(), node.data.end(), node.buffer.begin(), node.buffer.end(),
                   std::back_inserter(out), key_order);
        return out;
    }

    void check_sorted(std::span<const entry_type> entries) const {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (!key_is_valid(entries[i].key)) {
                throw malformed_input_error("non-finite key at index " + std::to_string(i));
            }
            if (i == 0) {
                continue;
            }
            if (entries[i].key < entries[i - 1].key) {
                throw malformed_input_error("entries are not sorted at index " + std::to_string(i));
            }
            if (config_.layout == Layout::clustered && entries[i].key == entries[i - 1].key) {
                throw constraint_error("duplicate key at index " + std::to_string(i) +
                                       " in clustered layout");
            }
        }
    }

    // Last node whose start key is <= key, or the first node for smaller keys.
    typename map_type::iterator route(Key key) {
        auto it = inner_.upper_bound(key);
        if (it != inner_.begin()) {
            --it;
        }
        return it;
    }

    // Node holding the lowest-positioned entry >= key. Differs from route() only
    // when a run of equal keys spans several nodes.
    typename map_type::const_iterator locate(Key key) const {
        auto it = inner_.upper_bound(key);
        if (it != inner_.begin()) {
            --it;
        }
        while (it != inner_.begin() && it->first == key) {
            auto prev = std::prev(it);
            if (prev->second.max_key() < key) {
                break;
            }
            it = prev;
        }
        return it;
    }

    std::vector<const node_type*> split(typename map_type::iterator it) {
        node_type& node = it->second;
        std::vector<entry_type> all = merged(node);
        const auto segs = shrinking_cone_by<Key>(
            std::span<const entry_type>(all), [](const entry_type& e) { return e.key; },
            config_.segmentation_error(), node.seg.start_loc);

        const auto next = inner_.erase(it);
        std::vector<const node_type*> created;
        created.reserve(segs.size());
        std::size_t offset = 0;
        for (const auto& seg : segs) {
            node_type fresh{seg,
                            {all.begin() + static_cast<std::ptrdiff_t>(offset),
                             all.begin() + static_cast<std::ptrdiff_t>(offset + seg.n_locs)},
                            {}};
            auto pos = inner_.emplace_hint(next, seg.start_key, std::move(fresh));
            created.push_back(&pos->second);
            offset += seg.n_locs;
        }
        return created;
    }

    IndexConfig config_{};
    map_type inner_;
    std::size_t count_ = 0;
};

}  // namespace atree
