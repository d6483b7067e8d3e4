#pragma once

// Exact comparison structures for the benchmarks. Each exposes the same surface
// as ATree: lookup (lowest-position match), range, insert, and an index byte count
// under the conventions of accounting.hpp.

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atree/accounting.hpp"
#include "atree/index.hpp"

namespace atree::bench {

namespace detail {

template <IndexKey Key>
void check_entries(std::span<const Entry<Key>> entries, Layout layout) {
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].key < entries[i - 1].key) {
            throw malformed_input_error("entries are not sorted at index " + std::to_string(i));
        }
        if (layout == Layout::clustered && entries[i].key == entries[i - 1].key) {
            throw constraint_error("duplicate key at index " + std::to_string(i) + " in clustered layout");
        }
    }
}

template <IndexKey Key>
auto lower_entry(const std::vector<Entry<Key>>& v, Key k) {
    return std::lower_bound(v.begin(), v.end(), k,
                            [](const Entry<Key>& e, Key key) { return e.key < key; });
}

template <IndexKey Key>
auto upper_entry(const std::vector<Entry<Key>>& v, Key k) {
    return std::upper_bound(v.begin(), v.end(), k,
                            [](Key key, const Entry<Key>& e) { return key < e.key; });
}

}  // namespace detail

// Dense index: one ordered-map slot per key.
template <IndexKey Key>
class FullIndex {
public:
    FullIndex(std::span<const Entry<Key>> entries, Layout layout = Layout::clustered,
              std::uint64_t fanout = 16)
        : layout_(layout), fanout_(fanout) {
        detail::check_entries(entries, layout);
        for (const auto& e : entries) {
            map_.emplace_hint(map_.end(), e.key, e.payload);
        }
    }

    static std::string name() { return "full"; }

    std::optional<std::uint64_t> lookup(Key key) const {
        const auto it = map_.lower_bound(key);
        if (it == map_.end() || it->first != key) {
            return std::nullopt;
        }
        return it->second;
    }

    std::vector<Entry<Key>> range(Key lo, Key hi) const {
        if (hi < lo) {
            throw malformed_input_error("range lower bound exceeds upper bound");
        }
        std::vector<Entry<Key>> out;
        for (auto it = map_.lower_bound(lo); it != map_.end() && !(hi < it->first); ++it) {
            out.push_back(Entry<Key>{it->first, it->second});
        }
        return out;
    }

    void insert(const Entry<Key>& e) {
        if (layout_ == Layout::clustered && map_.find(e.key) != map_.end()) {
            throw constraint_error("duplicate key in clustered index");
        }
        map_.emplace_hint(map_.upper_bound(e.key), e.key, e.payload);
    }

    std::size_t size() const noexcept { return map_.size(); }
    std::uint64_t unit_count() const noexcept { return map_.size(); }

    std::uint64_t index_bytes() const {
        const std::uint64_t n = map_.size();
        return n * kTreeSlotBytes + packed_tree_footprint(n, fanout_).inner_bytes;
    }

private:
    Layout layout_;
    std::uint64_t fanout_;
    std::multimap<Key, std::uint64_t> map_;
};

// Sparse index over fixed-size pages: the first key of each page goes into an
// ordered map and a lookup binary-searches the whole page. Each page carries an
// insert buffer of half the page size; a full buffer is merged into the page and
// the page is cut in two halves once it exceeds page_size.
template <IndexKey Key>
class FixedPaging {
public:
    struct Page {
        std::vector<Entry<Key>> data;
        std::vector<Entry<Key>> buffer;

        Key max_key() const noexcept {
            const Key d = data.back().key;
            return buffer.empty() ? d : std::max(d, buffer.back().key);
        }
    };

    FixedPaging(std::span<const Entry<Key>> entries, std::uint64_t page_size,
                Layout layout = Layout::clustered, std::uint64_t fanout = 16)
        : page_size_(page_size), layout_(layout), fanout_(fanout) {
        if (page_size == 0) {
            throw config_error("page size must be at least 1");
        }
        detail::check_entries(entries, layout);
        for (std::size_t i = 0; i < entries.size(); i += page_size) {
            const std::size_t end = std::min<std::size_t>(entries.size(), i + page_size);
            Page p{{entries.begin() + static_cast<std::ptrdiff_t>(i),
                    entries.begin() + static_cast<std::ptrdiff_t>(end)},
                   {}};
            pages_.emplace_hint(pages_.end(), entries[i].key, std::move(p));
        }
        count_ = entries.size();
    }

    static std::string name() { return "fixed"; }

    std::uint64_t page_size() const noexcept { return page_size_; }
    std::uint64_t buffer_capacity() const noexcept { return std::max<std::uint64_t>(1, page_size_ / 2); }

    std::optional<std::uint64_t> lookup(Key key) const {
        if (pages_.empty()) {
            return std::nullopt;
        }
        const Page& page = locate(key)->second;
        const auto it = detail::lower_entry(page.data, key);
        if (it != page.data.end() && it->key == key) {
            return it->payload;
        }
        const auto b = detail::lower_entry(page.buffer, key);
        if (b != page.buffer.end() && b->key == key) {
            return b->payload;
        }
        return std::nullopt;
    }

    std::vector<Entry<Key>> range(Key lo, Key hi) const {
        if (hi < lo) {
            throw malformed_input_error("range lower bound exceeds upper bound");
        }
        std::vector<Entry<Key>> out;
        if (pages_.empty()) {
            return out;
        }
        for (auto it = locate(lo); it != pages_.end(); ++it) {
            std::vector<Entry<Key>> all;
            std::merge(it->second.data.begin(), it->second.data.end(), it->second.buffer.begin(),
                       it->second.buffer.end(), std::back_inserter(all),
                       [](const Entry<Key>& a, const Entry<Key>& b) { return a.key < b.key; });
            for (auto e = detail::lower_entry(all, lo); e != all.end(); ++e) {
                if (hi < e->key) {
                    return out;
                }
                out.push_back(*e);
            }
        }
        return out;
    }

    void insert(const Entry<Key>& e) {
        if (layout_ == Layout::clustered && lookup(e.key).has_value()) {
            throw constraint_error("duplicate key in clustered index");
        }
        ++count_;
        if (pages_.empty()) {
            pages_.emplace(e.key, Page{{e}, {}});
            return;
        }
        auto it = pages_.upper_bound(e.key);
        if (it != pages_.begin()) {
            --it;
        }
        auto& buffer = it->second.buffer;
        buffer.insert(detail::upper_entry(buffer, e.key), e);
        if (buffer.size() >= buffer_capacity()) {
            split(it);
        }
    }

    std::size_t size() const noexcept { return count_; }
    std::uint64_t unit_count() const noexcept { return pages_.size(); }

    std::uint64_t index_bytes() const {
        const std::uint64_t p = pages_.size();
        return p * kPageDescriptorBytes + packed_tree_footprint(p, fanout_).inner_bytes;
    }

private:
    using map_type = std::multimap<Key, Page>;

    typename map_type::const_iterator locate(Key key) const {
        auto it = pages_.upper_bound(key);
        if (it != pages_.begin()) {
            --it;
        }
        while (it != pages_.begin() && it->first == key) {
            auto prev = std::prev(it);
            if (prev->second.max_key() < key) {
                break;
            }
            it = prev;
        }
        return it;
    }

    void split(typename map_type::iterator it) {
        std::vector<Entry<Key>> all;
        std::merge(it->second.data.begin(), it->second.data.end(), it->second.buffer.begin(),
                   it->second.buffer.end(), std::back_inserter(all),
                   [](const Entry<Key>& a, const Entry<Key>& b) { return a.key < b.key; });
        const auto next = pages_.erase(it);
        const std::size_t parts = all.size() > page_size_ ? 2 : 1;
        const std::size_t cut = all.size() / parts;
        for (std::size_t p = 0; p < parts; ++p) {
            const std::size_t begin = p * cut;
            const std::size_t end = p + 1 == parts ? all.size() : begin + cut;
            Page page{{all.begin() + static_cast<std::ptrdiff_t>(begin),
                       all.begin() + static_cast<std::ptrdiff_t>(end)},
                      {}};
            pages_.emplace_hint(next, all[begin].key, std::move(page));
        }
    }

    std::uint64_t page_size_;
    Layout layout_;
    std::uint64_t fanout_;
    map_type pages_;
    std::size_t count_ = 0;
};

// One sorted array searched with binary search; no index structure at all.
template <IndexKey Key>
class BinarySearch {
public:
    explicit BinarySearch(std::span<const Entry<Key>> entries, Layout layout = Layout::clustered)
        : layout_(layout), data_(entries.begin(), entries.end()) {
        detail::check_entries(entries, layout);
    }

    static std::string name() { return "binary"; }

    std::optional<std::uint64_t> lookup(Key key) const {
        const auto it = detail::lower_entry(data_, key);
        if (it == data_.end() || it->key != key) {
            return std::nullopt;
        }
        return it->payload;
    }

    std::vector<Entry<Key>> range(Key lo, Key hi) const {
        if (hi < lo) {
            throw malformed_input_error("range lower bound exceeds upper bound");
        }
        return {detail::lower_entry(data_, lo), detail::upper_entry(data_, hi)};
    }

    void insert(const Entry<Key>& e) {
        if (layout_ == Layout::clustered && lookup(e.key).has_value()) {
            throw constraint_error("duplicate key in clustered index");
        }
        data_.insert(detail::upper_entry(data_, e.key), e);
    }

    std::size_t size() const noexcept { return data_.size(); }
    std::uint64_t unit_count() const noexcept { return data_.empty() ? 0 : 1; }
    std::uint64_t index_bytes() const noexcept { return 0; }

private:
    Layout layout_;
    std::vector<Entry<Key>> data_;
};

}  // namespace atree::bench
