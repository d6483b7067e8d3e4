#include "atree/index.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace {

using atree::ATree;
using atree::IndexConfig;
using atree::Layout;
using E = atree::Entry<std::uint64_t>;
using Tree = ATree<std::uint64_t>;
using Oracle = atree::testing::SortedArrayOracle<std::uint64_t>;

IndexConfig config(std::uint64_t error, std::uint64_t buffer, Layout layout = Layout::clustered) {
    return IndexConfig{error, buffer, 16, layout};
}

std::vector<E> step_entries(std::size_t n, std::size_t step, std::uint64_t gap) {
    std::vector<E> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(E{(i / step) * gap + i % step, i});
    }
    return out;
}

std::vector<E> unique_random_entries(std::mt19937_64& rng, std::size_t n) {
    auto keys = atree::testing::random_monotone_keys(rng, n, false);
    return atree::testing::positional_entries(keys);
}

void expect_valid(const Tree& tree) {
    const std::string why = tree.check_invariants();
    EXPECT_TRUE(why.empty()) << why;
}

}  // namespace

TEST(IndexConfig, DefaultsAndValidation) {
    const auto cfg = IndexConfig::for_error(100);
    EXPECT_EQ(cfg.buffer_size, 50u);
    EXPECT_EQ(cfg.segmentation_error().value(), 50u);
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_THROW(config(10, 10).validate(), atree::config_error);
    EXPECT_THROW(config(0, 1).validate(), atree::config_error);
    EXPECT_NO_THROW(config(0, 0).validate());
    EXPECT_THROW((IndexConfig{10, 2, 1, Layout::clustered}.validate()), atree::config_error);
    EXPECT_THROW(Tree(config(4, 9)), atree::config_error);
}

TEST(Index, PredictedWindowArithmetic) {
    // Segment starting at key 1000 with slope 0.5; error 6 with buffer 3 leaves 3.
    std::vector<E> data;
    for (std::uint64_t i = 0; i < 20; ++i) {
        data.push_back(E{1000 + 2 * i, i});
    }
    atree::SegmentNode<std::uint64_t> node{{1000, 0, 0.5, 20, 1038}, data, {}};
    const Tree tree = Tree::from_nodes(config(6, 3), {node});
    const auto w = tree.window(*tree.owning_node(1010), 1010);
    EXPECT_DOUBLE_EQ(w.predicted, 5.0);
    EXPECT_EQ(w.first, 2u);
    EXPECT_EQ(w.last, 9u);  // positions 2..8 inclusive
    EXPECT_EQ(tree.lookup(1010), 5u);

    // Windows clamp at both ends of the segment.
    const auto low = tree.window(*tree.owning_node(900), 900);
    EXPECT_EQ(low.first, 0u);
    EXPECT_EQ(low.last, 4u);
    const auto high = tree.window(*tree.owning_node(5000), 5000);
    EXPECT_EQ(high.first, 16u);
    EXPECT_EQ(high.last, 20u);
}

TEST(Index, LinearKeysBulkLoadIntoOneSegment) {
    std::vector<E> entries;
    for (std::uint64_t i = 0; i < 1'000'000; ++i) {
        entries.push_back(E{5 + 7 * i, i});
    }
    const Tree tree = Tree::bulk_load(entries, IndexConfig::for_error(100));
    EXPECT_EQ(tree.segment_count(), 1u);
    EXPECT_EQ(tree.size(), entries.size());
    EXPECT_EQ(tree.lookup(5 + 7 * 123'456), 123'456u);
    EXPECT_FALSE(tree.lookup(6).has_value());
}

TEST(Index, StepDataSegmentsPerStepOrOne) {
    const auto entries = step_entries(1000, 100, 1'000'000);
    EXPECT_EQ(Tree::bulk_load(entries, config(200, 0)).segment_count(), 1u);
    EXPECT_EQ(Tree::bulk_load(entries, config(50, 0)).segment_count(), 10u);
    EXPECT_EQ(Tree::bulk_load(entries, config(50, 0)).stats().n_segments, 10u);
}

TEST(Index, PartitionCoversEveryEntry) {
    std::mt19937_64 rng(3);
    const auto entries = unique_random_entries(rng, 50'000);
    const Tree tree = Tree::bulk_load(entries, IndexConfig::for_error(32));
    std::uint64_t covered = 0;
    std::uint64_t expected_loc = 0;
    tree.for_each_node([&](const atree::SegmentNode<std::uint64_t>& node) {
        EXPECT_EQ(node.seg.start_loc, expected_loc);
        expected_loc += node.seg.n_locs;
        covered += node.seg.n_locs;
    });
    EXPECT_EQ(covered, entries.size());
    EXPECT_EQ(tree.entries(), entries);
    expect_valid(tree);
}

TEST(Index, BulkLoadRejectsBadInput) {
    const std::vector<E> unsorted{{2, 0}, {1, 1}};
    EXPECT_THROW(Tree::bulk_load(unsorted, config(4, 2)), atree::malformed_input_error);
    const std::vector<E> dup{{1, 0}, {1, 1}};
    EXPECT_THROW(Tree::bulk_load(dup, config(4, 2)), atree::constraint_error);
    EXPECT_NO_THROW(Tree::bulk_load(dup, config(4, 2, Layout::non_clustered)));
    const std::vector<atree::Entry<double>> nan{{0.0, 0}, {std::nan(""), 1}};
    EXPECT_THROW(ATree<double>::bulk_load(nan, config(4, 2)), atree::malformed_input_error);
    const Tree empty = Tree::bulk_load({}, config(4, 2));
    EXPECT_TRUE(empty.empty());
    EXPECT_FALSE(empty.lookup(3).has_value());
    EXPECT_TRUE(empty.range(0, 10).empty());
}

TEST(Index, LookupsMatchOracle) {
    std::mt19937_64 rng(17);
    const auto entries = unique_random_entries(rng, 200'000);
    const Oracle oracle(entries);
    for (std::uint64_t e : {0u, 8u, 100u, 1000u}) {
        const Tree tree = Tree::bulk_load(entries, IndexConfig::for_error(e));
        std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
        for (int q = 0; q < 100'000; ++q) {
            const auto& probe = entries[pick(rng)];
            ASSERT_EQ(tree.lookup(probe.key), oracle.lookup(probe.key));
        }
        const std::uint64_t lo = entries.front().key;
        const std::uint64_t hi = entries.back().key + 10;
        std::uniform_int_distribution<std::uint64_t> any(lo > 10 ? lo - 10 : 0, hi);
        for (int q = 0; q < 100'000; ++q) {
            const std::uint64_t k = any(rng);
            ASSERT_EQ(tree.lookup(k), oracle.lookup(k)) << "key " << k;
        }
    }
}

TEST(Index, SuccessfulLookupsStayInsideTheBoundedWindow) {
    std::mt19937_64 rng(23);
    const auto entries = unique_random_entries(rng, 50'000);
    for (std::uint64_t e : {2u, 20u, 200u}) {
        const Tree tree = Tree::bulk_load(entries, IndexConfig::for_error(e));
        const std::uint64_t budget = tree.config().segmentation_error().value();
        for (std::size_t i = 0; i < entries.size(); i += 7) {
            const auto* node = tree.owning_node(entries[i].key);
            const auto w = tree.window(*node, entries[i].key);
            ASSERT_LE(w.size(), 2 * budget + 1);
            const auto pos = static_cast<std::size_t>(entries[i].payload - node->seg.start_loc);
            ASSERT_GE(pos, w.first);
            ASSERT_LT(pos, w.last);
        }
    }
}

TEST(Index, RangesMatchOracle) {
    std::mt19937_64 rng(29);
    const auto entries = unique_random_entries(rng, 100'000);
    const Oracle oracle(entries);
    const Tree tree = Tree::bulk_load(entries, IndexConfig::for_error(64));
    EXPECT_EQ(tree.range(0, UINT64_MAX), entries);
    EXPECT_EQ(tree.range(0, UINT64_MAX).size(), tree.size());
    std::uniform_int_distribution<std::uint64_t> any(0, entries.back().key + 100);
    for (int q = 0; q < 10'000; ++q) {
        std::uint64_t a = any(rng);
        std::uint64_t b = a + std::uniform_int_distribution<std::uint64_t>(0, 50'000)(rng);
        ASSERT_EQ(tree.range(a, b), oracle.range(a, b));
    }
    EXPECT_THROW(tree.range(10, 9), atree::malformed_input_error);
}

TEST(Index, EmptyRangeBetweenAdjacentKeys) {
    const std::vector<E> entries{{10, 0}, {20, 1}, {30, 2}};
    const Tree tree = Tree::bulk_load(entries, config(2, 1));
    EXPECT_TRUE(tree.range(11, 19).empty());
    EXPECT_EQ(tree.range(10, 10).size(), 1u);
    EXPECT_EQ(tree.range(0, 9).size(), 0u);
    EXPECT_EQ(tree.range(31, 100).size(), 0u);
}

TEST(Index, InsertLandsInTheBufferAndIsFoundImmediately) {
    const auto entries = step_entries(1000, 100, 1'000'000);
    Tree tree = Tree::bulk_load(entries, config(100, 50));
    const auto outcome = tree.insert(E{500'050, 777});
    EXPECT_FALSE(outcome.merged);
    EXPECT_EQ(tree.owning_node(500'050)->buffer.size(), 1u);
    EXPECT_EQ(tree.lookup(500'050), 777u);
    EXPECT_EQ(tree.size(), 1001u);
    expect_valid(tree);
}

TEST(Index, FourthInsertTriggersTheSplit) {
    std::vector<E> entries;
    for (std::uint64_t i = 0; i < 100; ++i) {
        entries.push_back(E{i * 10, i});
    }
    Tree tree = Tree::bulk_load(entries, config(10, 4));
    ASSERT_EQ(tree.segment_count(), 1u);
    for (std::uint64_t k : {1u, 2u, 3u}) {
        EXPECT_FALSE(tree.insert(E{k, 1000 + k}).merged);
    }
    const auto outcome = tree.insert(E{4, 1004});
    ASSERT_TRUE(outcome.merged);
    ASSERT_FALSE(outcome.created.empty());
    tree.for_each_node([&](const atree::SegmentNode<std::uint64_t>& node) {
        EXPECT_TRUE(node.buffer.empty());
        std::vector<atree::Point<std::uint64_t>> pts;
        for (std::size_t i = 0; i < node.data.size(); ++i) {
            pts.push_back({node.data[i].key, node.seg.start_loc + i});
        }
        EXPECT_TRUE(atree::validate_segment<std::uint64_t>(pts, node.seg, atree::ErrorThreshold(6)));
    });
    for (std::uint64_t k : {1u, 2u, 3u, 4u}) {
        EXPECT_EQ(tree.lookup(k), 1000 + k);
    }
    expect_valid(tree);
}

TEST(Index, ClusteredRejectsDuplicateInsert) {
    const std::vector<E> entries{{10, 0}, {20, 1}};
    Tree tree = Tree::bulk_load(entries, config(4, 2));
    EXPECT_THROW(tree.insert(E{10, 5}), atree::constraint_error);
    tree.insert(E{15, 5});
    EXPECT_THROW(tree.insert(E{15, 6}), atree::constraint_error);
    EXPECT_EQ(tree.size(), 3u);
}

TEST(Index, InsertIntoEmptyTree) {
    Tree tree(config(8, 4));
    tree.insert(E{42, 1});
    EXPECT_EQ(tree.size(), 1u);
    EXPECT_EQ(tree.segment_count(), 1u);
    EXPECT_EQ(tree.lookup(42), 1u);
    for (std::uint64_t k = 0; k < 100; ++k) {
        if (k != 42) {
            tree.insert(E{k, k + 100});
        }
    }
    EXPECT_EQ(tree.size(), 100u);
    for (std::uint64_t k = 0; k < 100; ++k) {
        EXPECT_EQ(tree.lookup(k), k == 42 ? 1u : k + 100);
    }
    expect_valid(tree);
}

TEST(Index, ZeroBufferMergesEveryInsert) {
    std::vector<E> entries;
    for (std::uint64_t i = 0; i < 50; ++i) {
        entries.push_back(E{i * 2, i});
    }
    Tree tree = Tree::bulk_load(entries, config(0, 0));
    EXPECT_TRUE(tree.insert(E{3, 99}).merged);
    EXPECT_EQ(tree.lookup(3), 99u);
    expect_valid(tree);
}

TEST(Index, NonClusteredDuplicateRunsAcrossSegments) {
    // 300 copies of one key cannot fit one segment at error 10.
    std::vector<E> entries;
    for (std::uint64_t i = 0; i < 50; ++i) {
        entries.push_back(E{i, entries.size()});
    }
    for (std::uint64_t i = 0; i < 300; ++i) {
        entries.push_back(E{1000, entries.size()});
    }
    for (std::uint64_t i = 0; i < 50; ++i) {
        entries.push_back(E{2000 + i, entries.size()});
    }
    Tree tree = Tree::bulk_load(entries, config(10, 5, Layout::non_clustered));
    EXPECT_GT(tree.segment_count(), 3u);
    EXPECT_EQ(tree.lookup(1000), 50u);  // lowest position wins
    const auto run = tree.range(1000, 1000);
    ASSERT_EQ(run.size(), 300u);
    for (std::size_t i = 0; i < run.size(); ++i) {
        EXPECT_EQ(run[i].payload, 50 + i);
    }
    Oracle oracle(entries);
    for (std::uint64_t i = 0; i < 40; ++i) {
        const E e{1000, 10'000 + i};
        tree.insert(e);
        oracle.insert(e);
    }
    EXPECT_EQ(tree.range(0, UINT64_MAX), oracle.entries());
    EXPECT_EQ(tree.lookup(1000), 50u);
    expect_valid(tree);
}

TEST(Index, InterleavedOperationsMatchOracle) {
    for (const Layout layout : {Layout::clustered, Layout::non_clustered}) {
        std::mt19937_64 rng(layout == Layout::clustered ? 41 : 43);
        std::vector<E> base;
        for (std::uint64_t i = 0; i < 5000; ++i) {
            base.push_back(E{i * 40, i});
        }
        Tree tree = Tree::bulk_load(base, config(16, 4, layout));
        Oracle oracle(base);
        std::uniform_int_distribution<std::uint64_t> key_dist(0, 210'000);
        std::uniform_int_distribution<int> op(0, 9);
        std::uint64_t splits = 0;
        for (int step = 0; step < 20'000; ++step) {
            const int o = op(rng);
            const std::uint64_t k = layout == Layout::clustered ? key_dist(rng) : key_dist(rng) / 50;
            if (o < 5) {
                const E e{k, 1'000'000 + static_cast<std::uint64_t>(step)};
                if (layout == Layout::clustered && oracle.contains(k)) {
                    EXPECT_THROW(tree.insert(e), atree::constraint_error);
                    continue;
                }
                splits += tree.insert(e).merged ? 1 : 0;
                oracle.insert(e);
            } else if (o < 8) {
                ASSERT_EQ(tree.lookup(k), oracle.lookup(k)) << "step " << step;
            } else {
                const std::uint64_t hi = k + std::uniform_int_distribution<std::uint64_t>(0, 2000)(rng);
                ASSERT_EQ(tree.range(k, hi), oracle.range(k, hi)) << "step " << step;
            }
        }
        EXPECT_GT(splits, 100u);
        EXPECT_EQ(tree.range(0, UINT64_MAX), oracle.entries());
        EXPECT_EQ(tree.size(), oracle.size());
        expect_valid(tree);
    }
}

TEST(Index, KeysBelowTheFirstSegment) {
    std::vector<E> entries;
    for (std::uint64_t i = 0; i < 100; ++i) {
        entries.push_back(E{1000 + i, i});
    }
    Tree tree = Tree::bulk_load(entries, config(8, 4));
    tree.insert(E{5, 500});
    tree.insert(E{3, 300});
    EXPECT_EQ(tree.lookup(5), 500u);
    EXPECT_EQ(tree.range(0, 999).size(), 2u);
    EXPECT_EQ(tree.range(0, 999)[0].key, 3u);
    expect_valid(tree);
}

TEST(Index, StatsAccounting) {
    const Tree one = Tree::bulk_load(step_entries(1000, 100, 1'000'000), config(200, 0));
    const auto s1 = one.stats();
    EXPECT_EQ(s1.n_segments, 1u);
    EXPECT_EQ(s1.measured_bytes, 24u);

    const Tree many = Tree::bulk_load(step_entries(100 * 1000, 100, 1'000'000), config(50, 0));
    const auto s = many.stats();
    EXPECT_EQ(s.n_segments, 1000u);
    EXPECT_EQ(s.segment_bytes, 24'000u);
    // 63 leaf nodes, then 4, then 1: (63 + 4) * 16 bytes of separators/children.
    EXPECT_EQ(s.tree_bytes, (63u + 4u) * 16u);
    EXPECT_EQ(s.measured_bytes, s.segment_bytes + s.tree_bytes);
    EXPECT_NEAR(s.leaf_fill, 1000.0 / (63.0 * 16.0), 1e-12);
}

TEST(Index, FromNodesRejectsInconsistentStructure) {
    std::vector<E> data{{0, 0}, {1, 1}, {2, 2}};
    atree::SegmentNode<std::uint64_t> good{{0, 0, 1.0, 3, 2}, data, {}};
    EXPECT_NO_THROW(Tree::from_nodes(config(2, 1), {good}));

    auto bad_slope = good;
    bad_slope.seg.slope = 5.0;
    EXPECT_THROW(Tree::from_nodes(config(2, 1), {bad_slope}), atree::malformed_input_error);

    auto bad_count = good;
    bad_count.seg.n_locs = 2;
    EXPECT_THROW(Tree::from_nodes(config(2, 1), {bad_count}), atree::malformed_input_error);

    atree::SegmentNode<std::uint64_t> second{{1, 3, 1.0, 1, 1}, {{1, 3}}, {}};
    EXPECT_THROW(Tree::from_nodes(config(2, 1), {good, second}), atree::malformed_input_error);
}

TEST(Index, ConcurrentReadersAgree) {
    std::mt19937_64 rng(51);
    const auto entries = unique_random_entries(rng, 100'000);
    const Tree tree = Tree::bulk_load(entries, IndexConfig::for_error(64));
    std::atomic<std::size_t> mismatches{0};
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t) {
        readers.emplace_back([&, t] {
            for (std::size_t i = static_cast<std::size_t>(t); i < entries.size(); i += 4) {
                if (tree.lookup(entries[i].key) != entries[i].payload) {
                    ++mismatches;
                }
            }
        });
    }
    for (auto& r : readers) {
        r.join();
    }
    EXPECT_EQ(mismatches.load(), 0u);
}
