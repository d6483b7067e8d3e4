#include "atree/cost_model.hpp"
#include "atree/index.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

namespace {

using atree::CostParams;
using atree::ErrorThreshold;
using atree::SegmentCountProfile;

constexpr double kInf = std::numeric_limits<double>::infinity();

SegmentCountProfile profile_of(std::initializer_list<std::pair<const std::uint64_t, std::uint64_t>> s) {
    SegmentCountProfile p;
    p.samples = s;
    return p;
}

CostParams params_with_buffer(std::uint64_t buff) {
    CostParams p;
    p.buffer_size = buff;
    return p;
}

std::vector<atree::Point<std::uint64_t>> step_points(std::size_t n, std::size_t step) {
    std::vector<atree::Point<std::uint64_t>> pts;
    for (std::size_t i = 0; i < n; ++i) {
        pts.push_back({(i / step) * 1'000'000 + i % step, i});
    }
    return pts;
}

// Brute-force selectors written directly from the constraint definitions.
std::optional<std::uint64_t> enumerate_latency(double limit, const std::vector<ErrorThreshold>& cands,
                                               const SegmentCountProfile& p, const CostParams& params) {
    std::optional<std::uint64_t> best;
    for (const auto e : cands) {
        if (atree::latency_estimate(e, p, params) > limit) {
            continue;
        }
        if (!best) {
            best = e.value();
            continue;
        }
        const double s = atree::size_estimate(e, p, params);
        const double b = atree::size_estimate(ErrorThreshold(*best), p, params);
        if (s < b || (s == b && e.value() > *best)) {
            best = e.value();
        }
    }
    return best;
}

std::optional<std::uint64_t> enumerate_budget(double budget, const std::vector<ErrorThreshold>& cands,
                                              const SegmentCountProfile& p, const CostParams& params) {
    std::optional<std::uint64_t> best;
    for (const auto e : cands) {
        if (atree::size_estimate(e, p, params) > budget) {
            continue;
        }
        if (!best) {
            best = e.value();
            continue;
        }
        const double l = atree::latency_estimate(e, p, params);
        const double b = atree::latency_estimate(ErrorThreshold(*best), p, params);
        if (l < b || (l == b && e.value() < *best)) {
            best = e.value();
        }
    }
    return best;
}

}  // namespace

TEST(CostParams, Validation) {
    EXPECT_NO_THROW(CostParams{}.validate());
    CostParams p;
    p.c_ns = 0;
    EXPECT_THROW(p.validate(), atree::config_error);
    p = CostParams{};
    p.fanout = 1;
    EXPECT_THROW(p.validate(), atree::config_error);
    p = CostParams{};
    p.fill = 0;
    EXPECT_THROW(p.validate(), atree::config_error);
    p.fill = 1.5;
    EXPECT_THROW(p.validate(), atree::config_error);
}

TEST(LatencyEstimate, AllLogTermsVanish) {
    EXPECT_EQ(atree::latency_estimate(ErrorThreshold(1), profile_of({{1, 1}}), params_with_buffer(1)), 0.0);
    EXPECT_EQ(atree::latency_estimate(ErrorThreshold(0), profile_of({{0, 1}}), params_with_buffer(0)), 0.0);
}

TEST(LatencyEstimate, FormulaArithmetic) {
    // 50 * (log16 4096 + log2 1024 + log2 64) = 50 * (3 + 10 + 6).
    const auto p = profile_of({{1024, 4096}});
    EXPECT_NEAR(atree::latency_estimate(ErrorThreshold(1024), p, params_with_buffer(64)), 950.0, 1e-9);
    // Default buffer is half the error: log2 512 = 9.
    EXPECT_NEAR(atree::latency_estimate(ErrorThreshold(1024), p, CostParams{}), 50.0 * (3 + 10 + 9), 1e-9);
}

TEST(LatencyEstimate, MissingSample) {
    EXPECT_THROW(atree::latency_estimate(ErrorThreshold(7), profile_of({{8, 2}}), CostParams{}),
                 atree::missing_sample_error);
    EXPECT_THROW(atree::size_estimate(ErrorThreshold(7), profile_of({{8, 2}}), CostParams{}),
                 atree::missing_sample_error);
    EXPECT_THROW(atree::insert_latency_estimate(ErrorThreshold(7), profile_of({{8, 2}}), CostParams{}),
                 atree::missing_sample_error);
}

TEST(SizeEstimate, FormulaArithmetic) {
    EXPECT_EQ(atree::size_estimate(ErrorThreshold(5), profile_of({{5, 1}}), CostParams{}), 24.0);
    // 0.5 * 4096 * 3 * 16 + 4096 * 24.
    EXPECT_NEAR(atree::size_estimate(ErrorThreshold(77), profile_of({{77, 4096}}), CostParams{}),
                196'608.0, 1e-6);
}

TEST(CostModel, Monotonicity) {
    const CostParams params = params_with_buffer(8);
    double prev_lat = -1;
    double prev_size = -1;
    for (std::uint64_t s = 1; s < 100'000; s = s * 3 + 1) {
        const auto p = profile_of({{32, s}});
        const double lat = atree::latency_estimate(ErrorThreshold(32), p, params);
        const double size = atree::size_estimate(ErrorThreshold(32), p, params);
        EXPECT_GE(lat, prev_lat);
        EXPECT_GE(size, prev_size);
        prev_lat = lat;
        prev_size = size;
    }
    prev_lat = -1;
    for (std::uint64_t e = 0; e < 5000; e = e * 2 + 1) {
        const auto p = profile_of({{e, 100}});
        const double lat = atree::latency_estimate(ErrorThreshold(e), p, params);
        EXPECT_GE(lat, prev_lat);
        prev_lat = lat;
    }
}

TEST(ProfileSegments, LinearAndStepData) {
    std::vector<atree::Point<std::uint64_t>> linear;
    for (std::uint64_t i = 0; i < 100'000; ++i) {
        linear.push_back({i * 3, i});
    }
    const std::vector<ErrorThreshold> cands{ErrorThreshold(10), ErrorThreshold(100), ErrorThreshold(1000)};
    const auto lp = atree::profile_segments<std::uint64_t>(linear, cands);
    for (const auto e : cands) {
        EXPECT_EQ(lp.segments_at(e), 1u);
    }
    EXPECT_EQ(lp.n_entries, 100'000u);

    const auto sp = atree::profile_segments<std::uint64_t>(
        step_points(1000, 100), std::vector{ErrorThreshold(50), ErrorThreshold(200)});
    EXPECT_EQ(sp.segments_at(ErrorThreshold(50)), 10u);
    EXPECT_EQ(sp.segments_at(ErrorThreshold(200)), 1u);

    EXPECT_THROW(atree::profile_segments<std::uint64_t>(linear, std::vector<ErrorThreshold>{}),
                 atree::config_error);
}

TEST(ProfileSegments, FuzzedProfilesDoNotGrowWithError) {
    std::mt19937_64 rng(1234);
    std::vector<ErrorThreshold> cands;
    for (std::uint64_t e : {0u, 1u, 2u, 4u, 8u, 16u, 32u, 64u, 128u, 256u, 512u, 1024u}) {
        cands.emplace_back(e);
    }
    int growing = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto pts = atree::testing::random_points(rng, 5000, trial % 2 == 0);
        const auto profile = atree::profile_segments<std::uint64_t>(pts, cands);
        growing += profile.is_non_increasing() ? 0 : 1;
    }
    EXPECT_EQ(growing, 0);
}

TEST(Selectors, UnboundedConstraintsPickTheGlobalOptimum) {
    const auto p = profile_of({{4, 5000}, {16, 900}, {64, 300}, {256, 40}});
    const auto cands = p.errors();
    const CostParams params;
    EXPECT_EQ(atree::pick_error_for_latency(kInf, cands, p, params).value(), 256u);
    std::uint64_t fastest = 0;
    double best = kInf;
    for (const auto e : cands) {
        const double l = atree::latency_estimate(e, p, params);
        if (l < best) {
            best = l;
            fastest = e.value();
        }
    }
    EXPECT_EQ(atree::pick_error_for_budget(kInf, cands, p, params).value(), fastest);
}

TEST(Selectors, InfeasibleConstraintsReportTheBestAchievable) {
    const auto p = profile_of({{4, 5000}, {16, 900}, {64, 300}});
    const auto cands = p.errors();
    const CostParams params;
    try {
        atree::pick_error_for_latency(1.0, cands, p, params);
        FAIL() << "expected infeasible";
    } catch (const atree::infeasible_error& e) {
        double fastest = kInf;
        for (const auto c : cands) {
            fastest = std::min(fastest, atree::latency_estimate(c, p, params));
        }
        EXPECT_EQ(e.best_achievable(), fastest);
    }
    try {
        atree::pick_error_for_budget(10.0, cands, p, params);
        FAIL() << "expected infeasible";
    } catch (const atree::infeasible_error& e) {
        EXPECT_EQ(e.best_achievable(), atree::size_estimate(ErrorThreshold(64), p, params));
    }
    EXPECT_THROW(atree::pick_error_for_latency(kInf, std::vector<ErrorThreshold>{}, p, params),
                 atree::config_error);
}

TEST(Selectors, TiesBreakByError) {
    // Identical segment counts: equal sizes favour the larger error.
    const auto p = profile_of({{8, 10}, {16, 10}});
    const CostParams params = params_with_buffer(1);
    EXPECT_EQ(atree::pick_error_for_latency(kInf, p.errors(), p, params).value(), 16u);
    // Errors 0 and 1 both cost nothing in the segment term: equal latency favours the smaller error.
    const auto q = profile_of({{0, 10}, {1, 10}});
    EXPECT_EQ(atree::pick_error_for_budget(kInf, q.errors(), q, params).value(), 0u);
}

TEST(Selectors, StepDataProfileMatchesEnumeration) {
    const std::vector<ErrorThreshold> cands{ErrorThreshold(20), ErrorThreshold(50), ErrorThreshold(200)};
    const auto p = atree::profile_segments<std::uint64_t>(step_points(100'000, 100), cands);
    const CostParams params;
    for (double limit : {0.0, 300.0, 500.0, 700.0, 900.0, kInf}) {
        const auto expected = enumerate_latency(limit, cands, p, params);
        if (expected) {
            EXPECT_EQ(atree::pick_error_for_latency(limit, cands, p, params).value(), *expected);
        } else {
            EXPECT_THROW(atree::pick_error_for_latency(limit, cands, p, params), atree::infeasible_error);
        }
    }
    for (double budget : {10.0, 30.0, 1000.0, 30'000.0, kInf}) {
        const auto expected = enumerate_budget(budget, cands, p, params);
        if (expected) {
            EXPECT_EQ(atree::pick_error_for_budget(budget, cands, p, params).value(), *expected);
        } else {
            EXPECT_THROW(atree::pick_error_for_budget(budget, cands, p, params), atree::infeasible_error);
        }
    }
}

TEST(Selectors, RandomProfilesMatchEnumeration) {
    std::mt19937_64 rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
        SegmentCountProfile p;
        std::uint64_t s = std::uniform_int_distribution<std::uint64_t>(1, 1'000'000)(rng);
        std::vector<ErrorThreshold> cands;
        for (int i = 0; i < 8; ++i) {
            const std::uint64_t e = std::uniform_int_distribution<std::uint64_t>(0, 4096)(rng);
            if (p.samples.emplace(e, s).second) {
                cands.emplace_back(e);
            }
        }
        CostParams params;
        params.c_ns = std::uniform_real_distribution<double>(10, 200)(rng);
        const double limit = std::uniform_real_distribution<double>(0, 2000)(rng);
        const double budget = std::uniform_real_distribution<double>(0, 1e7)(rng);
        const auto el = enumerate_latency(limit, cands, p, params);
        const auto eb = enumerate_budget(budget, cands, p, params);
        if (el) {
            EXPECT_EQ(atree::pick_error_for_latency(limit, cands, p, params).value(), *el);
        } else {
            EXPECT_THROW(atree::pick_error_for_latency(limit, cands, p, params), atree::infeasible_error);
        }
        if (eb) {
            EXPECT_EQ(atree::pick_error_for_budget(budget, cands, p, params).value(), *eb);
        } else {
            EXPECT_THROW(atree::pick_error_for_budget(budget, cands, p, params), atree::infeasible_error);
        }
    }
}

TEST(InsertEstimate, DescentFreeWithTinyBuffer) {
    const auto p = profile_of({{4, 1}});
    // No descent, and a one-slot buffer shifts half an entry on average.
    EXPECT_NEAR(atree::insert_latency_estimate(ErrorThreshold(4), p, params_with_buffer(1)),
                50.0 * 0.5 * 0.25, 1e-12);
}

TEST(InsertEstimate, AmortizedSplitIsMergeCostOverBuffer) {
    auto p = profile_of({{100, 1000}});
    p.n_entries = 1'000'000;
    const CostParams params = params_with_buffer(50);
    // d = 10^6 / 1000 + 50 = 1050 entries, merge cost c * d * shift, spread over 50 inserts.
    EXPECT_NEAR(atree::amortized_split_estimate(ErrorThreshold(100), p, params), 50.0 * 1050 * 0.25 / 50,
                1e-9);
}

TEST(CostModel, SizeEstimateBoundsMeasuredBytes) {
    for (std::size_t segments : {1u, 2u, 15u, 16u, 17u, 100u, 257u, 4096u, 5000u, 70'000u}) {
        std::vector<atree::Entry<std::uint64_t>> entries;
        for (std::size_t i = 0; i < segments * 4; ++i) {
            entries.push_back({(i / 4) * 1'000'000 + i % 4, i});
        }
        // Error 1 splits every four-key plateau into its own segment.
        const auto tree = atree::ATree<std::uint64_t>::bulk_load(
            entries, atree::IndexConfig{1, 0, 16, atree::Layout::clustered});
        ASSERT_EQ(tree.segment_count(), segments);
        const auto profile = profile_of({{1, segments}});
        EXPECT_GE(atree::size_estimate(ErrorThreshold(1), profile, CostParams{}),
                  static_cast<double>(tree.stats().measured_bytes))
            << segments << " segments";
    }
}

TEST(ProfileCsv, RoundTripAndErrors) {
    const auto p = profile_of({{10, 500}, {100, 40}, {1000, 3}});
    std::ostringstream out;
    atree::write_profile_csv(p, out);
    EXPECT_EQ(out.str(), "error,segment_count\n10,500\n100,40\n1000,3\n");
    std::istringstream in(out.str());
    EXPECT_EQ(atree::read_profile_csv(in).samples, p.samples);

    std::istringstream bad("error,segment_count\n10,5\nx,3\n");
    try {
        atree::read_profile_csv(bad);
        FAIL();
    } catch (const atree::malformed_input_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    std::istringstream zero("1,0\n");
    EXPECT_THROW(atree::read_profile_csv(zero), atree::malformed_input_error);
    std::istringstream dup("1,4\n1,5\n");
    EXPECT_THROW(atree::read_profile_csv(dup), atree::malformed_input_error);
    std::istringstream empty("error,segment_count\n");
    EXPECT_THROW(atree::read_profile_csv(empty), atree::empty_input_error);
}
