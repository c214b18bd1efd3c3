#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "ndvicast/errors.hpp"
#include "ndvicast/rng.hpp"
#include "ndvicast/spatial.hpp"

using namespace ndvicast;
using namespace ndvicast::spatial;

namespace {

LocationSeries constant_series(const std::string& id, GeoPoint p, double v, int months = 3) {
    LocationSeries s{id, p, {}};
    for (int m = 1; m <= months; ++m) s.months.push_back({{2020, m}, v});
    return s;
}

std::set<std::string> ids(const std::vector<LocationSeries>& v) {
    std::set<std::string> out;
    for (const auto& l : v) out.insert(l.location_id);
    return out;
}

std::vector<LocationSeries> random_field(Rng& rng, int n) {
    std::vector<LocationSeries> out;
    for (int i = 0; i < n; ++i) {
        LocationSeries s{"L" + std::to_string(i), {rng.uniform(14, 18), rng.uniform(74, 78)}, {}};
        const double amp = rng.uniform(0.01, 0.4);
        for (int m = 1; m <= 12; ++m) s.months.push_back({{2020, m}, std::clamp(amp * rng.normal(), -1.0, 1.0)});
        out.push_back(s);
    }
    return out;
}

}  // namespace

TEST(Haversine, KnownDistances) {
    EXPECT_EQ(haversine_km({17.33, 76.83}, {17.33, 76.83}), 0.0);
    EXPECT_NEAR(haversine_km({0, 0}, {0, 1}), 111.19, 0.01);
    // Arbitrary-precision evaluation of the same formula.
    EXPECT_NEAR(haversine_km({17.33, 76.83}, {16.21, 77.36}), 136.72475591433484605, 1e-9);
}

TEST(Haversine, SymmetricAndTriangleInequality) {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const GeoPoint a{rng.uniform(-80, 80), rng.uniform(-180, 180)};
        const GeoPoint b{rng.uniform(-80, 80), rng.uniform(-180, 180)};
        const GeoPoint c{rng.uniform(-80, 80), rng.uniform(-180, 180)};
        EXPECT_NEAR(haversine_km(a, b), haversine_km(b, a), 1e-9);
        EXPECT_LE(haversine_km(a, c), haversine_km(a, b) + haversine_km(b, c) + 1e-9);
    }
}

TEST(Smooth, NeighbourhoodMean) {
    std::vector<LocationSeries> locs = {constant_series("a", {0.0, 0.0}, 0.2), constant_series("b", {0.0, 0.1}, 0.4),
                                        constant_series("c", {0.1, 0.0}, 0.6), constant_series("d", {0.1, 0.1}, 0.8)};
    const auto out = smooth_ndvi(locs, 1, 0.1);
    for (const auto& l : out) {
        for (const auto& mv : l.months) EXPECT_NEAR(mv.value, 0.5, 1e-12);
    }
}

TEST(Smooth, RadiusZeroAndConstantField) {
    Rng rng(2);
    auto field = random_field(rng, 30);
    const auto same = smooth_ndvi(field, 0);
    for (std::size_t i = 0; i < field.size(); ++i) {
        for (std::size_t m = 0; m < field[i].months.size(); ++m) {
            EXPECT_EQ(same[i].months[m].value, field[i].months[m].value);
        }
    }
    std::vector<LocationSeries> flat;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) flat.push_back(constant_series("g" + std::to_string(i * 5 + j), {0.5 * i, 0.5 * j}, 0.3));
    }
    for (int r : {1, 2, 4}) {
        for (const auto& l : smooth_ndvi(flat, r)) {
            for (const auto& mv : l.months) EXPECT_NEAR(mv.value, 0.3, 1e-12);
        }
    }
    EXPECT_THROW(smooth_ndvi(flat, -1), ValidationError);
}

TEST(Smooth, StaysInRange) {
    Rng rng(9);
    std::vector<LocationSeries> locs;
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
            LocationSeries s{"g" + std::to_string(i * 10 + j), {0.1 * i, 0.1 * j}, {}};
            for (int m = 1; m <= 4; ++m) s.months.push_back({{2020, m}, rng.uniform() < 0.5 ? -1.0 : 1.0});
            locs.push_back(s);
        }
    }
    for (const auto& l : smooth_ndvi(locs, 2)) {
        for (const auto& mv : l.months) {
            EXPECT_GE(mv.value, -1.0);
            EXPECT_LE(mv.value, 1.0);
        }
    }
}

TEST(BlockCentroids, Counts) {
    std::vector<LocationSeries> one_block = {constant_series("a", {0.1, 0.1}, 0), constant_series("b", {0.2, 0.9}, 0),
                                             constant_series("c", {0.6, 0.4}, 0), constant_series("d", {0.9, 0.9}, 0)};
    const auto rep = block_centroids(one_block, 1.0);
    ASSERT_EQ(rep.size(), 1u);
    EXPECT_EQ(rep[0].location_id, "c");  // closest to (0.5, 0.5)

    std::vector<LocationSeries> three = {constant_series("a", {0.5, 0.5}, 0), constant_series("b", {1.5, 0.5}, 0),
                                         constant_series("c", {2.5, 2.5}, 0), constant_series("d", {2.2, 2.8}, 0)};
    EXPECT_EQ(block_centroids(three, 1.0).size(), 3u);

    std::vector<LocationSeries> single = {constant_series("only", {3.3, 4.4}, 0.1)};
    EXPECT_EQ(block_centroids(single, 1.0)[0].location_id, "only");
}

TEST(Proximity, FiltersAndNests) {
    Rng rng(4);
    const auto field = random_field(rng, 300);
    const GeoPoint market{16.0, 76.0};
    const auto near = ids(filter_by_proximity(field, market, 150));
    const auto far = ids(filter_by_proximity(field, market, 300));
    EXPECT_TRUE(std::includes(far.begin(), far.end(), near.begin(), near.end()));
    EXPECT_LT(near.size(), far.size());

    std::vector<LocationSeries> at_market = {constant_series("a", market, 0.1), constant_series("b", market, 0.2)};
    EXPECT_EQ(filter_by_proximity(at_market, market, 0.001).size(), 2u);

    const double lat_200km = 16.0 + 200.0 / 111.19492664455873735;
    std::vector<LocationSeries> lone = {constant_series("x", {lat_200km, 76.0}, 0.1)};
    EXPECT_THROW(filter_by_proximity(lone, market, 150), ValidationError);
}

TEST(VarianceFilter, PercentileThreshold) {
    std::vector<LocationSeries> locs;
    for (int k = 1; k <= 100; ++k) {
        const double s = std::sqrt(static_cast<double>(k)) / 100.0;
        locs.push_back({"v" + std::to_string(k), {0, 0}, {{{2020, 1}, -s}, {{2020, 2}, s}}});
    }
    const auto kept = filter_high_variance(locs, 75);
    EXPECT_EQ(kept.size(), 75u);
    EXPECT_EQ(filter_high_variance(locs, 100).size(), 100u);

    std::vector<LocationSeries> same;
    for (int k = 0; k < 10; ++k) same.push_back({"s" + std::to_string(k), {0, 0}, {{{2020, 1}, 0.1}, {{2020, 2}, 0.3}}});
    EXPECT_EQ(filter_high_variance(same, 50).size(), 10u);
}

TEST(SystematicSample, EveryKth) {
    std::vector<LocationSeries> locs;
    // Input deliberately out of (lat, lon) order.
    for (int i = 99; i >= 0; --i) locs.push_back(constant_series("s" + std::to_string(i), {10.0 + i * 0.01, 75.0}, 0));
    const auto picked = systematic_sample(locs, 10);
    ASSERT_EQ(picked.size(), 10u);
    for (int k = 0; k < 10; ++k) EXPECT_EQ(picked[k].location_id, "s" + std::to_string(10 * k));

    std::vector<LocationSeries> fifty(locs.begin(), locs.begin() + 50);
    EXPECT_EQ(systematic_sample(fifty, 100).size(), 50u);
    EXPECT_EQ(ids(systematic_sample(locs, 7)), ids(systematic_sample(locs, 7)));
}

TEST(Percentile, LinearInterpolation) {
    EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
    EXPECT_DOUBLE_EQ(percentile({5}, 30), 5.0);
    EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 100), 4.0);
}

TEST(WorkingSet, OrderInsensitiveAndBounded) {
    Rng rng(12);
    auto field = random_field(rng, 400);
    LocationFilterConfig cfg;
    cfg.proximity_km = 250;
    cfg.target_count = 40;
    const GeoPoint market{16.0, 76.0};
    const auto a = select_working_set(field, market, cfg);
    rng.shuffle(field);
    const auto b = select_working_set(field, market, cfg);
    EXPECT_EQ(ids(a), ids(b));
    for (int target : {1, 5, 40, 1000}) {
        cfg.target_count = target;
        EXPECT_LE(select_working_set(field, market, cfg).size(), static_cast<std::size_t>(target));
    }
}
