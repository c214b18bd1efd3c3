#include <cmath>

#include <gtest/gtest.h>

#include "ndvicast/errors.hpp"
#include "ndvicast/price_model.hpp"
#include "ndvicast/rng.hpp"
#include "ndvicast/synth.hpp"

using namespace ndvicast;
using namespace ndvicast::price;

namespace {

std::vector<double> random_arrivals(Rng& rng, int n) {
    std::vector<double> a;
    for (int t = 0; t < n; ++t) a.push_back(std::exp(6.0 + 0.5 * std::sin(0.52 * t) + 0.3 * rng.normal()));
    return a;
}

std::vector<double> levels(const std::vector<double>& logs) {
    std::vector<double> out;
    for (double v : logs) out.push_back(std::exp(v));
    return out;
}

std::vector<double> logs_of(const std::vector<double>& a) {
    std::vector<double> out;
    for (double v : a) out.push_back(std::log(v));
    return out;
}

}  // namespace

TEST(WeightedArrival, GeometricCases) {
    const std::vector<double> c(20, 3.0);
    EXPECT_NEAR(weighted_arrival(c, 15, 0.5), 3.0 * 1.99951171875, 1e-14);
    std::vector<double> a;
    for (int t = 0; t < 20; ++t) a.push_back(0.1 * t * t);
    EXPECT_DOUBLE_EQ(weighted_arrival(a, 14, 0.0), a[14]);
    double sum = 0.0;
    for (int t = 3; t <= 14; ++t) sum += a[t];
    EXPECT_NEAR(weighted_arrival(a, 14, 1.0), sum, 1e-12);
    EXPECT_THROW(weighted_arrival(a, 10, 0.5), ValidationError);
}

TEST(ArrivalDifference, Cases) {
    const std::vector<double> flat(30, 2.0);
    EXPECT_EQ(arrival_difference(flat, 20, 12), 0.0);
    std::vector<double> line;
    for (int t = 0; t < 30; ++t) line.push_back(1.0 + 0.25 * t);
    EXPECT_NEAR(arrival_difference(line, 20, 12), 12 * 0.25, 1e-12);
    EXPECT_EQ(arrival_difference(line, 20, 0), 0.0);
    EXPECT_THROW(arrival_difference(line, 5, 12), ValidationError);
}

TEST(FitPriceModel, NoiselessRecovery) {
    Rng rng(1);
    const std::array<double, 4> coef = {0.003, 0.04, -0.025, 0.015};
    const auto arrivals = random_arrivals(rng, 60);
    for (int k = 1; k <= 3; ++k) {
        const auto logp = synth::price_process(logs_of(arrivals), coef, k, 0.9, 12, std::log(2000.0), 0.0, 1);
        PriceModelConfig c;
        c.horizons = {k};
        const auto m = fit_price_model(levels(logp), arrivals, c);
        for (int i = 0; i < 4; ++i) EXPECT_NEAR(m.horizon(k).coef[i], coef[i], 1e-8) << "k=" << k << " i=" << i;
        EXPECT_NEAR(m.horizon(k).in_sample_mae, 0.0, 1e-10);
    }
}

TEST(FitPriceModel, ConstantArrivalsAreDegenerate) {
    Rng rng(2);
    const std::vector<double> arrivals(48, 500.0);
    std::vector<double> logp = {std::log(1000.0)};
    for (int t = 1; t < 48; ++t) logp.push_back(logp.back() + 0.01 + 0.02 * rng.normal());
    const auto m = fit_price_model(levels(logp), arrivals, {});
    const auto& h = m.horizon(1);
    EXPECT_TRUE(h.degenerate);
    double mean = 0.0;
    const int t0 = kWindow + 12;
    for (int t = t0; t < 47; ++t) mean += logp[t + 1] - logp[t];
    mean /= (47 - t0);
    EXPECT_NEAR(h.coef[0], mean, 1e-9);
}

TEST(FitPriceModel, ConstantPricesGiveZeroCoefficients) {
    Rng rng(3);
    const auto m = fit_price_model(std::vector<double>(40, 1500.0), random_arrivals(rng, 40), {});
    for (const auto& h : m.fits) {
        for (double v : h.coef) EXPECT_NEAR(v, 0.0, 1e-12);
    }
}

TEST(FitPriceModel, ScaleInvariance) {
    Rng rng(4);
    const auto arrivals = random_arrivals(rng, 50);
    std::vector<double> prices = {3000.0};
    for (int t = 1; t < 50; ++t) prices.push_back(prices.back() * std::exp(0.03 * rng.normal()));
    const auto base = fit_price_model(prices, arrivals, {});
    std::vector<double> p2, a2;
    for (double p : prices) p2.push_back(p * 7.5);
    for (double a : arrivals) a2.push_back(a * 0.01);
    const auto scaled_p = fit_price_model(p2, arrivals, {});
    const auto scaled_a = fit_price_model(prices, a2, {});
    for (std::size_t h = 0; h < base.fits.size(); ++h) {
        for (int i = 0; i < 4; ++i) {
            EXPECT_NEAR(scaled_p.fits[h].coef[i], base.fits[h].coef[i], 1e-10);
            EXPECT_NEAR(scaled_a.fits[h].coef[i], base.fits[h].coef[i], 1e-9);
        }
    }
    const auto fa = arrival_features(logs_of(arrivals), 0.9, 12);
    const auto fb = arrival_features(logs_of(a2), 0.9, 12);
    for (std::size_t t = 23; t < fa.size(); ++t) EXPECT_NEAR(fa[t], fb[t], 1e-9);
}

TEST(FitPriceModel, Validation) {
    Rng rng(5);
    const auto arrivals = random_arrivals(rng, 40);
    const std::vector<double> prices(40, 100.0);
    PriceModelConfig c;
    c.w = 1.0;
    EXPECT_THROW(fit_price_model(prices, arrivals, c), ValidationError);
    c = {};
    c.horizons = {4};
    EXPECT_THROW(fit_price_model(prices, arrivals, c), ValidationError);
    EXPECT_THROW(fit_price_model(std::vector<double>(20, 1.0), std::vector<double>(20, 1.0), {}), ValidationError);
    auto zeros = arrivals;
    zeros[3] = 0.0;
    EXPECT_TRUE(fit_price_model(prices, zeros, {}).log1p_arrivals);
}

TEST(PredictPrice, ConstantDrift) {
    PriceModel m;
    for (int k = 1; k <= 3; ++k) m.fits.push_back({k, {0.01, 0.0, 0.0, 0.0}, 0.0, 10, false});
    const std::vector<double> feat(30, 0.5);
    const auto f = predict_price(m, 0.7, feat, 25, 1000.0);
    ASSERT_EQ(f.size(), 3u);
    EXPECT_DOUBLE_EQ(f[0].delta_log_price, 0.01);
    EXPECT_NEAR(f[0].price_level, 1000.0 * std::exp(0.01), 1e-9);
    EXPECT_NEAR(f[2].price_level, 1000.0 * std::exp(0.03), 1e-9);

    for (auto& h : m.fits) h.coef = {0, 0, 0, 0};
    for (const auto& p : predict_price(m, 0.7, feat, 25, 1000.0)) EXPECT_EQ(p.price_level, 1000.0);
}

TEST(PredictPrice, GapStopsPriceChain) {
    PriceModel m;
    m.fits.push_back({1, {0.01, 0, 0, 0}, 0, 10, false});
    m.fits.push_back({3, {0.01, 0, 0, 0}, 0, 10, false});
    const auto f = predict_price(m, 0.0, std::vector<double>(30, 0.0), 25, 50.0);
    EXPECT_FALSE(std::isnan(f[0].price_level));
    EXPECT_TRUE(std::isnan(f[1].price_level));
}

TEST(SelectW, PicksGeneratingDecay) {
    Rng rng(6);
    const auto arrivals = random_arrivals(rng, 72);
    const auto logp = synth::price_process(logs_of(arrivals), {0.0, 0.3, -0.2, 0.1}, 1, 0.6, 12, 7.0, 0.0005, 3);
    EXPECT_DOUBLE_EQ(select_w(levels(logp), arrivals, 12), 0.6);
}
