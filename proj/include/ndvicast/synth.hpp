#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ndvicast/data.hpp"

namespace ndvicast::synth {

struct SynthConfig {
    std::uint64_t seed = 1;
    int n_locations = 500;
    double lat_min = 14.0;
    double lat_max = 18.0;
    double lon_min = 74.5;
    double lon_max = 78.5;
    int n_markets = 4;
    /// Arrival months; NDVI starts one month earlier.
    int months = 48;
    YearMonth start{2015, 1};
    int n_true_locations = 5;
    /// Planted |beta| is drawn from [0.5, 1.5] * coef_scale with random sign.
    double coef_scale = 1.0;
    /// Log-arrival noise.
    double noise_sigma = 0.05;
    double ndvi_noise = 0.04;
    /// Regional anomalies: each location follows the AR(1) anomaly of its
    /// nearest region centre, scaled by a per-location loading.
    int n_regions = 16;
    double region_sd = 0.08;
    double region_ar = 0.6;
    /// Planted locations come from within this radius of their market.
    double planted_radius_km = 150.0;
    double base_log_arrival = 7.0;

    /// (a0, a1, a2, a3) of the state price process.
    std::array<double, 4> price_coef = {0.002, 0.05, -0.03, 0.01};
    /// The process is the k-step price equation for this horizon.
    int price_horizon = 1;
    double price_noise = 0.0;
    double w = 0.9;
    int d = 12;
    double base_price = 2000.0;

    /// State total = sum_m weight_m * arrivals_m + N(0, (frac * mean)^2).
    double state_noise_frac = 0.01;
};

struct PlantedSupport {
    std::string market_id;
    double intercept = 0.0;
    std::vector<std::string> location_ids;
    std::vector<double> coefficients;
};

struct GroundTruth {
    std::vector<PlantedSupport> markets;
    std::array<double, 4> price_coef{};
    int price_horizon = 1;
    double w = 0.9;
    int d = 12;
    std::vector<double> state_weights;
};

struct SynthData {
    Dataset dataset;
    std::vector<MarketDaily> daily;
    GroundTruth truth;
    /// Arrival months and the state series on them.
    std::vector<YearMonth> arrival_months;
    std::vector<double> state_arrivals;
    /// Equal-weight state price and summed arrivals on arrival_months.
    std::vector<double> state_prices;
};

/// Pure function of the config: the same config gives bit-identical output.
SynthData generate(const SynthConfig& config);

/// Log prices P_0..P_{n-1} following
/// P_s - P_{s-1} = a0 + a1 A^d_{s-k+1} + a2 A^d_{s-k} + a3 A^d_{s-k-1} + noise,
/// with A^d from `log_arrivals`, and zero drift before the regressors exist.
std::vector<double> price_process(const std::vector<double>& log_arrivals, const std::array<double, 4>& coef,
                                  int horizon, double w, int d, double log_p0, double noise_sd, std::uint64_t seed);

/// ndvi.csv, arrivals.csv, prices.csv, state.csv and groundtruth.json.
void write(const std::filesystem::path& dir, const SynthData& data);

void validate(const SynthConfig& config);

}  // namespace ndvicast::synth
