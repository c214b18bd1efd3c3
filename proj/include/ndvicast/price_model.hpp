#pragma once

#include <array>
#include <vector>

namespace ndvicast::price {

struct PriceModelConfig {
    /// Exponential decay of the 12-month arrival window.
    double w = 0.9;
    /// Differencing duration in months.
    int d = 12;
    std::vector<int> horizons = {1, 2, 3};
};

inline constexpr int kWindow = 12;

struct HorizonFit {
    int k = 1;
    /// (a0, a1, a2, a3): intercept, forecast A^d_{t+1}, realized A^d_t, A^d_{t-1}.
    std::array<double, 4> coef{};
    double in_sample_mae = 0.0;
    int n_rows = 0;
    /// A regressor had no variance; its slope is pinned near zero by the jitter.
    bool degenerate = false;
};

struct PriceModel {
    PriceModelConfig config;
    std::vector<HorizonFit> fits;
    /// Arrivals contained zeros, so log(1 + a) was used.
    bool log1p_arrivals = false;

    [[nodiscard]] const HorizonFit& horizon(int k) const;
};

/// sum_{i=1..12} a[t-i+1] w^(i-1); needs t >= 11.
double weighted_arrival(const std::vector<double>& log_arrivals, int t, double w);

/// A[t] - A[t-d].
double arrival_difference(const std::vector<double>& weighted, int t, int d);

/// A^d_t for every t (NaN where history is too short).
std::vector<double> arrival_features(const std::vector<double>& log_arrivals, double w, int d);

/// Log of arrivals, switching to log(1 + a) when any arrival is zero.
std::vector<double> log_arrivals(const std::vector<double>& arrivals, bool* used_log1p = nullptr);

/// Per horizon k, OLS of dP_{t+k} = P_{t+k} - P_{t+k-1} on
/// (A^d_{t+1}, A^d_t, A^d_{t-1}) with intercept, using realized A^d_{t+1}.
/// `prices` and `arrivals` are monthly levels on the same month axis.
PriceModel fit_price_model(const std::vector<double>& prices, const std::vector<double>& arrivals,
                           const PriceModelConfig& config = {});

struct PriceForecast {
    int k = 1;
    double delta_log_price = 0.0;
    /// p_t exp(sum_{j<=k} dP_{t+j}); NaN when a shorter horizon is missing.
    double price_level = 0.0;
};

/// Forecasts from origin t. `features` holds realized A^d (see
/// arrival_features); `forecast_next` replaces A^d_{t+1}.
std::vector<PriceForecast> predict_price(const PriceModel& model, double forecast_next,
                                         const std::vector<double>& features, int t, double price_t);

/// Decay factor from {0.5, 0.6, 0.7, 0.8, 0.9, 0.95} with the lowest one-step
/// rolling MAE of dP over the last `eval_points` origins.
double select_w(const std::vector<double>& prices, const std::vector<double>& arrivals, int d = 12,
                int eval_points = 12);

}  // namespace ndvicast::price
