#include "ndvicast/price_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "ndvicast/errors.hpp"
#include "ndvicast/linalg.hpp"

namespace ndvicast::price {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kCoefficients = 4;

/// First origin t with A^d_{t-1} defined.
int first_origin(int d) { return kWindow + d; }

void check_config(const PriceModelConfig& c) {
    if (!(c.w >= 0.0 && c.w < 1.0)) throw ValidationError("price model: w must be in [0, 1)");
    if (c.d < 0) throw ValidationError("price model: d must be >= 0");
    if (c.horizons.empty()) throw ValidationError("price model: no horizons requested");
    for (int k : c.horizons) {
        if (k < 1 || k > 3) throw ValidationError("price model: horizons must be in {1, 2, 3}");
    }
}

HorizonFit fit_horizon(const std::vector<double>& logp, const std::vector<double>& feat, int k, int t_begin,
                       int t_end) {
    const int rows = t_end - t_begin;
    if (rows < kCoefficients) {
        throw ValidationError("price model: insufficient history for horizon " + std::to_string(k));
    }
    Eigen::MatrixXd X(rows, 3);
    Eigen::VectorXd y(rows);
    for (int r = 0; r < rows; ++r) {
        const auto t = static_cast<std::size_t>(t_begin + r);
        X(r, 0) = feat[t + 1];
        X(r, 1) = feat[t];
        X(r, 2) = feat[t - 1];
        y[r] = logp[t + static_cast<std::size_t>(k)] - logp[t + static_cast<std::size_t>(k) - 1];
    }
    const auto fit = ols(X, y);
    HorizonFit h;
    h.k = k;
    h.coef = {fit.intercept, fit.coef[0], fit.coef[1], fit.coef[2]};
    h.n_rows = rows;
    h.degenerate = fit.degenerate;
    Eigen::VectorXd resid = y - X * fit.coef;
    resid.array() -= fit.intercept;
    h.in_sample_mae = resid.array().abs().mean();
    return h;
}

std::vector<double> log_prices(const std::vector<double>& prices) {
    std::vector<double> out;
    out.reserve(prices.size());
    for (double p : prices) {
        if (!(p > 0.0) || !std::isfinite(p)) throw ValidationError("price model: prices must be finite and > 0");
        out.push_back(std::log(p));
    }
    return out;
}

}  // namespace

const HorizonFit& PriceModel::horizon(int k) const {
    for (const auto& f : fits) {
        if (f.k == k) return f;
    }
    throw ValidationError("price model has no horizon " + std::to_string(k));
}

double weighted_arrival(const std::vector<double>& log_arrivals, int t, double w) {
    if (t < kWindow - 1 || t >= static_cast<int>(log_arrivals.size())) {
        throw ValidationError("weighted arrival needs 12 months of history");
    }
    double sum = 0.0;
    double weight = 1.0;
    for (int i = 1; i <= kWindow; ++i) {
        sum += log_arrivals[static_cast<std::size_t>(t - i + 1)] * weight;
        weight *= w;
    }
    return sum;
}

double arrival_difference(const std::vector<double>& weighted, int t, int d) {
    if (d < 0 || t - d < 0 || t >= static_cast<int>(weighted.size())) {
        throw ValidationError("arrival difference: insufficient history");
    }
    const double a = weighted[static_cast<std::size_t>(t)];
    const double b = weighted[static_cast<std::size_t>(t - d)];
    if (std::isnan(a) || std::isnan(b)) throw ValidationError("arrival difference: insufficient history");
    return a - b;
}

std::vector<double> arrival_features(const std::vector<double>& log_arrivals, double w, int d) {
    const int n = static_cast<int>(log_arrivals.size());
    std::vector<double> weighted(log_arrivals.size(), kNaN);
    for (int t = kWindow - 1; t < n; ++t) weighted[static_cast<std::size_t>(t)] = weighted_arrival(log_arrivals, t, w);
    std::vector<double> out(log_arrivals.size(), kNaN);
    for (int t = kWindow - 1 + d; t < n; ++t) out[static_cast<std::size_t>(t)] = arrival_difference(weighted, t, d);
    return out;
}

std::vector<double> log_arrivals(const std::vector<double>& arrivals, bool* used_log1p) {
    bool zero = false;
    for (double a : arrivals) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("price model: arrivals must be finite and >= 0");
        zero = zero || a == 0.0;
    }
    if (used_log1p) *used_log1p = zero;
    std::vector<double> out;
    out.reserve(arrivals.size());
    for (double a : arrivals) out.push_back(zero ? std::log1p(a) : std::log(a));
    return out;
}

PriceModel fit_price_model(const std::vector<double>& prices, const std::vector<double>& arrivals,
                           const PriceModelConfig& config) {
    check_config(config);
    if (prices.size() != arrivals.size()) throw ValidationError("price model: price and arrival lengths differ");
    if (prices.size() < 30) throw ValidationError("price model: insufficient history (need >= 30 months)");
    PriceModel model;
    model.config = config;
    const auto logp = log_prices(prices);
    const auto feat = arrival_features(log_arrivals(arrivals, &model.log1p_arrivals), config.w, config.d);
    const int n = static_cast<int>(prices.size());
    auto horizons = config.horizons;
    std::sort(horizons.begin(), horizons.end());
    horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());
    for (int k : horizons) model.fits.push_back(fit_horizon(logp, feat, k, first_origin(config.d), n - k));
    return model;
}

std::vector<PriceForecast> predict_price(const PriceModel& model, double forecast_next,
                                         const std::vector<double>& features, int t, double price_t) {
    if (t < 1 || t >= static_cast<int>(features.size())) throw ValidationError("predict_price: origin out of range");
    const double now = features[static_cast<std::size_t>(t)];
    const double before = features[static_cast<std::size_t>(t - 1)];
    if (std::isnan(now) || std::isnan(before) || std::isnan(forecast_next)) {
        throw ValidationError("predict_price: missing arrival history at the origin");
    }
    if (!(price_t > 0.0)) throw ValidationError("predict_price: price at origin must be > 0");
    std::vector<PriceForecast> out;
    for (const auto& h : model.fits) {
        const double delta = h.coef[0] + h.coef[1] * forecast_next + h.coef[2] * now + h.coef[3] * before;
        out.push_back({h.k, delta, kNaN});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.k < b.k; });
    double cumulative = 0.0;
    int expected = 1;
    for (auto& f : out) {
        if (f.k != expected) break;
        cumulative += f.delta_log_price;
        f.price_level = price_t * std::exp(cumulative);
        ++expected;
    }
    return out;
}

double select_w(const std::vector<double>& prices, const std::vector<double>& arrivals, int d, int eval_points) {
    static constexpr double kGrid[] = {0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
    if (prices.size() != arrivals.size()) throw ValidationError("select_w: length mismatch");
    const auto logp = log_prices(prices);
    const auto loga = log_arrivals(arrivals);
    const int n = static_cast<int>(prices.size());
    const int t0 = first_origin(d);
    double best_w = kGrid[0];
    double best_err = std::numeric_limits<double>::infinity();
    for (double w : kGrid) {
        const auto feat = arrival_features(loga, w, d);
        // Origins t predict dP_{t+1}; training rows t' must satisfy t' + 1 <= t.
        double err = 0.0;
        int used = 0;
        for (int t = std::max(t0 + kCoefficients, n - 1 - eval_points); t <= n - 2; ++t) {
            const auto fit = fit_horizon(logp, feat, 1, t0, t);
            const auto ts = static_cast<std::size_t>(t);
            const double pred = fit.coef[0] + fit.coef[1] * feat[ts + 1] + fit.coef[2] * feat[ts] +
                                fit.coef[3] * feat[ts - 1];
            err += std::abs(pred - (logp[ts + 1] - logp[ts]));
            ++used;
        }
        if (used == 0) throw ValidationError("select_w: insufficient history");
        if (err / used < best_err) {
            best_err = err / used;
            best_w = w;
        }
    }
    return best_w;
}

}  // namespace ndvicast::price
