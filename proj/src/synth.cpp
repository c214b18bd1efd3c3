#include "ndvicast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "ndvicast/errors.hpp"
#include "ndvicast/price_model.hpp"
#include "ndvicast/rng.hpp"
#include "ndvicast/spatial.hpp"

namespace ndvicast::synth {

namespace {

struct LocationParams {
    double base;
    double amplitude;
    double phase;
    std::size_t region;
    double loading;
};

std::string padded(const std::string& prefix, int i, int total) {
    const auto width = std::to_string(total).size();
    auto s = std::to_string(i);
    return prefix + std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

}  // namespace

void validate(const SynthConfig& c) {
    if (c.n_locations < 1 || c.n_markets < 1 || c.months < 1 || c.n_true_locations < 1) {
        throw ValidationError("synth: all counts must be >= 1");
    }
    if (c.n_true_locations > c.n_locations) throw ValidationError("synth: more planted locations than locations");
    if (!(c.lat_min < c.lat_max) || !(c.lon_min < c.lon_max)) throw ValidationError("synth: empty grid extent");
    if (c.lat_min < -90.0 || c.lat_max > 90.0 || c.lon_min < -180.0 || c.lon_max > 180.0) {
        throw ValidationError("synth: grid extent outside lat/lon range");
    }
    if (c.n_regions < 1) throw ValidationError("synth: n_regions must be >= 1");
    if (c.region_sd < 0.0 || !(std::abs(c.region_ar) < 1.0)) throw ValidationError("synth: invalid region anomaly");
    if (c.noise_sigma < 0.0 || c.ndvi_noise < 0.0 || c.price_noise < 0.0 || c.state_noise_frac < 0.0) {
        throw ValidationError("synth: noise levels must be >= 0");
    }
    if (c.price_horizon < 1 || c.price_horizon > 3) throw ValidationError("synth: price_horizon must be 1, 2 or 3");
    if (!(c.w >= 0.0 && c.w < 1.0) || c.d < 0) throw ValidationError("synth: invalid w or d");
    if (!(c.base_price > 0.0)) throw ValidationError("synth: base_price must be > 0");
}

std::vector<double> price_process(const std::vector<double>& log_arrivals, const std::array<double, 4>& coef,
                                  int horizon, double w, int d, double log_p0, double noise_sd, std::uint64_t seed) {
    const auto feat = price::arrival_features(log_arrivals, w, d);
    const int n = static_cast<int>(log_arrivals.size());
    Rng rng(seed);
    std::vector<double> p(log_arrivals.size());
    p[0] = log_p0;
    for (int s = 1; s < n; ++s) {
        // Origin t = s - k: regressors A^d_{t+1}, A^d_t, A^d_{t-1}.
        const int t = s - horizon;
        double delta = 0.0;
        if (t - 1 >= 0 && !std::isnan(feat[static_cast<std::size_t>(t - 1)])) {
            const auto ut = static_cast<std::size_t>(t);
            delta = coef[0] + coef[1] * feat[ut + 1] + coef[2] * feat[ut] + coef[3] * feat[ut - 1];
        }
        if (noise_sd > 0.0) delta += rng.normal(0.0, noise_sd);
        p[static_cast<std::size_t>(s)] = p[static_cast<std::size_t>(s - 1)] + delta;
    }
    return p;
}

SynthData generate(const SynthConfig& c) {
    validate(c);
    Rng rng(c.seed);
    const int n_ndvi = c.months + 1;
    const YearMonth ndvi_start = c.start.prev();

    // Regular grid over the box, filled row by row.
    const double lat_span = c.lat_max - c.lat_min;
    const double lon_span = c.lon_max - c.lon_min;
    const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(c.n_locations * lon_span / lat_span))));
    const int rows = (c.n_locations + cols - 1) / cols;
    const double dlat = lat_span / rows;
    const double dlon = lon_span / cols;

    SynthData out;
    std::vector<LocationSeries> locations;
    std::vector<LocationParams> params;
    locations.reserve(static_cast<std::size_t>(c.n_locations));
    for (int i = 0; i < c.n_locations; ++i) {
        LocationSeries loc;
        loc.location_id = padded("L", i + 1, c.n_locations);
        loc.position = {c.lat_min + (i / cols + 0.5) * dlat, c.lon_min + (i % cols + 0.5) * dlon};
        LocationParams lp;
        lp.base = rng.uniform(0.2, 0.6);
        lp.amplitude = rng.uniform(0.05, 0.3);
        lp.phase = 1.5 * (loc.position.lat - c.lat_min) / lat_span + 0.5 * (loc.position.lon - c.lon_min) / lon_span +
                   rng.normal(0.0, 0.1);
        locations.push_back(std::move(loc));
        lp.region = 0;
        lp.loading = 1.0;
        params.push_back(lp);
    }
    std::vector<GeoPoint> centres;
    for (int r = 0; r < c.n_regions; ++r) {
        centres.push_back({rng.uniform(c.lat_min, c.lat_max), rng.uniform(c.lon_min, c.lon_max)});
    }
    for (std::size_t i = 0; i < locations.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < centres.size(); ++r) {
            const double km = spatial::haversine_km(locations[i].position, centres[r]);
            if (km < best) {
                best = km;
                params[i].region = r;
            }
        }
        params[i].loading = rng.uniform(0.5, 1.5);
    }
    // Stationary AR(1) anomalies per region.
    std::vector<std::vector<double>> anomaly(centres.size(), std::vector<double>(static_cast<std::size_t>(n_ndvi)));
    const double innovation_sd = c.region_sd * std::sqrt(1.0 - c.region_ar * c.region_ar);
    for (auto& series : anomaly) {
        // Regions differ in how strongly they vary.
        const double scale = rng.uniform(0.5, 2.0);
        double a = c.region_sd > 0.0 ? rng.normal(0.0, scale * c.region_sd) : 0.0;
        for (auto& v : series) {
            v = a;
            if (c.region_sd > 0.0) a = c.region_ar * a + rng.normal(0.0, scale * innovation_sd);
        }
    }
    for (std::size_t i = 0; i < locations.size(); ++i) {
        const auto& lp = params[i];
        auto& months = locations[i].months;
        months.reserve(static_cast<std::size_t>(n_ndvi));
        for (int t = 0; t < n_ndvi; ++t) {
            double v = lp.base + lp.amplitude * std::sin(2.0 * std::numbers::pi * t / 12.0 + lp.phase) +
                       lp.loading * anomaly[lp.region][static_cast<std::size_t>(t)];
            if (c.ndvi_noise > 0.0) v += rng.normal(0.0, c.ndvi_noise);
            months.push_back({YearMonth::from_ordinal(ndvi_start.ordinal() + t), std::clamp(v, -1.0, 1.0)});
        }
    }

    std::vector<MarketSeries> markets;
    std::vector<std::vector<double>> arrivals;
    for (int m = 0; m < c.n_markets; ++m) {
        MarketSeries ms;
        ms.market_id = "M" + std::to_string(m + 1);
        ms.name = "Market " + std::to_string(m + 1);
        ms.position = {rng.uniform(c.lat_min + 0.2 * lat_span, c.lat_max - 0.2 * lat_span),
                       rng.uniform(c.lon_min + 0.2 * lon_span, c.lon_max - 0.2 * lon_span)};

        // Candidates: nearby locations with below-median amplitude; nearest
        // locations fill in when too few qualify.
        std::vector<std::size_t> near;
        std::vector<std::pair<double, std::size_t>> by_distance;
        for (std::size_t i = 0; i < locations.size(); ++i) {
            const double km = spatial::haversine_km(ms.position, locations[i].position);
            by_distance.emplace_back(km, i);
            if (km < c.planted_radius_km) near.push_back(i);
        }
        std::vector<std::size_t> candidates;
        if (!near.empty()) {
            std::vector<double> amps;
            for (auto i : near) amps.push_back(params[i].amplitude);
            const double median = spatial::percentile(amps, 50.0);
            for (auto i : near) {
                if (params[i].amplitude <= median) candidates.push_back(i);
            }
        }
        if (static_cast<int>(candidates.size()) < c.n_true_locations) {
            std::sort(by_distance.begin(), by_distance.end());
            candidates.clear();
            for (int k = 0; k < c.n_true_locations; ++k) {
                candidates.push_back(by_distance[static_cast<std::size_t>(k)].second);
            }
        }
        rng.shuffle(candidates);
        candidates.resize(static_cast<std::size_t>(c.n_true_locations));
        std::sort(candidates.begin(), candidates.end());

        PlantedSupport support;
        support.market_id = ms.market_id;
        support.intercept = c.base_log_arrival + 0.3 * m;
        for (auto i : candidates) {
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            support.location_ids.push_back(locations[i].location_id);
            support.coefficients.push_back(sign * c.coef_scale * rng.uniform(0.5, 1.5));
        }

        std::vector<double> a(static_cast<std::size_t>(c.months));
        for (int t = 0; t < c.months; ++t) {
            // Arrival month t pairs with NDVI index t (the previous month).
            double y = support.intercept;
            for (std::size_t k = 0; k < candidates.size(); ++k) {
                y += support.coefficients[k] * locations[candidates[k]].months[static_cast<std::size_t>(t)].value;
            }
            if (c.noise_sigma > 0.0) y += rng.normal(0.0, c.noise_sigma);
            a[static_cast<std::size_t>(t)] = std::exp(y);
            ms.arrivals.push_back({YearMonth::from_ordinal(c.start.ordinal() + t), a[static_cast<std::size_t>(t)]});
        }
        out.truth.markets.push_back(std::move(support));
        markets.push_back(std::move(ms));
        arrivals.push_back(std::move(a));
    }

    // State price from summed arrivals; each market quotes a fixed multiple.
    std::vector<double> log_total(static_cast<std::size_t>(c.months));
    for (int t = 0; t < c.months; ++t) {
        double sum = 0.0;
        for (const auto& a : arrivals) sum += a[static_cast<std::size_t>(t)];
        log_total[static_cast<std::size_t>(t)] = std::log(sum);
    }
    const auto log_price = price_process(log_total, c.price_coef, c.price_horizon, c.w, c.d, std::log(c.base_price),
                                         c.price_noise, rng.next());
    std::vector<double> factors;
    for (int m = 0; m < c.n_markets; ++m) factors.push_back(std::exp(rng.uniform(-0.1, 0.1)));
    out.state_prices.assign(static_cast<std::size_t>(c.months), 0.0);
    for (int t = 0; t < c.months; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const double p = std::exp(log_price[ut]);
        for (std::size_t m = 0; m < markets.size(); ++m) {
            const double quoted = p * factors[m];
            markets[m].prices.push_back({markets[m].arrivals[ut].month, quoted});
            out.state_prices[ut] += quoted;
        }
        out.state_prices[ut] /= static_cast<double>(markets.size());
    }

    out.truth.price_coef = c.price_coef;
    out.truth.price_horizon = c.price_horizon;
    out.truth.w = c.w;
    out.truth.d = c.d;
    for (int m = 0; m < c.n_markets; ++m) out.truth.state_weights.push_back(rng.uniform(0.5, 1.5));
    out.state_arrivals.assign(static_cast<std::size_t>(c.months), 0.0);
    double mean_total = 0.0;
    for (int t = 0; t < c.months; ++t) {
        double s = 0.0;
        for (std::size_t m = 0; m < arrivals.size(); ++m) s += out.truth.state_weights[m] * arrivals[m][static_cast<std::size_t>(t)];
        out.state_arrivals[static_cast<std::size_t>(t)] = s;
        mean_total += s;
    }
    mean_total /= c.months;
    for (auto& s : out.state_arrivals) {
        if (c.state_noise_frac > 0.0) s += rng.normal(0.0, c.state_noise_frac * mean_total);
    }
    for (int t = 0; t < c.months; ++t) out.arrival_months.push_back(YearMonth::from_ordinal(c.start.ordinal() + t));

    for (const auto& ms : markets) {
        MarketDaily d;
        d.market_id = ms.market_id;
        d.name = ms.name;
        d.position = ms.position;
        for (const auto& a : ms.arrivals) d.arrivals.push_back({{a.month.year, a.month.month, 1}, a.value});
        for (const auto& p : ms.prices) d.prices.push_back({{p.month.year, p.month.month, 1}, p.value});
        out.daily.push_back(std::move(d));
    }
    out.dataset = build_dataset(std::move(locations), std::move(markets));
    return out;
}

void write(const std::filesystem::path& dir, const SynthData& data) {
    std::filesystem::create_directories(dir);
    write_ndvi_csv(dir / "ndvi.csv", data.dataset.locations);
    write_market_daily_csvs(dir / "arrivals.csv", dir / "prices.csv", data.daily);

    std::ofstream state(dir / "state.csv", std::ios::binary);
    if (!state) throw ValidationError("cannot write " + (dir / "state.csv").string());
    state << "month,arrival_qty\n";
    for (std::size_t t = 0; t < data.arrival_months.size(); ++t) {
        state << data.arrival_months[t].str() << ',' << format_double(data.state_arrivals[t]) << '\n';
    }

    nlohmann::ordered_json gt;
    gt["markets"] = nlohmann::ordered_json::array();
    for (const auto& m : data.truth.markets) {
        gt["markets"].push_back({{"market_id", m.market_id},
                                 {"intercept", m.intercept},
                                 {"location_ids", m.location_ids},
                                 {"coefficients", m.coefficients}});
    }
    gt["price"] = {{"coefficients", data.truth.price_coef},
                   {"horizon", data.truth.price_horizon},
                   {"w", data.truth.w},
                   {"d", data.truth.d}};
    gt["state_weights"] = data.truth.state_weights;
    std::ofstream out(dir / "groundtruth.json", std::ios::binary);
    if (!out) throw ValidationError("cannot write " + (dir / "groundtruth.json").string());
    out << gt.dump(2) << '\n';
}

}  // namespace ndvicast::synth
