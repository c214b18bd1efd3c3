#include "ndvicast/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <utility>

#include "ndvicast/errors.hpp"

namespace ndvicast::spatial {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

/// Smallest positive gap between distinct sorted coordinate values.
double min_spacing(std::vector<double> coords) {
    std::sort(coords.begin(), coords.end());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < coords.size(); ++i) {
        const double gap = coords[i] - coords[i - 1];
        if (gap > 1e-9) best = std::min(best, gap);
    }
    return best;
}

double population_variance(const std::vector<MonthValue>& months) {
    const double n = static_cast<double>(months.size());
    double mean = 0.0;
    for (const auto& mv : months) mean += mv.value;
    mean /= n;
    double ss = 0.0;
    for (const auto& mv : months) ss += (mv.value - mean) * (mv.value - mean);
    return ss / n;
}

}  // namespace

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    const double dlat = radians(b.lat - a.lat);
    const double dlon = radians(b.lon - a.lon);
    const double s = std::sin(dlat / 2.0);
    const double t = std::sin(dlon / 2.0);
    const double h = s * s + std::cos(radians(a.lat)) * std::cos(radians(b.lat)) * t * t;
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

std::vector<LocationSeries> smooth_ndvi(const std::vector<LocationSeries>& locations, int radius_cells,
                                        double cell_size_deg) {
    if (radius_cells < 0) throw ValidationError("smoothing radius must be >= 0 (empty neighbourhood)");
    if (radius_cells == 0 || locations.empty()) return locations;

    double cell = cell_size_deg;
    if (cell <= 0.0) {
        std::vector<double> lats, lons;
        for (const auto& l : locations) {
            lats.push_back(l.position.lat);
            lons.push_back(l.position.lon);
        }
        cell = std::min(min_spacing(std::move(lats)), min_spacing(std::move(lons)));
        if (!std::isfinite(cell)) return locations;  // a single grid cell
    }

    using Cell = std::pair<long, long>;
    std::map<Cell, std::vector<std::size_t>> grid;
    std::vector<Cell> cells(locations.size());
    for (std::size_t i = 0; i < locations.size(); ++i) {
        cells[i] = {std::lround(locations[i].position.lat / cell), std::lround(locations[i].position.lon / cell)};
        grid[cells[i]].push_back(i);
    }

    std::vector<LocationSeries> out;
    out.reserve(locations.size());
    for (std::size_t i = 0; i < locations.size(); ++i) {
        std::map<YearMonth, std::pair<double, int>> acc;
        for (long di = -radius_cells; di <= radius_cells; ++di) {
            for (long dj = -radius_cells; dj <= radius_cells; ++dj) {
                const auto it = grid.find({cells[i].first + di, cells[i].second + dj});
                if (it == grid.end()) continue;
                for (std::size_t k : it->second) {
                    for (const auto& mv : locations[k].months) {
                        auto& [sum, n] = acc[mv.month];
                        sum += mv.value;
                        ++n;
                    }
                }
            }
        }
        LocationSeries s{locations[i].location_id, locations[i].position, {}};
        // Output keeps the location's own month support.
        for (const auto& mv : locations[i].months) {
            const auto& [sum, n] = acc.at(mv.month);
            s.months.push_back({mv.month, std::clamp(sum / n, -1.0, 1.0)});
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<LocationSeries> block_centroids(const std::vector<LocationSeries>& locations, double block_size_deg) {
    if (!(block_size_deg > 0.0)) throw ValidationError("block_size_deg must be > 0");
    using Block = std::pair<long, long>;
    std::map<Block, std::size_t> best;
    for (std::size_t i = 0; i < locations.size(); ++i) {
        const auto& p = locations[i].position;
        const Block b{static_cast<long>(std::floor(p.lat / block_size_deg)),
                      static_cast<long>(std::floor(p.lon / block_size_deg))};
        const GeoPoint centre{(static_cast<double>(b.first) + 0.5) * block_size_deg,
                              (static_cast<double>(b.second) + 0.5) * block_size_deg};
        auto [it, inserted] = best.try_emplace(b, i);
        if (inserted) continue;
        const auto& cur = locations[it->second];
        const double d_new = haversine_km(p, centre);
        const double d_cur = haversine_km(cur.position, centre);
        if (d_new < d_cur || (d_new == d_cur && locations[i].location_id < cur.location_id)) it->second = i;
    }
    std::vector<LocationSeries> out;
    out.reserve(best.size());
    for (const auto& [block, idx] : best) out.push_back(locations[idx]);
    return out;
}

std::vector<LocationSeries> filter_by_proximity(const std::vector<LocationSeries>& locations,
                                                const GeoPoint& market, double max_km) {
    if (!(max_km > 0.0)) throw ValidationError("proximity distance must be > 0");
    std::vector<LocationSeries> out;
    for (const auto& l : locations) {
        if (haversine_km(l.position, market) < max_km) out.push_back(l);
    }
    if (out.empty()) throw ValidationError("no locations within D = " + format_double(max_km) + " km");
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = (static_cast<double>(values.size()) - 1.0) * q / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<LocationSeries> filter_high_variance(const std::vector<LocationSeries>& locations, double q) {
    if (!(q > 0.0 && q <= 100.0)) throw ValidationError("variance percentile must be in (0, 100]");
    if (locations.empty()) return {};
    std::vector<double> variances;
    variances.reserve(locations.size());
    for (const auto& l : locations) {
        if (l.months.size() < 2) {
            throw ValidationError("location '" + l.location_id + "' needs >= 2 months for the variance filter");
        }
        variances.push_back(population_variance(l.months));
    }
    const double threshold = percentile(variances, q);
    std::vector<LocationSeries> out;
    for (std::size_t i = 0; i < locations.size(); ++i) {
        if (!(variances[i] > threshold)) out.push_back(locations[i]);
    }
    return out;
}

std::vector<LocationSeries> systematic_sample(const std::vector<LocationSeries>& locations, int target_count) {
    if (target_count < 1) throw ValidationError("target_count must be >= 1");
    const auto target = static_cast<std::size_t>(target_count);
    if (locations.size() <= target) return locations;
    std::vector<std::size_t> order(locations.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = locations[a].position;
        const auto& pb = locations[b].position;
        if (pa.lat != pb.lat) return pa.lat < pb.lat;
        if (pa.lon != pb.lon) return pa.lon < pb.lon;
        return locations[a].location_id < locations[b].location_id;
    });
    const std::size_t step = locations.size() / target;
    std::vector<LocationSeries> out;
    out.reserve(target);
    for (std::size_t i = 0; i < order.size() && out.size() < target; i += step) out.push_back(locations[order[i]]);
    return out;
}

std::vector<LocationSeries> select_working_set(const std::vector<LocationSeries>& locations,
                                               const GeoPoint& market, const LocationFilterConfig& config) {
    auto near = filter_by_proximity(locations, market, config.proximity_km);
    auto calm = filter_high_variance(near, config.variance_percentile);
    return systematic_sample(calm, config.target_count);
}

std::vector<LocationSeries> preprocess(const std::vector<LocationSeries>& locations,
                                       const LocationFilterConfig& config) {
    auto out = smooth_ndvi(locations, config.smooth_radius, config.cell_size_deg);
    if (config.block_size_deg > 0.0) out = block_centroids(out, config.block_size_deg);
    return out;
}

}  // namespace ndvicast::spatial
