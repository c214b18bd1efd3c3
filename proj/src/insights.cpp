#include "ndvicast/insights.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ndvicast/errors.hpp"
#include "ndvicast/spatial.hpp"

namespace ndvicast::insights {

namespace {

std::vector<bool> selected(const Eigen::VectorXd& beta, Dominance dominance) {
    std::vector<bool> out(static_cast<std::size_t>(beta.size()));
    std::vector<double> nonzero;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (beta[j] != 0.0) nonzero.push_back(std::abs(beta[j]));
    }
    double cut = 0.0;
    if (dominance == Dominance::top_quartile && !nonzero.empty()) cut = spatial::percentile(nonzero, 75.0);
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double a = std::abs(beta[j]);
        out[static_cast<std::size_t>(j)] = a != 0.0 && a >= cut;
    }
    return out;
}

const GeoPoint* find_position(const std::map<std::string, GeoPoint>& positions, const std::string& id) {
    const auto it = positions.find(id);
    return it == positions.end() ? nullptr : &it->second;
}

}  // namespace

ImportanceTable accumulate_importance(const std::vector<FitRecord>& fits, Dominance dominance) {
    if (fits.empty()) throw ValidationError("importance needs at least one fit");
    const auto& universe = fits.front().location_ids;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < universe.size(); ++i) {
        if (!index.emplace(universe[i], i).second) {
            throw ValidationError("duplicate location '" + universe[i] + "' in fit history");
        }
    }
    std::vector<int> count(universe.size(), 0);
    std::vector<double> sum(universe.size(), 0.0);
    for (std::size_t f = 0; f < fits.size(); ++f) {
        const auto& fit = fits[f];
        if (static_cast<Eigen::Index>(fit.location_ids.size()) != fit.beta.size()) {
            throw ValidationError("fit " + std::to_string(f) + ": coefficient count does not match its locations");
        }
        if (fit.location_ids.size() != universe.size()) {
            throw ValidationError("fit " + std::to_string(f) + " covers a different set of locations");
        }
        const auto mask = selected(fit.beta, dominance);
        std::vector<bool> seen(universe.size(), false);
        for (std::size_t j = 0; j < fit.location_ids.size(); ++j) {
            const auto it = index.find(fit.location_ids[j]);
            if (it == index.end() || seen[it->second]) {
                throw ValidationError("fit " + std::to_string(f) + " covers a different set of locations");
            }
            seen[it->second] = true;
            if (mask[j]) {
                ++count[it->second];
                sum[it->second] += std::abs(fit.beta[static_cast<Eigen::Index>(j)]);
            }
        }
    }
    ImportanceTable table;
    table.total_fits = static_cast<int>(fits.size());
    for (std::size_t i = 0; i < universe.size(); ++i) {
        LocationImportance row;
        row.location_id = universe[i];
        row.selection_count = count[i];
        if (count[i] > 0) {
            row.mean_abs_coef = sum[i] / count[i];
            row.importance = row.mean_abs_coef * count[i] / table.total_fits;
        }
        table.rows.push_back(row);
    }
    return table;
}

std::vector<LocationImportance> cce_candidates(const ImportanceTable& table,
                                               const std::map<std::string, GeoPoint>& positions, int n,
                                               double min_spacing_km) {
    if (n < 1) throw ValidationError("cce candidate count must be >= 1");
    if (min_spacing_km < 0.0) throw ValidationError("min spacing must be >= 0");
    auto ranked = table.rows;
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.importance != b.importance) return a.importance > b.importance;
        return a.location_id < b.location_id;
    });
    std::vector<LocationImportance> chosen;
    std::vector<GeoPoint> chosen_at;
    for (const auto& r : ranked) {
        if (static_cast<int>(chosen.size()) >= n) break;
        if (min_spacing_km > 0.0) {
            const auto* p = find_position(positions, r.location_id);
            if (!p) continue;
            const bool close = std::any_of(chosen_at.begin(), chosen_at.end(), [&](const GeoPoint& q) {
                return spatial::haversine_km(*p, q) < min_spacing_km;
            });
            if (close) continue;
            chosen_at.push_back(*p);
        }
        chosen.push_back(r);
    }
    return chosen;
}

void write_importance_csv(const std::filesystem::path& path, const ImportanceTable& table,
                          const std::map<std::string, GeoPoint>& positions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    auto rows = table.rows;
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.importance != b.importance) return a.importance > b.importance;
        return a.location_id < b.location_id;
    });
    out << "location_id,lat,lon,selection_count,mean_abs_coef,importance\n";
    for (const auto& r : rows) {
        const auto* p = find_position(positions, r.location_id);
        out << r.location_id << ',' << (p ? format_double(p->lat) : "") << ',' << (p ? format_double(p->lon) : "")
            << ',' << r.selection_count << ',' << format_double(r.mean_abs_coef) << ','
            << format_double(r.importance) << '\n';
    }
}

void write_cce_geojson(const std::filesystem::path& path, const std::vector<LocationImportance>& sites,
                       const std::map<std::string, GeoPoint>& positions) {
    using nlohmann::ordered_json;
    ordered_json features = ordered_json::array();
    int rank = 0;
    for (const auto& s : sites) {
        ++rank;
        const auto* p = find_position(positions, s.location_id);
        if (!p) continue;
        ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Point"}, {"coordinates", {p->lon, p->lat}}};
        f["properties"] = {{"location_id", s.location_id},
                           {"rank", rank},
                           {"selection_count", s.selection_count},
                           {"mean_abs_coef", s.mean_abs_coef},
                           {"importance", s.importance}};
        features.push_back(std::move(f));
    }
    ordered_json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = std::move(features);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

}  // namespace ndvicast::insights
