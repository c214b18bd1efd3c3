#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ndvicast/data.hpp"

namespace ndvicast::insights {

/// Stage-1 coefficients of one fit, keyed by location.
struct FitRecord {
    std::vector<std::string> location_ids;
    Eigen::VectorXd beta;
};

enum class Dominance {
    /// Any nonzero coefficient counts as a selection.
    nonzero,
    /// Only coefficients with |beta| at or above the fit's upper quartile of nonzero |beta|.
    top_quartile,
};

struct LocationImportance {
    std::string location_id;
    int selection_count = 0;
    /// Mean |beta| over the fits where the location was selected.
    double mean_abs_coef = 0.0;
    /// mean_abs_coef * selection_count / total_fits
    double importance = 0.0;
};

struct ImportanceTable {
    int total_fits = 0;
    std::vector<LocationImportance> rows;  // in location universe order
};

/// Every fit must cover the same set of locations (order may differ).
ImportanceTable accumulate_importance(const std::vector<FitRecord>& fits, Dominance dominance = Dominance::nonzero);

/// Greedy pick by descending importance (ties by location id), skipping
/// sites closer than min_spacing_km to one already chosen. Locations with
/// no position are skipped when min_spacing_km > 0.
std::vector<LocationImportance> cce_candidates(const ImportanceTable& table,
                                               const std::map<std::string, GeoPoint>& positions, int n,
                                               double min_spacing_km = 0.0);

void write_importance_csv(const std::filesystem::path& path, const ImportanceTable& table,
                          const std::map<std::string, GeoPoint>& positions);

/// FeatureCollection of points (GeoJSON order: lon, lat) with rank and
/// importance properties.
void write_cce_geojson(const std::filesystem::path& path, const std::vector<LocationImportance>& sites,
                       const std::map<std::string, GeoPoint>& positions);

}  // namespace ndvicast::insights
