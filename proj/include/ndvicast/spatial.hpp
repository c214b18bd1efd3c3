#pragma once

#include <vector>

#include "ndvicast/data.hpp"

namespace ndvicast::spatial {

inline constexpr double kEarthRadiusKm = 6371.0;

struct LocationFilterConfig {
    double proximity_km = 300.0;
    double variance_percentile = 75.0;
    int target_count = 7000;
    /// Centroid sampling grid; 0 disables block sampling in the pipeline.
    double block_size_deg = 0.0;
    /// Smoothing neighbourhood radius in grid cells; 0 leaves NDVI untouched.
    int smooth_radius = 0;
    /// Grid spacing used for smoothing; 0 infers it from the data.
    double cell_size_deg = 0.0;
};

/// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

/// Mean NDVI over the (2r+1)^2 grid neighbourhood of each location,
/// restricted to locations present in the input. Missing months of a
/// neighbour are skipped.
std::vector<LocationSeries> smooth_ndvi(const std::vector<LocationSeries>& locations, int radius_cells,
                                        double cell_size_deg = 0.0);

/// One representative per non-empty block: the member closest to the block centre.
std::vector<LocationSeries> block_centroids(const std::vector<LocationSeries>& locations, double block_size_deg);

/// Locations strictly closer than `max_km` to `market`, in input order.
std::vector<LocationSeries> filter_by_proximity(const std::vector<LocationSeries>& locations,
                                                const GeoPoint& market, double max_km);

/// Drops locations whose population variance exceeds the given percentile
/// (linear interpolation between order statistics) of all variances.
std::vector<LocationSeries> filter_high_variance(const std::vector<LocationSeries>& locations, double percentile);

/// Every k-th location of the (lat, lon)-sorted set, k = floor(n / target).
std::vector<LocationSeries> systematic_sample(const std::vector<LocationSeries>& locations, int target_count);

/// Linear-interpolation percentile of `values` (q in [0, 100]).
double percentile(std::vector<double> values, double q);

/// proximity -> variance -> sampling, for one market.
std::vector<LocationSeries> select_working_set(const std::vector<LocationSeries>& locations,
                                               const GeoPoint& market, const LocationFilterConfig& config);

/// Optional global preprocessing applied before per-market selection:
/// smoothing, then block-centroid sampling.
std::vector<LocationSeries> preprocess(const std::vector<LocationSeries>& locations,
                                       const LocationFilterConfig& config);

}  // namespace ndvicast::spatial
