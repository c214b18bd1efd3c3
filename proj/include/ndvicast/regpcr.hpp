#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ndvicast/data.hpp"
#include "ndvicast/elastic_net.hpp"
#include "ndvicast/pca.hpp"

namespace ndvicast {

/// log(a) normally; log(1 + a) once any training arrival is zero.
enum class ArrivalTransform { log, log1p };

double to_response(double arrival, ArrivalTransform t);
double to_arrival(double response, ArrivalTransform t);
ArrivalTransform choose_transform(const Eigen::VectorXd& arrivals);

/// NDVI of a location set on a contiguous month axis (rows = months,
/// columns = locations, NaN where a month is missing).
struct NdviPanel {
    std::vector<YearMonth> months;
    std::vector<std::string> location_ids;
    std::vector<GeoPoint> positions;
    Eigen::MatrixXd values;

    static NdviPanel from_locations(const std::vector<LocationSeries>& locations,
                                    const std::vector<YearMonth>& axis);
    /// Row index of `month`, or -1 when outside the axis.
    [[nodiscard]] Eigen::Index row_of(const YearMonth& month) const;
};

}  // namespace ndvicast

namespace ndvicast::regpcr {

/// Lag-aligned predictors and log-arrival responses of one market.
/// Row t pairs y at months[t] with NDVI from ndvi_months[t] = months[t] - 1.
struct DesignMatrix {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd arrivals;  // original scale
    std::vector<YearMonth> months;
    std::vector<YearMonth> ndvi_months;
    std::vector<std::string> location_ids;
    ArrivalTransform transform = ArrivalTransform::log;

    [[nodiscard]] Eigen::Index rows() const { return X.rows(); }
    /// Rows [begin, end) with the transform re-chosen for that slice.
    [[nodiscard]] DesignMatrix slice(Eigen::Index begin, Eigen::Index end) const;
};

/// Builds the design for response months [first, last]. Throws
/// ValidationError naming the month (and location) of any gap.
DesignMatrix build_design(const MarketSeries& market, const NdviPanel& panel, const YearMonth& first,
                          const YearMonth& last);

/// Response months of `market` usable with `panel`: arrival present and
/// previous-month NDVI available for every location. Returns the longest
/// contiguous run (earliest on ties).
std::vector<YearMonth> eligible_months(const MarketSeries& market, const NdviPanel& panel);

struct RegPcrConfig {
    double gamma = 0.05;
    /// Stage-1 lambda; <= 0 selects it by rolling-origin validation.
    double lambda = 0.0;
    int lambda_count = 50;
    double lambda_min_ratio = 1e-4;
    /// One-step-ahead validation origins at the end of the training window.
    int cv_origins = 3;
    /// Score validation origins with the whole cascade (true) or with the
    /// stage-1 elastic net alone (false).
    bool cv_pipeline = false;
    double tol = 1e-7;
    int max_sweeps = 10000;
    double selection_threshold = 0.0;
    int target_factors = 10;
    /// PCA components kept before factor selection; 0 = min(T - 1, p).
    int pca_components = 0;
    bool pca_scale = false;
    double ols_jitter = 1e-10;
};

struct FactorSelection {
    std::vector<bool> mask;
    /// Penalty of ||y - F a||^2 + lambda ||a||_1 at the chosen point.
    double lambda = 0.0;
    Eigen::VectorXd alpha;
};

struct RegPcrModel {
    std::string market_id;
    std::vector<std::string> location_ids;
    std::vector<bool> selection_mask;
    Eigen::Index p = 0;
    pca::PcaModel pca;
    std::vector<bool> pc_mask;
    double alpha0 = 0.0;
    Eigen::VectorXd alpha;  // one entry per selected factor, in factor order
    ArrivalTransform transform = ArrivalTransform::log;
    /// Response had no variance; model predicts exp(alpha0).
    bool degenerate_response = false;

    RegPcrConfig config;
    enet::ElasticNetModel stage1;
    double stage1_lambda = 0.0;
    double factor_lambda = 0.0;
    double in_sample_mae_log = 0.0;
    YearMonth last_month;
    int n_rows = 0;

    [[nodiscard]] std::vector<Eigen::Index> selected_factors() const;
    [[nodiscard]] std::vector<std::string> selected_locations() const;
};

/// mask_j = |beta_j| > threshold. Throws when nothing survives.
std::vector<bool> select_variables(const enet::ElasticNetModel& model, double threshold = 0.0);

/// Lasso of y on the factor columns (unpenalized intercept, no scaling) at
/// penalty `lambda` of ||y - F a||^2 + lambda ||a||_1.
Eigen::VectorXd factor_lasso(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, double lambda, double tol = 1e-10);

/// Walks a decreasing lambda path and keeps the first point whose survivor
/// count is the largest value <= target_factors.
FactorSelection select_factors(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, int target_factors);

/// Stage-1 lambda by one-step-ahead MAE (arrival scale) over the last
/// cv_origins rows of the design; a lambda whose selection is empty or
/// whose cascade fails at any origin is never chosen.
double choose_lambda(const DesignMatrix& design, const RegPcrConfig& config);

/// With `stage1`, its selection is reused instead of fitting stage 1 again.
RegPcrModel fit(const DesignMatrix& design, const RegPcrConfig& config = {},
                const enet::ElasticNetModel* stage1 = nullptr);

/// Predicted log-scale response for one NDVI row (training location order).
double predict_response(const RegPcrModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);
/// Predicted arrival quantity (original scale).
double predict(const RegPcrModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

}  // namespace ndvicast::regpcr
