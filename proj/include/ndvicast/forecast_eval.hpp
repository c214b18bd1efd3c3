#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ndvicast/baselines.hpp"
#include "ndvicast/data.hpp"
#include "ndvicast/regpcr.hpp"

namespace ndvicast::eval {

/// (1/T) sum |actual - predicted|
double mae(std::span<const double> actual, std::span<const double> predicted);

/// What a forecasting method sees at one rolling-origin step.
struct StepInput {
    const regpcr::DesignMatrix& train;
    /// NDVI of `ndvi_month` = target_month - 1, in training location order.
    Eigen::RowVectorXd x_next;
    YearMonth target_month;
    YearMonth ndvi_month;
};

/// Returns the predicted arrival (original scale) for the target month.
using Predictor = std::function<double(const StepInput&)>;

struct Method {
    std::string name;
    Predictor predict;
};

/// Names kept for predictions produced outside this toolkit.
inline const std::vector<std::string> kReservedMethodNames = {"random_forest", "gradient_boosting"};

/// `on_fit` sees every fitted model. With refit_stage1 = false the stage-1
/// selection of the first step is kept for all later steps.
Method regpcr_method(const regpcr::RegPcrConfig& config,
                     std::function<void(const regpcr::RegPcrModel&)> on_fit = {}, bool refit_stage1 = true);
Method ridge_method(int cv_origins = 3);
Method pcr_method(int max_factors = 10);
Method arima_method(const baselines::ArimaOptions& options = {});

/// Built-in methods by name: regpcr, ridge, pcr, arima.
Method method_by_name(const std::string& name, const regpcr::RegPcrConfig& config);

struct BacktestRow {
    std::string market_id;
    std::string method;
    YearMonth month;
    double actual = 0.0;
    double predicted = 0.0;
};

struct BacktestCell {
    std::string market_id;
    std::string method;
    bool failed = false;
    std::string error;
    double mae = 0.0;
    int n = 0;
};

struct BacktestReport {
    std::vector<BacktestRow> rows;
    std::vector<BacktestCell> cells;

    /// Appends another report (e.g. another market).
    void merge(const BacktestReport& other);
    /// Lowest-MAE method per market (ties: first by name).
    [[nodiscard]] std::map<std::string, std::string> winners() const;
    /// Mean MAE per method over markets where it did not fail.
    [[nodiscard]] std::map<std::string, double> mean_mae() const;
    [[nodiscard]] const BacktestCell& cell(const std::string& market_id, const std::string& method) const;
};

/// Step s (0-based) trains on eligible months [0, initial_window + s) and
/// predicts month initial_window + s. A method that throws on any step is
/// marked failed for this market; the others are unaffected.
BacktestReport rolling_backtest(const MarketSeries& market, const NdviPanel& panel,
                                const std::vector<Method>& methods, int initial_window, int steps);

/// Merges predictions made elsewhere (method name must be reserved or
/// new) for a market/month grid already present in the report.
void add_external_predictions(BacktestReport& report, const std::vector<BacktestRow>& rows);

void write_report_csv(const std::filesystem::path& path, const BacktestReport& report);

// State aggregation ------------------------------------------------------------

struct StateAggModel {
    std::vector<std::string> markets;
    double alpha0 = 0.0;
    Eigen::VectorXd alpha;
    double r2 = 0.0;
    double adjusted_r2 = 0.0;
    double f_stat = 0.0;
    double p_value = 1.0;
    int n = 0;
    /// Collinear inputs needed the ridge jitter.
    bool jittered = false;
};

/// OLS of the state total on per-market arrivals plus an intercept, with
/// adjusted R^2 and the overall F-test p-value.
StateAggModel fit_state_aggregate(const Eigen::MatrixXd& market_arrivals, const Eigen::VectorXd& state_total,
                                  std::vector<std::string> markets = {});
double predict_state(const StateAggModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& market_arrivals);

/// 1 - (1 - r2)(n - 1)/(n - p - 1)
double adjusted_r2(double r2, int n, int p);

}  // namespace ndvicast::eval
