#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ndvicast/linalg.hpp"
#include "ndvicast/pca.hpp"

namespace ndvicast::baselines {

// Ridge ------------------------------------------------------------------------

struct RidgeModel {
    double beta0 = 0.0;
    Eigen::VectorXd beta;
    double lambda = 0.0;
};

/// Solves (Xc'Xc/T + lambda I) beta = Xc'yc/T on centered data with an
/// unpenalized intercept. Wide problems go through the T x T dual system.
RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);
Eigen::VectorXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& X);

/// Lambda minimizing one-step-ahead MAE over the last `origins` rows, with
/// errors measured after mapping predictions through `to_scale`.
double ridge_choose_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int origins,
                           const std::function<double(double)>& to_scale);

/// Log-spaced candidate lambdas scaled by the mean eigenvalue of Xc'Xc/T.
std::vector<double> ridge_grid(const Eigen::MatrixXd& X, int count = 30);

// PCR --------------------------------------------------------------------------

struct PcrModel {
    pca::PcaModel pca;
    LinearFit fit;
};

/// PCA on all of X and OLS on the first k factors.
PcrModel pcr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index k);
double pcr_predict(const PcrModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

// ARIMA-lite -------------------------------------------------------------------

struct ArimaOrder {
    int p = 0;
    int d = 0;
    int q = 0;
};

/// Small-order ARIMA fitted by conditional least squares, with the MA term
/// (q <= 1) estimated by Hannan-Rissanen two-stage regression. An intercept
/// is estimated when d == 0 (or with `drift`).
struct ArimaLiteModel {
    int p = 0;
    int d = 0;
    int q = 0;
    std::vector<double> phi;
    std::vector<double> theta;
    double intercept = 0.0;
    /// Last p + d + q observations of the original series, oldest first.
    std::vector<double> tail;
    /// Last q in-sample innovations, oldest first.
    std::vector<double> residual_tail;
    double aic = 0.0;
    int n_obs = 0;
};

struct ArimaOptions {
    int max_p = 3;
    int max_d = 2;
    int max_q = 1;
    bool drift = false;
};

/// Grid search over (p, d, q) minimizing AIC = n ln(RSS/n) + 2(p + q + 1).
/// All candidates are scored on the same target observations.
ArimaLiteModel arima_fit(const std::vector<double>& y, const ArimaOptions& options = {});
ArimaLiteModel arima_fit_order(const std::vector<double>& y, ArimaOrder order, bool drift = false);

/// Iterated forecasts on the original scale; future innovations are zero.
std::vector<double> arima_forecast(const ArimaLiteModel& model, int horizon);

}  // namespace ndvicast::baselines
