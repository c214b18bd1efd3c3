#pragma once

#include <vector>

#include <Eigen/Dense>

namespace ndvicast::enet {

struct ElasticNetConfig {
    double lambda = 0.0;
    /// L1 share of the penalty; the arrival model keeps this <= 0.05.
    double gamma = 0.05;
    /// Stop once a full sweep changes no coefficient by more than this.
    double tol = 1e-7;
    int max_sweeps = 10000;
    /// true: penalized bias equation
    ///   beta0 (1 - lambda(1-gamma)) = mean residual - lambda gamma sign(beta0).
    /// Its L2 sign differs from the objective's gradient, so it is not a
    /// coordinate minimizer. false: unpenalized intercept = mean residual.
    bool penalize_intercept = true;
    bool standardize = true;
    /// Record the working-scale objective after every sweep.
    bool track_objective = false;
};

/// Fitted coefficients, reported on the original data scale.
struct ElasticNetModel {
    double beta0 = 0.0;
    Eigen::VectorXd beta;
    ElasticNetConfig config;
    int n_sweeps = 0;
    bool converged = false;
    Eigen::VectorXd column_means;
    Eigen::VectorXd column_scales;
    /// Zero-variance columns removed before descent; their beta is 0.
    std::vector<int> dropped_columns;
    /// Working-scale objective after each sweep (only with track_objective).
    std::vector<double> objective_trace;
};

/// sign(z) * max(|z| - t, 0)
double soft_threshold(double z, double t);

/// (1/2T)||y - beta0 - X beta||^2 + lambda [ (1-gamma)/2 ||beta||^2 + gamma ||beta||_1 ],
/// with beta0 entering the penalty only when `penalize_intercept`.
double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double beta0, const Eigen::VectorXd& beta,
                 double lambda, double gamma, bool penalize_intercept = false);

/// Cyclic coordinate descent. Non-convergence is reported through
/// `converged`, not thrown.
ElasticNetModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ElasticNetConfig& config);

/// Fits every lambda in `lambdas` (taken in the given order), warm-starting
/// each solve from the previous one. `config.lambda` is ignored.
std::vector<ElasticNetModel> fit_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const ElasticNetConfig& config, const std::vector<double>& lambdas);

Eigen::VectorXd predict(const ElasticNetModel& model, const Eigen::MatrixXd& X);
double predict_row(const ElasticNetModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Smallest lambda that zeroes every coefficient, on the working scale:
/// max_j |x_j' (y - mean y)| / (T max(gamma, 0.001)).
double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double gamma, bool standardize);

/// `count` values log-spaced from lambda_max down to min_ratio * lambda_max.
std::vector<double> lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double gamma,
                                bool standardize, int count = 50, double min_ratio = 1e-4);

}  // namespace ndvicast::enet
