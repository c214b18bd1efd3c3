#pragma once

#include <Eigen/Dense>

namespace ndvicast {

struct LinearFit {
    double intercept = 0.0;
    Eigen::VectorXd coef;
    /// Some regressor had (numerically) zero centered variance.
    bool degenerate = false;
};

/// Least squares with an unpenalized intercept. A ridge jitter of
/// `jitter` times the mean diagonal of the centered normal matrix keeps
/// rank-deficient systems solvable.
LinearFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double jitter = 1e-10);

}  // namespace ndvicast
