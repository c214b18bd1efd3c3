#pragma once

#include <Eigen/Dense>

namespace ndvicast::pca {

/// Principal axes of a centered data matrix. Rows of `components` are
/// orthonormal, ordered by descending eigenvalue, and each row's
/// largest-magnitude entry is positive.
struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;  // all ones unless fitted with scale_columns
    Eigen::MatrixXd components;  // k x p
    Eigen::VectorXd eigenvalues;  // population variances, length k
    double total_variance = 0.0;

    [[nodiscard]] Eigen::Index k() const { return components.rows(); }
    [[nodiscard]] Eigen::Index p() const { return components.cols(); }
    [[nodiscard]] Eigen::VectorXd explained_variance_ratio() const;
};

/// Largest valid component count: min(T - 1, p).
Eigen::Index max_components(const Eigen::MatrixXd& X);

/// Top-k eigenvectors of the population covariance of X. Uses the T x T
/// Gram matrix when p > T. `k <= 0` selects max_components(X).
PcaModel fit_pca(const Eigen::MatrixXd& X, Eigen::Index k = 0, bool scale_columns = false);

/// Factor scores F = ((X - mean) / scale) * components'.
Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& X);
Eigen::RowVectorXd project_row(const PcaModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

}  // namespace ndvicast::pca
