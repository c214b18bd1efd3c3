#include "ndvicast/linalg.hpp"

#include "ndvicast/errors.hpp"

namespace ndvicast {

LinearFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double jitter) {
    if (X.rows() != y.size()) throw ValidationError("ols: X rows and y length differ");
    if (X.rows() < 1) throw ValidationError("ols: no rows");
    LinearFit fit;
    const double y_mean = y.mean();
    if (X.cols() == 0) {
        fit.intercept = y_mean;
        fit.coef.resize(0);
        return fit;
    }
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;
    Eigen::MatrixXd A = Xc.transpose() * Xc;
    const double scale = A.diagonal().mean();
    for (Eigen::Index j = 0; j < A.rows(); ++j) {
        if (!(A(j, j) > 1e-12 * std::max(scale, 1e-300))) fit.degenerate = true;
    }
    A.diagonal().array() += jitter * (scale > 0.0 ? scale : 1.0);
    fit.coef = A.ldlt().solve(Xc.transpose() * yc);
    if (!fit.coef.allFinite()) throw NumericalError("ols: normal equations could not be solved");
    fit.intercept = y_mean - x_mean.dot(fit.coef);
    return fit;
}

}  // namespace ndvicast
