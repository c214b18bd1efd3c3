#include "ndvicast/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ndvicast/errors.hpp"

namespace ndvicast::pca {

namespace {

/// Orthonormalizes `v` against the first `rows` rows of `basis`; returns the
/// norm left after projection (before normalization).
double orthogonalize(Eigen::VectorXd& v, const Eigen::MatrixXd& basis, Eigen::Index rows) {
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i < rows; ++i) v -= basis.row(i).dot(v) * basis.row(i).transpose();
    }
    const double n = v.norm();
    if (n > 0.0) v /= n;
    return n;
}

void fix_sign(Eigen::MatrixXd& components) {
    for (Eigen::Index i = 0; i < components.rows(); ++i) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index j = 0; j < components.cols(); ++j) {
            // first entry wins ties
            if (std::abs(components(i, j)) > best + 1e-12) {
                best = std::abs(components(i, j));
                arg = j;
            }
        }
        if (components(i, arg) < 0.0) components.row(i) *= -1.0;
    }
}

}  // namespace

Eigen::VectorXd PcaModel::explained_variance_ratio() const {
    if (!(total_variance > 0.0)) return Eigen::VectorXd::Zero(eigenvalues.size());
    return eigenvalues / total_variance;
}

Eigen::Index max_components(const Eigen::MatrixXd& X) { return std::min(X.rows() - 1, X.cols()); }

PcaModel fit_pca(const Eigen::MatrixXd& X, Eigen::Index k, bool scale_columns) {
    const Eigen::Index T = X.rows();
    const Eigen::Index p = X.cols();
    if (T < 2) throw ValidationError("PCA needs at least 2 rows");
    if (p < 1) throw ValidationError("PCA needs at least 1 column");
    if (!X.allFinite()) throw ValidationError("non-finite input to PCA");
    if (k <= 0) k = max_components(X);
    if (k < 1 || k > max_components(X)) {
        throw ValidationError("PCA component count " + std::to_string(k) + " outside [1, min(T-1, p)]");
    }

    PcaModel model;
    model.mean = X.colwise().mean().transpose();
    model.scale = Eigen::VectorXd::Ones(p);
    Eigen::MatrixXd Xc = X.rowwise() - model.mean.transpose();
    const double Tn = static_cast<double>(T);
    if (scale_columns) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const double sd = std::sqrt(Xc.col(j).squaredNorm() / Tn);
            if (sd > 1e-14) {
                model.scale[j] = sd;
                Xc.col(j) /= sd;
            }
        }
    }
    model.total_variance = Xc.squaredNorm() / Tn;

    // Candidate directions in descending eigenvalue order.
    Eigen::MatrixXd candidates(k, p);
    Eigen::VectorXd raw_values(k);
    Eigen::Index usable = 0;
    if (p <= T) {
        const Eigen::MatrixXd cov = Xc.transpose() * Xc / Tn;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        for (Eigen::Index i = 0; i < k; ++i) {
            candidates.row(i) = eig.eigenvectors().col(p - 1 - i).transpose();
            raw_values[i] = eig.eigenvalues()[p - 1 - i];
        }
        usable = k;
    } else {
        const Eigen::MatrixXd gram = Xc * Xc.transpose() / Tn;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        const double top = std::max(eig.eigenvalues()[T - 1], 0.0);
        for (Eigen::Index i = 0; i < k; ++i) {
            const double value = eig.eigenvalues()[T - 1 - i];
            raw_values[i] = value;
            if (!(value > 1e-12 * top) || !(top > 0.0)) break;
            candidates.row(i) = (Xc.transpose() * eig.eigenvectors().col(T - 1 - i)).transpose() /
                                std::sqrt(Tn * value);
            ++usable;
        }
    }

    // Orthonormalize; complete null directions with coordinate vectors.
    model.components.resize(k, p);
    Eigen::Index filled = 0;
    for (Eigen::Index i = 0; i < usable; ++i) {
        Eigen::VectorXd v = candidates.row(i).transpose();
        if (orthogonalize(v, model.components, filled) > 1e-6) model.components.row(filled++) = v.transpose();
    }
    for (Eigen::Index j = 0; filled < k && j < p; ++j) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(p, j);
        if (orthogonalize(v, model.components, filled) > 0.5) model.components.row(filled++) = v.transpose();
    }
    if (filled < k) throw NumericalError("PCA basis completion failed");

    // Rayleigh quotients: projected variance along each axis.
    const Eigen::MatrixXd scores = Xc * model.components.transpose();
    model.eigenvalues.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) model.eigenvalues[i] = std::max(scores.col(i).squaredNorm() / Tn, 0.0);

    // Keep descending order after the Rayleigh refinement.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return model.eigenvalues[a] > model.eigenvalues[b]; });
    Eigen::MatrixXd sorted(k, p);
    Eigen::VectorXd values(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        sorted.row(i) = model.components.row(order[static_cast<std::size_t>(i)]);
        values[i] = model.eigenvalues[order[static_cast<std::size_t>(i)]];
    }
    model.components = std::move(sorted);
    model.eigenvalues = std::move(values);
    fix_sign(model.components);
    return model;
}

Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.p()) throw ValidationError("project: column count does not match the PCA model");
    Eigen::MatrixXd Xc = X.rowwise() - model.mean.transpose();
    Xc.array().rowwise() /= model.scale.transpose().array();
    return Xc * model.components.transpose();
}

Eigen::RowVectorXd project_row(const PcaModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    if (x.size() != model.p()) throw ValidationError("project: column count does not match the PCA model");
    const Eigen::RowVectorXd xc = (x - model.mean.transpose()).array() / model.scale.transpose().array();
    return xc * model.components.transpose();
}

}  // namespace ndvicast::pca
