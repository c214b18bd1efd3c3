#include "ndvicast/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "ndvicast/errors.hpp"

namespace ndvicast::baselines {

// Ridge ------------------------------------------------------------------------

RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
    if (X.rows() != y.size()) throw ValidationError("ridge: X rows and y length differ");
    if (X.rows() < 2) throw ValidationError("ridge: needs at least 2 rows");
    if (!(lambda >= 0.0)) throw ValidationError("ridge: lambda must be >= 0");
    const auto T = static_cast<double>(X.rows());
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const double y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - y_mean;

    RidgeModel m;
    m.lambda = lambda;
    if (X.cols() <= X.rows()) {
        Eigen::MatrixXd A = Xc.transpose() * Xc / T;
        A.diagonal().array() += lambda;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        if (ldlt.info() != Eigen::Success || (lambda == 0.0 && !(ldlt.vectorD().array().abs() > 1e-14 * std::max(1.0, A.diagonal().maxCoeff())).all())) {
            throw NumericalError("ridge: singular system with lambda = 0");
        }
        m.beta = ldlt.solve(Xc.transpose() * yc / T);
    } else {
        // beta = Xc' (Xc Xc' + T lambda I)^-1 yc
        if (lambda == 0.0) throw NumericalError("ridge: singular system with lambda = 0 (more columns than rows)");
        Eigen::MatrixXd G = Xc * Xc.transpose();
        G.diagonal().array() += T * lambda;
        m.beta = Xc.transpose() * G.ldlt().solve(yc);
    }
    if (!m.beta.allFinite()) throw NumericalError("ridge: non-finite solution");
    m.beta0 = y_mean - x_mean.dot(m.beta);
    return m;
}

Eigen::VectorXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.beta.size()) throw ValidationError("ridge: column count does not match the model");
    Eigen::VectorXd out = X * model.beta;
    out.array() += model.beta0;
    return out;
}

std::vector<double> ridge_grid(const Eigen::MatrixXd& X, int count) {
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const double trace = Xc.squaredNorm() / static_cast<double>(X.rows());
    const double scale = trace / static_cast<double>(std::max<Eigen::Index>(1, std::min(X.rows() - 1, X.cols())));
    const double base = scale > 0.0 ? scale : 1.0;
    std::vector<double> grid;
    for (int i = 0; i < count; ++i) {
        const double frac = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
        grid.push_back(base * std::pow(10.0, 2.0 - 6.0 * frac));  // 1e2 .. 1e-4
    }
    return grid;
}

double ridge_choose_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int origins,
                           const std::function<double(double)>& to_scale) {
    const auto grid = ridge_grid(X);
    const Eigen::Index n = X.rows();
    const Eigen::Index use = std::min<Eigen::Index>(origins, n - 3);
    if (use < 1) return grid[grid.size() / 2];
    std::vector<double> err(grid.size(), 0.0);
    for (Eigen::Index o = use; o >= 1; --o) {
        const Eigen::Index train = n - o;
        const auto Tn = static_cast<double>(train);
        const Eigen::RowVectorXd x_mean = X.topRows(train).colwise().mean();
        const Eigen::MatrixXd Xc = X.topRows(train).rowwise() - x_mean;
        const double y_mean = y.head(train).mean();
        const Eigen::VectorXd yc = y.head(train).array() - y_mean;
        // Predictions for every lambda from one eigendecomposition of the Gram matrix.
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Xc * Xc.transpose());
        const Eigen::VectorXd g = eig.eigenvectors().transpose() * (Xc * (X.row(train) - x_mean).transpose());
        const Eigen::VectorXd u = eig.eigenvectors().transpose() * yc;
        const double actual = to_scale(y[train]);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double shift = Tn * grid[i];
            double pred = y_mean;
            for (Eigen::Index k = 0; k < u.size(); ++k) {
                pred += g[k] * u[k] / (std::max(eig.eigenvalues()[k], 0.0) + shift);
            }
            err[i] += std::abs(to_scale(pred) - actual);
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (err[i] < err[best]) best = i;
    }
    return grid[best];
}

// PCR --------------------------------------------------------------------------

PcrModel pcr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index k) {
    if (k < 1 || k > pca::max_components(X)) throw ValidationError("pcr: k outside [1, min(T-1, L)]");
    PcrModel m;
    m.pca = pca::fit_pca(X, k);
    m.fit = ols(pca::project(m.pca, X), y);
    return m;
}

double pcr_predict(const PcrModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    return model.fit.intercept + pca::project_row(model.pca, x).dot(model.fit.coef.transpose());
}

// ARIMA-lite -------------------------------------------------------------------

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// levels[k][t] = k-th difference at original index t (NaN for t < k).
std::vector<std::vector<double>> difference_levels(const std::vector<double>& y, int d) {
    std::vector<std::vector<double>> levels{y};
    for (int k = 1; k <= d; ++k) {
        const auto& prev = levels.back();
        std::vector<double> next(y.size(), kNaN);
        for (std::size_t t = static_cast<std::size_t>(k); t < y.size(); ++t) next[t] = prev[t] - prev[t - 1];
        levels.push_back(std::move(next));
    }
    return levels;
}

int long_ar_order(int max_p) { return std::max(max_p, 1) + 2; }

/// Least squares of b on A, optionally with an intercept. Minimum-norm
/// solution when A is rank deficient.
struct Regression {
    double intercept = 0.0;
    Eigen::VectorXd coef;
    Eigen::VectorXd residuals;
};

Regression regress(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, bool intercept) {
    Regression r;
    if (A.cols() == 0) {
        r.coef.resize(0);
        r.intercept = intercept ? b.mean() : 0.0;
    } else if (intercept) {
        const Eigen::RowVectorXd a_mean = A.colwise().mean();
        const Eigen::MatrixXd Ac = A.rowwise() - a_mean;
        r.coef = Ac.completeOrthogonalDecomposition().solve((b.array() - b.mean()).matrix());
        r.intercept = b.mean() - a_mean.dot(r.coef);
    } else {
        r.coef = A.completeOrthogonalDecomposition().solve(b);
    }
    r.residuals = b - A * r.coef;
    r.residuals.array() -= r.intercept;
    return r;
}

struct Candidate {
    ArimaLiteModel model;
    bool ok = false;
};

Candidate fit_candidate(const std::vector<double>& y, ArimaOrder o, int start, int m, bool drift) {
    Candidate c;
    const auto levels = difference_levels(y, o.d);
    const auto& w = levels.back();
    const int N = static_cast<int>(y.size());
    const bool with_intercept = o.d == 0 || drift;

    std::vector<double> innovations(y.size(), kNaN);
    if (o.q > 0) {
        const int first = o.d + m;
        const int rows = N - first;
        if (rows < m + 2) return c;
        Eigen::MatrixXd A(rows, m);
        Eigen::VectorXd b(rows);
        for (int r = 0; r < rows; ++r) {
            const int t = first + r;
            b[r] = w[static_cast<std::size_t>(t)];
            for (int i = 1; i <= m; ++i) A(r, i - 1) = w[static_cast<std::size_t>(t - i)];
        }
        const auto longar = regress(A, b, true);
        for (int r = 0; r < rows; ++r) innovations[static_cast<std::size_t>(first + r)] = longar.residuals[r];
    }

    const int rows = N - start;
    const int cols = o.p + o.q;
    if (rows < cols + 2) return c;
    Eigen::MatrixXd A(rows, cols);
    Eigen::VectorXd b(rows);
    for (int r = 0; r < rows; ++r) {
        const int t = start + r;
        b[r] = w[static_cast<std::size_t>(t)];
        for (int i = 1; i <= o.p; ++i) A(r, i - 1) = w[static_cast<std::size_t>(t - i)];
        if (o.q > 0) A(r, o.p) = innovations[static_cast<std::size_t>(t - 1)];
    }
    if (!A.allFinite() || !b.allFinite()) return c;
    const auto reg = regress(A, b, with_intercept);

    auto& m_out = c.model;
    m_out.p = o.p;
    m_out.d = o.d;
    m_out.q = o.q;
    m_out.intercept = reg.intercept;
    for (int i = 0; i < o.p; ++i) m_out.phi.push_back(reg.coef[i]);
    if (o.q > 0) m_out.theta.push_back(reg.coef[o.p]);
    const int keep = std::min(N, o.p + o.d + o.q);
    m_out.tail.assign(y.end() - keep, y.end());
    if (o.q > 0) m_out.residual_tail.push_back(reg.residuals[rows - 1]);
    const double rss = std::max(reg.residuals.squaredNorm(), std::numeric_limits<double>::min());
    m_out.n_obs = rows;
    m_out.aic = rows * std::log(rss / rows) + 2.0 * (o.p + o.q + 1);
    c.ok = std::isfinite(m_out.aic);
    return c;
}

int common_start(int max_p, int max_d, int max_q) {
    return max_d + std::max(max_p, max_q > 0 ? long_ar_order(max_p) + 1 : 0);
}

}  // namespace

ArimaLiteModel arima_fit(const std::vector<double>& y, const ArimaOptions& options) {
    if (options.max_p < 0 || options.max_p > 3 || options.max_d < 0 || options.max_d > 2 || options.max_q < 0 ||
        options.max_q > 1) {
        throw ValidationError("arima: orders limited to p <= 3, d <= 2, q <= 1");
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw ValidationError("arima: non-finite observation");
    }
    const int N = static_cast<int>(y.size());
    if (N - options.max_d < 10) throw ValidationError("arima: series too short (need >= 10 after differencing)");
    int max_q = options.max_q;
    const int m = long_ar_order(options.max_p);
    // The long autoregression needs room; fall back to pure AR when it has none.
    if (max_q > 0 && N - options.max_d - m < m + 2) max_q = 0;
    const int start = common_start(options.max_p, options.max_d, max_q);
    if (N - start < options.max_p + max_q + 2) throw ValidationError("arima: series too short for the order grid");

    Candidate best;
    for (int d = 0; d <= options.max_d; ++d) {
        for (int p = 0; p <= options.max_p; ++p) {
            for (int q = 0; q <= max_q; ++q) {
                auto c = fit_candidate(y, {p, d, q}, start, m, options.drift);
                if (c.ok && (!best.ok || c.model.aic < best.model.aic)) best = std::move(c);
            }
        }
    }
    if (!best.ok) throw NumericalError("arima: no candidate order could be fitted");
    return best.model;
}

ArimaLiteModel arima_fit_order(const std::vector<double>& y, ArimaOrder order, bool drift) {
    if (order.p < 0 || order.p > 3 || order.d < 0 || order.d > 2 || order.q < 0 || order.q > 1) {
        throw ValidationError("arima: orders limited to p <= 3, d <= 2, q <= 1");
    }
    const int N = static_cast<int>(y.size());
    if (N - order.d < 10) throw ValidationError("arima: series too short (need >= 10 after differencing)");
    const int m = long_ar_order(order.p);
    const auto c = fit_candidate(y, order, common_start(order.p, order.d, order.q), m, drift);
    if (!c.ok) throw ValidationError("arima: series too short for the requested order");
    return c.model;
}

std::vector<double> arima_forecast(const ArimaLiteModel& model, int horizon) {
    if (horizon < 1) throw ValidationError("arima: horizon must be >= 1");
    if (static_cast<int>(model.tail.size()) < model.p + model.d) {
        throw ValidationError("arima: model tail shorter than p + d");
    }
    const auto levels = difference_levels(model.tail, model.d);
    std::vector<double> last(static_cast<std::size_t>(model.d) + 1);
    for (int k = 0; k < model.d; ++k) last[static_cast<std::size_t>(k)] = levels[static_cast<std::size_t>(k)].back();
    std::vector<double> w_hist(levels.back().end() - model.p, levels.back().end());

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(horizon));
    for (int h = 1; h <= horizon; ++h) {
        double w = model.intercept;
        for (int i = 1; i <= model.p; ++i) {
            w += model.phi[static_cast<std::size_t>(i - 1)] * w_hist[w_hist.size() - static_cast<std::size_t>(i)];
        }
        if (h == 1 && model.q > 0 && !model.residual_tail.empty()) w += model.theta[0] * model.residual_tail.back();
        if (model.p > 0) {
            w_hist.erase(w_hist.begin());
            w_hist.push_back(w);
        }
        // Integrate back through each differencing level.
        double value = w;
        for (int k = model.d - 1; k >= 0; --k) {
            value += last[static_cast<std::size_t>(k)];
            last[static_cast<std::size_t>(k)] = value;
        }
        out.push_back(value);
    }
    return out;
}

}  // namespace ndvicast::baselines
