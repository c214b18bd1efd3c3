#include "ndvicast/elastic_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ndvicast/errors.hpp"

namespace ndvicast::enet {

namespace {

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw ValidationError("X rows and y length differ");
    if (X.rows() < 2) throw ValidationError("elastic net needs at least 2 rows");
    if (!X.allFinite() || !y.allFinite()) throw ValidationError("non-finite input to elastic net");
}

void check_config(const ElasticNetConfig& c) {
    if (!(c.lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
    if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ValidationError("gamma must be in [0, 1]");
    if (!(c.tol > 0.0)) throw ValidationError("tol must be > 0");
    if (c.max_sweeps < 1) throw ValidationError("max_sweeps must be >= 1");
}

/// The descent problem on the working (centered and possibly scaled) columns.
struct Workspace {
    ElasticNetConfig config;
    Eigen::Index n_cols = 0;
    std::vector<int> kept;  // original index of each working column
    std::vector<int> dropped;
    Eigen::MatrixXd Xw;
    Eigen::VectorXd y;
    Eigen::VectorXd means;   // original-length
    Eigen::VectorXd scales;  // original-length
    Eigen::VectorXd col_sq;  // (1/T)||x_j||^2 on the working scale
    bool centered = false;

    Workspace(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_in, const ElasticNetConfig& cfg)
        : config(cfg), n_cols(X.cols()), y(y_in) {
        check_inputs(X, y_in);
        check_config(cfg);
        const auto T = static_cast<double>(X.rows());
        means = Eigen::VectorXd::Zero(n_cols);
        scales = Eigen::VectorXd::Ones(n_cols);
        // Centering is free when the intercept is unpenalized; the penalized
        // bias equation acts on beta0 itself, so raw columns are kept there.
        centered = cfg.standardize || !cfg.penalize_intercept;
        for (Eigen::Index j = 0; j < n_cols; ++j) {
            if (centered) means[j] = X.col(j).mean();
            if (cfg.standardize) {
                const double sd = std::sqrt((X.col(j).array() - means[j]).square().sum() / T);
                if (!(sd > 1e-14 * std::max(1.0, std::abs(means[j])))) {
                    dropped.push_back(static_cast<int>(j));
                    continue;
                }
                scales[j] = sd;
            }
            kept.push_back(static_cast<int>(j));
        }
        Xw.resize(X.rows(), static_cast<Eigen::Index>(kept.size()));
        col_sq.resize(Xw.cols());
        for (Eigen::Index k = 0; k < Xw.cols(); ++k) {
            const int j = kept[static_cast<std::size_t>(k)];
            Xw.col(k) = (X.col(j).array() - means[j]) / scales[j];
            col_sq[k] = Xw.col(k).squaredNorm() / T;
        }
    }

    [[nodiscard]] double working_objective(double b0, const Eigen::VectorXd& b, double lambda) const {
        return objective(Xw, y, b0, b, lambda, config.gamma, config.penalize_intercept);
    }

    /// Intercept update given the mean residual `s` that excludes beta0.
    [[nodiscard]] double solve_intercept(double s, double lambda) const {
        if (!config.penalize_intercept) return s;
        const double g = config.gamma;
        const double l1 = lambda * g;
        // -(1/T) 1'(y - beta0 - X beta) - lambda(1-gamma) beta0 + lambda gamma sign(beta0) = 0
        // i.e. beta0 (1 - lambda(1-gamma)) = s - lambda gamma sign(beta0), solved per sign branch.
        const double c = 1.0 - lambda * (1.0 - g);
        std::vector<double> roots;
        if (std::abs(s) <= l1) roots.push_back(0.0);
        if (c != 0.0) {
            const double pos = (s - l1) / c;
            if (pos > 0.0) roots.push_back(pos);
            const double neg = (s + l1) / c;
            if (neg < 0.0) roots.push_back(neg);
        }
        if (roots.empty()) throw NumericalError("bias equation has no root for this lambda/gamma");
        // Several branches can hold when c < 0; keep the one with the smallest objective.
        auto cost = [&](double b) { return 0.5 * (b * b - 2.0 * b * s) + lambda * (0.5 * (1.0 - g) * b * b + g * std::abs(b)); };
        double best = roots.front();
        for (double r : roots) {
            if (cost(r) < cost(best) || (cost(r) == cost(best) && std::abs(r) < std::abs(best))) best = r;
        }
        return best;
    }

    /// Runs descent in place on (b0, b); returns sweeps used and convergence.
    std::pair<int, bool> solve(double lambda, double& b0, Eigen::VectorXd& b, std::vector<double>* trace) const {
        const auto T = static_cast<double>(Xw.rows());
        const double l1 = lambda * config.gamma;
        const double l2 = lambda * (1.0 - config.gamma);
        const Eigen::Index p = Xw.cols();
        Eigen::VectorXd r(y.size());
        std::vector<Eigen::Index> active;
        active.reserve(static_cast<std::size_t>(p));

        auto update = [&](Eigen::Index j) {
            const double old = b[j];
            const double z = Xw.col(j).dot(r) / T + col_sq[j] * old;
            const double denom = col_sq[j] + l2;
            const double next = denom > 0.0 ? soft_threshold(z, l1) / denom : 0.0;
            if (next != old) {
                r.noalias() -= (next - old) * Xw.col(j);
                b[j] = next;
            }
            return std::abs(next - old);
        };
        auto update_intercept = [&]() {
            const double s = r.mean() + b0;
            if (!std::isfinite(s)) throw NumericalError("elastic net: coordinate descent diverged");
            const double next = solve_intercept(s, lambda);
            const double delta = next - b0;
            if (delta != 0.0) {
                r.array() -= delta;
                b0 = next;
            }
            return std::abs(delta);
        };

        int sweeps = 0;
        bool full = true;
        while (sweeps < config.max_sweeps) {
            double max_delta = 0.0;
            if (full) {
                r = y - Xw * b;
                r.array() -= b0;
                active.clear();
                for (Eigen::Index j = 0; j < p; ++j) {
                    max_delta = std::max(max_delta, update(j));
                    if (b[j] != 0.0) active.push_back(j);
                }
            } else {
                for (Eigen::Index j : active) max_delta = std::max(max_delta, update(j));
            }
            max_delta = std::max(max_delta, update_intercept());
            ++sweeps;
            if (trace) trace->push_back(working_objective(b0, b, lambda));
            if (max_delta <= config.tol) {
                if (full) return {sweeps, true};
                full = true;  // active set settled; confirm with a full sweep
            } else {
                full = false;
            }
        }
        return {sweeps, false};
    }

    [[nodiscard]] ElasticNetModel to_model(double lambda, double b0, const Eigen::VectorXd& b,
                                           std::pair<int, bool> status, std::vector<double> trace) const {
        ElasticNetModel m;
        m.config = config;
        m.config.lambda = lambda;
        m.n_sweeps = status.first;
        m.converged = status.second;
        m.column_means = means;
        m.column_scales = scales;
        m.dropped_columns = dropped;
        m.objective_trace = std::move(trace);
        m.beta = Eigen::VectorXd::Zero(n_cols);
        double intercept = b0;
        for (std::size_t k = 0; k < kept.size(); ++k) {
            const int j = kept[k];
            m.beta[j] = b[static_cast<Eigen::Index>(k)] / scales[j];
            intercept -= means[j] * m.beta[j];
        }
        m.beta0 = intercept;
        return m;
    }
};

}  // namespace

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double beta0, const Eigen::VectorXd& beta,
                 double lambda, double gamma, bool penalize_intercept) {
    if (X.rows() != y.size() || X.cols() != beta.size()) throw ValidationError("objective: dimension mismatch");
    const auto T = static_cast<double>(X.rows());
    Eigen::VectorXd r = y - X * beta;
    r.array() -= beta0;
    double l2 = beta.squaredNorm();
    double l1 = beta.lpNorm<1>();
    if (penalize_intercept) {
        l2 += beta0 * beta0;
        l1 += std::abs(beta0);
    }
    return r.squaredNorm() / (2.0 * T) + lambda * (0.5 * (1.0 - gamma) * l2 + gamma * l1);
}

ElasticNetModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ElasticNetConfig& config) {
    const Workspace ws(X, y, config);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(ws.Xw.cols());
    double b0 = 0.0;
    std::vector<double> trace;
    const auto status = ws.solve(config.lambda, b0, b, config.track_objective ? &trace : nullptr);
    return ws.to_model(config.lambda, b0, b, status, std::move(trace));
}

std::vector<ElasticNetModel> fit_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const ElasticNetConfig& config, const std::vector<double>& lambdas) {
    const Workspace ws(X, y, config);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(ws.Xw.cols());
    double b0 = 0.0;
    std::vector<ElasticNetModel> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas) {
        if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
        std::vector<double> trace;
        const auto status = ws.solve(lambda, b0, b, config.track_objective ? &trace : nullptr);
        out.push_back(ws.to_model(lambda, b0, b, status, std::move(trace)));
    }
    return out;
}

Eigen::VectorXd predict(const ElasticNetModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.beta.size()) throw ValidationError("predict: column count does not match the model");
    Eigen::VectorXd out = X * model.beta;
    out.array() += model.beta0;
    return out;
}

double predict_row(const ElasticNetModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    if (x.size() != model.beta.size()) throw ValidationError("predict: column count does not match the model");
    return model.beta0 + x.dot(model.beta);
}

double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double gamma, bool standardize) {
    check_inputs(X, y);
    const auto T = static_cast<double>(X.rows());
    const Eigen::VectorXd yc = y.array() - y.mean();
    double best = 0.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        Eigen::VectorXd xc = X.col(j).array() - X.col(j).mean();
        if (standardize) {
            const double sd = std::sqrt(xc.squaredNorm() / T);
            if (!(sd > 1e-14)) continue;
            xc /= sd;
        }
        best = std::max(best, std::abs(xc.dot(yc)));
    }
    return best / (T * std::max(gamma, 0.001));
}

std::vector<double> lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double gamma,
                                bool standardize, int count, double min_ratio) {
    if (count < 1) throw ValidationError("lambda grid needs at least one value");
    const double top = lambda_max(X, y, gamma, standardize);
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(count));
    if (!(top > 0.0)) {
        grid.assign(static_cast<std::size_t>(count), 0.0);
        return grid;
    }
    for (int i = 0; i < count; ++i) {
        const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        grid.push_back(top * std::pow(min_ratio, frac));
    }
    return grid;
}

}  // namespace ndvicast::enet
