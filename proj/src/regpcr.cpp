#include "ndvicast/regpcr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ndvicast/errors.hpp"
#include "ndvicast/linalg.hpp"

namespace ndvicast {

double to_response(double arrival, ArrivalTransform t) {
    return t == ArrivalTransform::log ? std::log(arrival) : std::log1p(arrival);
}

double to_arrival(double response, ArrivalTransform t) {
    if (t == ArrivalTransform::log) return std::exp(response);
    return std::max(std::expm1(response), 0.0);
}

ArrivalTransform choose_transform(const Eigen::VectorXd& arrivals) {
    return (arrivals.array() <= 0.0).any() ? ArrivalTransform::log1p : ArrivalTransform::log;
}

NdviPanel NdviPanel::from_locations(const std::vector<LocationSeries>& locations,
                                    const std::vector<YearMonth>& axis) {
    NdviPanel panel;
    panel.months = axis;
    panel.values.resize(static_cast<Eigen::Index>(axis.size()), static_cast<Eigen::Index>(locations.size()));
    for (std::size_t j = 0; j < locations.size(); ++j) {
        panel.location_ids.push_back(locations[j].location_id);
        panel.positions.push_back(locations[j].position);
        const auto col = align(locations[j].months, axis);
        for (std::size_t i = 0; i < col.size(); ++i) {
            panel.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
        }
    }
    return panel;
}

Eigen::Index NdviPanel::row_of(const YearMonth& month) const {
    if (months.empty()) return -1;
    const int idx = month.ordinal() - months.front().ordinal();
    if (idx < 0 || idx >= static_cast<int>(months.size())) return -1;
    return idx;
}

}  // namespace ndvicast

namespace ndvicast::regpcr {

namespace {

bool nearly_constant(const Eigen::VectorXd& y) {
    const double mean = y.mean();
    const double var = (y.array() - mean).square().mean();
    return !(var > 1e-24 * (1.0 + mean * mean));
}

enet::ElasticNetConfig stage1_config(const RegPcrConfig& c) {
    enet::ElasticNetConfig e;
    e.gamma = c.gamma;
    e.tol = c.tol;
    e.max_sweeps = c.max_sweeps;
    e.penalize_intercept = false;
    e.standardize = true;
    return e;
}

}  // namespace

DesignMatrix DesignMatrix::slice(Eigen::Index begin, Eigen::Index end) const {
    if (begin < 0 || end > rows() || begin >= end) throw ValidationError("design slice out of range");
    DesignMatrix out;
    out.X = X.middleRows(begin, end - begin);
    out.arrivals = arrivals.segment(begin, end - begin);
    out.months.assign(months.begin() + begin, months.begin() + end);
    out.ndvi_months.assign(ndvi_months.begin() + begin, ndvi_months.begin() + end);
    out.location_ids = location_ids;
    out.transform = choose_transform(out.arrivals);
    out.y.resize(out.arrivals.size());
    for (Eigen::Index i = 0; i < out.y.size(); ++i) out.y[i] = to_response(out.arrivals[i], out.transform);
    return out;
}

DesignMatrix build_design(const MarketSeries& market, const NdviPanel& panel, const YearMonth& first,
                          const YearMonth& last) {
    if (last < first) throw ValidationError("design window is empty");
    const auto n = static_cast<Eigen::Index>(last.ordinal() - first.ordinal() + 1);
    DesignMatrix d;
    d.location_ids = panel.location_ids;
    d.X.resize(n, static_cast<Eigen::Index>(panel.location_ids.size()));
    d.arrivals.resize(n);
    std::vector<YearMonth> axis;
    for (Eigen::Index t = 0; t < n; ++t) axis.push_back(YearMonth::from_ordinal(first.ordinal() + static_cast<int>(t)));
    const auto arrivals = align(market.arrivals, axis);
    for (Eigen::Index t = 0; t < n; ++t) {
        const YearMonth month = axis[static_cast<std::size_t>(t)];
        const YearMonth lag = month.prev();
        if (std::isnan(arrivals[static_cast<std::size_t>(t)])) {
            throw ValidationError("market '" + market.market_id + "' has no arrival for " + month.str());
        }
        const Eigen::Index row = panel.row_of(lag);
        if (row < 0) throw ValidationError("no NDVI for month " + lag.str());
        for (Eigen::Index j = 0; j < d.X.cols(); ++j) {
            const double v = panel.values(row, j);
            if (std::isnan(v)) {
                throw ValidationError("location '" + panel.location_ids[static_cast<std::size_t>(j)] +
                                      "' has no NDVI for " + lag.str());
            }
            d.X(t, j) = v;
        }
        d.arrivals[t] = arrivals[static_cast<std::size_t>(t)];
        d.months.push_back(month);
        d.ndvi_months.push_back(lag);
    }
    d.transform = choose_transform(d.arrivals);
    d.y.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) d.y[t] = to_response(d.arrivals[t], d.transform);
    return d;
}

std::vector<YearMonth> eligible_months(const MarketSeries& market, const NdviPanel& panel) {
    std::vector<YearMonth> best, run;
    const auto arrivals = align(market.arrivals, panel.months);
    for (std::size_t i = 1; i < panel.months.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i - 1);
        const bool ok = !std::isnan(arrivals[i]) && !panel.values.row(row).array().isNaN().any();
        if (ok) {
            run.push_back(panel.months[i]);
            if (run.size() > best.size()) best = run;
        } else {
            run.clear();
        }
    }
    return best;
}

std::vector<Eigen::Index> RegPcrModel::selected_factors() const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < pc_mask.size(); ++i) {
        if (pc_mask[i]) out.push_back(static_cast<Eigen::Index>(i));
    }
    return out;
}

std::vector<std::string> RegPcrModel::selected_locations() const {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < selection_mask.size(); ++j) {
        if (selection_mask[j]) out.push_back(location_ids[j]);
    }
    return out;
}

std::vector<bool> select_variables(const enet::ElasticNetModel& model, double threshold) {
    if (!(threshold >= 0.0)) throw ValidationError("selection threshold must be >= 0");
    std::vector<bool> mask(static_cast<std::size_t>(model.beta.size()));
    bool any = false;
    for (Eigen::Index j = 0; j < model.beta.size(); ++j) {
        mask[static_cast<std::size_t>(j)] = std::abs(model.beta[j]) > threshold;
        any = any || mask[static_cast<std::size_t>(j)];
    }
    if (!any) throw ValidationError("selection eliminated all variables; decrease lambda or gamma");
    return mask;
}

namespace {

enet::ElasticNetConfig lasso_config(double tol) {
    enet::ElasticNetConfig c;
    c.gamma = 1.0;
    c.standardize = false;
    c.penalize_intercept = false;
    c.tol = tol;
    c.max_sweeps = 100000;
    return c;
}

}  // namespace

Eigen::VectorXd factor_lasso(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, double lambda, double tol) {
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
    auto c = lasso_config(tol);
    // ||r||^2 + lambda ||a||_1 is 2T times the solver objective at lambda / 2T.
    c.lambda = lambda / (2.0 * static_cast<double>(F.rows()));
    return enet::fit(F, y, c).beta;
}

FactorSelection select_factors(const Eigen::MatrixXd& F, const Eigen::VectorXd& y, int target_factors) {
    if (target_factors < 1) throw ValidationError("target_factors must be >= 1");
    const auto T = static_cast<double>(F.rows());
    auto grid = enet::lambda_grid(F, y, 1.0, false, 100, 1e-6);
    grid.push_back(0.0);
    const auto path = enet::fit_path(F, y, lasso_config(1e-10), grid);

    int best_count = 0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const int count = static_cast<int>((path[i].beta.array() != 0.0).count());
        if (count <= target_factors && count > best_count) {
            best_count = count;
            best = i;
        }
    }
    if (best_count == 0) throw NumericalError("factor selection kept no factors at any lambda");
    FactorSelection sel;
    sel.lambda = 2.0 * T * grid[best];
    sel.alpha = path[best].beta;
    sel.mask.resize(static_cast<std::size_t>(F.cols()));
    for (Eigen::Index i = 0; i < F.cols(); ++i) sel.mask[static_cast<std::size_t>(i)] = sel.alpha[i] != 0.0;
    return sel;
}

namespace {

/// Stages 2-4 on the columns kept by `mask`; fills pca, pc_mask and alpha.
void fit_factors(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<bool>& mask,
                 const RegPcrConfig& config, RegPcrModel& m) {
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) keep.push_back(static_cast<Eigen::Index>(j));
    }
    m.selection_mask = mask;
    m.p = static_cast<Eigen::Index>(keep.size());
    const Eigen::MatrixXd Xhat = X(Eigen::all, keep);
    Eigen::Index k = pca::max_components(Xhat);
    if (config.pca_components > 0) k = std::min<Eigen::Index>(k, config.pca_components);
    m.pca = pca::fit_pca(Xhat, k, config.pca_scale);
    const Eigen::MatrixXd F = pca::project(m.pca, Xhat);

    const auto sel = select_factors(F, y, config.target_factors);
    m.pc_mask = sel.mask;
    m.factor_lambda = sel.lambda;

    const auto chosen = m.selected_factors();
    const auto ols_fit = ols(F(Eigen::all, chosen), y, config.ols_jitter);
    m.alpha0 = ols_fit.intercept;
    m.alpha = ols_fit.coef;
}

}  // namespace

double choose_lambda(const DesignMatrix& design, const RegPcrConfig& config) {
    const auto cfg = stage1_config(config);
    const auto grid = enet::lambda_grid(design.X, design.y, config.gamma, true, config.lambda_count,
                                        config.lambda_min_ratio);
    const Eigen::Index n = design.rows();
    const Eigen::Index origins = std::min<Eigen::Index>(config.cv_origins, n - 4);
    if (origins < 1 || grid.size() < 2) return grid[grid.size() / 2];

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> err(grid.size(), 0.0);
    for (Eigen::Index o = origins; o >= 1; --o) {
        const Eigen::Index train = n - o;
        const Eigen::MatrixXd X = design.X.topRows(train);
        const Eigen::VectorXd y = design.y.head(train);
        const auto path = enet::fit_path(X, y, cfg, grid);
        const bool flat = nearly_constant(y);
        for (std::size_t i = 1; i < grid.size(); ++i) {
            if (!std::isfinite(err[i])) continue;
            double pred = enet::predict_row(path[i], design.X.row(train));
            if (config.cv_pipeline && !flat) {
                std::vector<bool> mask(static_cast<std::size_t>(X.cols()));
                bool any = false;
                for (Eigen::Index j = 0; j < X.cols(); ++j) {
                    mask[static_cast<std::size_t>(j)] = std::abs(path[i].beta[j]) > config.selection_threshold;
                    any = any || mask[static_cast<std::size_t>(j)];
                }
                if (!any) {
                    err[i] = kInf;
                    continue;
                }
                RegPcrModel m;
                m.location_ids = design.location_ids;
                try {
                    fit_factors(X, y, mask, config, m);
                } catch (const NumericalError&) {
                    err[i] = kInf;
                    continue;
                }
                pred = predict_response(m, design.X.row(train));
            }
            err[i] += std::abs(to_arrival(pred, design.transform) - design.arrivals[train]);
        }
    }
    // grid[0] zeroes every coefficient by construction.
    std::size_t best = 1;
    for (std::size_t i = 2; i < grid.size(); ++i) {
        if (err[i] < err[best]) best = i;
    }
    return grid[best];
}

RegPcrModel fit(const DesignMatrix& design, const RegPcrConfig& config, const enet::ElasticNetModel* stage1) {
    const Eigen::Index T = design.rows();
    if (T < 8) throw ValidationError("RegPCR needs at least 8 training rows");
    if (design.X.cols() < 1) throw ValidationError("RegPCR needs at least one location");
    if (config.target_factors < 1) throw ValidationError("target_factors must be >= 1");

    RegPcrModel m;
    m.location_ids = design.location_ids;
    m.transform = design.transform;
    m.config = config;
    m.last_month = design.months.back();
    m.n_rows = static_cast<int>(T);

    if (nearly_constant(design.y)) {
        m.degenerate_response = true;
        m.alpha0 = design.y.mean();
        m.selection_mask.assign(static_cast<std::size_t>(design.X.cols()), false);
        m.stage1.beta = Eigen::VectorXd::Zero(design.X.cols());
        m.in_sample_mae_log = (design.y.array() - m.alpha0).abs().mean();
        return m;
    }

    // Stage 1: elastic-net variable selection.
    auto cfg = stage1_config(config);
    if (stage1) {
        if (stage1->beta.size() != design.X.cols()) {
            throw ValidationError("stage-1 model does not match the design's locations");
        }
        m.stage1 = *stage1;
        m.selection_mask = select_variables(m.stage1, config.selection_threshold);
    } else if (config.lambda > 0.0) {
        cfg.lambda = config.lambda;
        m.stage1 = enet::fit(design.X, design.y, cfg);
        m.selection_mask = select_variables(m.stage1, config.selection_threshold);
    } else {
        const double chosen = choose_lambda(design, config);
        auto grid = enet::lambda_grid(design.X, design.y, config.gamma, true, config.lambda_count,
                                      config.lambda_min_ratio);
        // Walk the path down to the chosen value (warm starts), and further
        // down only if nothing survives there.
        std::size_t stop = 0;
        while (stop + 1 < grid.size() && grid[stop] > chosen) ++stop;
        std::vector<double> lead(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(stop) + 1);
        auto path = enet::fit_path(design.X, design.y, cfg, lead);
        std::size_t at = stop;
        auto survivors = [&](const enet::ElasticNetModel& em) {
            return (em.beta.array().abs() > config.selection_threshold).any();
        };
        while (!survivors(path.back()) && at + 1 < grid.size()) {
            ++at;
            lead.push_back(grid[at]);
            path = enet::fit_path(design.X, design.y, cfg, lead);
        }
        m.stage1 = path.back();
        m.selection_mask = select_variables(m.stage1, config.selection_threshold);
    }
    m.stage1_lambda = m.stage1.config.lambda;

    // Stages 2-4: PCA on the survivors, L1 factor selection, OLS.
    fit_factors(design.X, design.y, m.selection_mask, config, m);

    double mae = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) mae += std::abs(predict_response(m, design.X.row(t)) - design.y[t]);
    m.in_sample_mae_log = mae / static_cast<double>(T);
    return m;
}

double predict_response(const RegPcrModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    if (x.size() != static_cast<Eigen::Index>(model.location_ids.size())) {
        throw ValidationError("predict: NDVI vector length does not match the model's locations");
    }
    if (model.degenerate_response) return model.alpha0;
    Eigen::RowVectorXd xhat(model.p);
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < model.selection_mask.size(); ++j) {
        if (model.selection_mask[j]) xhat[c++] = x[static_cast<Eigen::Index>(j)];
    }
    const Eigen::RowVectorXd f = pca::project_row(model.pca, xhat);
    double z = model.alpha0;
    Eigen::Index a = 0;
    for (std::size_t i = 0; i < model.pc_mask.size(); ++i) {
        if (model.pc_mask[i]) z += model.alpha[a++] * f[static_cast<Eigen::Index>(i)];
    }
    return z;
}

double predict(const RegPcrModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    return to_arrival(predict_response(model, x), model.transform);
}

}  // namespace ndvicast::regpcr
