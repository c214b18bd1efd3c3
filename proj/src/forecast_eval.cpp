#include "ndvicast/forecast_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>

#include "ndvicast/errors.hpp"
#include "ndvicast/linalg.hpp"
#include "ndvicast/stats.hpp"

namespace ndvicast::eval {

double mae(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) throw ValidationError("mae: length mismatch");
    if (actual.empty()) throw ValidationError("mae: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) sum += std::abs(actual[i] - predicted[i]);
    return sum / static_cast<double>(actual.size());
}

// Methods ------------------------------------------------------------------------

Method regpcr_method(const regpcr::RegPcrConfig& config, std::function<void(const regpcr::RegPcrModel&)> on_fit,
                     bool refit_stage1) {
    auto first = std::make_shared<std::optional<enet::ElasticNetModel>>();
    return {"regpcr", [config, on_fit = std::move(on_fit), refit_stage1, first](const StepInput& in) {
                const enet::ElasticNetModel* reuse = !refit_stage1 && first->has_value() ? &first->value() : nullptr;
                const auto model = regpcr::fit(in.train, config, reuse);
                if (!first->has_value() && !model.degenerate_response) *first = model.stage1;
                if (on_fit) on_fit(model);
                return regpcr::predict(model, in.x_next);
            }};
}

Method ridge_method(int cv_origins) {
    return {"ridge", [cv_origins](const StepInput& in) {
                const auto transform = in.train.transform;
                const double lambda = baselines::ridge_choose_lambda(
                    in.train.X, in.train.y, cv_origins, [transform](double z) { return to_arrival(z, transform); });
                const auto model = baselines::ridge_fit(in.train.X, in.train.y, lambda);
                return to_arrival(model.beta0 + in.x_next.dot(model.beta), transform);
            }};
}

Method pcr_method(int max_factors) {
    return {"pcr", [max_factors](const StepInput& in) {
                const Eigen::Index k = std::min<Eigen::Index>(max_factors, pca::max_components(in.train.X));
                const auto model = baselines::pcr_fit(in.train.X, in.train.y, k);
                return to_arrival(baselines::pcr_predict(model, in.x_next), in.train.transform);
            }};
}

Method arima_method(const baselines::ArimaOptions& options) {
    return {"arima", [options](const StepInput& in) {
                const std::vector<double> history(in.train.y.data(), in.train.y.data() + in.train.y.size());
                const auto model = baselines::arima_fit(history, options);
                return to_arrival(baselines::arima_forecast(model, 1).front(), in.train.transform);
            }};
}

Method method_by_name(const std::string& name, const regpcr::RegPcrConfig& config) {
    if (name == "regpcr") return regpcr_method(config);
    if (name == "ridge") return ridge_method(config.cv_origins);
    if (name == "pcr") return pcr_method(config.target_factors);
    if (name == "arima") return arima_method();
    throw ValidationError("unknown method '" + name + "' (expected regpcr, ridge, pcr or arima)");
}

// Report ------------------------------------------------------------------------

void BacktestReport::merge(const BacktestReport& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    cells.insert(cells.end(), other.cells.begin(), other.cells.end());
}

std::map<std::string, std::string> BacktestReport::winners() const {
    std::map<std::string, const BacktestCell*> best;
    for (const auto& c : cells) {
        if (c.failed) continue;
        auto [it, inserted] = best.try_emplace(c.market_id, &c);
        if (!inserted && (c.mae < it->second->mae || (c.mae == it->second->mae && c.method < it->second->method))) {
            it->second = &c;
        }
    }
    std::map<std::string, std::string> out;
    for (const auto& [market, cell] : best) out[market] = cell->method;
    return out;
}

std::map<std::string, double> BacktestReport::mean_mae() const {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& c : cells) {
        if (c.failed) continue;
        auto& [sum, n] = acc[c.method];
        sum += c.mae;
        ++n;
    }
    std::map<std::string, double> out;
    for (const auto& [method, v] : acc) out[method] = v.first / v.second;
    return out;
}

const BacktestCell& BacktestReport::cell(const std::string& market_id, const std::string& method) const {
    for (const auto& c : cells) {
        if (c.market_id == market_id && c.method == method) return c;
    }
    throw ValidationError("no backtest cell for (" + market_id + ", " + method + ")");
}

BacktestReport rolling_backtest(const MarketSeries& market, const NdviPanel& panel,
                                const std::vector<Method>& methods, int initial_window, int steps) {
    if (initial_window < 1 || steps < 1) throw ValidationError("initial_window and steps must be >= 1");
    const auto months = regpcr::eligible_months(market, panel);
    const auto needed = static_cast<std::size_t>(initial_window) + static_cast<std::size_t>(steps);
    if (needed > months.size()) {
        throw ValidationError("market '" + market.market_id + "': initial_window + steps = " + std::to_string(needed) +
                              " exceeds the " + std::to_string(months.size()) + " usable months");
    }
    const auto design = regpcr::build_design(market, panel, months.front(), months[needed - 1]);

    std::vector<std::vector<BacktestRow>> rows(methods.size());
    std::vector<BacktestCell> cells;
    for (const auto& m : methods) cells.push_back({market.market_id, m.name, false, {}, 0.0, 0});

    for (int s = 0; s < steps; ++s) {
        const Eigen::Index target = initial_window + s;
        const auto train = design.slice(0, target);
        StepInput in{train, design.X.row(target), design.months[static_cast<std::size_t>(target)],
                     design.ndvi_months[static_cast<std::size_t>(target)]};
        // Leakage guard: responses only up to target - 1, NDVI only from target - 1.
        if (!(train.months.back() < in.target_month) || in.ndvi_month != in.target_month.prev() ||
            !(train.ndvi_months.back() < in.ndvi_month)) {
            throw std::logic_error("rolling_backtest: training window overlaps the forecast month");
        }
        for (std::size_t k = 0; k < methods.size(); ++k) {
            if (cells[k].failed) continue;
            try {
                const double pred = methods[k].predict(in);
                if (!std::isfinite(pred)) throw NumericalError("non-finite prediction");
                rows[k].push_back({market.market_id, methods[k].name, in.target_month, design.arrivals[target], pred});
            } catch (const std::exception& e) {
                cells[k].failed = true;
                cells[k].error = in.target_month.str() + ": " + e.what();
                rows[k].clear();
            }
        }
    }

    BacktestReport report;
    for (std::size_t k = 0; k < methods.size(); ++k) {
        if (!cells[k].failed) {
            std::vector<double> a, p;
            for (const auto& r : rows[k]) {
                a.push_back(r.actual);
                p.push_back(r.predicted);
            }
            cells[k].mae = mae(a, p);
            cells[k].n = static_cast<int>(a.size());
        }
        report.rows.insert(report.rows.end(), rows[k].begin(), rows[k].end());
    }
    report.cells = std::move(cells);
    return report;
}

void add_external_predictions(BacktestReport& report, const std::vector<BacktestRow>& rows) {
    std::map<std::pair<std::string, std::string>, std::vector<BacktestRow>> grouped;
    for (const auto& r : rows) grouped[{r.market_id, r.method}].push_back(r);
    for (auto& [key, group] : grouped) {
        const auto& [market, method] = key;
        std::string reference;
        for (const auto& c : report.cells) {
            if (c.market_id != market) continue;
            if (c.method == method) {
                throw ValidationError("method '" + method + "' already present for market '" + market + "'");
            }
            if (reference.empty() && !c.failed) reference = c.method;
        }
        // Evaluation grid of an existing successful cell of this market.
        std::vector<YearMonth> grid;
        for (const auto& r : report.rows) {
            if (r.market_id == market && r.method == reference) grid.push_back(r.month);
        }
        std::sort(group.begin(), group.end(), [](const auto& a, const auto& b) { return a.month < b.month; });
        std::sort(grid.begin(), grid.end());
        std::vector<YearMonth> months;
        for (const auto& r : group) months.push_back(r.month);
        if (months != grid) {
            throw ValidationError("external predictions for (" + market + ", " + method +
                                  ") do not cover the report's evaluation months");
        }
        std::vector<double> a, p;
        for (const auto& r : group) {
            a.push_back(r.actual);
            p.push_back(r.predicted);
        }
        report.cells.push_back({market, method, false, {}, mae(a, p), static_cast<int>(a.size())});
        report.rows.insert(report.rows.end(), group.begin(), group.end());
    }
}

void write_report_csv(const std::filesystem::path& path, const BacktestReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    auto rows = report.rows;
    std::stable_sort(rows.begin(), rows.end(), [](const BacktestRow& a, const BacktestRow& b) {
        if (a.market_id != b.market_id) return a.market_id < b.market_id;
        if (a.method != b.method) return a.method < b.method;
        return a.month < b.month;
    });
    out << "market_id,method,month,actual,predicted\n";
    for (const auto& r : rows) {
        out << r.market_id << ',' << r.method << ',' << r.month.str() << ',' << format_double(r.actual) << ','
            << format_double(r.predicted) << '\n';
    }
}

// State aggregation ------------------------------------------------------------

double adjusted_r2(double r2, int n, int p) {
    if (n - p - 1 <= 0) throw ValidationError("adjusted R^2 needs n > p + 1");
    return 1.0 - (1.0 - r2) * (n - 1.0) / static_cast<double>(n - p - 1);
}

StateAggModel fit_state_aggregate(const Eigen::MatrixXd& market_arrivals, const Eigen::VectorXd& state_total,
                                  std::vector<std::string> markets) {
    const auto n = static_cast<int>(market_arrivals.rows());
    const auto p = static_cast<int>(market_arrivals.cols());
    if (state_total.size() != n) throw ValidationError("state aggregate: row count mismatch");
    if (p < 1) throw ValidationError("state aggregate: needs at least one market");
    if (n < p + 2) throw ValidationError("state aggregate: needs at least 2 more months than markets");
    if (!markets.empty() && static_cast<int>(markets.size()) != p) {
        throw ValidationError("state aggregate: market name count mismatch");
    }

    StateAggModel m;
    m.markets = std::move(markets);
    m.n = n;
    // Jitter only when the plain normal equations are rank deficient.
    const Eigen::MatrixXd Xc = market_arrivals.rowwise() - market_arrivals.colwise().mean();
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
    const bool collinear = qr.rank() < p;
    const auto fit = ols(market_arrivals, state_total, collinear ? 1e-10 : 0.0);
    m.jittered = collinear;
    m.alpha0 = fit.intercept;
    m.alpha = fit.coef;

    const double mean = state_total.mean();
    const double sst = (state_total.array() - mean).square().sum();
    if (!(sst > 0.0)) throw ValidationError("state aggregate: state total has no variance");
    Eigen::VectorXd resid = state_total - market_arrivals * m.alpha;
    resid.array() -= m.alpha0;
    const double ssr = resid.squaredNorm();
    m.r2 = std::clamp(1.0 - ssr / sst, 0.0, 1.0);
    m.adjusted_r2 = adjusted_r2(m.r2, n, p);
    const double dof = n - p - 1.0;
    m.f_stat = m.r2 >= 1.0 ? std::numeric_limits<double>::infinity() : (m.r2 / p) / ((1.0 - m.r2) / dof);
    m.p_value = stats::f_survival(m.f_stat, p, dof);
    return m;
}

double predict_state(const StateAggModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& market_arrivals) {
    if (market_arrivals.size() != model.alpha.size()) throw ValidationError("state aggregate: market count mismatch");
    return model.alpha0 + market_arrivals.dot(model.alpha);
}

}  // namespace ndvicast::eval
