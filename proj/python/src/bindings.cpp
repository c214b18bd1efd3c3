#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "ndvicast/baselines.hpp"
#include "ndvicast/elastic_net.hpp"
#include "ndvicast/errors.hpp"
#include "ndvicast/forecast_eval.hpp"
#include "ndvicast/model_io.hpp"
#include "ndvicast/pca.hpp"
#include "ndvicast/price_model.hpp"
#include "ndvicast/regpcr.hpp"
#include "ndvicast/stats.hpp"

namespace py = pybind11;
using namespace ndvicast;

namespace {

/// Design from a lagged NDVI matrix and same-length arrivals. Months are
/// placeholders counted from 2000-01.
regpcr::DesignMatrix make_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& arrivals,
                                 std::vector<std::string> location_ids) {
    if (X.rows() != arrivals.size()) throw ValidationError("design: X rows and arrivals length differ");
    if (location_ids.empty()) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) location_ids.push_back(std::to_string(j));
    }
    if (static_cast<Eigen::Index>(location_ids.size()) != X.cols()) {
        throw ValidationError("design: location id count does not match X columns");
    }
    regpcr::DesignMatrix d;
    d.X = X;
    d.arrivals = arrivals;
    d.transform = choose_transform(arrivals);
    d.y.resize(arrivals.size());
    const YearMonth start{2000, 1};
    for (Eigen::Index t = 0; t < arrivals.size(); ++t) {
        d.y[t] = to_response(arrivals[t], d.transform);
        d.months.push_back(YearMonth::from_ordinal(start.ordinal() + static_cast<int>(t) + 1));
        d.ndvi_months.push_back(YearMonth::from_ordinal(start.ordinal() + static_cast<int>(t)));
    }
    d.location_ids = std::move(location_ids);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sparse NDVI-driven arrival and price forecasting";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    // Elastic net
    py::class_<enet::ElasticNetConfig>(m, "ElasticNetConfig")
        .def(py::init<>())
        .def_readwrite("lambda_", &enet::ElasticNetConfig::lambda)
        .def_readwrite("gamma", &enet::ElasticNetConfig::gamma)
        .def_readwrite("tol", &enet::ElasticNetConfig::tol)
        .def_readwrite("max_sweeps", &enet::ElasticNetConfig::max_sweeps)
        .def_readwrite("penalize_intercept", &enet::ElasticNetConfig::penalize_intercept)
        .def_readwrite("standardize", &enet::ElasticNetConfig::standardize)
        .def_readwrite("track_objective", &enet::ElasticNetConfig::track_objective);

    py::class_<enet::ElasticNetModel>(m, "ElasticNetModel")
        .def_readonly("beta0", &enet::ElasticNetModel::beta0)
        .def_readonly("beta", &enet::ElasticNetModel::beta)
        .def_readonly("config", &enet::ElasticNetModel::config)
        .def_readonly("n_sweeps", &enet::ElasticNetModel::n_sweeps)
        .def_readonly("converged", &enet::ElasticNetModel::converged)
        .def_readonly("column_means", &enet::ElasticNetModel::column_means)
        .def_readonly("column_scales", &enet::ElasticNetModel::column_scales)
        .def_readonly("dropped_columns", &enet::ElasticNetModel::dropped_columns)
        .def_readonly("objective_trace", &enet::ElasticNetModel::objective_trace)
        .def("predict", [](const enet::ElasticNetModel& self, const Eigen::MatrixXd& X) { return enet::predict(self, X); });

    m.def("soft_threshold", &enet::soft_threshold, py::arg("z"), py::arg("t"));
    m.def("elastic_net", &enet::fit, py::arg("X"), py::arg("y"), py::arg("config") = enet::ElasticNetConfig{},
          py::call_guard<py::gil_scoped_release>());
    m.def("lambda_max", &enet::lambda_max, py::arg("X"), py::arg("y"), py::arg("gamma"), py::arg("standardize") = true);

    // PCA
    py::class_<pca::PcaModel>(m, "PcaModel")
        .def_readonly("mean", &pca::PcaModel::mean)
        .def_readonly("scale", &pca::PcaModel::scale)
        .def_readonly("components", &pca::PcaModel::components)
        .def_readonly("eigenvalues", &pca::PcaModel::eigenvalues)
        .def_readonly("total_variance", &pca::PcaModel::total_variance)
        .def("explained_variance_ratio", &pca::PcaModel::explained_variance_ratio)
        .def("project", [](const pca::PcaModel& self, const Eigen::MatrixXd& X) { return pca::project(self, X); });
    m.def("fit_pca", &pca::fit_pca, py::arg("X"), py::arg("k") = 0, py::arg("scale_columns") = false);

    // RegPCR
    py::class_<regpcr::RegPcrConfig>(m, "RegPcrConfig")
        .def(py::init<>())
        .def_readwrite("gamma", &regpcr::RegPcrConfig::gamma)
        .def_readwrite("lambda_", &regpcr::RegPcrConfig::lambda)
        .def_readwrite("lambda_count", &regpcr::RegPcrConfig::lambda_count)
        .def_readwrite("lambda_min_ratio", &regpcr::RegPcrConfig::lambda_min_ratio)
        .def_readwrite("cv_origins", &regpcr::RegPcrConfig::cv_origins)
        .def_readwrite("cv_pipeline", &regpcr::RegPcrConfig::cv_pipeline)
        .def_readwrite("tol", &regpcr::RegPcrConfig::tol)
        .def_readwrite("max_sweeps", &regpcr::RegPcrConfig::max_sweeps)
        .def_readwrite("selection_threshold", &regpcr::RegPcrConfig::selection_threshold)
        .def_readwrite("target_factors", &regpcr::RegPcrConfig::target_factors)
        .def_readwrite("pca_components", &regpcr::RegPcrConfig::pca_components)
        .def_readwrite("pca_scale", &regpcr::RegPcrConfig::pca_scale);

    py::class_<regpcr::RegPcrModel>(m, "RegPcrModel")
        .def_readonly("location_ids", &regpcr::RegPcrModel::location_ids)
        .def_readonly("selection_mask", &regpcr::RegPcrModel::selection_mask)
        .def_readonly("pca", &regpcr::RegPcrModel::pca)
        .def_readonly("pc_mask", &regpcr::RegPcrModel::pc_mask)
        .def_readonly("alpha0", &regpcr::RegPcrModel::alpha0)
        .def_readonly("alpha", &regpcr::RegPcrModel::alpha)
        .def_readonly("stage1", &regpcr::RegPcrModel::stage1)
        .def_readonly("stage1_lambda", &regpcr::RegPcrModel::stage1_lambda)
        .def_readonly("factor_lambda", &regpcr::RegPcrModel::factor_lambda)
        .def_readonly("degenerate_response", &regpcr::RegPcrModel::degenerate_response)
        .def("selected_locations", &regpcr::RegPcrModel::selected_locations)
        .def("selected_factors", &regpcr::RegPcrModel::selected_factors)
        .def("predict",
             [](const regpcr::RegPcrModel& self, const Eigen::MatrixXd& X) {
                 Eigen::VectorXd out(X.rows());
                 for (Eigen::Index r = 0; r < X.rows(); ++r) out[r] = regpcr::predict(self, X.row(r));
                 return out;
             })
        .def("to_json", [](const regpcr::RegPcrModel& self) { return dump_json(to_json(self)); });

    m.def(
        "fit_regpcr",
        [](const Eigen::MatrixXd& X, const Eigen::VectorXd& arrivals, const regpcr::RegPcrConfig& config,
           std::vector<std::string> location_ids) {
            const auto design = make_design(X, arrivals, std::move(location_ids));
            py::gil_scoped_release release;
            return regpcr::fit(design, config);
        },
        py::arg("X"), py::arg("arrivals"), py::arg("config") = regpcr::RegPcrConfig{},
        py::arg("location_ids") = std::vector<std::string>{},
        "Row t of X is the NDVI month preceding arrivals[t].");

    // Baselines
    py::class_<baselines::RidgeModel>(m, "RidgeModel")
        .def_readonly("beta0", &baselines::RidgeModel::beta0)
        .def_readonly("beta", &baselines::RidgeModel::beta)
        .def_readonly("lambda_", &baselines::RidgeModel::lambda)
        .def("predict",
             [](const baselines::RidgeModel& self, const Eigen::MatrixXd& X) { return baselines::ridge_predict(self, X); });
    m.def("ridge", &baselines::ridge_fit, py::arg("X"), py::arg("y"), py::arg("lambda_"));

    py::class_<baselines::ArimaLiteModel>(m, "ArimaLiteModel")
        .def_readonly("p", &baselines::ArimaLiteModel::p)
        .def_readonly("d", &baselines::ArimaLiteModel::d)
        .def_readonly("q", &baselines::ArimaLiteModel::q)
        .def_readonly("phi", &baselines::ArimaLiteModel::phi)
        .def_readonly("theta", &baselines::ArimaLiteModel::theta)
        .def_readonly("intercept", &baselines::ArimaLiteModel::intercept)
        .def("forecast", &baselines::arima_forecast, py::arg("horizon"));
    m.def(
        "arima",
        [](const std::vector<double>& y, int max_p, int max_d, int max_q, bool drift) {
            return baselines::arima_fit(y, {max_p, max_d, max_q, drift});
        },
        py::arg("y"), py::arg("max_p") = 3, py::arg("max_d") = 2, py::arg("max_q") = 1, py::arg("drift") = false);

    // State aggregate and statistics
    py::class_<eval::StateAggModel>(m, "StateAggModel")
        .def_readonly("alpha0", &eval::StateAggModel::alpha0)
        .def_readonly("alpha", &eval::StateAggModel::alpha)
        .def_readonly("r2", &eval::StateAggModel::r2)
        .def_readonly("adjusted_r2", &eval::StateAggModel::adjusted_r2)
        .def_readonly("f_stat", &eval::StateAggModel::f_stat)
        .def_readonly("p_value", &eval::StateAggModel::p_value)
        .def_readonly("jittered", &eval::StateAggModel::jittered);
    m.def(
        "fit_state_aggregate",
        [](const Eigen::MatrixXd& market_arrivals, const Eigen::VectorXd& state_total) {
            return eval::fit_state_aggregate(market_arrivals, state_total);
        },
        py::arg("market_arrivals"), py::arg("state_total"));
    m.def("f_survival", &stats::f_survival, py::arg("f"), py::arg("d1"), py::arg("d2"));
    m.def("incomplete_beta", &stats::incomplete_beta, py::arg("x"), py::arg("a"), py::arg("b"));

    // Price model
    py::class_<price::HorizonFit>(m, "HorizonFit")
        .def_readonly("k", &price::HorizonFit::k)
        .def_readonly("coef", &price::HorizonFit::coef)
        .def_readonly("in_sample_mae", &price::HorizonFit::in_sample_mae)
        .def_readonly("n_rows", &price::HorizonFit::n_rows)
        .def_readonly("degenerate", &price::HorizonFit::degenerate);
    py::class_<price::PriceModel>(m, "PriceModel")
        .def_readonly("fits", &price::PriceModel::fits)
        .def_readonly("log1p_arrivals", &price::PriceModel::log1p_arrivals)
        .def("horizon", &price::PriceModel::horizon, py::return_value_policy::reference_internal);
    m.def(
        "fit_price_model",
        [](const std::vector<double>& prices, const std::vector<double>& arrivals, double w, int d,
           std::vector<int> horizons) { return price::fit_price_model(prices, arrivals, {w, d, std::move(horizons)}); },
        py::arg("prices"), py::arg("arrivals"), py::arg("w") = 0.9, py::arg("d") = 12,
        py::arg("horizons") = std::vector<int>{1, 2, 3});

    // Command line
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one command line; returns (exit_code, stdout, stderr).");
}
