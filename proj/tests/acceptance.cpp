// Acceptance run: one line per criterion, non-zero exit if any fails.
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "cli.hpp"
#include "ndvicast/baselines.hpp"
#include "ndvicast/elastic_net.hpp"
#include "ndvicast/errors.hpp"
#include "ndvicast/forecast_eval.hpp"
#include "ndvicast/model_io.hpp"
#include "ndvicast/pca.hpp"
#include "ndvicast/price_model.hpp"
#include "ndvicast/stats.hpp"
#include "ndvicast/synth.hpp"
#include "test_util.hpp"

using namespace ndvicast;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

/// [1 X] b = y through the normal equations.
Eigen::VectorXd normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Eigen::MatrixXd A(X.rows(), X.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(X.cols()) = X;
    return (A.transpose() * A).ldlt().solve(A.transpose() * y);
}

std::vector<double> summed_arrivals(const synth::SynthData& d) {
    std::vector<double> out(d.arrival_months.size(), 0.0);
    for (const auto& m : d.dataset.markets) {
        for (std::size_t t = 0; t < out.size(); ++t) out[t] += m.arrivals[t].value;
    }
    return out;
}

// 1 -------------------------------------------------------------------------------
Outcome solver_equivalences() {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst_ols = 0, worst_ridge = 0, worst_kkt = 0;
    const double tol = 1e-10;
    for (int trial = 0; trial < 20; ++trial) {
        const auto X = testutil::random_matrix(rng, 30, 10);
        const auto y = testutil::random_vector(rng, 30);

        enet::ElasticNetConfig c;
        c.lambda = 0.0;
        c.tol = 1e-13;
        c.max_sweeps = 100000;
        const auto ols_fit = enet::fit(X, y, c);
        const auto ref = normal_equations(X, y);
        worst_ols = std::max(worst_ols, std::abs(ols_fit.beta0 - ref[0]));
        worst_ols = std::max(worst_ols, (ols_fit.beta - ref.tail(10)).cwiseAbs().maxCoeff());

        const double lambda = rng.uniform(0.01, 1.0);
        c.lambda = lambda;
        c.gamma = 0.0;
        c.standardize = false;
        c.penalize_intercept = false;
        const auto ridge = enet::fit(X, y, c);
        const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
        const Eigen::VectorXd yc = y.array() - y.mean();
        const Eigen::VectorXd rb =
            (Xc.transpose() * Xc / 30.0 + lambda * Eigen::MatrixXd::Identity(10, 10)).ldlt().solve(Xc.transpose() * yc / 30.0);
        worst_ridge = std::max(worst_ridge, (ridge.beta - rb).cwiseAbs().maxCoeff());

        c.gamma = 1.0;
        c.standardize = true;
        c.lambda = rng.uniform(0.02, 0.3);
        c.tol = tol;
        const auto lasso = enet::fit(X, y, c);
        const Eigen::VectorXd r = y - enet::predict(lasso, X);
        for (int j = 0; j < 10; ++j) {
            const double sd = lasso.column_scales[j];
            const double g = ((X.col(j).array() - lasso.column_means[j]) / sd).matrix().dot(r) / 30.0;
            const double b = lasso.beta[j] * sd;
            const double v = b != 0.0 ? std::abs(g - c.lambda * (b > 0 ? 1 : -1))
                                      : std::max(0.0, std::abs(g) - c.lambda);
            worst_kkt = std::max(worst_kkt, v);
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = worst_ols <= 1e-6 && worst_ridge <= 1e-6 && worst_kkt <= 10 * tol && secs < 5.0;
    o.detail = fmt("max |ols diff| %.2e, max |ridge diff| %.2e, max KKT violation %.2e (limit %.0e), %.2f s", worst_ols,
                   worst_ridge, worst_kkt, 10 * tol, secs);
    return o;
}

// 2 -------------------------------------------------------------------------------
struct DescentCount {
    int increases = 0;
    int problems_with_increase = 0;
    int diverged = 0;
    std::size_t sweeps = 0;
};

DescentCount count_increases(std::uint64_t seed, const std::function<void(int, enet::ElasticNetConfig&)>& setup) {
    Rng rng(seed);
    DescentCount out;
    for (int trial = 0; trial < 50; ++trial) {
        const int T = 20 + static_cast<int>(rng.below(30));
        const int p = 5 + static_cast<int>(rng.below(80));
        const auto X = testutil::random_matrix(rng, T, p);
        const auto y = testutil::random_vector(rng, T);
        enet::ElasticNetConfig c;
        c.gamma = rng.uniform();
        c.lambda = std::exp(rng.uniform(std::log(1e-4), std::log(1.0)));
        c.track_objective = true;
        c.tol = 1e-9;
        setup(trial, c);
        enet::ElasticNetModel m;
        try {
            m = enet::fit(X, y, c);
        } catch (const NumericalError&) {
            ++out.diverged;
            continue;
        }
        out.sweeps += m.objective_trace.size();
        int here = 0;
        for (std::size_t s = 1; s < m.objective_trace.size(); ++s) {
            const double prev = m.objective_trace[s - 1];
            if (m.objective_trace[s] > prev + 1e-12 * std::abs(prev)) ++here;
        }
        out.increases += here;
        out.problems_with_increase += here > 0;
    }
    return out;
}

Outcome monotone_descent() {
    // Standardized columns with either intercept convention, raw columns with
    // the unpenalized intercept.
    const auto checked = count_increases(202, [](int trial, enet::ElasticNetConfig& c) {
        c.standardize = trial % 3 != 2;
        c.penalize_intercept = trial % 3 == 0;
    });
    // The penalized bias equation on raw columns is not a coordinate minimizer;
    // reported, not gated.
    const auto literal_raw = count_increases(203, [](int, enet::ElasticNetConfig& c) {
        c.standardize = false;
        c.penalize_intercept = true;
    });
    return {checked.increases == 0 && checked.diverged == 0,
            fmt("%d increases over %zu sweeps on 50 problems (%d diverged); info: penalized bias equation on raw "
                "columns ascends in %d/50 problems, diverges in %d",
                checked.increases, checked.sweeps, checked.diverged, literal_raw.problems_with_increase,
                literal_raw.diverged)};
}

// 3 -------------------------------------------------------------------------------
Outcome pca_correctness() {
    Rng rng(303);
    double orth = 0, recon = 0, trace = 0;
    const std::pair<int, int> shapes[] = {{40, 8}, {15, 60}, {30, 29}, {12, 12}, {100, 5}};
    for (const auto& [T, p] : shapes) {
        const auto X = testutil::random_matrix(rng, T, p);
        const auto m = pca::fit_pca(X);
        const auto k = m.k();
        orth = std::max(orth, (m.components * m.components.transpose() - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff());
        const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
        recon = std::max(recon, (pca::project(m, X) * m.components - Xc).cwiseAbs().maxCoeff());
        trace = std::max(trace, std::abs(m.eigenvalues.sum() - Xc.squaredNorm() / T));
    }
    return {orth <= 1e-9 && recon <= 1e-8 && trace <= 1e-9,
            fmt("orthonormality %.2e, reconstruction %.2e, trace identity %.2e", orth, recon, trace)};
}

// 4 -------------------------------------------------------------------------------
Outcome planted_recovery() {
    const auto t0 = Clock::now();
    int recalled = 0, wins = 0;
    std::ostringstream seeds;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        synth::SynthConfig c;
        c.seed = seed;
        c.months = 36;
        c.n_markets = 1;
        c.n_locations = 500;
        c.n_true_locations = 5;
        c.noise_sigma = 0.05;
        const auto d = synth::generate(c);
        const auto& market = d.dataset.markets[0];
        const auto panel = NdviPanel::from_locations(d.dataset.locations, d.dataset.month_index);
        const auto months = regpcr::eligible_months(market, panel);
        const auto design = regpcr::build_design(market, panel, months.front(), months.back());
        const auto model = regpcr::fit(design, {});
        const auto chosen = model.selected_locations();
        const std::set<std::string> sel(chosen.begin(), chosen.end());
        int hit = 0;
        for (const auto& id : d.truth.markets[0].location_ids) hit += static_cast<int>(sel.count(id));
        const auto report =
            eval::rolling_backtest(market, panel, {eval::regpcr_method({}), eval::pcr_method(10)}, 24, 12);
        const double a = report.cell(market.market_id, "regpcr").mae;
        const double b = report.cell(market.market_id, "pcr").mae;
        recalled += hit >= 4;
        wins += a <= b;
        seeds << " " << seed << ":" << hit << "/5," << (a <= b ? "win" : "loss");
    }
    const double secs = seconds_since(t0);
    return {recalled >= 7 && wins >= 7 && secs < 60.0,
            fmt("recall>=4/5 in %d/10 seeds, RegPCR MAE <= PCR in %d/10, %.1f s;", recalled, wins, secs) + seeds.str()};
}

// 5 -------------------------------------------------------------------------------
Outcome state_aggregation() {
    synth::SynthConfig c;
    c.seed = 5;
    c.n_locations = 200;
    c.n_markets = 4;
    c.state_noise_frac = 0.01;
    const auto d = synth::generate(c);
    const auto n = static_cast<Eigen::Index>(d.arrival_months.size());
    Eigen::MatrixXd X(n, 4);
    for (int m = 0; m < 4; ++m) {
        for (Eigen::Index t = 0; t < n; ++t) X(t, m) = d.dataset.markets[m].arrivals[t].value;
    }
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(d.state_arrivals.data(), n);
    const auto fit = eval::fit_state_aggregate(X, y);
    return {fit.adjusted_r2 > 0.98 && fit.p_value < 0.001,
            fmt("adjusted R^2 %.5f, p-value %.3e, n = %d", fit.adjusted_r2, fit.p_value, fit.n)};
}

// 6 -------------------------------------------------------------------------------
Outcome f_pvalue() {
    struct Point {
        double f, d1, d2, p;
    };
    // Upper tails by 50-digit numerical integration of the F density.
    const Point pts[] = {
        {0.5, 1, 1, 0.60817344796939272983},    {1.0, 2, 10, 0.40187757201646090535},
        {2.5, 3, 20, 0.088843751937689211504},  {4.0, 5, 7, 0.049181152985789523993},
        {0.1, 4, 30, 0.98161879837523607883},   {10.0, 2, 40, 0.00030072865982171749426},
        {1.5, 10, 10, 0.26656768},              {3.0, 1, 1, 0.33333333333333333333},
        {7.5, 4, 100, 0.000025181212429034605876}, {0.9, 30, 15, 0.61186855293210174314},
    };
    double worst = 0.0;
    for (const auto& p : pts) worst = std::max(worst, std::abs(stats::f_survival(p.f, p.d1, p.d2) - p.p));
    return {worst <= 1e-8, fmt("max |error| %.2e over 10 points", worst)};
}

// 7 -------------------------------------------------------------------------------
Outcome price_recovery() {
    double worst = 0.0;
    for (int k = 1; k <= 3; ++k) {
        synth::SynthConfig c;
        c.seed = 70 + static_cast<std::uint64_t>(k);
        c.n_locations = 100;
        c.months = 60;
        c.price_horizon = k;
        c.price_noise = 0.0;
        const auto d = synth::generate(c);
        price::PriceModelConfig pc;
        pc.w = c.w;
        pc.d = c.d;
        pc.horizons = {k};
        const auto model = price::fit_price_model(d.state_prices, summed_arrivals(d), pc);
        for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(model.horizon(k).coef[i] - d.truth.price_coef[i]));
    }

    int grows = 0;
    std::ostringstream seeds;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        synth::SynthConfig c;
        c.seed = seed;
        c.n_locations = 100;
        c.months = 84;
        c.price_horizon = 1;
        c.price_noise = 0.01;
        const auto d = synth::generate(c);
        const auto arrivals = summed_arrivals(d);
        const int n = static_cast<int>(arrivals.size());
        const int train = 60;
        price::PriceModelConfig pc;
        pc.w = c.w;
        pc.d = c.d;
        const std::vector<double> p_train(d.state_prices.begin(), d.state_prices.begin() + train);
        const std::vector<double> a_train(arrivals.begin(), arrivals.begin() + train);
        const auto model = price::fit_price_model(p_train, a_train, pc);
        const auto feat = price::arrival_features(price::log_arrivals(arrivals), pc.w, pc.d);
        double err[4] = {0, 0, 0, 0};
        int count = 0;
        // Held-out origins whose k = 1..3 targets all lie after the training span.
        for (int t = train; t + 3 < n; ++t) {
            ++count;
            for (int k = 1; k <= 3; ++k) {
                const auto& a = model.horizon(k).coef;
                const auto ts = static_cast<std::size_t>(t);
                const double pred = a[0] + a[1] * feat[ts + 1] + a[2] * feat[ts] + a[3] * feat[ts - 1];
                const double actual =
                    std::log(d.state_prices[ts + static_cast<std::size_t>(k)]) - std::log(d.state_prices[ts + static_cast<std::size_t>(k) - 1]);
                err[k] += std::abs(pred - actual);
            }
        }
        grows += err[3] >= err[1];
        seeds << fmt(" %d:%.4f/%.4f", static_cast<int>(seed), err[1] / count, err[3] / count);
    }
    return {worst <= 1e-8 && grows >= 7,
            fmt("noiseless max |coef error| %.2e; MAE(k=3) >= MAE(k=1) in %d/10 seeds;", worst, grows) + seeds.str()};
}

// 8 -------------------------------------------------------------------------------
Outcome arima_sanity() {
    std::vector<double> ar = {5.0};
    for (int t = 1; t < 40; ++t) ar.push_back(0.5 * ar.back());
    const auto m = baselines::arima_fit_order(ar, {1, 0, 0});
    const double phi_err = std::abs(m.phi[0] - 0.5);

    std::vector<double> trend;
    for (int t = 0; t < 24; ++t) trend.push_back(10.0 + 1.5 * t);
    const auto tm = baselines::arima_fit_order(trend, {0, 1, 0}, true);
    const auto f = baselines::arima_forecast(tm, 3);
    double trend_err = 0.0;
    for (int h = 0; h < 3; ++h) trend_err = std::max(trend_err, std::abs(f[h] - (10.0 + 1.5 * (24 + h))));
    return {phi_err <= 1e-8 && trend_err <= 1e-9,
            fmt("|phi - 0.5| %.2e; trend forecast max error %.2e", phi_err, trend_err)};
}

// 9 -------------------------------------------------------------------------------
int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
    return code;
}

Outcome determinism(const fs::path& root) {
    std::vector<std::string> files;
    for (const char* run : {"a", "b"}) {
        const auto dir = root / run;
        if (cli({"synth", "--out", (dir / "data").string(), "--seed", "9", "--n_locations", "200"}) != 0) {
            return {false, "synth failed"};
        }
        if (cli({"backtest", "--ndvi", (dir / "data" / "ndvi.csv").string(), "--arrivals",
                 (dir / "data" / "arrivals.csv").string(), "--prices", (dir / "data" / "prices.csv").string(),
                 "--state", (dir / "data" / "state.csv").string(), "--out", (dir / "report").string()}) != 0) {
            return {false, "backtest failed"};
        }
        files.push_back(testutil::read_file(dir / "report" / "backtest.csv") +
                        testutil::read_file(dir / "report" / "backtest.json"));
    }
    return {files[0] == files[1] && !files[0].empty(),
            fmt("report bytes %s (%zu bytes)", files[0] == files[1] ? "identical" : "differ", files[0].size())};
}

// 10 ------------------------------------------------------------------------------
Outcome scale(const fs::path& root) {
    const auto data = root / "data";
    if (cli({"synth", "--out", data.string(), "--seed", "10", "--n_locations", "7000", "--months", "48"}) != 0) {
        return {false, "synth failed"};
    }
    const auto t0 = Clock::now();
    const int code = cli({"backtest", "--ndvi", (data / "ndvi.csv").string(), "--arrivals",
                          (data / "arrivals.csv").string(), "--prices", (data / "prices.csv").string(), "--out",
                          (root / "report").string(), "--steps", "12", "--methods", "regpcr,ridge,pcr,arima"});
    const double secs = seconds_since(t0);
    if (code != 0) return {false, fmt("backtest exit code %d", code)};
    const auto doc = Json::parse(testutil::read_file(root / "report" / "backtest.json"));
    int ok = 0;
    for (const auto& c : doc["cells"]) ok += !c["failed"].get<bool>();
    return {secs < 600.0 && ok == static_cast<int>(doc["cells"].size()),
            fmt("7000 locations x 48 months, 4 markets, 4 methods, %d/%zu cells ok, %.1f s", ok, doc["cells"].size(), secs)};
}

}  // namespace

int main(int argc, char** argv) {
    // Optional arguments restrict the run to the listed criterion numbers.
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));
    testutil::TempDir work("acceptance");
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"solver equivalences", solver_equivalences},
        {"monotone descent", monotone_descent},
        {"pca correctness", pca_correctness},
        {"planted-support recovery", planted_recovery},
        {"state aggregation", state_aggregation},
        {"F-distribution p-value", f_pvalue},
        {"price coefficient recovery", price_recovery},
        {"arima-lite sanity", arima_sanity},
        {"cli determinism", [&] { return determinism(work / "determinism"); }},
        {"scale", [&] { return scale(work / "scale"); }},
    };
    int failed = 0;
    std::size_t ran = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.count(i + 1)) continue;
        ++ran;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", ran - static_cast<std::size_t>(failed), ran);
    return failed == 0 ? 0 : 1;
}
