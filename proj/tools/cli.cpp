#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ndvicast/data.hpp"
#include "ndvicast/errors.hpp"
#include "ndvicast/forecast_eval.hpp"
#include "ndvicast/insights.hpp"
#include "ndvicast/model_io.hpp"
#include "ndvicast/price_model.hpp"
#include "ndvicast/regpcr.hpp"
#include "ndvicast/spatial.hpp"
#include "ndvicast/synth.hpp"

namespace ndvicast::cli {

namespace fs = std::filesystem;

namespace {

struct RunConfig {
    std::string ndvi = "ndvi.csv";
    std::string arrivals = "arrivals.csv";
    std::string prices = "prices.csv";
    std::string state;
    std::string out = "ndvicast_out";
    std::string models;
    std::string month;
    std::string markets;
    std::string price_weighting = "equal";
    std::uint64_t seed = 1;
    int threads = 0;

    spatial::LocationFilterConfig filter;
    regpcr::RegPcrConfig regpcr;
    int window = 0;
    bool stage1_refit = true;

    int initial_window = 24;
    int steps = 12;
    std::string methods = "regpcr,ridge,pcr,arima";
    std::string external;

    double w = 0.9;
    int d = 12;
    std::string horizons = "1,2,3";
    bool select_w = false;
    int price_origins = 1;

    std::string dominance = "nonzero";
    int cce_count = 100;
    double min_spacing_km = 0.0;

    synth::SynthConfig synth;
};

// Helpers -----------------------------------------------------------------------

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> parse_horizons(const std::string& text) {
    std::vector<int> out;
    for (const auto& s : split_list(text)) {
        try {
            std::size_t used = 0;
            const int k = std::stoi(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            out.push_back(k);
        } catch (const std::logic_error&) {
            throw ValidationError("horizons: '" + s + "' is not an integer");
        }
    }
    if (out.empty()) throw ValidationError("horizons: empty list");
    return out;
}

int thread_count(const RunConfig& c) {
    if (c.threads > 0) return c.threads;
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Calls fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception by index is rethrown once all work has stopped.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    const int workers = std::min(n, threads);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

PriceWeighting weighting(const RunConfig& c) {
    if (c.price_weighting == "equal") return PriceWeighting::equal;
    if (c.price_weighting == "arrival") return PriceWeighting::arrival;
    throw ValidationError("price_weighting must be 'equal' or 'arrival'");
}

Dataset load(const RunConfig& c) { return load_dataset(c.ndvi, c.arrivals, c.prices, weighting(c)); }

std::vector<const MarketSeries*> chosen_markets(const Dataset& data, const RunConfig& c) {
    std::vector<const MarketSeries*> out;
    const auto wanted = split_list(c.markets);
    if (wanted.empty()) {
        for (const auto& m : data.markets) out.push_back(&m);
    } else {
        for (const auto& id : wanted) out.push_back(&data.market(id));
    }
    if (out.empty()) throw ValidationError("no markets in the input");
    return out;
}

NdviPanel working_panel(const Dataset& data, const std::vector<LocationSeries>& locations, const MarketSeries& market,
                        const RunConfig& c) {
    const auto ws = spatial::select_working_set(locations, market.position, c.filter);
    return NdviPanel::from_locations(ws, data.month_index);
}

regpcr::DesignMatrix training_design(const MarketSeries& market, const NdviPanel& panel, const RunConfig& c,
                                     std::optional<YearMonth> last = std::nullopt) {
    auto months = regpcr::eligible_months(market, panel);
    if (last) months.erase(std::remove_if(months.begin(), months.end(), [&](const YearMonth& m) { return *last < m; }),
                           months.end());
    if (months.empty()) throw ValidationError("market '" + market.market_id + "': no usable months");
    std::size_t first = 0;
    if (c.window > 0 && months.size() > static_cast<std::size_t>(c.window)) {
        first = months.size() - static_cast<std::size_t>(c.window);
    }
    return regpcr::build_design(market, panel, months[first], months.back());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
}

Json gap_json(const GapReport& g) {
    return Json{{"series_id", g.series_id},
                {"kind", g.kind},
                {"leading_missing", g.leading_missing},
                {"trailing_missing", g.trailing_missing},
                {"interpolated", g.interpolated}};
}

Json state_json(const eval::StateAggModel& s) {
    Json coef = Json::object();
    for (std::size_t i = 0; i < s.markets.size(); ++i) coef[s.markets[i]] = s.alpha[static_cast<Eigen::Index>(i)];
    return Json{{"n", s.n},
                {"intercept", s.alpha0},
                {"coefficients", coef},
                {"r2", s.r2},
                {"adjusted_r2", s.adjusted_r2},
                {"f_stat", s.f_stat},
                {"p_value", s.p_value},
                {"jittered", s.jittered}};
}

std::vector<MonthValue> read_state_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || (line != "month,arrival_qty" && line != "month,arrival_qty\r")) {
        throw ValidationError(path.string() + ": header mismatch, expected 'month,arrival_qty'");
    }
    std::vector<MonthValue> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw ValidationError("expected 2 fields");
            const auto month = YearMonth::parse(line.substr(0, comma));
            std::size_t used = 0;
            const auto field = line.substr(comma + 1);
            const double v = std::stod(field, &used);
            if (used != field.size() || !std::isfinite(v)) throw ValidationError("bad arrival_qty");
            out.push_back({month, v});
        } catch (const std::exception& e) {
            throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<eval::BacktestRow> read_external_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) return {};
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "market_id,method,month,actual,predicted") {
        throw ValidationError(path.string() + ": header mismatch, expected 'market_id,method,month,actual,predicted'");
    }
    const std::set<std::string> builtin = {"regpcr", "ridge", "pcr", "arima"};
    std::vector<eval::BacktestRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_list(line);
        try {
            if (f.size() != 5) throw ValidationError("expected 5 fields");
            if (builtin.count(f[1])) throw ValidationError("method '" + f[1] + "' is built in");
            rows.push_back({f[0], f[1], YearMonth::parse(f[2]), std::stod(f[3]), std::stod(f[4])});
        } catch (const std::exception& e) {
            throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

// Commands ----------------------------------------------------------------------

int cmd_ingest(const RunConfig& c, std::ostream& out) {
    const auto data = load(c);
    Json doc;
    doc["locations"] = data.locations.size();
    Json markets = Json::array();
    for (const auto& m : data.markets) {
        Json e{{"market_id", m.market_id}, {"name", m.name}, {"arrival_months", m.arrivals.size()},
               {"price_months", m.prices.size()}};
        if (!m.arrivals.empty()) {
            e["first_month"] = m.arrivals.front().month.str();
            e["last_month"] = m.arrivals.back().month.str();
        }
        markets.push_back(std::move(e));
    }
    doc["markets"] = std::move(markets);
    doc["month_count"] = data.month_index.size();
    if (!data.month_index.empty()) {
        doc["first_month"] = data.month_index.front().str();
        doc["last_month"] = data.month_index.back().str();
    }
    Json gaps = Json::array();
    for (const auto& g : data.gaps) gaps.push_back(gap_json(g));
    doc["gaps"] = std::move(gaps);
    out << dump_json(doc);
    return kOk;
}

int cmd_fit(const RunConfig& c, std::ostream& out) {
    const auto data = load(c);
    const auto markets = chosen_markets(data, c);
    const auto locations = spatial::preprocess(data.locations, c.filter);
    const fs::path dir = c.models.empty() ? fs::path(c.out) / "models" : fs::path(c.models);
    fs::create_directories(dir);
    std::vector<regpcr::RegPcrModel> models(markets.size());
    parallel_for(static_cast<int>(markets.size()), thread_count(c), [&](int i) {
        const auto& market = *markets[static_cast<std::size_t>(i)];
        const auto panel = working_panel(data, locations, market, c);
        auto model = regpcr::fit(training_design(market, panel, c), c.regpcr);
        model.market_id = market.market_id;
        save_model(dir / (market.market_id + ".json"), model);
        models[static_cast<std::size_t>(i)] = std::move(model);
    });
    Json doc = Json::array();
    for (const auto& m : models) {
        doc.push_back(Json{{"market_id", m.market_id},
                           {"rows", m.n_rows},
                           {"last_month", m.last_month.str()},
                           {"locations", m.location_ids.size()},
                           {"selected_locations", m.p},
                           {"selected_factors", m.selected_factors().size()},
                           {"stage1_lambda", m.stage1_lambda},
                           {"in_sample_mae_log", m.in_sample_mae_log}});
    }
    out << dump_json(doc);
    return kOk;
}

int cmd_predict(const RunConfig& c, std::ostream& out) {
    auto data = build_dataset(parse_ndvi_csv(c.ndvi), {});
    if (data.month_index.empty()) throw ValidationError("no NDVI observations");
    const YearMonth month = c.month.empty() ? data.month_index.back() : YearMonth::parse(c.month);
    std::map<std::string, double> ndvi;
    for (const auto& loc : data.locations) {
        for (const auto& mv : loc.months) {
            if (mv.month == month) ndvi[loc.location_id] = mv.value;
        }
    }
    const fs::path dir = c.models.empty() ? fs::path(c.out) / "models" : fs::path(c.models);
    std::vector<fs::path> files;
    if (fs::is_regular_file(dir)) {
        files.push_back(dir);
    } else if (fs::is_directory(dir)) {
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.path().extension() == ".json") files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("no saved models under " + dir.string());

    const auto wanted = split_list(c.markets);
    std::ostringstream csv;
    csv << "market_id,ndvi_month,target_month,predicted_arrival\n";
    for (const auto& f : files) {
        const auto model = load_model(f);
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), model.market_id) == wanted.end()) continue;
        Eigen::RowVectorXd x(static_cast<Eigen::Index>(model.location_ids.size()));
        for (std::size_t j = 0; j < model.location_ids.size(); ++j) {
            const auto it = ndvi.find(model.location_ids[j]);
            if (it == ndvi.end()) {
                throw ValidationError("market '" + model.market_id + "': no NDVI for location '" +
                                      model.location_ids[j] + "' in " + month.str());
            }
            x[static_cast<Eigen::Index>(j)] = it->second;
        }
        csv << model.market_id << ',' << month.str() << ',' << month.next().str() << ','
            << format_double(regpcr::predict(model, x)) << '\n';
    }
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "predictions.csv", csv.str());
    out << csv.str();
    return kOk;
}

int cmd_backtest(const RunConfig& c, std::ostream& out) {
    const auto data = load(c);
    const auto markets = chosen_markets(data, c);
    const auto names = split_list(c.methods);
    if (names.empty()) throw ValidationError("methods: empty list");
    for (const auto& n : names) {
        if (n != "regpcr") eval::method_by_name(n, c.regpcr);
    }
    const auto locations = spatial::preprocess(data.locations, c.filter);

    std::vector<eval::BacktestReport> reports(markets.size());
    parallel_for(static_cast<int>(markets.size()), thread_count(c), [&](int i) {
        const auto& market = *markets[static_cast<std::size_t>(i)];
        const auto panel = working_panel(data, locations, market, c);
        std::vector<eval::Method> methods;
        for (const auto& n : names) {
            methods.push_back(n == "regpcr" ? eval::regpcr_method(c.regpcr, {}, c.stage1_refit)
                                            : eval::method_by_name(n, c.regpcr));
        }
        reports[static_cast<std::size_t>(i)] =
            eval::rolling_backtest(market, panel, methods, c.initial_window, c.steps);
    });
    eval::BacktestReport report;
    for (const auto& r : reports) report.merge(r);
    if (!c.external.empty()) eval::add_external_predictions(report, read_external_csv(c.external));

    Json doc;
    doc["initial_window"] = c.initial_window;
    doc["steps"] = c.steps;
    Json cells = Json::array();
    bool any_ok = false;
    for (const auto& cell : report.cells) {
        Json e{{"market_id", cell.market_id}, {"method", cell.method}, {"failed", cell.failed}};
        if (cell.failed) {
            e["error"] = cell.error;
        } else {
            e["mae"] = cell.mae;
            e["n"] = cell.n;
            any_ok = true;
        }
        cells.push_back(std::move(e));
    }
    doc["cells"] = std::move(cells);
    Json winners = Json::object();
    for (const auto& [m, w] : report.winners()) winners[m] = w;
    doc["winners"] = std::move(winners);
    Json means = Json::object();
    for (const auto& [m, v] : report.mean_mae()) means[m] = v;
    doc["mean_mae"] = std::move(means);

    if (!c.state.empty()) {
        const auto state = read_state_csv(c.state);
        std::vector<YearMonth> months;
        std::vector<std::vector<double>> cols;
        for (const auto* m : markets) cols.push_back(align(m->arrivals, data.month_index));
        std::map<YearMonth, double> totals;
        for (const auto& s : state) totals[s.month] = s.value;
        std::vector<std::size_t> rows;
        for (std::size_t t = 0; t < data.month_index.size(); ++t) {
            const bool complete = totals.count(data.month_index[t]) &&
                                  std::all_of(cols.begin(), cols.end(), [&](const auto& v) { return std::isfinite(v[t]); });
            if (complete) rows.push_back(t);
        }
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t m = 0; m < cols.size(); ++m) {
                X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m)) = cols[m][rows[r]];
            }
            y[static_cast<Eigen::Index>(r)] = totals[data.month_index[rows[r]]];
        }
        std::vector<std::string> ids;
        for (const auto* m : markets) ids.push_back(m->market_id);
        doc["state_aggregate"] = state_json(eval::fit_state_aggregate(X, y, ids));
    }

    fs::create_directories(c.out);
    eval::write_report_csv(fs::path(c.out) / "backtest.csv", report);
    write_text(fs::path(c.out) / "backtest.json", dump_json(doc));
    out << dump_json(doc);
    if (!any_ok) throw NumericalError("every method failed in every market");
    return kOk;
}

int cmd_price(const RunConfig& c, std::ostream& out) {
    const auto data = load(c);
    const auto markets = chosen_markets(data, c);
    const auto n_axis = data.month_index.size();

    // State series: summed arrivals and equal-weight mean price.
    std::vector<double> arrivals(n_axis, 0.0), prices(n_axis, 0.0);
    std::vector<bool> complete(n_axis, true);
    for (const auto* m : markets) {
        const auto a = align(m->arrivals, data.month_index);
        const auto p = align(m->prices, data.month_index);
        for (std::size_t t = 0; t < n_axis; ++t) {
            if (!std::isfinite(a[t]) || !std::isfinite(p[t])) complete[t] = false;
            arrivals[t] += a[t];
            prices[t] += p[t] / static_cast<double>(markets.size());
        }
    }
    // Latest longest run of complete months.
    std::size_t best_begin = 0, best_len = 0;
    for (std::size_t t = 0; t < n_axis;) {
        if (!complete[t]) {
            ++t;
            continue;
        }
        std::size_t e = t;
        while (e < n_axis && complete[e]) ++e;
        if (e - t >= best_len) {
            best_begin = t;
            best_len = e - t;
        }
        t = e;
    }
    if (best_len == 0) throw ValidationError("price: no month has arrivals and prices for every market");
    const std::vector<double> run_a(arrivals.begin() + static_cast<std::ptrdiff_t>(best_begin),
                                    arrivals.begin() + static_cast<std::ptrdiff_t>(best_begin + best_len));
    const std::vector<double> run_p(prices.begin() + static_cast<std::ptrdiff_t>(best_begin),
                                    prices.begin() + static_cast<std::ptrdiff_t>(best_begin + best_len));
    const int n = static_cast<int>(best_len);
    if (c.price_origins < 1 || c.price_origins > n) throw ValidationError("price_origins out of range");

    price::PriceModelConfig pc;
    pc.d = c.d;
    pc.horizons = parse_horizons(c.horizons);
    pc.w = c.select_w ? price::select_w(run_p, run_a, c.d) : c.w;

    const auto locations = spatial::preprocess(data.locations, c.filter);
    std::vector<NdviPanel> panels(markets.size());
    parallel_for(static_cast<int>(markets.size()), thread_count(c), [&](int i) {
        panels[static_cast<std::size_t>(i)] = working_panel(data, locations, *markets[static_cast<std::size_t>(i)], c);
    });

    std::ostringstream csv;
    csv << "month,horizon,delta_logprice,price_level\n";
    for (int o = c.price_origins; o >= 1; --o) {
        const int t = n - o;  // origin index within the run
        const YearMonth origin = data.month_index[best_begin + static_cast<std::size_t>(t)];
        const std::vector<double> hist_a(run_a.begin(), run_a.begin() + t + 1);
        const std::vector<double> hist_p(run_p.begin(), run_p.begin() + t + 1);
        const auto model = price::fit_price_model(hist_p, hist_a, pc);

        // Next-month arrival forecast: sum of per-market RegPCR forecasts from NDVI at the origin.
        std::vector<double> forecasts(markets.size());
        parallel_for(static_cast<int>(markets.size()), thread_count(c), [&](int i) {
            const auto& panel = panels[static_cast<std::size_t>(i)];
            const auto row = panel.row_of(origin);
            if (row < 0 || !panel.values.row(row).allFinite()) {
                throw ValidationError("price: NDVI incomplete in " + origin.str());
            }
            const auto design = training_design(*markets[static_cast<std::size_t>(i)], panel, c, origin);
            const auto fit = regpcr::fit(design, c.regpcr);
            forecasts[static_cast<std::size_t>(i)] = regpcr::predict(fit, panel.values.row(row));
        });
        double total = 0.0;
        for (double f : forecasts) total += f;
        auto extended = hist_a;
        extended.push_back(total);
        bool log1p = false;
        price::log_arrivals(hist_a, &log1p);
        std::vector<double> log_ext;
        for (double a : extended) log_ext.push_back(log1p ? std::log1p(a) : std::log(std::max(a, 1e-300)));
        const auto features = price::arrival_features(log_ext, pc.w, pc.d);
        for (const auto& f : price::predict_price(model, features[static_cast<std::size_t>(t + 1)], features, t,
                                                  hist_p.back())) {
            csv << origin.str() << ',' << f.k << ',' << format_double(f.delta_log_price) << ','
                << (std::isnan(f.price_level) ? std::string() : format_double(f.price_level)) << '\n';
        }
    }
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "price_forecast.csv", csv.str());
    out << csv.str();
    return kOk;
}

int cmd_importance(const RunConfig& c, std::ostream& out) {
    const auto data = load(c);
    const auto markets = chosen_markets(data, c);
    insights::Dominance dominance;
    if (c.dominance == "nonzero") {
        dominance = insights::Dominance::nonzero;
    } else if (c.dominance == "top_quartile") {
        dominance = insights::Dominance::top_quartile;
    } else {
        throw ValidationError("dominance must be 'nonzero' or 'top_quartile'");
    }
    const auto locations = spatial::preprocess(data.locations, c.filter);
    std::map<std::string, GeoPoint> positions;
    for (const auto& l : locations) positions[l.location_id] = l.position;

    std::vector<insights::ImportanceTable> tables(markets.size());
    parallel_for(static_cast<int>(markets.size()), thread_count(c), [&](int i) {
        const auto& market = *markets[static_cast<std::size_t>(i)];
        const auto panel = working_panel(data, locations, market, c);
        std::vector<insights::FitRecord> fits;
        auto method = eval::regpcr_method(
            c.regpcr, [&](const regpcr::RegPcrModel& m) { fits.push_back({m.location_ids, m.stage1.beta}); },
            c.stage1_refit);
        const auto report = eval::rolling_backtest(market, panel, {method}, c.initial_window, c.steps);
        if (report.cells.front().failed) throw NumericalError(market.market_id + ": " + report.cells.front().error);
        tables[static_cast<std::size_t>(i)] = insights::accumulate_importance(fits, dominance);
    });

    fs::create_directories(c.out);
    Json doc = Json::array();
    for (std::size_t i = 0; i < markets.size(); ++i) {
        const auto& id = markets[i]->market_id;
        insights::write_importance_csv(fs::path(c.out) / ("importance_" + id + ".csv"), tables[i], positions);
        const auto sites = insights::cce_candidates(tables[i], positions, c.cce_count, c.min_spacing_km);
        insights::write_cce_geojson(fs::path(c.out) / ("cce_" + id + ".geojson"), sites, positions);
        Json top = Json::array();
        for (std::size_t k = 0; k < std::min<std::size_t>(5, sites.size()); ++k) top.push_back(sites[k].location_id);
        doc.push_back(Json{{"market_id", id},
                           {"fits", tables[i].total_fits},
                           {"cce_sites", sites.size()},
                           {"top_locations", top}});
    }
    out << dump_json(doc);
    return kOk;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
    auto cfg = c.synth;
    cfg.seed = c.seed;
    const auto data = synth::generate(cfg);
    synth::write(c.out, data);
    Json doc{{"out", c.out},
             {"seed", cfg.seed},
             {"locations", data.dataset.locations.size()},
             {"markets", data.dataset.markets.size()},
             {"months", cfg.months}};
    out << dump_json(doc);
    return kOk;
}

void add_options(CLI::App& app, RunConfig& c) {
    app.add_option("--ndvi", c.ndvi, "NDVI CSV (location_id,lat,lon,month,ndvi)");
    app.add_option("--arrivals", c.arrivals, "Arrivals CSV (market_id,market_name,lat,lon,date,arrival_qty)");
    app.add_option("--prices", c.prices, "Prices CSV (market_id,date,min_price,max_price,modal_price)");
    app.add_option("--state", c.state, "State totals CSV (month,arrival_qty) for the aggregation fit");
    app.add_option("--out", c.out, "Output directory");
    app.add_option("--models", c.models, "Model directory or file (default: <out>/models)");
    app.add_option("--month", c.month, "NDVI month for predict (default: latest)");
    app.add_option("--markets", c.markets, "Comma-separated market ids (default: all)");
    app.add_option("--price_weighting", c.price_weighting, "Monthly price from daily rows: equal | arrival");
    app.add_option("--seed", c.seed, "Random seed");
    app.add_option("--threads", c.threads, "Worker threads (0 = available parallelism)");

    app.add_option("--proximity_km", c.filter.proximity_km, "Keep locations closer than this to the market");
    app.add_option("--variance_percentile", c.filter.variance_percentile, "Drop NDVI variance above this percentile");
    app.add_option("--target_count", c.filter.target_count, "Locations kept per market");
    app.add_option("--smooth_radius", c.filter.smooth_radius, "NDVI smoothing radius in grid cells");
    app.add_option("--cell_size_deg", c.filter.cell_size_deg, "Grid spacing for smoothing (0 = infer)");
    app.add_option("--block_size_deg", c.filter.block_size_deg, "Block-centroid sampling size (0 = off)");

    app.add_option("--gamma", c.regpcr.gamma, "Stage-1 L1 share");
    app.add_option("--lambda", c.regpcr.lambda, "Stage-1 lambda (<= 0 = validate)");
    app.add_option("--lambda_count", c.regpcr.lambda_count, "Stage-1 lambda grid size");
    app.add_option("--lambda_min_ratio", c.regpcr.lambda_min_ratio, "Smallest grid lambda over the largest");
    app.add_option("--cv_origins", c.regpcr.cv_origins, "One-step validation origins");
    app.add_option("--tol", c.regpcr.tol, "Coordinate descent tolerance");
    app.add_option("--max_sweeps", c.regpcr.max_sweeps, "Coordinate descent sweep limit");
    app.add_option("--selection_threshold", c.regpcr.selection_threshold, "Stage-1 |beta| threshold");
    app.add_option("--target_factors", c.regpcr.target_factors, "Factors kept by the L1 factor selection");
    app.add_option("--pca_components", c.regpcr.pca_components, "PCA components before factor selection (0 = all)");
    app.add_option("--window", c.window, "Training months for fit and price (0 = all)");
    app.add_option("--stage1_refit", c.stage1_refit, "Refit stage 1 at every backtest step");

    app.add_option("--initial_window", c.initial_window, "Backtest training months at the first step");
    app.add_option("--steps", c.steps, "Backtest steps");
    app.add_option("--methods", c.methods, "Comma-separated: regpcr,ridge,pcr,arima");
    app.add_option("--external", c.external, "Predictions made elsewhere (backtest CSV layout)");

    app.add_option("--w", c.w, "Arrival window decay");
    app.add_option("--d", c.d, "Arrival difference lag in months");
    app.add_option("--horizons", c.horizons, "Comma-separated price horizons (1..3)");
    app.add_option("--select_w", c.select_w, "Pick w by one-step backtest");
    app.add_option("--price_origins", c.price_origins, "Forecast origins ending at the latest month");

    app.add_option("--dominance", c.dominance, "Selection counted as: nonzero | top_quartile");
    app.add_option("--cce_count", c.cce_count, "CCE sites to recommend");
    app.add_option("--min_spacing_km", c.min_spacing_km, "Minimum distance between CCE sites");

    app.add_option("--n_locations", c.synth.n_locations, "synth: locations");
    app.add_option("--n_markets", c.synth.n_markets, "synth: markets");
    app.add_option("--months", c.synth.months, "synth: arrival months");
    app.add_option("--n_true_locations", c.synth.n_true_locations, "synth: planted locations per market");
    app.add_option("--coef_scale", c.synth.coef_scale, "synth: planted coefficient scale");
    app.add_option("--noise_sigma", c.synth.noise_sigma, "synth: log-arrival noise");
    app.add_option("--ndvi_noise", c.synth.ndvi_noise, "synth: NDVI noise");
    app.add_option("--price_noise", c.synth.price_noise, "synth: log-price noise");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"Arrival and price forecasting from NDVI", "ndvicast"};
    app.set_config("--config", "", "Flat key = value file; command-line flags override it");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.option_defaults()->always_capture_default();
    add_options(app, c);
    std::string save_config;
    app.add_option("--save_config", save_config, "Write the effective settings as a config file")
        ->configurable(false);
    app.require_subcommand(1, 1);
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"ingest", "Validate inputs and print a summary"},
        {"fit", "Fit one RegPCR model per market"},
        {"predict", "Next-month arrivals from saved models"},
        {"backtest", "Rolling-origin backtest of the forecasting methods"},
        {"price", "State price change forecasts"},
        {"importance", "Location importance and CCE site candidates"},
        {"synth", "Write a synthetic dataset"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        out << o.str();
        err << er.str();
        return code == 0 ? kOk : kUsage;
    }

    if (!save_config.empty()) {
        std::ofstream f(save_config);
        if (!f) {
            err << "error: cannot write " << save_config << '\n';
            return kUsage;
        }
        f << app.config_to_str(true, false);
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (name == "ingest") return cmd_ingest(c, out);
        if (name == "fit") return cmd_fit(c, out);
        if (name == "predict") return cmd_predict(c, out);
        if (name == "backtest") return cmd_backtest(c, out);
        if (name == "price") return cmd_price(c, out);
        if (name == "importance") return cmd_importance(c, out);
        return cmd_synth(c, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return kNumerical;
    }
}

}  // namespace ndvicast::cli
