#include "ndvicast/model_io.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ndvicast/errors.hpp"

namespace ndvicast {

namespace {

constexpr const char* kFormat = "ndvicast.regpcr/1";

void dump_value(const Json& v, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(2 * depth), ' ');
    switch (v.type()) {
        case Json::value_t::object: {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (const auto& [key, item] : v.items()) {
                if (!first) out += ",\n";
                first = false;
                out += pad + Json(key).dump() + ": ";
                dump_value(item, depth + 1, out);
            }
            out += "\n" + close + "}";
            return;
        }
        case Json::value_t::array: {
            if (v.empty()) {
                out += "[]";
                return;
            }
            // Arrays of scalars stay on one line.
            const bool flat = std::none_of(v.begin(), v.end(), [](const Json& e) { return e.is_structured(); });
            out += flat ? "[" : "[\n";
            bool first = true;
            for (const auto& item : v) {
                if (!first) out += flat ? ", " : ",\n";
                first = false;
                if (!flat) out += pad;
                dump_value(item, depth + 1, out);
            }
            out += flat ? "]" : "\n" + close + "]";
            return;
        }
        case Json::value_t::number_float: {
            const double d = v.get<double>();
            if (!std::isfinite(d)) {
                out += "null";
                return;
            }
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", d);
            std::string s(buf);
            if (s.find_first_of(".eE") == std::string::npos) s += ".0";
            out += s;
            return;
        }
        default:
            out += v.dump();
    }
}

Json vector_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vector_from(const Json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = a[i].is_null() ? std::nan("") : a[i].get<double>();
    }
    return v;
}

Json config_json(const regpcr::RegPcrConfig& c) {
    return Json{{"gamma", c.gamma},
                {"lambda", c.lambda},
                {"lambda_count", c.lambda_count},
                {"lambda_min_ratio", c.lambda_min_ratio},
                {"cv_origins", c.cv_origins},
                {"cv_pipeline", c.cv_pipeline},
                {"tol", c.tol},
                {"max_sweeps", c.max_sweeps},
                {"selection_threshold", c.selection_threshold},
                {"target_factors", c.target_factors},
                {"pca_components", c.pca_components},
                {"pca_scale", c.pca_scale},
                {"ols_jitter", c.ols_jitter}};
}

regpcr::RegPcrConfig config_from(const Json& j) {
    regpcr::RegPcrConfig c;
    c.gamma = j.at("gamma").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.lambda_count = j.at("lambda_count").get<int>();
    c.lambda_min_ratio = j.at("lambda_min_ratio").get<double>();
    c.cv_origins = j.at("cv_origins").get<int>();
    c.cv_pipeline = j.at("cv_pipeline").get<bool>();
    c.tol = j.at("tol").get<double>();
    c.max_sweeps = j.at("max_sweeps").get<int>();
    c.selection_threshold = j.at("selection_threshold").get<double>();
    c.target_factors = j.at("target_factors").get<int>();
    c.pca_components = j.at("pca_components").get<int>();
    c.pca_scale = j.at("pca_scale").get<bool>();
    c.ols_jitter = j.at("ols_jitter").get<double>();
    return c;
}

}  // namespace

std::string dump_json(const Json& value) {
    std::string out;
    dump_value(value, 0, out);
    out += '\n';
    return out;
}

Json to_json(const regpcr::RegPcrModel& m) {
    Json doc;
    doc["format"] = kFormat;
    doc["market_id"] = m.market_id;
    doc["last_month"] = m.last_month.str();
    doc["n_rows"] = m.n_rows;
    doc["transform"] = m.transform == ArrivalTransform::log ? "log" : "log1p";
    doc["degenerate_response"] = m.degenerate_response;
    doc["config"] = config_json(m.config);
    doc["location_ids"] = m.location_ids;
    doc["selected_locations"] = m.selected_locations();

    Json stage1 = Json::object();
    stage1["lambda"] = m.stage1_lambda;
    stage1["beta0"] = m.stage1.beta0;
    Json coef = Json::object();
    for (std::size_t j = 0; j < m.selection_mask.size(); ++j) {
        if (m.selection_mask[j]) coef[m.location_ids[j]] = m.stage1.beta[static_cast<Eigen::Index>(j)];
    }
    stage1["coefficients"] = std::move(coef);
    stage1["sweeps"] = m.stage1.n_sweeps;
    stage1["converged"] = m.stage1.converged;
    doc["stage1"] = std::move(stage1);

    Json pca;
    pca["mean"] = vector_json(m.pca.mean);
    pca["scale"] = vector_json(m.pca.scale);
    pca["eigenvalues"] = vector_json(m.pca.eigenvalues);
    pca["total_variance"] = m.pca.total_variance;
    Json comps = Json::array();
    for (Eigen::Index i = 0; i < m.pca.components.rows(); ++i) comps.push_back(vector_json(m.pca.components.row(i)));
    pca["components"] = std::move(comps);
    doc["pca"] = std::move(pca);

    Json factors = Json::array();
    for (auto i : m.selected_factors()) factors.push_back(i);
    doc["selected_factors"] = std::move(factors);
    doc["factor_lambda"] = m.factor_lambda;
    doc["alpha0"] = m.alpha0;
    doc["alpha"] = vector_json(m.alpha);
    doc["in_sample_mae_log"] = m.in_sample_mae_log;
    return doc;
}

regpcr::RegPcrModel regpcr_from_json(const Json& doc) {
    try {
        if (doc.at("format").get<std::string>() != kFormat) throw ValidationError("unsupported model format");
        regpcr::RegPcrModel m;
        m.market_id = doc.at("market_id").get<std::string>();
        m.last_month = YearMonth::parse(doc.at("last_month").get<std::string>());
        m.n_rows = doc.at("n_rows").get<int>();
        m.transform = doc.at("transform").get<std::string>() == "log1p" ? ArrivalTransform::log1p : ArrivalTransform::log;
        m.degenerate_response = doc.at("degenerate_response").get<bool>();
        m.config = config_from(doc.at("config"));
        m.location_ids = doc.at("location_ids").get<std::vector<std::string>>();

        std::map<std::string, std::size_t> index;
        for (std::size_t j = 0; j < m.location_ids.size(); ++j) index[m.location_ids[j]] = j;
        m.selection_mask.assign(m.location_ids.size(), false);
        for (const auto& id : doc.at("selected_locations").get<std::vector<std::string>>()) {
            const auto it = index.find(id);
            if (it == index.end()) throw ValidationError("selected location '" + id + "' not in location_ids");
            m.selection_mask[it->second] = true;
        }
        m.p = static_cast<Eigen::Index>(std::count(m.selection_mask.begin(), m.selection_mask.end(), true));

        const auto& s1 = doc.at("stage1");
        m.stage1_lambda = s1.at("lambda").get<double>();
        m.stage1.beta0 = s1.at("beta0").get<double>();
        m.stage1.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.location_ids.size()));
        for (const auto& [id, b] : s1.at("coefficients").items()) {
            const auto it = index.find(id);
            if (it == index.end()) throw ValidationError("stage-1 location '" + id + "' not in location_ids");
            m.stage1.beta[static_cast<Eigen::Index>(it->second)] = b.get<double>();
        }
        m.stage1.n_sweeps = s1.at("sweeps").get<int>();
        m.stage1.converged = s1.at("converged").get<bool>();
        m.stage1.config.lambda = m.stage1_lambda;
        m.stage1.config.gamma = m.config.gamma;

        const auto& pca = doc.at("pca");
        m.pca.mean = vector_from(pca.at("mean"));
        m.pca.scale = vector_from(pca.at("scale"));
        m.pca.eigenvalues = vector_from(pca.at("eigenvalues"));
        m.pca.total_variance = pca.at("total_variance").get<double>();
        const auto& comps = pca.at("components");
        m.pca.components.resize(static_cast<Eigen::Index>(comps.size()), m.pca.mean.size());
        for (std::size_t i = 0; i < comps.size(); ++i) {
            if (static_cast<Eigen::Index>(comps[i].size()) != m.pca.mean.size()) {
                throw ValidationError("PCA component length mismatch");
            }
            m.pca.components.row(static_cast<Eigen::Index>(i)) = vector_from(comps[i]).transpose();
        }
        if (!m.degenerate_response && m.pca.mean.size() != m.p) {
            throw ValidationError("PCA dimension does not match the selected locations");
        }

        m.pc_mask.assign(static_cast<std::size_t>(m.pca.k()), false);
        for (const auto& f : doc.at("selected_factors")) {
            const auto i = f.get<Eigen::Index>();
            if (i < 0 || i >= m.pca.k()) throw ValidationError("selected factor index out of range");
            m.pc_mask[static_cast<std::size_t>(i)] = true;
        }
        m.factor_lambda = doc.at("factor_lambda").get<double>();
        m.alpha0 = doc.at("alpha0").get<double>();
        m.alpha = vector_from(doc.at("alpha"));
        if (m.alpha.size() != static_cast<Eigen::Index>(m.selected_factors().size())) {
            throw ValidationError("alpha length does not match the selected factors");
        }
        m.in_sample_mae_log = doc.at("in_sample_mae_log").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const regpcr::RegPcrModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << dump_json(to_json(model));
}

regpcr::RegPcrModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model " + path.string());
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return regpcr_from_json(doc);
}

}  // namespace ndvicast
