#include "ndvicast/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "ndvicast/errors.hpp"

namespace ndvicast {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int parse_int(std::string_view text, std::string_view what) {
    int value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ValidationError("invalid " + std::string(what) + " '" + std::string(text) + "'");
    }
    return value;
}

double parse_real(std::string_view text, std::string_view what) {
    // from_chars rejects a leading '+', which some spreadsheet exports emit.
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw ValidationError("invalid " + std::string(what) + " '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) throw ValidationError("unterminated quoted field");
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Reads a CSV with an exact expected header; calls `row` with (fields, line number).
template <typename RowFn>
void read_csv(const std::filesystem::path& path, const std::vector<std::string>& header, RowFn&& row) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) return;  // an empty file has no rows
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (split_csv_line(line) != header) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        throw ValidationError(path.string() + ": header mismatch, expected '" + expected + "'");
    }
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        }
        try {
            row(fields, line_no);
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

GeoPoint parse_point(const std::string& lat, const std::string& lon) {
    GeoPoint p{parse_real(lat, "lat"), parse_real(lon, "lon")};
    if (p.lat < -90.0 || p.lat > 90.0) throw ValidationError("lat out of range");
    if (p.lon < -180.0 || p.lon > 180.0) throw ValidationError("lon out of range");
    return p;
}

int days_in_month(int year, int month) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && ((year % 4 == 0 && year % 100 != 0) || year % 400 == 0)) return 29;
    return kDays[month - 1];
}

/// Fills interior gaps of a month-keyed series so it is contiguous over its own span.
std::vector<MonthValue> fill_interior(const std::vector<MonthValue>& series, int& interpolated) {
    interpolated = 0;
    if (series.size() < 2) return series;
    const int first = series.front().month.ordinal();
    const int last = series.back().month.ordinal();
    const auto span = static_cast<std::size_t>(last - first + 1);
    if (span == series.size()) return series;
    std::vector<double> dense(span, kNaN);
    for (const auto& mv : series) dense[static_cast<std::size_t>(mv.month.ordinal() - first)] = mv.value;
    interpolated = static_cast<int>(span - series.size());
    const auto filled = interpolate_missing(dense);
    std::vector<MonthValue> out;
    out.reserve(span);
    for (std::size_t i = 0; i < span; ++i) {
        out.push_back({YearMonth::from_ordinal(first + static_cast<int>(i)), filled[i]});
    }
    return out;
}

}  // namespace

// YearMonth / Date -------------------------------------------------------------

YearMonth YearMonth::parse(std::string_view text) {
    if (text.size() != 7 || text[4] != '-') {
        throw ValidationError("invalid month '" + std::string(text) + "', expected YYYY-MM");
    }
    YearMonth ym{parse_int(text.substr(0, 4), "year"), parse_int(text.substr(5, 2), "month")};
    if (ym.month < 1 || ym.month > 12) throw ValidationError("invalid month '" + std::string(text) + "'");
    return ym;
}

YearMonth YearMonth::from_ordinal(int ordinal) {
    return {ordinal / 12, ordinal % 12 + 1};
}

std::string YearMonth::str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
}

Date Date::parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw ValidationError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    Date d{parse_int(text.substr(0, 4), "year"), parse_int(text.substr(5, 2), "month"),
           parse_int(text.substr(8, 2), "day")};
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
        throw ValidationError("invalid date '" + std::string(text) + "'");
    }
    return d;
}

std::string Date::str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

const MarketSeries& Dataset::market(std::string_view id) const {
    for (const auto& m : markets) {
        if (m.market_id == id) return m;
    }
    throw ValidationError("unknown market '" + std::string(id) + "'");
}

std::vector<double> align(const std::vector<MonthValue>& series, const std::vector<YearMonth>& axis) {
    std::vector<double> out(axis.size(), kNaN);
    if (axis.empty()) return out;
    const int base = axis.front().ordinal();
    for (const auto& mv : series) {
        const int idx = mv.month.ordinal() - base;
        if (idx >= 0 && idx < static_cast<int>(axis.size())) out[static_cast<std::size_t>(idx)] = mv.value;
    }
    return out;
}

// Parsing ------------------------------------------------------------------------

std::vector<LocationSeries> parse_ndvi_csv(const std::filesystem::path& path) {
    std::map<std::string, LocationSeries> by_id;
    std::vector<std::string> order;
    std::set<std::pair<std::string, int>> seen;
    read_csv(path, {"location_id", "lat", "lon", "month", "ndvi"},
             [&](const std::vector<std::string>& f, int) {
                 if (f[0].empty()) throw ValidationError("empty location_id");
                 const GeoPoint p = parse_point(f[1], f[2]);
                 const YearMonth month = YearMonth::parse(f[3]);
                 const double ndvi = parse_real(f[4], "ndvi");
                 if (ndvi < -1.0 || ndvi > 1.0) throw ValidationError("ndvi out of range");
                 if (!seen.emplace(f[0], month.ordinal()).second) {
                     throw ValidationError("duplicate (location_id, month) (" + f[0] + ", " + month.str() + ")");
                 }
                 auto [it, inserted] = by_id.try_emplace(f[0]);
                 if (inserted) {
                     it->second.location_id = f[0];
                     it->second.position = p;
                     order.push_back(f[0]);
                 }
                 it->second.months.push_back({month, ndvi});
             });
    std::vector<LocationSeries> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        auto& s = by_id.at(id);
        std::sort(s.months.begin(), s.months.end(),
                  [](const MonthValue& a, const MonthValue& b) { return a.month < b.month; });
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<MarketDaily> parse_market_csv(const std::filesystem::path& arrivals_path,
                                          const std::filesystem::path& prices_path) {
    std::map<std::string, MarketDaily> by_id;
    std::vector<std::string> order;
    read_csv(arrivals_path, {"market_id", "market_name", "lat", "lon", "date", "arrival_qty"},
             [&](const std::vector<std::string>& f, int) {
                 if (f[0].empty()) throw ValidationError("empty market_id");
                 const GeoPoint p = parse_point(f[2], f[3]);
                 const Date date = Date::parse(f[4]);
                 const double qty = parse_real(f[5], "arrival_qty");
                 if (qty < 0.0) throw ValidationError("negative arrival");
                 auto [it, inserted] = by_id.try_emplace(f[0]);
                 if (inserted) {
                     it->second.market_id = f[0];
                     it->second.name = f[1];
                     it->second.position = p;
                     order.push_back(f[0]);
                 }
                 it->second.arrivals.push_back({date, qty});
             });
    read_csv(prices_path, {"market_id", "date", "min_price", "max_price", "modal_price"},
             [&](const std::vector<std::string>& f, int) {
                 const Date date = Date::parse(f[1]);
                 // min/max are validated as numbers, then dropped.
                 parse_real(f[2], "min_price");
                 parse_real(f[3], "max_price");
                 const double modal = parse_real(f[4], "modal_price");
                 if (modal <= 0.0) throw ValidationError("nonpositive modal price");
                 auto it = by_id.find(f[0]);
                 if (it == by_id.end()) {
                     // Price rows for a market without arrival rows: no geolocation known.
                     it = by_id.try_emplace(f[0]).first;
                     it->second.market_id = f[0];
                     it->second.name = f[0];
                     order.push_back(f[0]);
                 }
                 it->second.prices.push_back({date, modal});
             });
    std::vector<MarketDaily> out;
    out.reserve(order.size());
    auto by_date = [](const DailyValue& a, const DailyValue& b) { return a.date < b.date; };
    for (const auto& id : order) {
        auto& m = by_id.at(id);
        std::stable_sort(m.arrivals.begin(), m.arrivals.end(), by_date);
        std::stable_sort(m.prices.begin(), m.prices.end(), by_date);
        out.push_back(std::move(m));
    }
    return out;
}

MarketSeries monthly_aggregate(const MarketDaily& daily, PriceWeighting weighting) {
    MarketSeries out;
    out.market_id = daily.market_id;
    out.name = daily.name;
    out.position = daily.position;

    std::map<YearMonth, double> arrivals;
    std::map<Date, double> arrivals_by_day;
    for (const auto& row : daily.arrivals) {
        arrivals[row.date.year_month()] += row.value;
        arrivals_by_day[row.date] += row.value;
    }
    struct Acc {
        double sum = 0.0, weight = 0.0, plain = 0.0;
        int n = 0;
    };
    std::map<YearMonth, Acc> prices;
    for (const auto& row : daily.prices) {
        auto& acc = prices[row.date.year_month()];
        acc.plain += row.value;
        ++acc.n;
        if (weighting == PriceWeighting::arrival) {
            const auto it = arrivals_by_day.find(row.date);
            const double w = it == arrivals_by_day.end() ? 0.0 : it->second;
            acc.sum += w * row.value;
            acc.weight += w;
        }
    }
    for (const auto& [month, qty] : arrivals) out.arrivals.push_back({month, qty});
    for (const auto& [month, acc] : prices) {
        const double value = (weighting == PriceWeighting::arrival && acc.weight > 0.0)
                                 ? acc.sum / acc.weight
                                 : acc.plain / acc.n;
        out.prices.push_back({month, value});
        if (!arrivals.contains(month)) out.price_only_months.push_back(month);
    }
    return out;
}

std::vector<double> interpolate_missing(const std::vector<double>& values) {
    std::vector<std::size_t> observed;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isnan(values[i])) observed.push_back(i);
    }
    if (observed.size() < 2) throw ValidationError("interpolation needs at least 2 observations");
    if (observed.front() != 0 || observed.back() != values.size() - 1) {
        throw ValidationError("cannot extrapolate: series has a leading or trailing gap");
    }
    std::vector<double> out = values;
    for (std::size_t k = 0; k + 1 < observed.size(); ++k) {
        const std::size_t a = observed[k];
        const std::size_t b = observed[k + 1];
        for (std::size_t i = a + 1; i < b; ++i) {
            const double frac = static_cast<double>(i - a) / static_cast<double>(b - a);
            out[i] = values[a] + frac * (values[b] - values[a]);
        }
    }
    return out;
}

Dataset build_dataset(std::vector<LocationSeries> locations, std::vector<MarketSeries> markets) {
    Dataset ds;
    int first = std::numeric_limits<int>::max();
    int last = std::numeric_limits<int>::min();
    auto extend = [&](const std::vector<MonthValue>& s) {
        if (s.empty()) return;
        first = std::min(first, s.front().month.ordinal());
        last = std::max(last, s.back().month.ordinal());
    };

    auto fill = [&](std::vector<MonthValue>& s, const std::string& id, const char* kind) {
        int interpolated = 0;
        try {
            s = fill_interior(s, interpolated);
        } catch (const ValidationError& e) {
            throw ValidationError(std::string(kind) + " series '" + id + "': " + e.what());
        }
        if (interpolated > 0) ds.gaps.push_back({id, kind, 0, 0, interpolated});
    };

    for (auto& loc : locations) {
        for (std::size_t i = 1; i < loc.months.size(); ++i) {
            if (!(loc.months[i - 1].month < loc.months[i].month)) {
                throw ValidationError("location '" + loc.location_id + "': months not strictly increasing");
            }
        }
        fill(loc.months, loc.location_id, "ndvi");
        extend(loc.months);
    }
    for (auto& m : markets) {
        fill(m.arrivals, m.market_id, "arrivals");
        fill(m.prices, m.market_id, "prices");
        extend(m.arrivals);
        extend(m.prices);
    }

    if (first <= last) {
        for (int o = first; o <= last; ++o) ds.month_index.push_back(YearMonth::from_ordinal(o));
    }

    auto report_edges = [&](const std::vector<MonthValue>& s, const std::string& id, const char* kind) {
        if (ds.month_index.empty()) return;
        const int lead = s.empty() ? static_cast<int>(ds.month_index.size())
                                   : s.front().month.ordinal() - first;
        const int trail = s.empty() ? 0 : last - s.back().month.ordinal();
        if (lead == 0 && trail == 0) return;
        for (auto& g : ds.gaps) {
            if (g.series_id == id && g.kind == kind) {
                g.leading_missing = lead;
                g.trailing_missing = trail;
                return;
            }
        }
        ds.gaps.push_back({id, kind, lead, trail, 0});
    };
    for (const auto& loc : locations) report_edges(loc.months, loc.location_id, "ndvi");
    for (const auto& m : markets) {
        report_edges(m.arrivals, m.market_id, "arrivals");
        report_edges(m.prices, m.market_id, "prices");
    }

    ds.locations = std::move(locations);
    ds.markets = std::move(markets);
    return ds;
}

Dataset load_dataset(const std::filesystem::path& ndvi_path,
                     const std::filesystem::path& arrivals_path,
                     const std::filesystem::path& prices_path,
                     PriceWeighting weighting) {
    auto locations = parse_ndvi_csv(ndvi_path);
    std::vector<MarketSeries> markets;
    for (const auto& daily : parse_market_csv(arrivals_path, prices_path)) {
        markets.push_back(monthly_aggregate(daily, weighting));
    }
    return build_dataset(std::move(locations), std::move(markets));
}

// Writing --------------------------------------------------------------------

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return {buf, ptr};
}

void write_ndvi_csv(const std::filesystem::path& path, const std::vector<LocationSeries>& locations) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << "location_id,lat,lon,month,ndvi\n";
    for (const auto& loc : locations) {
        const std::string prefix = csv_escape(loc.location_id) + "," + format_double(loc.position.lat) + "," +
                                   format_double(loc.position.lon) + ",";
        for (const auto& mv : loc.months) {
            out << prefix << mv.month.str() << ',' << format_double(mv.value) << '\n';
        }
    }
}

void write_market_daily_csvs(const std::filesystem::path& arrivals_path,
                             const std::filesystem::path& prices_path,
                             const std::vector<MarketDaily>& markets) {
    std::ofstream arr(arrivals_path, std::ios::binary);
    std::ofstream pri(prices_path, std::ios::binary);
    if (!arr || !pri) throw ValidationError("cannot write market CSVs");
    arr << "market_id,market_name,lat,lon,date,arrival_qty\n";
    pri << "market_id,date,min_price,max_price,modal_price\n";
    for (const auto& m : markets) {
        const std::string id = csv_escape(m.market_id);
        const std::string prefix = id + "," + csv_escape(m.name) + "," + format_double(m.position.lat) + "," +
                                   format_double(m.position.lon) + ",";
        for (const auto& row : m.arrivals) {
            arr << prefix << row.date.str() << ',' << format_double(row.value) << '\n';
        }
        for (const auto& row : m.prices) {
            const std::string v = format_double(row.value);
            pri << id << ',' << row.date.str() << ',' << v << ',' << v << ',' << v << '\n';
        }
    }
}

void write_market_csvs(const std::filesystem::path& arrivals_path,
                       const std::filesystem::path& prices_path,
                       const std::vector<MarketSeries>& markets) {
    std::vector<MarketDaily> daily;
    daily.reserve(markets.size());
    for (const auto& m : markets) {
        MarketDaily d{m.market_id, m.name, m.position, {}, {}};
        for (const auto& mv : m.arrivals) d.arrivals.push_back({{mv.month.year, mv.month.month, 1}, mv.value});
        for (const auto& mv : m.prices) d.prices.push_back({{mv.month.year, mv.month.month, 1}, mv.value});
        daily.push_back(std::move(d));
    }
    write_market_daily_csvs(arrivals_path, prices_path, daily);
}

}  // namespace ndvicast
