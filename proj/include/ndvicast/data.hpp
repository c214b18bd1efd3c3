#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ndvicast {

/// Calendar month, keyed as "YYYY-MM" in every file format.
struct YearMonth {
    int year = 1970;
    int month = 1;  // 1..12

    static YearMonth parse(std::string_view text);
    static YearMonth from_ordinal(int ordinal);

    /// Months since year 0; consecutive months differ by exactly one.
    [[nodiscard]] int ordinal() const { return year * 12 + (month - 1); }
    [[nodiscard]] YearMonth next() const { return from_ordinal(ordinal() + 1); }
    [[nodiscard]] YearMonth prev() const { return from_ordinal(ordinal() - 1); }
    [[nodiscard]] std::string str() const;

    auto operator<=>(const YearMonth&) const = default;
};

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    static Date parse(std::string_view text);
    [[nodiscard]] YearMonth year_month() const { return {year, month}; }
    [[nodiscard]] std::string str() const;

    auto operator<=>(const Date&) const = default;
};

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

struct MonthValue {
    YearMonth month;
    double value = 0.0;
};

struct DailyValue {
    Date date;
    double value = 0.0;
};

/// Monthly NDVI at one geolocation. Months strictly increasing, values in [-1, 1].
struct LocationSeries {
    std::string location_id;
    GeoPoint position;
    std::vector<MonthValue> months;
};

/// Daily market rows as parsed, before monthly aggregation.
struct MarketDaily {
    std::string market_id;
    std::string name;
    GeoPoint position;
    std::vector<DailyValue> arrivals;
    std::vector<DailyValue> prices;  // modal price
};

/// Monthly arrivals (>= 0) and mean modal price (> 0) of one market.
struct MarketSeries {
    std::string market_id;
    std::string name;
    GeoPoint position;
    std::vector<MonthValue> arrivals;
    std::vector<MonthValue> prices;
    /// Months that carry a price but no arrival rows.
    std::vector<YearMonth> price_only_months;
};

/// How daily modal prices combine into a monthly price.
enum class PriceWeighting { equal, arrival };

struct GapReport {
    std::string series_id;
    std::string kind;  // "ndvi", "arrivals" or "prices"
    int leading_missing = 0;
    int trailing_missing = 0;
    int interpolated = 0;
};

/// Locations and markets re-indexed onto one global month axis.
/// Immutable once built; safe to share read-only across fits.
struct Dataset {
    std::vector<LocationSeries> locations;
    std::vector<MarketSeries> markets;
    std::vector<YearMonth> month_index;
    std::vector<GapReport> gaps;

    [[nodiscard]] const MarketSeries& market(std::string_view id) const;
};

/// Values of `series` on `axis`; months absent from the series are NaN.
std::vector<double> align(const std::vector<MonthValue>& series, const std::vector<YearMonth>& axis);

// Parsing --------------------------------------------------------------------

std::vector<LocationSeries> parse_ndvi_csv(const std::filesystem::path& path);
std::vector<MarketDaily> parse_market_csv(const std::filesystem::path& arrivals_path,
                                          const std::filesystem::path& prices_path);

/// Arrivals summed per calendar month; price = mean of daily modal prices.
/// Months without rows stay absent.
MarketSeries monthly_aggregate(const MarketDaily& daily,
                               PriceWeighting weighting = PriceWeighting::equal);

/// Fill interior NaN gaps by linear interpolation in the index.
/// Throws ValidationError on leading/trailing gaps or fewer than two observations.
std::vector<double> interpolate_missing(const std::vector<double>& values);

/// Interpolates interior gaps of every series and aligns everything on the
/// union month axis. Leading/trailing gaps are reported, never filled.
Dataset build_dataset(std::vector<LocationSeries> locations, std::vector<MarketSeries> markets);

Dataset load_dataset(const std::filesystem::path& ndvi_path,
                     const std::filesystem::path& arrivals_path,
                     const std::filesystem::path& prices_path,
                     PriceWeighting weighting = PriceWeighting::equal);

// Writing --------------------------------------------------------------------

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

void write_ndvi_csv(const std::filesystem::path& path, const std::vector<LocationSeries>& locations);
void write_market_daily_csvs(const std::filesystem::path& arrivals_path,
                             const std::filesystem::path& prices_path,
                             const std::vector<MarketDaily>& markets);
/// One row per month dated the first of the month; min/max price equal the modal price.
void write_market_csvs(const std::filesystem::path& arrivals_path,
                       const std::filesystem::path& prices_path,
                       const std::vector<MarketSeries>& markets);

}  // namespace ndvicast
