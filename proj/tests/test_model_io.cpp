#include <gtest/gtest.h>

#include "ndvicast/errors.hpp"
#include "ndvicast/model_io.hpp"
#include "test_util.hpp"

using namespace ndvicast;

namespace {

regpcr::DesignMatrix small_design(std::uint64_t seed) {
    Rng rng(seed);
    regpcr::DesignMatrix d;
    d.X = testutil::random_matrix(rng, 30, 25) * 0.1;
    d.arrivals = (4.0 + 2.0 * d.X.col(3).array() - d.X.col(8).array() + 0.01 * testutil::random_vector(rng, 30).array()).exp();
    d.y = d.arrivals.array().log();
    for (int j = 0; j < 25; ++j) d.location_ids.push_back("L" + std::to_string(j));
    for (int t = 0; t < 30; ++t) {
        d.months.push_back(YearMonth::from_ordinal(2020 * 12 + t));
        d.ndvi_months.push_back(d.months.back().prev());
    }
    return d;
}

}  // namespace

TEST(ModelIo, RoundTripPredictsIdentically) {
    const auto d = small_design(1);
    auto m = regpcr::fit(d, {});
    m.market_id = "M9";
    testutil::TempDir dir("model");
    save_model(dir / "m.json", m);
    const auto back = load_model(dir / "m.json");
    EXPECT_EQ(back.market_id, "M9");
    EXPECT_EQ(back.last_month, m.last_month);
    EXPECT_EQ(back.selection_mask, m.selection_mask);
    EXPECT_EQ(back.pc_mask, m.pc_mask);
    Rng rng(2);
    for (int r = 0; r < 10; ++r) {
        const Eigen::RowVectorXd x = testutil::random_matrix(rng, 1, 25) * 0.1;
        EXPECT_EQ(regpcr::predict(back, x), regpcr::predict(m, x));
    }
    EXPECT_EQ(dump_json(to_json(back)), dump_json(to_json(m)));
}

TEST(ModelIo, DegenerateModelRoundTrips) {
    auto d = small_design(3);
    d.arrivals.setConstant(12.0);
    d.y.setConstant(std::log(12.0));
    const auto m = regpcr::fit(d, {});
    const auto back = regpcr_from_json(to_json(m));
    EXPECT_TRUE(back.degenerate_response);
    EXPECT_DOUBLE_EQ(regpcr::predict(back, Eigen::RowVectorXd::Zero(25)), 12.0);
}

TEST(ModelIo, RejectsMalformedDocuments) {
    testutil::TempDir dir("model");
    testutil::write_file(dir / "bad.json", "{ not json");
    EXPECT_THROW(load_model(dir / "bad.json"), ValidationError);
    testutil::write_file(dir / "other.json", R"({"format": "something/else"})");
    EXPECT_THROW(load_model(dir / "other.json"), ValidationError);
    EXPECT_THROW(load_model(dir / "absent.json"), ValidationError);
    auto doc = to_json(regpcr::fit(small_design(4), {}));
    doc["alpha"].push_back(1.0);
    EXPECT_THROW(regpcr_from_json(doc), ValidationError);
}

TEST(DumpJson, FloatsAndNonFinite) {
    Json doc = Json::object();
    doc["a"] = 1.0;
    doc["b"] = 0.1;
    doc["c"] = std::numeric_limits<double>::infinity();
    doc["v"] = Json::array({1, 2, 3});
    const auto text = dump_json(doc);
    EXPECT_NE(text.find("\"a\": 1.0"), std::string::npos);
    EXPECT_NE(text.find("\"b\": 0.10000000000000001"), std::string::npos);
    EXPECT_NE(text.find("\"c\": null"), std::string::npos);
    EXPECT_NE(text.find("[1, 2, 3]"), std::string::npos);
}
