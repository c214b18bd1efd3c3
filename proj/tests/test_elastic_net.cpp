#include <cmath>

#include <gtest/gtest.h>

#include "ndvicast/baselines.hpp"
#include "ndvicast/elastic_net.hpp"
#include "ndvicast/errors.hpp"
#include "ndvicast/linalg.hpp"
#include "test_util.hpp"

using namespace ndvicast;
using namespace ndvicast::enet;

namespace {

ElasticNetConfig plain(double lambda, double gamma) {
    ElasticNetConfig c;
    c.lambda = lambda;
    c.gamma = gamma;
    c.tol = 1e-13;
    c.max_sweeps = 200000;
    c.penalize_intercept = false;
    c.standardize = false;
    return c;
}

}  // namespace

TEST(SoftThreshold, Definition) {
    EXPECT_DOUBLE_EQ(soft_threshold(2.5, 1.0), 1.5);
    EXPECT_DOUBLE_EQ(soft_threshold(0.3, 0.5), 0.0);
    EXPECT_DOUBLE_EQ(soft_threshold(-2.0, 0.5), -1.5);
}

TEST(Objective, ClosedFormCases) {
    const auto X = testutil::wave_matrix(8, 2);
    const auto y = testutil::wave_response(8);
    EXPECT_NEAR(objective(X, y, 0.0, Eigen::Vector2d::Zero(), 3.7, 0.4), y.squaredNorm() / 16.0, 1e-15);
    const Eigen::Vector2d b(2.0, -3.0);
    const Eigen::VectorXd exact = X * b;
    EXPECT_NEAR(objective(X, exact, 0.0, b, 0.0, 0.5), 0.0, 1e-15);
    EXPECT_NEAR(objective(X, exact, 0.0, b, 1.0, 1.0), 5.0, 1e-14);
    // The penalized bias adds lambda * gamma * |beta0| under gamma = 1.
    EXPECT_NEAR(objective(X, (exact.array() + 0.5).matrix(), 0.5, b, 1.0, 1.0, true), 5.5, 1e-14);
}

TEST(Fit, SingleFeatureUpdate) {
    Eigen::MatrixXd x(4, 1);
    x << -1, 1, -1, 1;  // mean 0, population sd 1
    const Eigen::VectorXd y = x.col(0);  // (1/T) x'y = 1
    auto c = plain(0.5, 1.0);
    EXPECT_NEAR(fit(x, y, c).beta[0], 0.5, 1e-12);
    c.gamma = 0.0;
    EXPECT_NEAR(fit(x, y, c).beta[0], 1.0 / 1.5, 1e-12);
    // Same fixed point with the penalized bias equation: the intercept stays at 0.
    c.penalize_intercept = true;
    c.standardize = true;
    const auto m = fit(x, y, c);
    EXPECT_NEAR(m.beta[0], 1.0 / 1.5, 1e-12);
    EXPECT_NEAR(m.beta0, 0.0, 1e-12);
}

TEST(Fit, LambdaZeroMatchesNormalEquations) {
    const auto X = testutil::wave_matrix(20, 5);
    const auto y = testutil::wave_response(20);
    // Normal-equations solution from an independent least-squares solver.
    const double b0 = -0.08998792595317398;
    const double b[] = {-0.21399223109608445, -1.008699146504602, -1.5788062927573883, -1.880825632847613,
                        -0.7741559386003335};
    for (bool standardize : {false, true}) {
        auto c = plain(0.0, 0.5);
        c.standardize = standardize;
        const auto m = fit(X, y, c);
        EXPECT_TRUE(m.converged);
        EXPECT_NEAR(m.beta0, b0, 1e-6);
        for (int j = 0; j < 5; ++j) EXPECT_NEAR(m.beta[j], b[j], 1e-6);
    }
}

TEST(Fit, MatchesReferenceElasticNet) {
    // Reference coordinate-descent solution of the same (1/2T) objective.
    const auto X = testutil::wave_matrix(20, 5);
    const auto y = testutil::wave_response(20);
    const auto m = fit(X, y, plain(0.1, 0.5));
    const double b[] = {0.12152444500933177, 0.015641572916053025, 0.0, -0.3911558689832564, 0.0};
    EXPECT_NEAR(m.beta0, -0.025939752974297396, 1e-9);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(m.beta[j], b[j], 1e-9);
    EXPECT_EQ(m.beta[2], 0.0);
    EXPECT_EQ(m.beta[4], 0.0);
}

TEST(Fit, GammaZeroMatchesReferenceRidge) {
    const auto X = testutil::wave_matrix(20, 5);
    const auto y = testutil::wave_response(20);
    const auto m = fit(X, y, plain(0.3, 0.0));
    const double b[] = {0.16494185383729462, 0.09236642677264373, 0.0011023373280526843, -0.3154184035343487,
                        0.03564186540771875};
    EXPECT_NEAR(m.beta0, -0.028884036683788635, 1e-9);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(m.beta[j], b[j], 1e-9);
}

TEST(Fit, KktAtConvergence) {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto X = testutil::random_matrix(rng, 30, 10);
        const auto y = testutil::random_vector(rng, 30);
        ElasticNetConfig c;
        c.gamma = rng.uniform(0.05, 1.0);
        c.lambda = rng.uniform(0.01, 0.3);
        c.penalize_intercept = false;
        c.standardize = true;
        c.tol = 1e-10;
        const auto m = fit(X, y, c);
        ASSERT_TRUE(m.converged);
        const double T = 30.0;
        const Eigen::VectorXd r = y - predict(m, X);
        for (int j = 0; j < 10; ++j) {
            const double sd = m.column_scales[j];
            const Eigen::VectorXd xw = (X.col(j).array() - m.column_means[j]) / sd;
            const double g = xw.dot(r) / T;
            const double bw = m.beta[j] * sd;
            if (bw != 0.0) {
                EXPECT_LE(std::abs(g - c.lambda * (1 - c.gamma) * bw - c.lambda * c.gamma * (bw > 0 ? 1 : -1)),
                          10 * c.tol);
            } else {
                EXPECT_LE(std::abs(g), c.lambda * c.gamma + 10 * c.tol);
            }
        }
    }
}

TEST(Fit, ObjectiveNeverIncreases) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = plain(rng.uniform(0.001, 0.5), rng.uniform(0.0, 1.0));
        c.standardize = trial % 2 == 0;
        c.penalize_intercept = trial % 3 == 0;
        c.track_objective = true;
        c.tol = 1e-9;
        const auto X = testutil::random_matrix(rng, 25, 40);
        const auto y = testutil::random_vector(rng, 25);
        const auto m = fit(X, y, c);
        for (std::size_t s = 1; s < m.objective_trace.size(); ++s) {
            EXPECT_LE(m.objective_trace[s], m.objective_trace[s - 1] * (1 + 1e-12) + 1e-300);
        }
    }
}

TEST(Fit, ColumnPermutationPermutesBeta) {
    Rng rng(30);
    const auto X = testutil::random_matrix(rng, 30, 8);
    const auto y = testutil::random_vector(rng, 30);
    ElasticNetConfig c;
    c.lambda = 0.05;
    c.tol = 1e-13;
    c.max_sweeps = 100000;
    const auto m = fit(X, y, c);
    Eigen::VectorXi perm(8);
    perm << 3, 7, 0, 5, 1, 6, 2, 4;
    Eigen::MatrixXd Xp(30, 8);
    for (int j = 0; j < 8; ++j) Xp.col(j) = X.col(perm[j]);
    const auto mp = fit(Xp, y, c);
    for (int j = 0; j < 8; ++j) EXPECT_NEAR(mp.beta[j], m.beta[perm[j]], 1e-8);
}

TEST(Fit, StandardizedPredictionsIgnoreColumnScale) {
    Rng rng(31);
    const auto X = testutil::random_matrix(rng, 30, 6);
    const auto y = testutil::random_vector(rng, 30);
    ElasticNetConfig c;
    c.lambda = 0.08;
    c.tol = 1e-14;
    c.max_sweeps = 100000;
    c.penalize_intercept = false;
    Eigen::MatrixXd Xs = X;
    Xs.col(2) *= 10.0;
    const auto a = predict(fit(X, y, c), X);
    const auto b = predict(fit(Xs, y, c), Xs);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Predict, ConstantAndDuplicateRows) {
    ElasticNetModel zero;
    zero.beta0 = 2.5;
    zero.beta = Eigen::VectorXd::Zero(3);
    const auto X = testutil::wave_matrix(4, 3);
    EXPECT_TRUE((predict(zero, X).array() == 2.5).all());

    const auto Xt = testutil::wave_matrix(12, 3);
    const Eigen::VectorXd exact = Xt * Eigen::Vector3d(1.0, -2.0, 0.5);
    auto c = plain(0.0, 0.5);
    c.tol = 1e-14;
    const auto m = fit(Xt, exact, c);
    EXPECT_LE((predict(m, Xt) - exact).cwiseAbs().maxCoeff(), 1e-8);

    Eigen::MatrixXd dup(2, 3);
    dup.row(0) = Xt.row(5);
    dup.row(1) = Xt.row(5);
    const auto p = predict(m, dup);
    EXPECT_EQ(p[0], p[1]);
}

TEST(Fit, ZeroVarianceColumnIsDropped) {
    auto X = testutil::wave_matrix(15, 4);
    X.col(1).setConstant(0.7);
    const auto y = testutil::wave_response(15);
    ElasticNetConfig c;
    c.lambda = 0.01;
    const auto m = fit(X, y, c);
    ASSERT_EQ(m.dropped_columns.size(), 1u);
    EXPECT_EQ(m.dropped_columns[0], 1);
    EXPECT_EQ(m.beta[1], 0.0);
}

TEST(Fit, RejectsBadInput) {
    const auto X = testutil::wave_matrix(10, 3);
    const auto y = testutil::wave_response(9);
    EXPECT_THROW(fit(X, y, {}), ValidationError);
    ElasticNetConfig c;
    c.gamma = 1.5;
    EXPECT_THROW(fit(X, testutil::wave_response(10), c), ValidationError);
    c.gamma = 0.5;
    c.lambda = -1;
    EXPECT_THROW(fit(X, testutil::wave_response(10), c), ValidationError);
}

TEST(LambdaGrid, TopZeroesEverything) {
    Rng rng(40);
    const auto X = testutil::random_matrix(rng, 30, 20);
    const auto y = testutil::random_vector(rng, 30);
    const auto grid = lambda_grid(X, y, 0.5, true, 10, 1e-3);
    ASSERT_EQ(grid.size(), 10u);
    EXPECT_NEAR(grid.back() / grid.front(), 1e-3, 1e-12);
    ElasticNetConfig c;
    c.gamma = 0.5;
    c.penalize_intercept = false;
    const auto path = fit_path(X, y, c, grid);
    EXPECT_EQ(path.front().beta.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(path.back().beta.cwiseAbs().maxCoeff(), 0.0);
    // Warm-started path agrees with a cold fit.
    c.lambda = grid[6];
    c.tol = 1e-12;
    const auto cold = fit(X, y, c);
    EXPECT_LE((cold.beta - path[6].beta).cwiseAbs().maxCoeff(), 1e-5);
}
