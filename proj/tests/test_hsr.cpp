#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "halfsib/hsr.hpp"
#include "halfsib/metrics.hpp"
#include "halfsib/synth.hpp"

using namespace halfsib;

namespace {

LightCurve series(const Eigen::VectorXd& v, double cadence_days = 1.0) {
    LightCurve lc;
    lc.star_id = "y";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        lc.times.push_back(static_cast<double>(i) * cadence_days);
        lc.flux.push_back(v[i]);
        lc.valid.push_back(true);
    }
    return lc;
}

HsrConfig plain_config() {
    HsrConfig cfg;
    cfg.ar_past = 0;
    cfg.ar_future = 0;
    cfg.normalization = Normalization::subtractive;
    return cfg;
}

Eigen::VectorXd normals(Eigen::Index n, double sd, Rng& rng) {
    std::normal_distribution<double> d(0.0, sd);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd x = a.array() - a.mean(), y = b.array() - b.mean();
    return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

double variance(const Eigen::VectorXd& a) { return (a.array() - a.mean()).square().mean(); }

}  // namespace

// Y = Q + f(N), X = g(N) with g invertible: the residual recovers Q. Q is
// made exactly uncorrelated with N in the sample, so the identity is exact.
TEST(EstimateQ, RecoversSignalWhenXDeterminesSystematics) {
    Rng rng(1);
    const Eigen::Index n = 2000;
    const Eigen::VectorXd nn = normals(n, 1.0, rng);
    Eigen::VectorXd q = normals(n, 0.3, rng);
    const Eigen::VectorXd nc = nn.array() - nn.mean();
    q -= (q.dot(nc) / nc.squaredNorm()) * nc;
    const Eigen::VectorXd y = q + 2.0 * nn;
    Eigen::MatrixXd x(n, 1);
    x.col(0) = 0.5 * nn.array() + 1.0;
    auto cfg = plain_config();
    cfg.lambda_grid = {1e-10};
    const auto res = estimate_q(series(y), DesignMatrix(x), cfg);
    const Eigen::VectorXd expected = q.array() - q.mean();
    EXPECT_LT((res.residual - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(EstimateQ, IndependentPredictorsLeaveSignalIntact) {
    Rng rng(2);
    const Eigen::Index n = 1000;
    const Eigen::VectorXd y = normals(n, 1.0, rng);
    Eigen::MatrixXd x(n, 3);
    for (int j = 0; j < 3; ++j) x.col(j) = normals(n, 1.0, rng);
    const auto res = estimate_q(series(y), DesignMatrix(x), plain_config());
    EXPECT_GT(correlation(res.residual, y), 0.99);
}

// Y = Q + aN, X = bN + sR: Var[Q_hat] = sigma_Q^2 + a^2 sN^2 s^2 sR^2 / (b^2 sN^2 + s^2 sR^2).
TEST(EstimateQ, LinearGaussianResidualVariance) {
    Rng rng(3);
    const Eigen::Index n = 20000;
    const double a = 1.5, b = 0.8, s = 0.7, sn = 1.0, sq = 0.2, sr = 0.9;
    const Eigen::VectorXd nn = normals(n, sn, rng), q = normals(n, sq, rng), r = normals(n, sr, rng);
    const Eigen::VectorXd y = q + a * nn;
    Eigen::MatrixXd x(n, 1);
    x.col(0) = b * nn + s * r;
    const auto res = estimate_q(series(y), DesignMatrix(x), plain_config());
    const double expected =
        sq * sq + a * a * sn * sn * s * s * sr * sr / (b * b * sn * sn + s * s * sr * sr);
    EXPECT_NEAR(variance(res.residual), expected, 0.1 * expected);
}

TEST(EstimateQ, SubtractiveResidualIgnoresOffset) {
    Rng rng(4);
    const Eigen::Index n = 300;
    const Eigen::VectorXd y = normals(n, 1.0, rng);
    Eigen::MatrixXd x(n, 2);
    x.col(0) = y + normals(n, 0.5, rng);
    x.col(1) = normals(n, 1.0, rng);
    const auto cfg = plain_config();
    const auto a = estimate_q(series(y), DesignMatrix(x), cfg);
    const auto b = estimate_q(series(y.array() + 1000.0), DesignMatrix(x), cfg);
    EXPECT_LT((a.residual - b.residual).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(b.model.intercept - a.model.intercept, 1000.0, 1e-9);
}

TEST(EstimateQ, CombinedEqualsDivisive) {
    Rng rng(5);
    const Eigen::Index n = 400;
    const Eigen::VectorXd sys = normals(n, 0.01, rng).array() + 1.0;
    const Eigen::VectorXd y = 1e4 * sys.array() * (1.0 + normals(n, 1e-3, rng).array());
    Eigen::MatrixXd x(n, 1);
    x.col(0) = 5e3 * sys;
    auto cfg = plain_config();
    cfg.normalization = Normalization::combined;
    const auto comb = estimate_q(series(y), DesignMatrix(x), cfg);
    cfg.normalization = Normalization::divisive;
    const auto div = estimate_q(series(y), DesignMatrix(x), cfg);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = comb.prediction[i];
        ASSERT_NEAR(comb.residual[i], (y[i] - p) / p, 1e-15);
        ASSERT_NEAR(comb.residual[i], div.residual[i], 1e-12);
    }
}

TEST(EstimateQ, ZeroPredictionIsAnError) {
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(20);
    Eigen::MatrixXd x(20, 1);
    for (int i = 0; i < 20; ++i) x(i, 0) = i;
    auto cfg = plain_config();
    cfg.normalization = Normalization::divisive;
    try {
        estimate_q(series(y), DesignMatrix(x), cfg);
        FAIL() << "expected domain_error";
    } catch (const std::domain_error& e) {
        EXPECT_NE(std::string(e.what()).find("cadence 0, 1, 2"), std::string::npos) << e.what();
    }
    cfg.normalization = Normalization::subtractive;
    EXPECT_NO_THROW(estimate_q(series(y), DesignMatrix(x), cfg));
}

TEST(EstimateQ, MaskedCadencesCarryNan) {
    Rng rng(6);
    const Eigen::VectorXd y = normals(50, 1.0, rng);
    Eigen::MatrixXd x(50, 1);
    x.col(0) = normals(50, 1.0, rng);
    auto lc = series(y);
    lc.valid[3] = false;
    lc.flux[3] = std::nan("");
    std::vector<bool> mask(50, true);
    mask[7] = false;
    const auto res = estimate_q(lc, DesignMatrix(x), plain_config(), &mask);
    EXPECT_FALSE(res.valid[3]);
    EXPECT_FALSE(res.valid[7]);
    EXPECT_TRUE(std::isnan(res.residual[3]));
    EXPECT_TRUE(std::isnan(res.residual[7]));
    EXPECT_TRUE(std::isnan(res.prediction[7]));
    EXPECT_TRUE(std::isfinite(res.prediction[3]));
    EXPECT_TRUE(std::isfinite(res.residual[0]));
}

TEST(EstimateQ, Errors) {
    const Eigen::VectorXd y = Eigen::VectorXd::Ones(10);
    EXPECT_THROW(estimate_q(series(y), DesignMatrix(Eigen::MatrixXd::Ones(9, 1)), plain_config()),
                 std::invalid_argument);
    auto cfg = plain_config();
    cfg.cv_folds = 1;
    EXPECT_THROW(estimate_q(series(y), DesignMatrix(Eigen::MatrixXd::Ones(10, 1)), cfg), std::invalid_argument);
    EXPECT_THROW(parse_normalization("multiplicative"), std::invalid_argument);
    EXPECT_EQ(parse_normalization(to_string(Normalization::divisive)), Normalization::divisive);
}

TEST(BuildArColumns, HalfDayCadenceUsesNearestNeighbors) {
    Eigen::VectorXd v(20);
    for (int i = 0; i < 20; ++i) v[i] = 100.0 + i;
    const auto ar = build_ar_columns(series(v, 0.5), 3, 3, 9.0);
    ASSERT_EQ(ar.matrix.cols(), 6);
    EXPECT_EQ(ar.matrix.column_ids.front(), "ar_past_1");
    EXPECT_EQ(ar.matrix.column_ids.back(), "ar_future_3");
    const int i = 10;
    const int expected[] = {9, 8, 7, 11, 12, 13};
    for (int c = 0; c < 6; ++c) {
        EXPECT_EQ(ar.sources(i, c), expected[c]);
        EXPECT_EQ(ar.matrix.values(i, c), 100.0 + expected[c]);
    }
}

TEST(BuildArColumns, ExclusionWindowSkipsNearbyCadences) {
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(200, 0, 199);
    const auto ar = build_ar_columns(series(v, 0.5 / 24.0), 2, 2, 8.9);
    // 30 min cadence, 8.9 h half-width: the nearest usable cadences are 18 away
    EXPECT_EQ(ar.sources(100, 0), 82);
    EXPECT_EQ(ar.sources(100, 1), 81);
    EXPECT_EQ(ar.sources(100, 2), 118);
    EXPECT_EQ(ar.sources(100, 3), 119);
}

TEST(BuildArColumns, ZeroHalfwidthNeverUsesCadenceItself) {
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(10, 0, 9);
    const auto ar = build_ar_columns(series(v), 1, 1, 0.0);
    EXPECT_EQ(ar.sources(5, 0), 4);
    EXPECT_EQ(ar.sources(5, 1), 6);
}

TEST(BuildArColumns, EdgesAreMaskedAndGapsSkipped) {
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(12, 0, 11);
    auto lc = series(v, 0.5);
    lc.valid[4] = false;
    const auto ar = build_ar_columns(lc, 3, 3, 9.0);
    for (int i = 0; i < 3; ++i) EXPECT_FALSE(ar.row_valid[static_cast<std::size_t>(i)]);
    for (int i = 9; i < 12; ++i) EXPECT_FALSE(ar.row_valid[static_cast<std::size_t>(i)]);
    EXPECT_EQ(ar.matrix.values.row(0).norm(), 0.0);
    // past neighbors of cadence 6 skip the invalid cadence 4
    EXPECT_TRUE(ar.row_valid[6]);
    EXPECT_EQ(ar.sources(6, 0), 5);
    EXPECT_EQ(ar.sources(6, 1), 3);
    EXPECT_EQ(ar.sources(6, 2), 2);
    EXPECT_TRUE(ar.row_valid[3]);
}

namespace {

SceneConfig small_scene() {
    SceneConfig cfg;
    cfg.n_stars = 20;
    cfg.pixels_per_star = 2;
    cfg.segment_days = 10;
    cfg.n_segments = 1;
    cfg.ccd_size = 400;
    cfg.seed = 9;
    return cfg;
}

HsrConfig star_config() {
    HsrConfig cfg;
    cfg.selection.n_pixels = 16;
    return cfg;
}

}  // namespace

// A predictor identical to the target pixel explains it completely.
TEST(DetrendStar, CopiedPixelLeavesNoResidual) {
    StarCatalog cat{{{"T", 1, 0, 0, 12, {"t0"}}, {"A", 1, 100, 100, 12, {"a0"}}}};
    Rng rng(7);
    const Eigen::Index n = 480;
    Eigen::VectorXd flux(n);
    double walk = 0;
    std::normal_distribution<double> step(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) flux[i] = 1e4 + 10 * std::sin(0.05 * i) + (walk += step(rng));
    LightCurveStore curves;
    curves["t0"] = series(flux, 0.5 / 24);
    curves["t0"].star_id = "t0";
    curves["a0"] = curves["t0"];
    curves["a0"].star_id = "a0";
    auto cfg = star_config();
    cfg.lambda_grid = {1e-8, 1e-4, 1.0};
    const auto d = detrend_star("T", cat, curves, cfg);
    EXPECT_EQ(d.predictor_pixels, (std::vector<std::string>{"a0"}));
    std::size_t checked = 0;
    for (std::size_t i = 0; i < d.residual.size(); ++i) {
        if (!d.residual.valid[i]) continue;
        ASSERT_LT(std::abs(d.residual.flux[i]), 1e-6);
        ++checked;
    }
    EXPECT_GT(checked, n / 2);
}

TEST(DetrendStar, RecoversInjectedTransitDepth) {
    auto sc = small_scene();
    sc.transits.push_back({"S004", 3.0, 1.0, 8.0, 2e-3});
    const auto scene = gen_scene(sc);
    const auto d = detrend_star("S004", scene.catalog, scene.pixels, star_config());
    const auto r = recover_depth(d.residual, scene.truth.at("S004").in_transit, 2e-3);
    EXPECT_LT(r.depth_error, 0.2) << "recovered " << r.recovered_depth;
}

TEST(DetrendStar, SegmentsFollowGaps) {
    auto sc = small_scene();
    sc.n_segments = 2;
    sc.segment_days = 5;
    const auto scene = gen_scene(sc);
    const auto d = detrend_star("S000", scene.catalog, scene.pixels, star_config());
    ASSERT_EQ(d.pixels.size(), 4u);  // 2 pixels x 2 segments
    EXPECT_EQ(d.pixels[0].segment.start_index, 0u);
    EXPECT_EQ(d.pixels[1].segment.start_index, d.pixels[0].segment.end_index);
    EXPECT_EQ(d.raw.size(), scene.times.size());
}

TEST(DetrendStar, JointPixelCountSearch) {
    const auto scene = gen_scene(small_scene());
    auto cfg = star_config();
    cfg.pixel_count_grid = {2, 8, 16};
    const auto d = detrend_star("S001", scene.catalog, scene.pixels, cfg);
    for (const auto& p : d.pixels) {
        const auto n_px = p.model.coefficients.size() - cfg.ar_past - cfg.ar_future;
        EXPECT_TRUE(n_px == 2 || n_px == 8 || n_px == 16) << n_px;
    }
}

TEST(DetrendStar, Errors) {
    StarCatalog cat{{{"T", 1, 0, 0, 12, {"t0"}}, {"A", 2, 100, 100, 12, {"a0"}}}};
    LightCurveStore curves;
    curves["t0"] = series(Eigen::VectorXd::Ones(50));
    curves["a0"] = series(Eigen::VectorXd::Ones(50));
    EXPECT_THROW(detrend_star("T", cat, curves, star_config()), EmptyPoolError);
    EXPECT_THROW(detrend_star("Q", cat, curves, star_config()), std::invalid_argument);
    cat.entries[1].ccd_id = 1;
    curves.erase("a0");
    EXPECT_THROW(detrend_star("T", cat, curves, star_config()), std::invalid_argument);
}
