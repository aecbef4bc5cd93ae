#include <gtest/gtest.h>

#include "pcreg/encoder.hpp"
#include "pcreg/model.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace pcreg;
using pcreg::testing::random_cloud;
using pcreg::testing::random_matrix;
using pcreg::testing::random_points;

namespace {

EncoderConfig small_config() {
    EncoderConfig c;
    c.sa = {SaConfig{120, 1.0, {8, 8}}, SaConfig{60, 2.0, {16}}, SaConfig{30, 3.0, {16, 12}}, SaConfig{8, 6.0, {24}}};
    c.fp_widths = {16, 10};
    c.max_neighbors = 24;
    return c;
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() ? (a - b).cwiseAbs().maxCoeff() : 1e300;
}

}  // namespace

TEST(SaLayer, MatchesOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        const auto pts = random_points(rng, 400, 4.0);
        const auto feats = random_matrix(rng, 400, 5);
        const Mlp net = Mlp::uniform(8, {12, 7}, rng);
        const auto got = sa_layer(pts, feats, 50, 1.5, net, 20);
        const auto want = oracle::sa(pts, feats, 50, 1.5, net, 20);
        EXPECT_EQ(got.coords, want.coords);
        EXPECT_LT(max_abs_diff(got.features, want.features), 1e-12);
    }
}

TEST(SaLayer, CenterAlwaysInNeighborhood) {
    // Isolated points: the neighborhood is the center alone, so the output is
    // the MLP applied to [feature, 0, 0, 0].
    Points3 pts{Point3(0, 0, 0), Point3(10, 0, 0), Point3(0, 10, 0)};
    Eigen::MatrixXd feats(3, 1);
    feats << 0.5, 1.0, 2.0;
    Rng rng(2);
    const Mlp net = Mlp::uniform(4, {6}, rng);
    SaTrace trace;
    const auto out = sa_layer(pts, feats, 3, 1.0, net, 8, 0, &trace);
    for (std::size_t c = 0; c < 3; ++c) {
        const Index j = out.sampled[c];
        const auto y = oracle::mlp(net, {feats(j, 0), 0.0, 0.0, 0.0});
        for (Eigen::Index d = 0; d < 6; ++d) EXPECT_DOUBLE_EQ(out.features(static_cast<Eigen::Index>(c), d), y[d]);
    }
    EXPECT_EQ(trace.offsets, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(SaLayer, Errors) {
    Rng rng(3);
    const auto pts = random_points(rng, 10, 1.0);
    const Mlp net = Mlp::uniform(4, {4}, rng);
    EXPECT_THROW(sa_layer(pts, Eigen::MatrixXd::Ones(10, 1), 11, 1.0, net), InsufficientPointsError);
    EXPECT_THROW(sa_layer(pts, Eigen::MatrixXd::Ones(10, 2), 5, 1.0, net), InvalidArgumentError);
    EXPECT_THROW(sa_layer(pts, Eigen::MatrixXd::Ones(10, 1), 5, 0.0, net), InvalidArgumentError);
}

TEST(FpLayer, CoincidentPointTakesUpperFeature) {
    // A lower point sitting on an upper point gets (almost) exactly its feature.
    Points3 upper{Point3(0, 0, 0), Point3(5, 0, 0), Point3(0, 5, 0)};
    Eigen::MatrixXd uf(3, 2);
    uf << 1, 2, 3, 4, 5, 6;
    Points3 lower{Point3(0, 0, 0)};
    Mlp identity;
    identity.layers.push_back({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)});
    const auto out = fp_layer(lower, Eigen::MatrixXd::Constant(1, 1, 7.0), upper, uf, identity);
    EXPECT_NEAR(out(0, 0), 1.0, 1e-6);
    EXPECT_NEAR(out(0, 1), 2.0, 1e-6);
    EXPECT_EQ(out(0, 2), 7.0);
}

TEST(Encoder, MatchesOracle) {
    Rng rng(4);
    const auto cfg = small_config();
    for (int trial = 0; trial < 5; ++trial) {
        const auto cloud = random_cloud(rng, 600, 5.0);
        const auto w = EncoderWeights::uniform(cfg, rng);
        const auto got = encode(cloud, cfg, w);
        const auto want = oracle::encode(cloud, cfg, w);
        EXPECT_EQ(got.coords, want.coords);
        EXPECT_LT(max_abs_diff(got.features, want.features), 1e-9);
    }
}

TEST(Encoder, OutputShape) {
    Rng rng(5);
    const auto cfg = small_config();
    const auto out = encode(random_cloud(rng, 500, 5.0), cfg, EncoderWeights::uniform(cfg, rng));
    EXPECT_EQ(out.size(), 30u);
    EXPECT_EQ(out.dim(), 10u);
}

TEST(Encoder, FullPresetContract) {
    // 512 key points with 128-dimensional features.
    const auto cfg = ModelConfig::full().encoder;
    EXPECT_EQ(cfg.keypoints(), 512u);
    EXPECT_EQ(cfg.feature_dim(), 128u);
}

TEST(Encoder, SmallerCloudsSampleEveryPointPerLayer) {
    Rng rng(6);
    const auto cfg = small_config();
    const auto w = EncoderWeights::uniform(cfg, rng);
    const auto cloud = random_cloud(rng, 70, 3.0);  // below SA1's 120 samples, above 30 key points
    const auto got = encode(cloud, cfg, w);
    EXPECT_EQ(got.size(), 30u);
    EXPECT_LT(max_abs_diff(got.features, oracle::encode(cloud, cfg, w).features), 1e-9);
}

TEST(Encoder, TooFewPointsIsAnError) {
    Rng rng(7);
    const auto cfg = small_config();
    EXPECT_THROW(encode(random_cloud(rng, 29, 3.0), cfg, EncoderWeights::uniform(cfg, rng)), InsufficientPointsError);
}

TEST(Encoder, ConstantIntensityWhenAbsent) {
    Rng rng(8);
    auto cloud = random_cloud(rng, 200, 3.0, false);
    const auto cfg = small_config();
    const auto w = EncoderWeights::uniform(cfg, rng);
    auto ones = cloud;
    ones.intensity.assign(cloud.size(), 1.0);
    EXPECT_EQ(encode(cloud, cfg, w).features, encode(ones, cfg, w).features);
}

TEST(Encoder, TranslationInvariant) {
    // Offsets are relative and FPS depends only on distances.
    Rng rng(9);
    const auto cfg = small_config();
    const auto w = EncoderWeights::uniform(cfg, rng);
    const auto cloud = random_cloud(rng, 300, 4.0);
    const auto shifted = apply_transform(cloud, RigidTransform::from_yaw(0.0, Point3(0.5, -0.25, 0.125)));
    EXPECT_LT(max_abs_diff(encode(cloud, cfg, w).features, encode(shifted, cfg, w).features), 1e-9);
}

TEST(EncoderConfig, ValidateRejectsNonIncreasingRadii) {
    auto cfg = small_config();
    cfg.sa[2].radius = cfg.sa[1].radius;
    EXPECT_THROW(cfg.validate(), InvalidArgumentError);
    cfg = small_config();
    cfg.sa[3].samples = 2;
    EXPECT_THROW(cfg.validate(), InvalidArgumentError);
}
