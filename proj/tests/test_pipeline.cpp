#include <gtest/gtest.h>

#include "pcreg/pipeline.hpp"
#include "support.hpp"

using namespace pcreg;
using pcreg::testing::random_cloud;

namespace {

ModelConfig small_config() {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.encoder.sa[0] = {120, 1.0, {8, 8}};
    cfg.encoder.sa[1] = {80, 2.0, {16}};
    cfg.encoder.sa[2] = {48, 3.0, {16}};
    cfg.encoder.sa[3] = {12, 6.0, {16}};
    cfg.encoder.fp_widths = {16, 12};
    cfg.encoder.max_neighbors = 24;
    cfg.self_neighbors = 6;
    cfg.cross_neighbors = 6;
    return cfg;
}

}  // namespace

TEST(Pipeline, TranslatedCopyIsRecoveredExactly) {
    // Translation leaves FPS order and local offsets unchanged, so even
    // untrained features match one to one.
    Rng rng(1);
    const auto src = random_cloud(rng, 600, 10.0);
    const auto gt = RigidTransform::from_yaw(0.0, Point3(3.0, -2.0, 0.5));
    const auto tgt = apply_transform(src, gt);
    PipelineConfig cfg;
    cfg.voxel_size = 0.0;
    const auto model = Model::initialize(small_config(), 2);
    const auto r = register_pair(src, tgt, model, cfg);
    EXPECT_LT(translation_error(r.transform, gt), 1e-6);
    EXPECT_LT(rotation_error(r.transform, gt), 1e-5);
    EXPECT_EQ(r.registration.inlier_count, 48u);
    EXPECT_TRUE(pcreg::testing::is_rotation(r.transform.rotation));
    EXPECT_GT(r.timings.total, 0.0);
    EXPECT_FALSE(r.icp.has_value());
}

TEST(Pipeline, IcpStageRuns) {
    Rng rng(2);
    const auto src = random_cloud(rng, 600, 10.0);
    const auto gt = RigidTransform::from_yaw(0.0, Point3(1.0, 1.0, 0.0));
    PipelineConfig cfg;
    cfg.voxel_size = 0.0;
    cfg.icp = true;
    const auto r = register_pair(src, apply_transform(src, gt), Model::initialize(small_config(), 3), cfg);
    ASSERT_TRUE(r.icp.has_value());
    EXPECT_LT(translation_error(r.transform, gt), 1e-6);
}

TEST(Pipeline, DeterministicForSeed) {
    Rng rng(3);
    const auto src = random_cloud(rng, 800, 10.0);
    const auto tgt = apply_transform(random_cloud(rng, 800, 10.0), RigidTransform::from_yaw(0.3));
    PipelineConfig cfg;
    cfg.ransac.seed = 4;
    cfg.ransac.max_iterations = 2000;
    const auto model = Model::initialize(small_config(), 4);
    auto run = [&]() -> Eigen::Matrix4d {
        try {
            return register_pair(src, tgt, model, cfg).transform.matrix();
        } catch (const StageError& e) {
            EXPECT_TRUE(e.registration_failure());
            return Eigen::Matrix4d::Zero();
        }
    };
    EXPECT_EQ(run(), run());
}

TEST(Pipeline, ErrorsNameTheStage) {
    Rng rng(4);
    const auto model = Model::initialize(small_config(), 5);
    PipelineConfig cfg;
    cfg.voxel_size = 0.0;
    auto stage_of = [&](const PointCloud& s, const PointCloud& t, const PipelineConfig& c) {
        try {
            register_pair(s, t, model, c);
        } catch (const StageError& e) {
            EXPECT_FALSE(e.registration_failure());
            return e.stage();
        }
        return std::string("none");
    };
    const auto big = random_cloud(rng, 600, 10.0);
    EXPECT_EQ(stage_of(PointCloud{}, big, cfg), "downsample");
    EXPECT_EQ(stage_of(random_cloud(rng, 30, 10.0), big, cfg), "encode");
    auto hot = cfg;
    hot.temperature = 0.0;
    EXPECT_EQ(stage_of(big, big, hot), "match");
    auto bad = cfg;
    bad.ransac.confidence = 2.0;
    EXPECT_EQ(stage_of(big, big, bad), "ransac");
}

TEST(Pipeline, ForwardPairShapes) {
    Rng rng(5);
    const auto model = Model::initialize(small_config(), 6);
    const auto a = random_cloud(rng, 500, 10.0), b = random_cloud(rng, 400, 10.0);
    StageTimings tm;
    const auto f = forward_pair(model, a, b, 0.01, nullptr, &tm);
    EXPECT_EQ(f.source.coords.size(), 48u);
    EXPECT_EQ(f.target.features.rows(), 48);
    EXPECT_EQ(f.source.features.cols(), 12);
    EXPECT_EQ(f.probabilities.rows(), 48);
    EXPECT_LT((f.probabilities.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_GE(tm.encode, 0.0);
}
