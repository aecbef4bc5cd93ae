#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "pcreg/geometry.hpp"
#include "support.hpp"

using namespace pcreg;
using pcreg::testing::random_cloud;
using pcreg::testing::random_transform;

TEST(PointCloud, ValidateRejectsMismatchedIntensity) {
    PointCloud c;
    c.coords = {Point3(0, 0, 0), Point3(1, 0, 0)};
    c.intensity = {0.5};
    EXPECT_THROW(c.validate(), InvalidArgumentError);
    c.intensity = {0.5, 0.25};
    EXPECT_NO_THROW(c.validate());
}

TEST(PointCloud, ValidateRejectsNonFiniteCoordinates) {
    PointCloud c;
    c.coords = {Point3(0, std::nan(""), 0)};
    EXPECT_THROW(c.validate(), InvalidArgumentError);
}

TEST(RigidTransform, ComposeAppliesRightOperandFirst) {
    Rng rng(3);
    const auto a = random_transform(rng, 5.0);
    const auto b = random_transform(rng, 5.0);
    const Point3 p(1.0, -2.0, 0.5);
    EXPECT_LT((compose(a, b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
}

TEST(RigidTransform, InverseUndoes) {
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        const auto t = random_transform(rng, 10.0);
        const auto id = compose(invert(t), t);
        EXPECT_LT((id.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(RigidTransform, MatrixRoundTrip) {
    Rng rng(5);
    const auto t = random_transform(rng, 10.0);
    const auto back = RigidTransform::from_matrix(t.matrix());
    EXPECT_EQ(back.rotation, t.rotation);
    EXPECT_EQ(back.translation, t.translation);
}

TEST(RigidTransform, FromMatrixRejectsNonRigid) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 0) = 2.0;
    EXPECT_THROW(RigidTransform::from_matrix(m), InvalidArgumentError);
    m = Eigen::Matrix4d::Identity();
    m(3, 0) = 1.0;
    EXPECT_THROW(RigidTransform::from_matrix(m), InvalidArgumentError);
}

TEST(RigidTransform, YawIsValidRotation) {
    for (double a : {0.0, 0.3, 2.0, -1.0, 6.2}) {
        const auto t = RigidTransform::from_yaw(a);
        EXPECT_TRUE(t.is_valid());
        EXPECT_NEAR(rotation_error(t, RigidTransform::identity()),
                    std::abs(std::remainder(a, 2.0 * std::numbers::pi)) * 180.0 / std::numbers::pi, 1e-9);
    }
}

TEST(Metrics, TranslationAndRotationErrors) {
    const auto gt = RigidTransform::from_yaw(0.5, Point3(1, 2, 3));
    const auto est = RigidTransform::from_yaw(0.5 + 4.0 * std::numbers::pi / 180.0, Point3(1.3, 2.4, 3.0));
    EXPECT_NEAR(translation_error(est, gt), 0.5, 1e-12);
    EXPECT_NEAR(rotation_error(est, gt), 4.0, 1e-9);
    EXPECT_TRUE(evaluate(est, gt).success);
    const auto far = RigidTransform::from_yaw(0.5, Point3(1.6, 2, 3));
    EXPECT_FALSE(evaluate(far, gt).success);  // TE exactly 0.6 is not a success
}

TEST(Metrics, RotationErrorMatchesQuaternionAngle) {
    Rng rng(6);
    for (int i = 0; i < 50; ++i) {
        const auto a = random_transform(rng, 1.0);
        const auto b = random_transform(rng, 1.0);
        const Eigen::Quaterniond qa(a.rotation), qb(b.rotation);
        const double oracle = 2.0 * std::acos(std::min(1.0, std::abs(qa.dot(qb)))) * 180.0 / std::numbers::pi;
        EXPECT_NEAR(rotation_error(a, b), oracle, 1e-6);
    }
}

TEST(Metrics, RotationErrorOfIdenticalRotationsIsZero) {
    Rng rng(7);
    const auto a = random_transform(rng, 1.0);
    EXPECT_EQ(rotation_error(a, a), 0.0);
}

TEST(VoxelDownsample, CentroidPerVoxel) {
    PointCloud c;
    c.coords = {Point3(0.1, 0.1, 0.1), Point3(0.2, 0.2, 0.2), Point3(1.5, 0.1, 0.1)};
    c.intensity = {0.2, 0.4, 1.0};
    const auto d = voxel_downsample(c, 1.0);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_LT((d.coords[0] - Point3(0.15, 0.15, 0.15)).norm(), 1e-12);
    EXPECT_NEAR(d.intensity[0], 0.3, 1e-12);
    EXPECT_LT((d.coords[1] - Point3(1.5, 0.1, 0.1)).norm(), 1e-12);
}

TEST(VoxelDownsample, OnePointPerOccupiedVoxel) {
    Rng rng(8);
    const auto c = random_cloud(rng, 5000, 10.0);
    const double v = 0.7;
    const auto d = voxel_downsample(c, v);
    std::set<std::tuple<long, long, long>> voxels;
    for (const auto& p : c.coords)
        voxels.emplace(std::floor(p.x() / v), std::floor(p.y() / v), std::floor(p.z() / v));
    EXPECT_EQ(d.size(), voxels.size());
}

TEST(VoxelDownsample, RejectsNonPositiveVoxel) {
    PointCloud c;
    c.coords = {Point3::Zero()};
    EXPECT_THROW(voxel_downsample(c, 0.0), InvalidArgumentError);
}

TEST(Overlap, IdenticalCloudsOverlapFully) {
    Rng rng(9);
    const auto c = random_cloud(rng, 500, 5.0);
    EXPECT_EQ(overlap_ratio(c, c, RigidTransform::identity(), 0.3), 1.0);
}

TEST(Overlap, MatchesBruteForce) {
    Rng rng(10);
    const auto s = random_cloud(rng, 400, 3.0);
    const auto t = random_cloud(rng, 400, 3.0);
    const auto gt = random_transform(rng, 0.5);
    const double gamma = 0.3;
    std::size_t hits = 0;
    for (const auto& p : s.coords) {
        const Point3 q = gt.apply(p);
        for (const auto& y : t.coords)
            if ((y - q).norm() < gamma) {
                ++hits;
                break;
            }
    }
    EXPECT_DOUBLE_EQ(overlap_ratio(s, t, gt, gamma), static_cast<double>(hits) / 400.0);
}

TEST(Overlap, StrictThreshold) {
    PointCloud s, t;
    s.coords = {Point3(0, 0, 0)};
    t.coords = {Point3(0.5, 0, 0)};
    EXPECT_EQ(overlap_ratio(s, t, RigidTransform::identity(), 0.5), 0.0);
    EXPECT_EQ(overlap_ratio(s, t, RigidTransform::identity(), 0.5000001), 1.0);
}

TEST(Overlap, EmptySourceThrows) {
    PointCloud s, t;
    t.coords = {Point3::Zero()};
    EXPECT_THROW(overlap_ratio(s, t, RigidTransform::identity(), 0.3), InvalidArgumentError);
}
