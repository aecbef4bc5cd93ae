#include <cmath>

#include <gtest/gtest.h>

#include "pcreg/procrustes.hpp"
#include "support.hpp"

using namespace pcreg;
using pcreg::testing::is_rotation;
using pcreg::testing::random_points;
using pcreg::testing::random_transform;

namespace {

Points3 moved(const Points3& src, const RigidTransform& t, Rng& rng, double sigma) {
    Points3 out;
    for (const auto& p : src) out.push_back(t.apply(p) + sigma * Point3(rng.normal(), rng.normal(), rng.normal()));
    return out;
}

// Gradient descent on the rotation (exponential-map steps) with the optimal
// translation for each rotation; converges to the least-squares optimum.
double descent_oracle(const Points3& x, const Points3& y) {
    const std::size_t n = x.size();
    Point3 xm = Point3::Zero(), ym = Point3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        xm += x[i];
        ym += y[i];
    }
    xm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    auto cost = [&](const Eigen::Matrix3d& r) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += (r * (x[i] - xm) - (y[i] - ym)).squaredNorm();
        return c / static_cast<double>(n);
    };
    double best = std::numeric_limits<double>::infinity();
    Rng rng(77);
    for (int restart = 0; restart < 8; ++restart) {
        Eigen::Matrix3d r = random_transform(rng, 0.0).rotation;
        double step = 0.5;
        double c = cost(r);
        for (int it = 0; it < 4000 && step > 1e-12; ++it) {
            Eigen::Vector3d g = Eigen::Vector3d::Zero();
            for (std::size_t i = 0; i < n; ++i) {
                const Point3 a = r * (x[i] - xm);
                g += -2.0 * a.cross(y[i] - ym);
            }
            g /= static_cast<double>(n);
            if (g.norm() == 0.0) break;
            const Eigen::Matrix3d cand = Eigen::AngleAxisd(-step * g.norm(), g.normalized()).toRotationMatrix() * r;
            const double cc = cost(cand);
            if (cc < c) {
                r = cand;
                c = cc;
                step *= 1.2;
            } else {
                step *= 0.5;
            }
        }
        best = std::min(best, c);
    }
    return best;
}

}  // namespace

TEST(FitRigid, RecoversNoiseFreeTransform) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_points(rng, 3 + rng.below(200), 10.0);
        const auto gt = random_transform(rng, 20.0);
        const auto est = fit_rigid(x, moved(x, gt, rng, 0.0));
        EXPECT_LT(translation_error(est, gt), 1e-6);
        EXPECT_LT(rotation_error(est, gt), 1e-5);
        EXPECT_TRUE(is_rotation(est.rotation));
    }
}

TEST(FitRigid, MatchesDescentOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_points(rng, 30, 5.0);
        const auto y = moved(x, random_transform(rng, 5.0), rng, 0.3);
        const double closed = residual_error(x, y, fit_rigid(x, y));
        EXPECT_NEAR(closed, descent_oracle(x, y), 1e-8 + 1e-8 * closed);
    }
}

TEST(FitRigid, NeverWorseThanRivals) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_points(rng, 50, 5.0);
        const auto gt = random_transform(rng, 5.0);
        const auto y = moved(x, gt, rng, 0.1);
        const double best = residual_error(x, y, fit_rigid(x, y));
        for (int r = 0; r < 50; ++r) {
            auto rival = gt;
            rival.rotation = Eigen::AngleAxisd(rng.uniform(0.0, 0.05), random_transform(rng, 0).rotation.col(0)) *
                             gt.rotation;
            rival.translation += 0.05 * pcreg::testing::random_point(rng, 1.0);
            EXPECT_LE(best, residual_error(x, y, rival) + 1e-12);
        }
    }
}

TEST(FitRigid, ReflectionCaseYieldsProperRotation) {
    // Mirrored non-planar target: the unconstrained optimum is a reflection.
    const Points3 x{Point3(1, 0, 0), Point3(0, 1, 0), Point3(-1, 0, 0.5), Point3(0, -2, 1), Point3(0, 0, 2)};
    Points3 y;
    for (const auto& p : x) y.emplace_back(-p.x(), p.y(), p.z());
    const auto est = fit_rigid(x, y);
    EXPECT_TRUE(is_rotation(est.rotation));
    EXPECT_NEAR(est.rotation.determinant(), 1.0, 1e-12);
}

TEST(FitRigid, Errors) {
    const Points3 two{Point3(0, 0, 0), Point3(1, 0, 0)};
    EXPECT_THROW(fit_rigid(two, two), InsufficientPointsError);
    const Points3 line{Point3(0, 0, 0), Point3(1, 1, 1), Point3(2, 2, 2), Point3(3, 3, 3)};
    EXPECT_THROW(fit_rigid(line, line), DegenerateConfigurationError);
    const Points3 same{Point3(1, 1, 1), Point3(1, 1, 1), Point3(1, 1, 1)};
    EXPECT_THROW(fit_rigid(same, same), DegenerateConfigurationError);
    const Points3 three{Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0)};
    EXPECT_THROW(fit_rigid(three, two), InvalidArgumentError);
}

TEST(FitRigid, InvariantToCorrespondenceOrder) {
    Rng rng(4);
    auto x = random_points(rng, 40, 5.0);
    auto y = moved(x, random_transform(rng, 5.0), rng, 0.2);
    const auto a = fit_rigid(x, y);
    std::reverse(x.begin(), x.end());
    std::reverse(y.begin(), y.end());
    const auto b = fit_rigid(x, y);
    EXPECT_LT((a.matrix() - b.matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ResidualError, DirectEvaluation) {
    const Points3 x{Point3(0, 0, 0), Point3(1, 0, 0)};
    const Points3 y{Point3(0, 0, 1), Point3(1, 0, 3)};
    EXPECT_DOUBLE_EQ(residual_error(x, y, RigidTransform::identity()), (1.0 + 9.0) / 2.0);
}
