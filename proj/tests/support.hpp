#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pcreg/geometry.hpp"
#include "pcreg/random.hpp"

namespace pcreg::testing {

inline Point3 random_point(Rng& rng, double extent) {
    return {rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent)};
}

inline Points3 random_points(Rng& rng, std::size_t n, double extent) {
    Points3 pts(n);
    for (auto& p : pts) p = random_point(rng, extent);
    return pts;
}

inline PointCloud random_cloud(Rng& rng, std::size_t n, double extent, bool with_intensity = true) {
    PointCloud c;
    c.coords = random_points(rng, n, extent);
    if (with_intensity)
        for (std::size_t i = 0; i < n; ++i) c.intensity.push_back(rng.uniform());
    return c;
}

/// Uniformly distributed rotation (random unit quaternion) with a translation in [-extent, extent]^3.
inline RigidTransform random_transform(Rng& rng, double extent) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    RigidTransform t;
    t.rotation = q.toRotationMatrix();
    t.translation = random_point(rng, extent);
    return t;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
    return m;
}

/// Orthonormality and unit determinant within `tol`.
inline bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-6) {
    return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace pcreg::testing
