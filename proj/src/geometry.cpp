#include "pcreg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "pcreg/spatial.hpp"

namespace pcreg {

void PointCloud::validate() const {
    if (!intensity.empty() && intensity.size() != coords.size())
        throw InvalidArgumentError("point cloud intensity has " + std::to_string(intensity.size()) +
                                   " values for " + std::to_string(coords.size()) + " points");
    for (const auto& p : coords)
        if (!p.allFinite()) throw InvalidArgumentError("point cloud contains non-finite coordinates");
}

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix4d& m) {
    RigidTransform t;
    t.rotation = m.topLeftCorner<3, 3>();
    t.translation = m.topRightCorner<3, 1>();
    const Eigen::RowVector4d last(0.0, 0.0, 0.0, 1.0);
    if (!m.allFinite() || (m.row(3) - last).cwiseAbs().maxCoeff() > 1e-9 || !t.is_valid())
        throw InvalidArgumentError("matrix is not a rigid transform");
    return t;
}

RigidTransform RigidTransform::from_yaw(double angle, const Eigen::Vector3d& t) {
    RigidTransform out;
    out.rotation = Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    out.translation = t;
    return out;
}

Eigen::Matrix4d RigidTransform::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

bool RigidTransform::is_valid(double tol) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

RigidTransform invert(const RigidTransform& t) {
    RigidTransform out;
    out.rotation = t.rotation.transpose();
    out.translation = -(out.rotation * t.translation);
    return out;
}

Points3 apply_transform(std::span<const Point3> points, const RigidTransform& t) {
    Points3 out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(t.apply(p));
    return out;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
    PointCloud out;
    out.coords = apply_transform(std::span<const Point3>(cloud.coords), t);
    out.intensity = cloud.intensity;
    return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
    if (!(voxel_size > 0.0)) throw InvalidArgumentError("voxel_size must be positive");
    PointCloud out;
    if (cloud.empty()) return out;

    struct Entry {
        std::int64_t x, y, z;
        Index index;
    };
    std::vector<Entry> entries;
    entries.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.coords[i];
        entries.push_back({static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
                           static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
                           static_cast<std::int64_t>(std::floor(p.z() / voxel_size)),
                           static_cast<Index>(i)});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        if (a.z != b.z) return a.z < b.z;
        return a.index < b.index;
    });

    const bool with_intensity = cloud.has_intensity();
    for (std::size_t begin = 0; begin < entries.size();) {
        std::size_t end = begin + 1;
        while (end < entries.size() && entries[end].x == entries[begin].x &&
               entries[end].y == entries[begin].y && entries[end].z == entries[begin].z)
            ++end;
        Point3 sum = Point3::Zero();
        double isum = 0.0;
        for (std::size_t k = begin; k < end; ++k) {
            sum += cloud.coords[entries[k].index];
            if (with_intensity) isum += cloud.intensity[entries[k].index];
        }
        const double count = static_cast<double>(end - begin);
        out.coords.push_back(sum / count);
        if (with_intensity) out.intensity.push_back(isum / count);
        begin = end;
    }
    return out;
}

double translation_error(const RigidTransform& estimate, const RigidTransform& ground_truth) {
    return (estimate.translation - ground_truth.translation).norm();
}

double rotation_error(const RigidTransform& estimate, const RigidTransform& ground_truth) {
    const double trace = (estimate.rotation.transpose() * ground_truth.rotation).trace();
    const double c = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

RegistrationMetrics evaluate(const RigidTransform& estimate, const RigidTransform& ground_truth) {
    RegistrationMetrics m;
    m.translation_error = translation_error(estimate, ground_truth);
    m.rotation_error = rotation_error(estimate, ground_truth);
    m.success = m.translation_error < kSuccessTranslation && m.rotation_error < kSuccessRotation;
    return m;
}

double overlap_ratio(const PointCloud& source, const PointCloud& target, const RigidTransform& gt,
                     double gamma) {
    if (source.empty()) throw InvalidArgumentError("overlap_ratio: empty source cloud");
    if (!(gamma > 0.0)) throw InvalidArgumentError("overlap_ratio: gamma must be positive");
    if (target.empty()) return 0.0;

    const GridIndex index(target.coords, gamma);
    const double gamma2 = gamma * gamma;
    std::size_t hits = 0;
    for (const auto& p : source.coords) {
        const Point3 q = gt.apply(p);
        bool found = false;
        index.for_each_in_ring(q, 1, [&](Index j) {
            if (!found && (target.coords[j] - q).squaredNorm() < gamma2) found = true;
        });
        if (found) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(source.size());
}

}  // namespace pcreg
