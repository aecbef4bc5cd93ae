#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pcreg {

using Point3 = Eigen::Vector3d;
using Points3 = std::vector<Point3>;

/// Raised when an operation needs more points than it was given.
class InsufficientPointsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised on malformed arguments (non-positive radii, shape mismatch, ...).
class InvalidArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// 3D point cloud with optional per-point intensity in [0, 1].
///
/// `intensity` is either empty (absent) or holds exactly one value per point.
struct PointCloud {
    Points3 coords;
    std::vector<double> intensity;

    std::size_t size() const { return coords.size(); }
    bool empty() const { return coords.empty(); }
    bool has_intensity() const { return !intensity.empty(); }

    /// Throws InvalidArgumentError if the intensity length or any coordinate
    /// is invalid.
    void validate() const;
};

/// Rigid motion p -> R p + t.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }
    /// Throws InvalidArgumentError unless m is a homogeneous rigid transform.
    static RigidTransform from_matrix(const Eigen::Matrix4d& m);
    /// Rotation of `angle` radians about the z axis followed by translation.
    static RigidTransform from_yaw(double angle, const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

    Eigen::Matrix4d matrix() const;
    Point3 apply(const Point3& p) const { return rotation * p + translation; }

    /// RᵀR = I and det R = +1 within `tol`.
    bool is_valid(double tol = 1e-6) const;
};

/// compose(a, b) applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);
Points3 apply_transform(std::span<const Point3> points, const RigidTransform& t);

/// Replaces the points of every occupied voxel by their centroid. Output is
/// ordered by ascending (x, y, z) voxel index.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

struct RegistrationMetrics {
    double translation_error = 0.0;  // meters
    double rotation_error = 0.0;     // degrees
    bool success = false;
};

inline constexpr double kSuccessTranslation = 0.6;  // meters
inline constexpr double kSuccessRotation = 5.0;     // degrees

double translation_error(const RigidTransform& estimate, const RigidTransform& ground_truth);
/// Geodesic angle between the two rotations, in degrees.
double rotation_error(const RigidTransform& estimate, const RigidTransform& ground_truth);
RegistrationMetrics evaluate(const RigidTransform& estimate, const RigidTransform& ground_truth);

/// Fraction of source points that, once aligned with `gt`, have a target
/// point strictly closer than `gamma`.
double overlap_ratio(const PointCloud& source, const PointCloud& target,
                     const RigidTransform& gt, double gamma);

}  // namespace pcreg
