#include "pcreg/procrustes.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

namespace pcreg {

RigidTransform fit_rigid(std::span<const Point3> source, std::span<const Point3> target) {
    if (source.size() != target.size())
        throw InvalidArgumentError("fit_rigid: source and target sizes differ");
    if (source.size() < 3)
        throw InsufficientPointsError("fit_rigid: at least 3 correspondences are required");

    const double n = static_cast<double>(source.size());
    Eigen::Vector3d x_mean = Eigen::Vector3d::Zero();
    Eigen::Vector3d y_mean = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
        x_mean += source[i];
        y_mean += target[i];
    }
    x_mean /= n;
    y_mean /= n;

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i)
        h.noalias() += (source[i] - x_mean) * (target[i] - y_mean).transpose();

    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d& s = svd.singularValues();
    if (!(s(0) > 0.0) || s(1) < kRankRatioThreshold * s(0))
        throw DegenerateConfigurationError("fit_rigid: correspondences are collinear or coincident");

    const Eigen::Matrix3d& u = svd.matrixU();
    const Eigen::Matrix3d& v = svd.matrixV();
    Eigen::Vector3d d(1.0, 1.0, (v.transpose() * u).determinant() < 0.0 ? -1.0 : 1.0);

    RigidTransform out;
    out.rotation = v * d.asDiagonal() * u.transpose();
    out.translation = y_mean - out.rotation * x_mean;
    return out;
}

double residual_error(std::span<const Point3> source, std::span<const Point3> target,
                      const RigidTransform& t) {
    if (source.size() != target.size())
        throw InvalidArgumentError("residual_error: source and target sizes differ");
    if (source.empty()) throw InvalidArgumentError("residual_error: empty correspondence set");
    double sum = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) sum += (t.apply(source[i]) - target[i]).squaredNorm();
    return sum / static_cast<double>(source.size());
}

}  // namespace pcreg
