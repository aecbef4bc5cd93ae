#pragma once

#include <span>
#include <stdexcept>

#include "pcreg/geometry.hpp"

namespace pcreg {

/// Raised when corresponded points cannot determine a rotation (coincident or
/// collinear sets).
class DegenerateConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Second-largest singular value of the cross-covariance must exceed this
/// fraction of the largest.
inline constexpr double kRankRatioThreshold = 1e-9;

/// Least-squares rigid alignment of source[i] onto target[i] (Kabsch / Umeyama
/// without scale). det(R) = +1 always.
///
/// Throws InsufficientPointsError for fewer than 3 pairs and
/// DegenerateConfigurationError when the sets are collinear or coincident.
RigidTransform fit_rigid(std::span<const Point3> source, std::span<const Point3> target);

/// Mean squared alignment error (1/N) Σ |R x + t - y|².
double residual_error(std::span<const Point3> source, std::span<const Point3> target,
                      const RigidTransform& t);

}  // namespace pcreg
