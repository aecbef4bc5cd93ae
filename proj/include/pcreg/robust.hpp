#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "pcreg/geometry.hpp"
#include "pcreg/matcher.hpp"
#include "pcreg/spatial.hpp"

namespace pcreg {

/// No hypothesis gathered enough support.
class RegistrationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RansacConfig {
    double inlier_threshold = 0.5;  // meters
    double confidence = 0.999;
    std::size_t max_iterations = 100000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RegistrationResult {
    RigidTransform transform;
    std::size_t inlier_count = 0;
    IndexList inlier_indices;
    std::size_t iterations_run = 0;
    double elapsed = 0.0;  // seconds
};

struct InlierSet {
    std::size_t count = 0;
    IndexList indices;
};

/// Correspondences with |R x + t - y| <= threshold.
InlierSet count_inliers(const CorrespondenceSet& corr, const RigidTransform& t, double threshold);

/// Iterations needed to draw one outlier-free sample of size s with
/// probability p when a fraction w of the data are inliers:
/// ceil(log(1 - p) / log(1 - w^s)), clamped to [1, max_iterations].
std::size_t adaptive_iterations(double inlier_ratio, double confidence, std::size_t sample_size = 3,
                                std::size_t max_iterations = 100000);

/// RANSAC over 3-correspondence minimal samples with an adaptive iteration
/// bound, followed by a refit on the best hypothesis' inliers. The refit is
/// kept only if it does not lose inliers.
///
/// Degenerate samples (repeated target index, collinear points) are skipped;
/// they count towards max_iterations but not towards the adaptive bound.
/// Throws InsufficientPointsError for fewer than 3 correspondences and
/// RegistrationFailure when no hypothesis reaches 3 inliers.
RegistrationResult ransac_register(const CorrespondenceSet& corr, const RansacConfig& cfg);

struct IcpConfig {
    double max_correspondence_distance = 1.0;  // meters
    std::size_t max_iterations = 50;
    double relative_tolerance = 1e-6;
};

enum class IcpStatus { kConverged, kMaxIterations, kNoCorrespondences, kDegenerate };

const char* to_string(IcpStatus status);

struct IcpResult {
    RigidTransform transform;
    IcpStatus status = IcpStatus::kConverged;
    std::size_t iterations = 0;
    std::size_t correspondences = 0;
    /// Mean over source points of min(d², max_distance²), d the distance to
    /// the nearest target point. ICP never increases it.
    double residual = 0.0;
};

/// Truncated alignment cost used by icp_refine.
double icp_residual(const PointCloud& source, const PointCloud& target, const RigidTransform& t,
                    double max_correspondence_distance);

/// Point-to-point ICP starting from `init`. Returns `init` unchanged with
/// IcpStatus::kNoCorrespondences when no source point has a target within
/// the correspondence distance.
IcpResult icp_refine(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                     const IcpConfig& cfg = {});

}  // namespace pcreg
