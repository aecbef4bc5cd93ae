#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "pcreg/attention.hpp"
#include "pcreg/encoder.hpp"
#include "pcreg/matcher.hpp"
#include "pcreg/model.hpp"
#include "pcreg/robust.hpp"

namespace pcreg {

inline constexpr double kDefaultVoxelSize = 0.3;

struct PipelineConfig {
    double voxel_size = kDefaultVoxelSize;  // <= 0 disables downsampling
    double temperature = kDefaultTemperature;
    RansacConfig ransac;
    bool icp = false;
    IcpConfig icp_config;
};

/// Wall-clock milliseconds per stage.
struct StageTimings {
    double downsample = 0.0;
    double encode = 0.0;
    double attention = 0.0;
    double match = 0.0;
    double ransac = 0.0;
    double icp = 0.0;
    double total = 0.0;
};

/// A pipeline failure tagged with the stage that raised it.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message, bool registration_failure)
        : std::runtime_error(stage + ": " + message),
          stage_(std::move(stage)),
          registration_failure_(registration_failure) {}

    const std::string& stage() const { return stage_; }
    /// True when inputs were valid but no consistent transform was found.
    bool registration_failure() const { return registration_failure_; }

private:
    std::string stage_;
    bool registration_failure_;
};

/// Refined key points and matching map for one pair.
struct PairFeatures {
    KeyPointSet source;
    KeyPointSet target;
    Eigen::MatrixXd probabilities;
};

struct PairTrace {
    EncodeTrace encode_source;
    EncodeTrace encode_target;
    CgconvTrace self_source;
    CgconvTrace self_target;
    CrossTrace cross;
    MatchTrace match;
    KeyPointSet encoded_source;  // encoder output, pre-attention
    KeyPointSet encoded_target;
};

/// Encoder, self-attention, cross-attention and matching map on clouds that
/// are already downsampled.
PairFeatures forward_pair(const Model& model, const PointCloud& source, const PointCloud& target, double temperature,
                          PairTrace* trace = nullptr, StageTimings* timings = nullptr);

struct PipelineResult {
    RigidTransform transform;          // final estimate (after ICP when enabled)
    RegistrationResult registration;   // RANSAC stage
    std::optional<IcpResult> icp;
    CorrespondenceSet correspondences;
    StageTimings timings;
    std::size_t source_points = 0;     // after downsampling
    std::size_t target_points = 0;
};

/// Full registration of `source` onto `target`. Deterministic for a fixed
/// ransac seed. Throws StageError.
PipelineResult register_pair(const PointCloud& source, const PointCloud& target, const Model& model,
                             const PipelineConfig& cfg);

}  // namespace pcreg
