#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "pcreg/geometry.hpp"
#include "pcreg/mlp.hpp"
#include "pcreg/spatial.hpp"

namespace pcreg {

/// Sampled key point coordinates with one feature row per point (N x D).
struct KeyPointSet {
    Points3 coords;
    Eigen::MatrixXd features;

    std::size_t size() const { return coords.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
};

/// Hyperparameters of one set-abstraction layer.
struct SaConfig {
    std::size_t samples = 0;
    double radius = 0.0;
    std::vector<std::size_t> widths;
};

struct EncoderConfig {
    std::array<SaConfig, 4> sa;
    std::vector<std::size_t> fp_widths;
    std::size_t input_dim = 1;  // per-point input features (intensity)
    std::size_t max_neighbors = kDefaultMaxNeighbors;

    /// Key points produced by encode() (SA3 sample count).
    std::size_t keypoints() const { return sa[2].samples; }
    /// Output feature dimension D.
    std::size_t feature_dim() const { return fp_widths.empty() ? 0 : fp_widths.back(); }

    /// Throws InvalidArgumentError on non-positive counts/radii, empty widths,
    /// radii that do not strictly increase, or fewer than 3 SA4 samples.
    void validate() const;
};

/// Parameters for four SA layers and the FP layer. The SA MLP of layer l takes
/// [feature, offset-from-center] rows; the FP MLP takes [interpolated, skip].
struct EncoderWeights {
    std::array<Mlp, 4> sa;
    Mlp fp;

    static EncoderWeights uniform(const EncoderConfig& cfg, Rng& rng);
    static EncoderWeights zeros(const EncoderConfig& cfg);
    EncoderWeights zeros_like() const;
};

struct SaOutput {
    IndexList sampled;  // indices into the layer input
    Points3 coords;
    Eigen::MatrixXd features;
};

struct SaTrace {
    std::size_t input_rows = 0;
    std::size_t input_dim = 0;
    std::vector<Index> neighbors;        // flattened neighbor lists
    std::vector<std::size_t> offsets;    // center c owns neighbors[offsets[c], offsets[c+1])
    MlpTrace mlp;
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax;  // (n x out) row into the MLP batch
};

/// One set-abstraction layer: FPS picks `samples` centers, each gathers its
/// radius neighborhood (capped, always containing the center), the shared
/// MLP maps [feature, offset] per neighbor and an element-wise max pools per
/// center. Throws InsufficientPointsError if coords.size() < samples.
SaOutput sa_layer(std::span<const Point3> coords, const Eigen::MatrixXd& features, std::size_t samples,
                  double radius, const Mlp& mlp, std::size_t max_neighbors = kDefaultMaxNeighbors,
                  std::size_t seed_index = 0, SaTrace* trace = nullptr);

/// Returns d(loss)/d(input features) and accumulates MLP gradients.
Eigen::MatrixXd sa_layer_backward(const Mlp& mlp, const SaTrace& trace, const Eigen::MatrixXd& grad_out,
                                  Mlp& grads);

inline constexpr double kInterpolationMinDistance = 1e-8;

struct FpTrace {
    std::size_t upper_rows = 0;
    std::size_t upper_dim = 0;
    std::vector<std::array<Index, 3>> neighbors;
    std::vector<std::array<double, 3>> weights;
    MlpTrace mlp;
};

/// Interpolates upper features onto lower points from the 3 nearest upper
/// points with inverse-distance weights, concatenates the lower points' own
/// features and applies the shared MLP.
Eigen::MatrixXd fp_layer(std::span<const Point3> lower_coords, const Eigen::MatrixXd& lower_features,
                         std::span<const Point3> upper_coords, const Eigen::MatrixXd& upper_features,
                         const Mlp& mlp, FpTrace* trace = nullptr);

struct FpGrads {
    Eigen::MatrixXd lower;  // w.r.t. skip features
    Eigen::MatrixXd upper;  // w.r.t. upper features
};

FpGrads fp_layer_backward(const Mlp& mlp, const FpTrace& trace, const Eigen::MatrixXd& grad_out, Mlp& grads);

struct EncodeTrace {
    std::array<SaTrace, 4> sa;
    FpTrace fp;
};

/// Per-point input features: intensity, or the constant 1.0 when absent.
Eigen::MatrixXd input_features(const PointCloud& cloud);

/// SA1 -> SA2 -> SA3 -> SA4, then FP from SA4 back onto SA3. Layers whose
/// input holds fewer points than configured sample every input point.
/// Throws InsufficientPointsError when the cloud has fewer points than the
/// key point count.
KeyPointSet encode(const PointCloud& cloud, const EncoderConfig& cfg, const EncoderWeights& weights,
                   EncodeTrace* trace = nullptr);

/// Backpropagates d(loss)/d(output features) into the encoder weights.
void encode_backward(const EncoderWeights& weights, const EncodeTrace& trace, const Eigen::MatrixXd& grad_features,
                     EncoderWeights& grads);

}  // namespace pcreg
