#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcreg/attention.hpp"
#include "pcreg/encoder.hpp"

namespace pcreg {

struct ModelConfig {
    EncoderConfig encoder;
    std::size_t self_neighbors = kDefaultAttentionNeighbors;
    std::size_t cross_neighbors = kDefaultAttentionNeighbors;

    void validate() const;

    /// Inference-scale network: 512 key points with 128-dimensional features.
    static ModelConfig full();
    /// Reduced network for CPU training: 256 key points, D = 32, k = 16.
    static ModelConfig desk();
    /// Minimal network for finite-difference gradient checks (16 key points, D = 4, k = 2).
    static ModelConfig tiny();
};

/// Everything register_pair needs: hyperparameters plus trainable tensors.
struct Model {
    ModelConfig config;
    EncoderWeights encoder;
    AttentionWeights attention;

    static Model initialize(const ModelConfig& config, std::uint64_t seed);
    static Model zeros(const ModelConfig& config);
    Model zeros_like() const;
};

/// Mutable view of one trainable tensor. Matrices are (rows x cols) in
/// Eigen's column-major storage; vectors have cols == 1 and rank 1.
struct ParameterView {
    std::string name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;
    int rank;

    Eigen::Index size() const { return rows * cols; }
};

/// Every trainable tensor in a fixed order, named "sa1.mlp.0.weight",
/// "fp.mlp.1.bias", "att.self.wf", ...
std::vector<ParameterView> parameters(Model& model);
std::size_t parameter_count(const Model& model);

/// Writes the tensors plus "meta.*" hyperparameter tensors to an FRWT file.
void save_model(const std::filesystem::path& path, const Model& model);
/// Reads and validates the full dimension chain; throws FormatError naming
/// the first inconsistent tensor.
Model load_model(const std::filesystem::path& path);

}  // namespace pcreg
