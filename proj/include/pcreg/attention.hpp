#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pcreg/encoder.hpp"
#include "pcreg/spatial.hpp"

namespace pcreg {

inline constexpr std::size_t kDefaultAttentionNeighbors = 32;

/// Gate and core matrices for the self and cross layers, each (2D x D). No biases.
struct AttentionWeights {
    Eigen::MatrixXd self_gate;   // W_f
    Eigen::MatrixXd self_core;   // W_s
    Eigen::MatrixXd cross_gate;  // W_f'
    Eigen::MatrixXd cross_core;  // W_s'

    std::size_t feature_dim() const { return static_cast<std::size_t>(self_gate.cols()); }

    static AttentionWeights uniform(std::size_t dim, Rng& rng);
    static AttentionWeights zeros(std::size_t dim);
    AttentionWeights zeros_like() const;
};

/// Per-node neighbor lists. Indices refer to the neighbor feature matrix.
using AttentionGraph = std::vector<IndexList>;

struct CgconvTrace {
    AttentionGraph graph;
    std::vector<std::size_t> offsets;  // node i owns edges [offsets[i], offsets[i+1])
    Eigen::MatrixXd pairs;             // (E x 2D) rows [f_i, f_j]
    Eigen::MatrixXd gate_pre;          // pairs * W_f
    Eigen::MatrixXd core_pre;          // pairs * W_s
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax;  // (N x D) edge row
    std::size_t neighbor_rows = 0;
};

double sigmoid(double x);
double softplus(double x);

/// f̂_i = f_i + max_j sigmoid([f_i, f_j] W_f) ⊙ softplus([f_i, f_j] W_s), the
/// max taken element-wise over the neighbors j of node i.
Eigen::MatrixXd cgconv(const Eigen::MatrixXd& features, const AttentionGraph& graph,
                       const Eigen::MatrixXd& neighbor_features, const Eigen::MatrixXd& gate,
                       const Eigen::MatrixXd& core, CgconvTrace* trace = nullptr);

struct CgconvGrads {
    Eigen::MatrixXd features;           // includes the identity (residual) path
    Eigen::MatrixXd neighbor_features;
};

/// Accumulates into grad_gate / grad_core.
CgconvGrads cgconv_backward(const Eigen::MatrixXd& gate, const Eigen::MatrixXd& core, const CgconvTrace& trace,
                            const Eigen::MatrixXd& grad_out, Eigen::MatrixXd& grad_gate, Eigen::MatrixXd& grad_core);

/// Spatial k-NN graph over the key points, excluding each node itself.
AttentionGraph spatial_graph(std::span<const Point3> coords, std::size_t k);

/// Bipartite graph: each row of `from` links to its k highest dot-product rows of `to`.
AttentionGraph similarity_graph(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to, std::size_t k);

/// Throws InsufficientPointsError with fewer than k + 1 key points.
KeyPointSet self_attention(const KeyPointSet& keypoints, const Eigen::MatrixXd& gate, const Eigen::MatrixXd& core,
                           std::size_t k = kDefaultAttentionNeighbors, CgconvTrace* trace = nullptr);

struct CrossTrace {
    CgconvTrace source;
    CgconvTrace target;
};

/// Symmetric cross update with shared weights; both sides read the
/// pre-update features. Throws InsufficientPointsError with fewer than k points on either side.
std::pair<KeyPointSet, KeyPointSet> cross_attention(const KeyPointSet& source, const KeyPointSet& target,
                                                    const Eigen::MatrixXd& gate, const Eigen::MatrixXd& core,
                                                    std::size_t k = kDefaultAttentionNeighbors,
                                                    CrossTrace* trace = nullptr);

}  // namespace pcreg
