#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "pcreg/random.hpp"

namespace pcreg {

/// Fully connected layer y = x W + b applied to every row of x. `weight` is
/// (in x out).
struct Dense {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

/// Shared MLP with a ReLU after every layer.
struct Mlp {
    std::vector<Dense> layers;

    std::size_t in_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.rows()); }
    std::size_t out_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.cols()); }

    /// Uniform initialization in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
    static Mlp uniform(std::size_t in, const std::vector<std::size_t>& widths, Rng& rng);
    static Mlp zeros(std::size_t in, const std::vector<std::size_t>& widths);
    Mlp zeros_like() const;
};

/// Activations kept for the backward pass. `activations[0]` is the input and
/// `activations[l + 1]` the post-ReLU output of layer l.
struct MlpTrace {
    std::vector<Eigen::MatrixXd> activations;
};

Eigen::MatrixXd mlp_forward(const Mlp& mlp, const Eigen::MatrixXd& x, MlpTrace* trace = nullptr);

/// Accumulates parameter gradients into `grads` and returns d(loss)/d(input).
/// The ReLU derivative at exactly zero is taken as 0.
Eigen::MatrixXd mlp_backward(const Mlp& mlp, const MlpTrace& trace, const Eigen::MatrixXd& grad_out, Mlp& grads);

}  // namespace pcreg
