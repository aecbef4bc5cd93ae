#include "pcreg/mlp.hpp"

#include <cmath>

#include "pcreg/geometry.hpp"

namespace pcreg {

Mlp Mlp::uniform(std::size_t in, const std::vector<std::size_t>& widths, Rng& rng) {
    Mlp mlp;
    std::size_t fan_in = in;
    for (std::size_t w : widths) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Dense d;
        d.weight.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(w));
        d.bias.resize(static_cast<Eigen::Index>(w));
        // Row-major fill order keeps the draw sequence independent of Eigen's storage order.
        for (Eigen::Index r = 0; r < d.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < d.weight.cols(); ++c) d.weight(r, c) = rng.uniform(-bound, bound);
        for (Eigen::Index c = 0; c < d.bias.size(); ++c) d.bias(c) = rng.uniform(-bound, bound);
        mlp.layers.push_back(std::move(d));
        fan_in = w;
    }
    return mlp;
}

Mlp Mlp::zeros(std::size_t in, const std::vector<std::size_t>& widths) {
    Mlp mlp;
    std::size_t fan_in = in;
    for (std::size_t w : widths) {
        mlp.layers.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(w)),
                              Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w))});
        fan_in = w;
    }
    return mlp;
}

Mlp Mlp::zeros_like() const {
    Mlp out;
    for (const auto& l : layers)
        out.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                              Eigen::VectorXd::Zero(l.bias.size())});
    return out;
}

Eigen::MatrixXd mlp_forward(const Mlp& mlp, const Eigen::MatrixXd& x, MlpTrace* trace) {
    if (static_cast<std::size_t>(x.cols()) != mlp.in_dim())
        throw InvalidArgumentError("mlp_forward: input has " + std::to_string(x.cols()) + " columns, expected " +
                                   std::to_string(mlp.in_dim()));
    if (trace) {
        trace->activations.clear();
        trace->activations.push_back(x);
    }
    Eigen::MatrixXd h = x;
    for (const auto& layer : mlp.layers) {
        Eigen::MatrixXd next = h * layer.weight;
        next.rowwise() += layer.bias.transpose();
        h = next.cwiseMax(0.0);
        if (trace) trace->activations.push_back(h);
    }
    return h;
}

Eigen::MatrixXd mlp_backward(const Mlp& mlp, const MlpTrace& trace, const Eigen::MatrixXd& grad_out, Mlp& grads) {
    Eigen::MatrixXd g = grad_out;
    for (std::size_t l = mlp.layers.size(); l-- > 0;) {
        const Eigen::MatrixXd& out = trace.activations[l + 1];
        const Eigen::MatrixXd& in = trace.activations[l];
        g = (out.array() > 0.0).select(g, 0.0);
        grads.layers[l].weight.noalias() += in.transpose() * g;
        grads.layers[l].bias += g.colwise().sum().transpose();
        g = (g * mlp.layers[l].weight.transpose()).eval();
    }
    return g;
}

}  // namespace pcreg
