#include "pcreg/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pcreg {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

}  // namespace

AttentionWeights AttentionWeights::uniform(std::size_t dim, Rng& rng) {
    const auto d = static_cast<Eigen::Index>(dim);
    const double bound = 1.0 / std::sqrt(2.0 * static_cast<double>(dim));
    AttentionWeights w;
    w.self_gate = uniform_matrix(2 * d, d, bound, rng);
    w.self_core = uniform_matrix(2 * d, d, bound, rng);
    w.cross_gate = uniform_matrix(2 * d, d, bound, rng);
    w.cross_core = uniform_matrix(2 * d, d, bound, rng);
    return w;
}

AttentionWeights AttentionWeights::zeros(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return {Eigen::MatrixXd::Zero(2 * d, d), Eigen::MatrixXd::Zero(2 * d, d), Eigen::MatrixXd::Zero(2 * d, d),
            Eigen::MatrixXd::Zero(2 * d, d)};
}

AttentionWeights AttentionWeights::zeros_like() const { return zeros(feature_dim()); }

Eigen::MatrixXd cgconv(const Eigen::MatrixXd& features, const AttentionGraph& graph,
                       const Eigen::MatrixXd& neighbor_features, const Eigen::MatrixXd& gate,
                       const Eigen::MatrixXd& core, CgconvTrace* trace) {
    const Eigen::Index n = features.rows();
    const Eigen::Index dim = features.cols();
    if (static_cast<Eigen::Index>(graph.size()) != n) throw InvalidArgumentError("cgconv: graph/node count mismatch");
    if (neighbor_features.cols() != dim) throw InvalidArgumentError("cgconv: neighbor feature width mismatch");
    if (gate.rows() != 2 * dim || gate.cols() != dim || core.rows() != 2 * dim || core.cols() != dim)
        throw InvalidArgumentError("cgconv: attention matrices must be (2D x D) with D = " + std::to_string(dim));

    std::vector<std::size_t> offsets{0};
    for (const auto& nb : graph) {
        if (nb.empty()) throw InvalidArgumentError("cgconv: node without neighbors");
        for (Index j : nb)
            if (j >= neighbor_features.rows()) throw InvalidArgumentError("cgconv: neighbor index out of range");
        offsets.push_back(offsets.back() + nb.size());
    }
    const auto edges = static_cast<Eigen::Index>(offsets.back());
    Eigen::MatrixXd pairs(edges, 2 * dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto e = static_cast<Eigen::Index>(offsets[static_cast<std::size_t>(i)]);
        for (Index j : graph[static_cast<std::size_t>(i)]) {
            pairs.row(e).head(dim) = features.row(i);
            pairs.row(e).tail(dim) = neighbor_features.row(j);
            ++e;
        }
    }
    Eigen::MatrixXd gate_pre = pairs * gate;
    Eigen::MatrixXd core_pre = pairs * core;

    Eigen::MatrixXd out = features;
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto begin = static_cast<Eigen::Index>(offsets[static_cast<std::size_t>(i)]);
        const auto end = static_cast<Eigen::Index>(offsets[static_cast<std::size_t>(i) + 1]);
        for (Eigen::Index d = 0; d < dim; ++d) {
            Eigen::Index best = begin;
            double best_value = sigmoid(gate_pre(begin, d)) * softplus(core_pre(begin, d));
            for (Eigen::Index e = begin + 1; e < end; ++e) {
                const double v = sigmoid(gate_pre(e, d)) * softplus(core_pre(e, d));
                if (v > best_value) {
                    best_value = v;
                    best = e;
                }
            }
            out(i, d) += best_value;
            argmax(i, d) = static_cast<Index>(best);
        }
    }

    if (trace) {
        trace->graph = graph;
        trace->offsets = std::move(offsets);
        trace->pairs = std::move(pairs);
        trace->gate_pre = std::move(gate_pre);
        trace->core_pre = std::move(core_pre);
        trace->argmax = std::move(argmax);
        trace->neighbor_rows = static_cast<std::size_t>(neighbor_features.rows());
    }
    return out;
}

CgconvGrads cgconv_backward(const Eigen::MatrixXd& gate, const Eigen::MatrixXd& core, const CgconvTrace& trace,
                            const Eigen::MatrixXd& grad_out, Eigen::MatrixXd& grad_gate, Eigen::MatrixXd& grad_core) {
    const Eigen::Index n = grad_out.rows();
    const Eigen::Index dim = grad_out.cols();
    Eigen::MatrixXd d_gate_pre = Eigen::MatrixXd::Zero(trace.gate_pre.rows(), dim);
    Eigen::MatrixXd d_core_pre = Eigen::MatrixXd::Zero(trace.core_pre.rows(), dim);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index d = 0; d < dim; ++d) {
            const Eigen::Index e = trace.argmax(i, d);
            const double g = grad_out(i, d);
            const double s = sigmoid(trace.gate_pre(e, d));
            const double b = trace.core_pre(e, d);
            d_gate_pre(e, d) += g * softplus(b) * s * (1.0 - s);
            d_core_pre(e, d) += g * s * sigmoid(b);
        }
    grad_gate.noalias() += trace.pairs.transpose() * d_gate_pre;
    grad_core.noalias() += trace.pairs.transpose() * d_core_pre;
    const Eigen::MatrixXd d_pairs = d_gate_pre * gate.transpose() + d_core_pre * core.transpose();

    CgconvGrads g;
    g.features = grad_out;
    g.neighbor_features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(trace.neighbor_rows), dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto e = static_cast<Eigen::Index>(trace.offsets[static_cast<std::size_t>(i)]);
        for (Index j : trace.graph[static_cast<std::size_t>(i)]) {
            g.features.row(i) += d_pairs.row(e).head(dim);
            g.neighbor_features.row(j) += d_pairs.row(e).tail(dim);
            ++e;
        }
    }
    return g;
}

AttentionGraph spatial_graph(std::span<const Point3> coords, std::size_t k) {
    if (coords.size() < k + 1)
        throw InsufficientPointsError("self-attention needs at least " + std::to_string(k + 1) + " key points, got " +
                                      std::to_string(coords.size()));
    auto graph = knn(coords, coords, k + 1);
    for (std::size_t i = 0; i < graph.size(); ++i) {
        auto& nb = graph[i];
        const auto self = std::ranges::find(nb, static_cast<Index>(i));
        if (self != nb.end()) {
            nb.erase(self);
        } else {
            nb.pop_back();
        }
    }
    return graph;
}

AttentionGraph similarity_graph(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to, std::size_t k) {
    return knn(from, to, k, KnnMetric::kDotProduct);
}

KeyPointSet self_attention(const KeyPointSet& keypoints, const Eigen::MatrixXd& gate, const Eigen::MatrixXd& core,
                           std::size_t k, CgconvTrace* trace) {
    const auto graph = spatial_graph(keypoints.coords, k);
    KeyPointSet out;
    out.coords = keypoints.coords;
    out.features = cgconv(keypoints.features, graph, keypoints.features, gate, core, trace);
    return out;
}

std::pair<KeyPointSet, KeyPointSet> cross_attention(const KeyPointSet& source, const KeyPointSet& target,
                                                    const Eigen::MatrixXd& gate, const Eigen::MatrixXd& core,
                                                    std::size_t k, CrossTrace* trace) {
    if (source.size() < k || target.size() < k)
        throw InsufficientPointsError("cross-attention needs at least " + std::to_string(k) +
                                      " key points on each side");
    const auto to_target = similarity_graph(source.features, target.features, k);
    const auto to_source = similarity_graph(target.features, source.features, k);
    KeyPointSet src{source.coords, cgconv(source.features, to_target, target.features, gate, core,
                                          trace ? &trace->source : nullptr)};
    KeyPointSet tgt{target.coords, cgconv(target.features, to_source, source.features, gate, core,
                                          trace ? &trace->target : nullptr)};
    return {std::move(src), std::move(tgt)};
}

}  // namespace pcreg
