#include "pcreg/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pcreg {

void EncoderConfig::validate() const {
    if (input_dim == 0) throw InvalidArgumentError("encoder: input_dim must be positive");
    if (max_neighbors == 0) throw InvalidArgumentError("encoder: max_neighbors must be positive");
    for (std::size_t l = 0; l < sa.size(); ++l) {
        const std::string name = "encoder.sa" + std::to_string(l + 1);
        if (sa[l].samples == 0) throw InvalidArgumentError(name + ".samples must be positive");
        if (!(sa[l].radius > 0.0)) throw InvalidArgumentError(name + ".radius must be positive");
        if (sa[l].widths.empty()) throw InvalidArgumentError(name + ".widths must not be empty");
        if (std::ranges::find(sa[l].widths, std::size_t{0}) != sa[l].widths.end())
            throw InvalidArgumentError(name + ".widths must be positive");
        if (l > 0 && !(sa[l].radius > sa[l - 1].radius))
            throw InvalidArgumentError(name + ".radius must exceed the previous layer's radius");
        if (l > 0 && sa[l].samples > sa[l - 1].samples)
            throw InvalidArgumentError(name + ".samples must not exceed the previous layer's samples");
    }
    if (sa[3].samples < 3) throw InvalidArgumentError("encoder.sa4.samples must be at least 3");
    if (fp_widths.empty() || std::ranges::find(fp_widths, std::size_t{0}) != fp_widths.end())
        throw InvalidArgumentError("encoder.fp.widths must be non-empty and positive");
}

EncoderWeights EncoderWeights::uniform(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    EncoderWeights w;
    std::size_t in = cfg.input_dim;
    for (std::size_t l = 0; l < 4; ++l) {
        w.sa[l] = Mlp::uniform(in + 3, cfg.sa[l].widths, rng);
        in = cfg.sa[l].widths.back();
    }
    w.fp = Mlp::uniform(cfg.sa[3].widths.back() + cfg.sa[2].widths.back(), cfg.fp_widths, rng);
    return w;
}

EncoderWeights EncoderWeights::zeros(const EncoderConfig& cfg) {
    cfg.validate();
    EncoderWeights w;
    std::size_t in = cfg.input_dim;
    for (std::size_t l = 0; l < 4; ++l) {
        w.sa[l] = Mlp::zeros(in + 3, cfg.sa[l].widths);
        in = cfg.sa[l].widths.back();
    }
    w.fp = Mlp::zeros(cfg.sa[3].widths.back() + cfg.sa[2].widths.back(), cfg.fp_widths);
    return w;
}

EncoderWeights EncoderWeights::zeros_like() const {
    EncoderWeights w;
    for (std::size_t l = 0; l < 4; ++l) w.sa[l] = sa[l].zeros_like();
    w.fp = fp.zeros_like();
    return w;
}

SaOutput sa_layer(std::span<const Point3> coords, const Eigen::MatrixXd& features, std::size_t samples,
                  double radius, const Mlp& mlp, std::size_t max_neighbors, std::size_t seed_index,
                  SaTrace* trace) {
    if (static_cast<std::size_t>(features.rows()) != coords.size())
        throw InvalidArgumentError("sa_layer: feature rows do not match coordinate count");
    const auto feat_dim = static_cast<std::size_t>(features.cols());
    if (feat_dim + 3 != mlp.in_dim())
        throw InvalidArgumentError("sa_layer: MLP expects " + std::to_string(mlp.in_dim()) + " inputs, got " +
                                   std::to_string(feat_dim) + " features + 3 offsets");
    if (coords.size() < samples)
        throw InsufficientPointsError("sa_layer: " + std::to_string(coords.size()) + " points, " +
                                      std::to_string(samples) + " samples requested");

    SaOutput out;
    out.sampled = farthest_point_sample(coords, samples, seed_index);
    out.coords.reserve(samples);
    for (Index i : out.sampled) out.coords.push_back(coords[i]);

    auto neighborhoods = radius_neighbors(out.coords, coords, radius, max_neighbors);
    std::vector<std::size_t> offsets{0};
    offsets.reserve(samples + 1);
    for (std::size_t c = 0; c < samples; ++c) {
        auto& nb = neighborhoods[c];
        const Index center = out.sampled[c];
        if (std::ranges::find(nb, center) == nb.end()) {
            if (nb.size() >= max_neighbors) nb.pop_back();
            nb.insert(nb.begin(), center);
        }
        offsets.push_back(offsets.back() + nb.size());
    }

    const auto total = static_cast<Eigen::Index>(offsets.back());
    Eigen::MatrixXd batch(total, static_cast<Eigen::Index>(feat_dim + 3));
    std::vector<Index> flat;
    flat.reserve(static_cast<std::size_t>(total));
    for (std::size_t c = 0; c < samples; ++c) {
        const Point3& center = out.coords[c];
        for (Index j : neighborhoods[c]) {
            const auto row = static_cast<Eigen::Index>(flat.size());
            batch.row(row).head(static_cast<Eigen::Index>(feat_dim)) = features.row(j);
            batch.row(row).tail<3>() = (coords[j] - center).transpose();
            flat.push_back(j);
        }
    }

    MlpTrace local;
    const Eigen::MatrixXd mapped = mlp_forward(mlp, batch, trace ? &trace->mlp : &local);

    const Eigen::Index width = mapped.cols();
    out.features.resize(static_cast<Eigen::Index>(samples), width);
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax(static_cast<Eigen::Index>(samples), width);
    for (std::size_t c = 0; c < samples; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        const auto begin = static_cast<Eigen::Index>(offsets[c]);
        const auto end = static_cast<Eigen::Index>(offsets[c + 1]);
        for (Eigen::Index d = 0; d < width; ++d) {
            Eigen::Index best = begin;
            for (Eigen::Index r = begin + 1; r < end; ++r)
                if (mapped(r, d) > mapped(best, d)) best = r;
            out.features(ci, d) = mapped(best, d);
            argmax(ci, d) = static_cast<Index>(best);
        }
    }

    if (trace) {
        trace->input_rows = coords.size();
        trace->input_dim = feat_dim;
        trace->neighbors = std::move(flat);
        trace->offsets = std::move(offsets);
        trace->argmax = std::move(argmax);
    }
    return out;
}

Eigen::MatrixXd sa_layer_backward(const Mlp& mlp, const SaTrace& trace, const Eigen::MatrixXd& grad_out,
                                  Mlp& grads) {
    const Eigen::MatrixXd& mapped = trace.mlp.activations.back();
    Eigen::MatrixXd grad_mapped = Eigen::MatrixXd::Zero(mapped.rows(), mapped.cols());
    for (Eigen::Index c = 0; c < grad_out.rows(); ++c)
        for (Eigen::Index d = 0; d < grad_out.cols(); ++d) grad_mapped(trace.argmax(c, d), d) += grad_out(c, d);

    const Eigen::MatrixXd grad_batch = mlp_backward(mlp, trace.mlp, grad_mapped, grads);
    const auto feat_dim = static_cast<Eigen::Index>(trace.input_dim);
    Eigen::MatrixXd grad_in = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(trace.input_rows), feat_dim);
    for (std::size_t r = 0; r < trace.neighbors.size(); ++r)
        grad_in.row(trace.neighbors[r]) += grad_batch.row(static_cast<Eigen::Index>(r)).head(feat_dim);
    return grad_in;
}

Eigen::MatrixXd fp_layer(std::span<const Point3> lower_coords, const Eigen::MatrixXd& lower_features,
                         std::span<const Point3> upper_coords, const Eigen::MatrixXd& upper_features,
                         const Mlp& mlp, FpTrace* trace) {
    if (upper_coords.size() < 3)
        throw InsufficientPointsError("fp_layer: at least 3 upper points are required");
    if (static_cast<std::size_t>(upper_features.rows()) != upper_coords.size() ||
        static_cast<std::size_t>(lower_features.rows()) != lower_coords.size())
        throw InvalidArgumentError("fp_layer: feature rows do not match coordinate counts");
    const Eigen::Index upper_dim = upper_features.cols();
    const Eigen::Index lower_dim = lower_features.cols();
    if (static_cast<std::size_t>(upper_dim + lower_dim) != mlp.in_dim())
        throw InvalidArgumentError("fp_layer: MLP input width does not match upper + skip features");

    const auto nn = knn(lower_coords, upper_coords, 3);
    const auto rows = static_cast<Eigen::Index>(lower_coords.size());
    Eigen::MatrixXd batch(rows, upper_dim + lower_dim);
    std::vector<std::array<Index, 3>> neighbors(lower_coords.size());
    std::vector<std::array<double, 3>> weights(lower_coords.size());
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& p = lower_coords[static_cast<std::size_t>(i)];
        std::array<double, 3> inv{};
        double total = 0.0;
        for (int k = 0; k < 3; ++k) {
            const Index j = nn[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
            const double d = std::max((upper_coords[j] - p).norm(), kInterpolationMinDistance);
            inv[static_cast<std::size_t>(k)] = 1.0 / d;
            total += inv[static_cast<std::size_t>(k)];
            neighbors[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = j;
        }
        auto interp = batch.row(i).head(upper_dim);
        interp.setZero();
        for (std::size_t k = 0; k < 3; ++k) {
            const double w = inv[k] / total;
            weights[static_cast<std::size_t>(i)][k] = w;
            interp += w * upper_features.row(neighbors[static_cast<std::size_t>(i)][k]);
        }
        batch.row(i).tail(lower_dim) = lower_features.row(i);
    }

    MlpTrace local;
    Eigen::MatrixXd out = mlp_forward(mlp, batch, trace ? &trace->mlp : &local);
    if (trace) {
        trace->upper_rows = upper_coords.size();
        trace->upper_dim = static_cast<std::size_t>(upper_dim);
        trace->neighbors = std::move(neighbors);
        trace->weights = std::move(weights);
    }
    return out;
}

FpGrads fp_layer_backward(const Mlp& mlp, const FpTrace& trace, const Eigen::MatrixXd& grad_out, Mlp& grads) {
    const Eigen::MatrixXd grad_batch = mlp_backward(mlp, trace.mlp, grad_out, grads);
    const auto upper_dim = static_cast<Eigen::Index>(trace.upper_dim);
    FpGrads g;
    g.lower = grad_batch.rightCols(grad_batch.cols() - upper_dim);
    g.upper = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(trace.upper_rows), upper_dim);
    for (std::size_t i = 0; i < trace.neighbors.size(); ++i)
        for (std::size_t k = 0; k < 3; ++k)
            g.upper.row(trace.neighbors[i][k]) +=
                    trace.weights[i][k] * grad_batch.row(static_cast<Eigen::Index>(i)).head(upper_dim);
    return g;
}

Eigen::MatrixXd input_features(const PointCloud& cloud) {
    Eigen::MatrixXd f(static_cast<Eigen::Index>(cloud.size()), 1);
    if (cloud.has_intensity()) {
        for (std::size_t i = 0; i < cloud.size(); ++i) f(static_cast<Eigen::Index>(i), 0) = cloud.intensity[i];
    } else {
        f.setOnes();
    }
    return f;
}

KeyPointSet encode(const PointCloud& cloud, const EncoderConfig& cfg, const EncoderWeights& weights,
                   EncodeTrace* trace) {
    cfg.validate();
    cloud.validate();
    if (cfg.input_dim != 1) throw InvalidArgumentError("encode: point clouds carry a single input feature");
    if (cloud.size() < cfg.keypoints())
        throw InsufficientPointsError("encoder needs at least " + std::to_string(cfg.keypoints()) +
                                      " points, got " + std::to_string(cloud.size()) +
                                      "; relax the downsampling voxel size");

    std::array<SaOutput, 4> levels;
    std::span<const Point3> coords = cloud.coords;
    Eigen::MatrixXd features = input_features(cloud);
    for (std::size_t l = 0; l < 4; ++l) {
        const std::size_t n = std::min(cfg.sa[l].samples, coords.size());
        levels[l] = sa_layer(coords, features, n, cfg.sa[l].radius, weights.sa[l], cfg.max_neighbors, 0,
                             trace ? &trace->sa[l] : nullptr);
        coords = levels[l].coords;
        features = levels[l].features;
    }

    KeyPointSet out;
    out.features = fp_layer(levels[2].coords, levels[2].features, levels[3].coords, levels[3].features, weights.fp,
                            trace ? &trace->fp : nullptr);
    out.coords = std::move(levels[2].coords);
    return out;
}

void encode_backward(const EncoderWeights& weights, const EncodeTrace& trace, const Eigen::MatrixXd& grad_features,
                     EncoderWeights& grads) {
    const FpGrads fp = fp_layer_backward(weights.fp, trace.fp, grad_features, grads.fp);
    // SA4 consumes SA3's output, and SA3's output also feeds the FP skip path.
    const Eigen::MatrixXd g3 = fp.lower + sa_layer_backward(weights.sa[3], trace.sa[3], fp.upper, grads.sa[3]);
    const Eigen::MatrixXd g2 = sa_layer_backward(weights.sa[2], trace.sa[2], g3, grads.sa[2]);
    const Eigen::MatrixXd g1 = sa_layer_backward(weights.sa[1], trace.sa[1], g2, grads.sa[1]);
    sa_layer_backward(weights.sa[0], trace.sa[0], g1, grads.sa[0]);
}

}  // namespace pcreg
