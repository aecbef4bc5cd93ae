#include "pcreg/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "pcreg/csv.hpp"
#include "pcreg/io.hpp"
#include "pcreg/parallel.hpp"

namespace pcreg {

CorrespondenceLabels correspondence_labels(std::span<const Point3> source, std::span<const Point3> target,
                                           const RigidTransform& gt, double radius) {
    if (!(radius > 0.0)) throw InvalidArgumentError("correspondence_labels: radius must be positive");
    CorrespondenceLabels labels;
    labels.positive.assign(source.size(), false);
    labels.target.assign(source.size(), 0);
    const double r2 = radius * radius;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const Point3 x = gt.apply(source[i]);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < target.size(); ++j) {
            const double d2 = (target[j] - x).squaredNorm();
            if (d2 < best) {
                best = d2;
                labels.target[i] = static_cast<Index>(j);
            }
        }
        if (best <= r2) {
            labels.positive[i] = true;
            ++labels.count;
        }
    }
    return labels;
}

namespace {

void check_labels(const Eigen::MatrixXd& phi, const CorrespondenceLabels& labels) {
    if (labels.positive.size() != static_cast<std::size_t>(phi.rows()) || labels.target.size() != labels.positive.size())
        throw InvalidArgumentError("matching_loss: labels do not match the probability map rows");
    if (labels.count == 0) throw UnusablePairError("training pair has no positive correspondence labels");
    for (std::size_t i = 0; i < labels.positive.size(); ++i)
        if (labels.positive[i] && labels.target[i] >= static_cast<std::size_t>(phi.cols()))
            throw InvalidArgumentError("matching_loss: label index out of range");
}

double negative_weight(const Eigen::MatrixXd& phi, double lambda) {
    return phi.cols() > 1 ? lambda / static_cast<double>(phi.cols() - 1) : 0.0;
}

}  // namespace

double matching_loss(const Eigen::MatrixXd& probabilities, const CorrespondenceLabels& labels, double lambda) {
    check_labels(probabilities, labels);
    const double neg = negative_weight(probabilities, lambda);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.positive.size(); ++i) {
        if (!labels.positive[i]) continue;
        const auto r = static_cast<Eigen::Index>(i);
        const auto j = static_cast<Eigen::Index>(labels.target[i]);
        const double hit = probabilities(r, j);
        total += -hit + neg * (probabilities.row(r).sum() - hit);
    }
    return total / static_cast<double>(labels.count);
}

Eigen::MatrixXd matching_loss_gradient(const Eigen::MatrixXd& probabilities, const CorrespondenceLabels& labels,
                                       double lambda) {
    check_labels(probabilities, labels);
    const double scale = 1.0 / static_cast<double>(labels.count);
    const double neg = negative_weight(probabilities, lambda) * scale;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(probabilities.rows(), probabilities.cols());
    for (std::size_t i = 0; i < labels.positive.size(); ++i) {
        if (!labels.positive[i]) continue;
        const auto r = static_cast<Eigen::Index>(i);
        g.row(r).setConstant(neg);
        g(r, static_cast<Eigen::Index>(labels.target[i])) = -scale;
    }
    return g;
}

PairLoss pair_loss(const Model& model, const PointCloud& source, const PointCloud& target, const RigidTransform& gt,
                   const LossConfig& cfg, Model* grads) {
    PairTrace trace;
    const PairFeatures f = forward_pair(model, source, target, cfg.temperature, grads ? &trace : nullptr);
    PairLoss out;
    out.labels = correspondence_labels(f.source.coords, f.target.coords, gt, cfg.label_radius);
    out.loss = matching_loss(f.probabilities, out.labels, cfg.lambda);
    if (!grads) return out;

    auto& ga = grads->attention;
    const auto& w = model.attention;
    const MatchGrads gm =
            match_probability_map_backward(trace.match, matching_loss_gradient(f.probabilities, out.labels, cfg.lambda));

    // Cross layer: each side's update reads both sides' self-attention outputs.
    const CgconvGrads cs = cgconv_backward(w.cross_gate, w.cross_core, trace.cross.source, gm.source, ga.cross_gate,
                                           ga.cross_core);
    const CgconvGrads ct = cgconv_backward(w.cross_gate, w.cross_core, trace.cross.target, gm.target, ga.cross_gate,
                                           ga.cross_core);
    const Eigen::MatrixXd g_self_source = cs.features + ct.neighbor_features;
    const Eigen::MatrixXd g_self_target = ct.features + cs.neighbor_features;

    const CgconvGrads ss =
            cgconv_backward(w.self_gate, w.self_core, trace.self_source, g_self_source, ga.self_gate, ga.self_core);
    const CgconvGrads st =
            cgconv_backward(w.self_gate, w.self_core, trace.self_target, g_self_target, ga.self_gate, ga.self_core);

    encode_backward(model.encoder, trace.encode_source, ss.features + ss.neighbor_features, grads->encoder);
    encode_backward(model.encoder, trace.encode_target, st.features + st.neighbor_features, grads->encoder);
    return out;
}

ScenePair augment(const ScenePair& pair, double source_yaw, double target_yaw) {
    const RigidTransform rs = RigidTransform::from_yaw(source_yaw);
    const RigidTransform rt = RigidTransform::from_yaw(target_yaw);
    ScenePair out = pair;
    out.source = apply_transform(pair.source, rs);
    out.target = apply_transform(pair.target, rt);
    out.ground_truth = compose(rt, compose(pair.ground_truth, invert(rs)));
    out.source_pose = compose(pair.source_pose, invert(rs));
    out.target_pose = compose(pair.target_pose, invert(rt));
    return out;
}

ScenePair augment(const ScenePair& pair, Rng& rng) {
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double b = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return augment(pair, a, b);
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgumentError("train.learning_rate must be positive");
    if (lr_halving_period == 0) throw InvalidArgumentError("train.lr_halving_period must be positive");
    if (epochs == 0) throw InvalidArgumentError("train.epochs must be positive");
    if (batch_size == 0) throw InvalidArgumentError("train.batch_size must be positive");
    if (!(lambda > 0.0)) throw InvalidArgumentError("train.lambda must be positive");
    if (!(label_radius > 0.0)) throw InvalidArgumentError("train.label_radius must be positive");
    if (!(temperature > 0.0)) throw InvalidArgumentError("train.temperature must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw InvalidArgumentError("train.beta1 and train.beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw InvalidArgumentError("train.epsilon must be positive");
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
    const std::size_t halvings = epoch == 0 ? 0 : (epoch - 1) / lr_halving_period;
    return std::ldexp(learning_rate, -static_cast<int>(halvings));
}

namespace {

ScenePair downsampled(const ScenePair& pair, double voxel) {
    if (voxel <= 0.0) return pair;
    ScenePair out = pair;
    out.source = voxel_downsample(pair.source, voxel);
    out.target = voxel_downsample(pair.target, voxel);
    return out;
}

LossConfig loss_config(const TrainConfig& cfg) { return {cfg.lambda, cfg.temperature, cfg.label_radius}; }

class Adam {
public:
    Adam(Model& model, const TrainConfig& cfg) : cfg_(cfg) {
        for (const auto& p : parameters(model)) {
            m_.emplace_back(Eigen::VectorXd::Zero(p.size()));
            v_.emplace_back(Eigen::VectorXd::Zero(p.size()));
        }
    }

    void step(Model& model, Model& grads, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        auto params = parameters(model);
        auto gparams = parameters(grads);
        for (std::size_t k = 0; k < params.size(); ++k) {
            Eigen::Map<Eigen::VectorXd> w(params[k].data, params[k].size());
            Eigen::Map<Eigen::VectorXd> g(gparams[k].data, gparams[k].size());
            m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
            v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g.cwiseAbs2();
            w.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + cfg_.epsilon);
        }
    }

private:
    const TrainConfig& cfg_;
    std::vector<Eigen::VectorXd> m_, v_;
    std::size_t t_ = 0;
};

void add_into(Model& acc, Model& g, double scale) {
    auto a = parameters(acc);
    auto b = parameters(g);
    for (std::size_t k = 0; k < a.size(); ++k) {
        Eigen::Map<Eigen::VectorXd> x(a[k].data, a[k].size());
        Eigen::Map<Eigen::VectorXd> y(b[k].data, b[k].size());
        x += scale * y;
    }
}

struct Evaluated {
    bool usable = false;
    double loss = 0.0;
};

}  // namespace

double mean_loss(const Model& model, const std::vector<ScenePair>& pairs, const LossConfig& cfg, std::size_t threads) {
    std::vector<Evaluated> results(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
        try {
            results[i] = {true, pair_loss(model, pairs[i].source, pairs[i].target, pairs[i].ground_truth, cfg).loss};
        } catch (const UnusablePairError&) {
            results[i] = {};
        }
    });
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& r : results)
        if (r.usable) {
            sum += r.loss;
            ++used;
        }
    if (used == 0) throw UnusablePairError("no pair in the set has positive correspondence labels");
    return sum / static_cast<double>(used);
}

TrainResult train(const Model& initial, const std::vector<ScenePair>& train_set, const std::vector<ScenePair>& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.empty()) throw InvalidArgumentError("train: empty training split");
    if (val_set.empty()) throw InvalidArgumentError("train: empty validation split");

    std::vector<ScenePair> train_pairs(train_set.size()), val_pairs(val_set.size());
    parallel_for(train_set.size(), cfg.threads,
                 [&](std::size_t i) { train_pairs[i] = downsampled(train_set[i], cfg.voxel_size); });
    parallel_for(val_set.size(), cfg.threads,
                 [&](std::size_t i) { val_pairs[i] = downsampled(val_set[i], cfg.voxel_size); });

    const LossConfig lc = loss_config(cfg);
    Model model = initial;
    Adam adam(model, cfg);
    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(train_pairs.size());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate_at(epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(derive_seed(cfg.seed, epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        double loss_sum = 0.0;
        std::size_t used = 0, skipped = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const std::size_t n = end - begin;
            std::vector<Model> grads(n);
            std::vector<Evaluated> results(n);
            parallel_for(n, cfg.threads, [&](std::size_t b) {
                const std::size_t idx = order[begin + b];
                grads[b] = model.zeros_like();
                Rng rng(derive_seed(derive_seed(cfg.seed, 1'000'000 + epoch), idx));
                const ScenePair pair = cfg.augment ? augment(train_pairs[idx], rng) : train_pairs[idx];
                try {
                    results[b] = {true, pair_loss(model, pair.source, pair.target, pair.ground_truth, lc, &grads[b]).loss};
                } catch (const UnusablePairError&) {
                    results[b] = {};
                }
            });
            std::size_t batch_used = 0;
            for (const auto& r : results) batch_used += r.usable ? 1 : 0;
            skipped += n - batch_used;
            if (batch_used == 0) continue;
            Model total = model.zeros_like();
            for (std::size_t b = 0; b < n; ++b) {
                if (!results[b].usable) continue;
                loss_sum += results[b].loss;
                add_into(total, grads[b], 1.0 / static_cast<double>(batch_used));
            }
            used += batch_used;
            adam.step(model, total, lr);
        }
        if (used == 0) throw UnusablePairError("train: no training pair has positive correspondence labels");

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(used);
        rec.val_loss = mean_loss(model, val_pairs, lc, cfg.threads);
        rec.learning_rate = lr;
        rec.skipped = skipped;
        result.log.push_back(rec);
        if (rec.val_loss < result.best_val_loss) {
            result.best_val_loss = rec.val_loss;
            result.best_epoch = epoch;
            result.model = model;
        }
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    csv::write_row(out, {"epoch", "train_loss", "val_loss", "learning_rate"});
    for (const auto& r : log)
        csv::write_row(out, {std::to_string(r.epoch), csv::format(r.train_loss), csv::format(r.val_loss),
                             csv::format(r.learning_rate)});
    if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace pcreg
