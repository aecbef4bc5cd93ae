#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "pcreg/model.hpp"
#include "pcreg/pipeline.hpp"
#include "pcreg/scenes.hpp"

namespace pcreg {

inline constexpr double kDefaultLabelRadius = 1.6;
inline constexpr double kDefaultLossScale = 10.0;

/// A training pair without a single positive label.
class UnusablePairError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CorrespondenceLabels {
    std::vector<bool> positive;  // δ per source key point
    IndexList target;            // ĵ per source key point, meaningful where positive
    std::size_t count = 0;       // N_c
};

/// δ_i is set when the nearest target key point to gt(x_i) lies within
/// `radius` (inclusive); ĵ_i is that nearest point, lowest index on ties.
CorrespondenceLabels correspondence_labels(std::span<const Point3> source, std::span<const Point3> target,
                                           const RigidTransform& gt, double radius = kDefaultLabelRadius);

/// (1/N_c) Σ_i δ_i [−φ_iĵ + λ/(N−1) Σ_{j≠ĵ} φ_ij]. Throws UnusablePairError when N_c = 0.
double matching_loss(const Eigen::MatrixXd& probabilities, const CorrespondenceLabels& labels,
                     double lambda = kDefaultLossScale);

/// d(matching_loss)/dφ.
Eigen::MatrixXd matching_loss_gradient(const Eigen::MatrixXd& probabilities, const CorrespondenceLabels& labels,
                                       double lambda = kDefaultLossScale);

struct LossConfig {
    double lambda = kDefaultLossScale;
    double temperature = kDefaultTemperature;
    double label_radius = kDefaultLabelRadius;
};

struct PairLoss {
    double loss = 0.0;
    CorrespondenceLabels labels;
};

/// Loss of one (already downsampled) pair; labels come from the key point
/// coordinates and `gt`. When `grads` is given (shaped like the model) the
/// exact gradient of the loss is accumulated into it.
PairLoss pair_loss(const Model& model, const PointCloud& source, const PointCloud& target, const RigidTransform& gt,
                   const LossConfig& cfg, Model* grads = nullptr);

/// Rotates source and target about the vertical axis by the given angles
/// (radians) and adjusts poses and ground truth so alignment still holds.
ScenePair augment(const ScenePair& pair, double source_yaw, double target_yaw);
/// Independent uniform angles in [0, 2π).
ScenePair augment(const ScenePair& pair, Rng& rng);

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t lr_halving_period = 5;  // epochs
    std::size_t epochs = 20;
    std::size_t batch_size = 6;
    double lambda = kDefaultLossScale;
    double label_radius = kDefaultLabelRadius;
    double temperature = kDefaultTemperature;
    double voxel_size = kDefaultVoxelSize;  // <= 0 keeps the clouds as given
    bool augment = true;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-4;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const;
    double learning_rate_at(std::size_t epoch) const;  // 1-based epoch
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
    std::size_t skipped = 0;  // pairs without positive labels
};

struct TrainResult {
    Model model;              // lowest validation loss
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on mini-batches of pairs (per-pair losses averaged), learning rate
/// halved every lr_halving_period epochs, validation after each epoch.
/// Deterministic for a fixed seed regardless of thread count.
TrainResult train(const Model& initial, const std::vector<ScenePair>& train_set, const std::vector<ScenePair>& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean loss over usable pairs (no augmentation). Throws UnusablePairError if none is usable.
double mean_loss(const Model& model, const std::vector<ScenePair>& pairs, const LossConfig& cfg,
                 std::size_t threads = 1);

/// Header epoch,train_loss,val_loss,learning_rate then one row per record.
void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log);

}  // namespace pcreg
