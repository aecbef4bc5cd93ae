#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <gtest/gtest.h>

#include "pcreg/matcher.hpp"
#include "pcreg/training.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace pcreg;
using pcreg::testing::random_cloud;
using pcreg::testing::random_matrix;
using pcreg::testing::random_points;
using pcreg::testing::random_transform;

namespace {

CorrespondenceLabels labels_from(const std::vector<int>& targets) {
    CorrespondenceLabels l;
    for (int t : targets) {
        l.positive.push_back(t >= 0);
        l.target.push_back(t >= 0 ? static_cast<Index>(t) : 0);
        l.count += t >= 0 ? 1 : 0;
    }
    return l;
}

Eigen::MatrixXd random_stochastic(Rng& rng, Eigen::Index n, Eigen::Index m) {
    Eigen::MatrixXd p = random_matrix(rng, n, m).array() + 1.0;
    for (Eigen::Index i = 0; i < n; ++i) p.row(i) /= p.row(i).sum();
    return p;
}

std::vector<double> flat_gradient(const Model& grads) {
    std::vector<double> out;
    for (const auto& p : parameters(const_cast<Model&>(grads)))
        for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back(p.data[i]);
    return out;
}

ScenePair toy_pair(Rng& rng, std::size_t index) {
    ScenePair p;
    p.scene_id = "toy_" + std::to_string(index);
    p.source = random_cloud(rng, 150, 3.0);
    p.ground_truth = RigidTransform::from_yaw(rng.uniform(-0.5, 0.5), Point3(rng.uniform(-1, 1), rng.uniform(-1, 1), 0));
    p.target = apply_transform(p.source, p.ground_truth);
    for (auto& q : p.target.coords) q += 0.01 * Point3(rng.normal(), rng.normal(), rng.normal());
    p.target_pose = invert(p.ground_truth);
    p.overlap = 1.0;
    return p;
}

}  // namespace

TEST(Labels, AlignedCopyIsIdentity) {
    Rng rng(1);
    const auto x = random_points(rng, 30, 10.0);
    const auto gt = random_transform(rng, 5.0);
    const auto y = apply_transform(x, gt);
    const auto l = correspondence_labels(x, y, gt, 1.6);
    EXPECT_EQ(l.count, 30u);
    for (Index i = 0; i < 30; ++i) {
        EXPECT_TRUE(l.positive[i]);
        EXPECT_EQ(l.target[i], i);
    }
}

TEST(Labels, FarApartHasNoPositives) {
    Rng rng(2);
    const auto x = random_points(rng, 30, 10.0);
    auto y = random_points(rng, 30, 10.0);
    for (auto& p : y) p.x() += 100.0;
    const auto l = correspondence_labels(x, y, RigidTransform::identity(), 1.6);
    EXPECT_EQ(l.count, 0u);
    EXPECT_THROW(matching_loss(Eigen::MatrixXd::Constant(30, 30, 1.0 / 30), l), UnusablePairError);
}

TEST(Labels, HalfOverlapMarksTheInRangeHalf) {
    // Source on a line; the target keeps the first half (shifted by 1.0 m) and
    // moves the other half 50 m away.
    Points3 x, y;
    for (int i = 0; i < 20; ++i) x.emplace_back(3.0 * i, 0, 0);
    const auto gt = RigidTransform::from_yaw(0.0, Point3(0, 0, 0));
    for (int i = 0; i < 20; ++i) y.emplace_back(3.0 * i + (i < 10 ? 1.0 : 0.0), i < 10 ? 0.0 : 50.0, 0);
    const auto l = correspondence_labels(x, y, gt, 1.6);
    EXPECT_EQ(l.count, 10u);
    for (Index i = 0; i < 20; ++i) {
        EXPECT_EQ(l.positive[i], i < 10);
        if (i < 10) EXPECT_EQ(l.target[i], i);
    }
}

TEST(Labels, RadiusIsInclusiveAndTiesPickLowest) {
    const Points3 x{Point3(0, 0, 0)};
    const Points3 y{Point3(1.6, 0, 0), Point3(-1.6, 0, 0)};
    const auto l = correspondence_labels(x, y, RigidTransform::identity(), 1.6);
    EXPECT_TRUE(l.positive[0]);
    EXPECT_EQ(l.target[0], 0u);
    EXPECT_EQ(correspondence_labels(x, y, RigidTransform::identity(), 1.5).count, 0u);
}

TEST(MatchingLoss, SpotValues) {
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(1, 5);
    onehot(0, 2) = 1.0;
    EXPECT_EQ(matching_loss(onehot, labels_from({2}), 10.0), -1.0);
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(1, 2, 0.5);
    EXPECT_EQ(matching_loss(uniform, labels_from({0}), 10.0), 4.5);
}

TEST(MatchingLoss, TermByTermOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = random_stochastic(rng, 12, 9);
        std::vector<int> t;
        for (int i = 0; i < 12; ++i) t.push_back(rng.uniform() < 0.3 ? -1 : static_cast<int>(rng.below(9)));
        t[0] = 4;
        const double lambda = rng.uniform(0.5, 20.0);
        double sum = 0.0;
        int nc = 0;
        for (int i = 0; i < 12; ++i) {
            if (t[i] < 0) continue;
            ++nc;
            sum -= p(i, t[i]);
            for (int j = 0; j < 9; ++j)
                if (j != t[i]) sum += lambda / 8.0 * p(i, j);
        }
        EXPECT_NEAR(matching_loss(p, labels_from(t), lambda), sum / nc, 1e-12);
    }
}

TEST(MatchingLoss, GradientIsExactForLinearLoss) {
    Rng rng(4);
    const auto p = random_stochastic(rng, 6, 7);
    const auto l = labels_from({1, -1, 3, 0, 6, -1});
    const auto g = matching_loss_gradient(p, l, 10.0);
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index j = 0; j < 7; ++j) {
            Eigen::MatrixXd q = p;
            q(i, j) += 0.25;
            EXPECT_NEAR(g(i, j), (matching_loss(q, l, 10.0) - matching_loss(p, l, 10.0)) / 0.25, 1e-12);
        }
}

TEST(MatchingLoss, ConsistentPermutationInvariance) {
    Rng rng(5);
    const auto p = random_stochastic(rng, 8, 8);
    const std::vector<int> t{0, 3, -1, 7, 2, 2, 5, -1};
    std::vector<int> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::rotate(perm.begin(), perm.begin() + 3, perm.end());
    std::swap(perm[1], perm[6]);
    // Column c of the permuted map is column perm[c] of the original.
    std::vector<int> inverse(8);
    for (int c = 0; c < 8; ++c) inverse[perm[c]] = c;
    Eigen::MatrixXd pp(8, 8);
    for (int c = 0; c < 8; ++c) pp.col(c) = p.col(perm[c]);
    std::vector<int> tp;
    for (int v : t) tp.push_back(v < 0 ? -1 : inverse[v]);
    EXPECT_NEAR(matching_loss(pp, labels_from(tp)), matching_loss(p, labels_from(t)), 1e-14);
}

TEST(MatchingLoss, MovingMassToTargetDecreasesLoss) {
    Rng rng(6);
    const auto p = random_stochastic(rng, 5, 6);
    const auto l = labels_from({2, 0, 5, -1, 1});
    const double base = matching_loss(p, l);
    for (Eigen::Index i : {0, 1, 2, 4})
        for (Eigen::Index j = 0; j < 6; ++j) {
            const auto hat = static_cast<Eigen::Index>(l.target[static_cast<std::size_t>(i)]);
            if (j == hat) continue;
            Eigen::MatrixXd q = p;
            const double m = 0.5 * q(i, j);
            q(i, j) -= m;
            q(i, hat) += m;
            EXPECT_LT(matching_loss(q, l), base);
        }
}

TEST(MatchingLoss, SingleColumnHasNoNegativeTerm) {
    const Eigen::MatrixXd p = Eigen::MatrixXd::Ones(3, 1);
    EXPECT_EQ(matching_loss(p, labels_from({0, 0, -1})), -1.0);
}

TEST(PairLossGradient, MatchesFiniteDifferencesOnTinyInstances) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto inst = pcreg::testing::tiny_instance(seed);
        const auto report = pcreg::testing::gradient_check(inst, LossConfig{});
        EXPECT_LT(report.max_relative_error, 1e-4) << "seed " << seed << " worst " << report.worst_parameter;
        EXPECT_GT(report.components, 100u);
    }
}

TEST(PairLossGradient, TinyInstanceLabelsAreAllPositive) {
    const auto inst = pcreg::testing::tiny_instance(1);
    const auto out = pair_loss(inst.model, inst.source, inst.target, inst.gt, LossConfig{});
    EXPECT_EQ(out.labels.count, 16u);
}

TEST(PairLossGradient, VanishesAtSymmetricPoint) {
    // Zero weights except a positive last FP bias: every key point on both
    // sides carries the same feature, so φ is uniform and the gradient flowing
    // into each feature row is parallel to that row.
    Rng rng(7);
    Model m = Model::zeros(ModelConfig::tiny());
    m.encoder.fp.layers.back().bias.setConstant(0.7);
    const auto cloud = random_cloud(rng, 40, 1.5);
    Model grads = m.zeros_like();
    const auto out = pair_loss(m, cloud, cloud, RigidTransform::identity(), LossConfig{}, &grads);
    EXPECT_EQ(out.labels.count, 16u);
    double norm2 = 0.0;
    for (double g : flat_gradient(grads)) norm2 += g * g;
    EXPECT_LT(std::sqrt(norm2), 1e-8);
}

TEST(PairLossGradient, LinearInLambda) {
    const auto inst = pcreg::testing::tiny_instance(2);
    auto grad_at = [&](double lambda) {
        LossConfig cfg;
        cfg.lambda = lambda;
        Model g = inst.model.zeros_like();
        pair_loss(inst.model, inst.source, inst.target, inst.gt, cfg, &g);
        return flat_gradient(g);
    };
    const auto g0 = grad_at(0.0), g1 = grad_at(10.0), g2 = grad_at(20.0);
    double scale = 0.0;
    for (double v : g1) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < g0.size(); ++i) EXPECT_NEAR(g2[i] - g1[i], g1[i] - g0[i], 1e-10 * (1.0 + scale));
}

TEST(Augment, ZeroAnglesLeavePairUnchanged) {
    Rng rng(8);
    const auto pair = toy_pair(rng, 0);
    const auto a = augment(pair, 0.0, 0.0);
    EXPECT_EQ(a.source.coords, pair.source.coords);
    EXPECT_EQ(a.target.coords, pair.target.coords);
    EXPECT_LT((a.ground_truth.matrix() - pair.ground_truth.matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Augment, PreservesOverlapAndAlignment) {
    Rng rng(9);
    ScenePair pair;
    pair.source = random_cloud(rng, 300, 5.0);
    pair.ground_truth = random_transform(rng, 3.0);
    pair.target = apply_transform(random_cloud(rng, 100, 5.0), pair.ground_truth);
    for (std::size_t i = 0; i < 150; ++i) pair.target.coords.push_back(pair.ground_truth.apply(pair.source.coords[i]));
    pair.target.intensity.resize(pair.target.coords.size(), 0.5);
    const double before = overlap_ratio(pair.source, pair.target, pair.ground_truth, kOverlapGamma);
    for (int t = 0; t < 5; ++t) {
        const auto a = augment(pair, rng);
        EXPECT_NEAR(overlap_ratio(a.source, a.target, a.ground_truth, kOverlapGamma), before, 1e-9);
        EXPECT_TRUE(pcreg::testing::is_rotation(a.ground_truth.rotation, 1e-12));
        for (std::size_t i = 0; i < 150; ++i)
            EXPECT_LT((a.ground_truth.apply(a.source.coords[i]) - a.target.coords[100 + i]).norm(), 1e-12);
    }
}

TEST(Augment, KeepsPosesConsistent) {
    Rng rng(10);
    ScenePair pair = toy_pair(rng, 1);
    pair.source_pose = random_transform(rng, 20.0);
    pair.target_pose = compose(pair.source_pose, invert(pair.ground_truth));
    const auto a = augment(pair, 1.1, -2.3);
    const auto implied = compose(invert(a.target_pose), a.source_pose);
    EXPECT_LT((implied.matrix() - a.ground_truth.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TrainConfig, LearningRateSchedule) {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.lr_halving_period = 5;
    EXPECT_EQ(cfg.learning_rate_at(1), 0.1);
    EXPECT_EQ(cfg.learning_rate_at(5), 0.1);
    EXPECT_EQ(cfg.learning_rate_at(6), 0.05);
    EXPECT_EQ(cfg.learning_rate_at(16), 0.0125);
}

TEST(TrainConfig, Validation) {
    TrainConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), InvalidArgumentError);
    cfg = TrainConfig{};
    cfg.label_radius = -1.0;
    EXPECT_THROW(cfg.validate(), InvalidArgumentError);
}

class ToyTraining : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        Rng rng(11);
        for (std::size_t i = 0; i < 20; ++i) train_set_.push_back(toy_pair(rng, i));
        for (std::size_t i = 0; i < 4; ++i) val_set_.push_back(toy_pair(rng, 100 + i));
        cfg_.voxel_size = 0.0;
        cfg_.epochs = 20;
        cfg_.batch_size = 2;
        cfg_.label_radius = 0.3;
        cfg_.seed = 5;
        result_ = train(Model::initialize(ModelConfig::tiny(), 3), train_set_, val_set_, cfg_);
    }

    static std::vector<ScenePair> train_set_, val_set_;
    static TrainConfig cfg_;
    static TrainResult result_;
};

std::vector<ScenePair> ToyTraining::train_set_, ToyTraining::val_set_;
TrainConfig ToyTraining::cfg_;
TrainResult ToyTraining::result_;

TEST_F(ToyTraining, LossTrendsDownOverFiveEpochWindows) {
    ASSERT_EQ(result_.log.size(), 20u);
    std::vector<double> window(4, 0.0);
    for (const auto& r : result_.log) window[(r.epoch - 1) / 5] += r.train_loss / 5.0;
    for (std::size_t w = 1; w < 4; ++w) EXPECT_LT(window[w], window[w - 1]) << "window " << w;
}

TEST_F(ToyTraining, BestModelHasLowestValidationLoss) {
    for (const auto& r : result_.log) EXPECT_LE(result_.best_val_loss, r.val_loss);
    LossConfig lc{cfg_.lambda, cfg_.temperature, cfg_.label_radius};
    EXPECT_NEAR(mean_loss(result_.model, val_set_, lc), result_.best_val_loss, 1e-12);
}

TEST_F(ToyTraining, FollowsTheSchedule) {
    for (const auto& r : result_.log) {
        EXPECT_EQ(r.learning_rate, cfg_.learning_rate_at(r.epoch));
        EXPECT_EQ(r.skipped, 0u);
    }
}

TEST_F(ToyTraining, FixedSeedIsBitIdentical) {
    auto cfg = cfg_;
    cfg.epochs = 3;
    cfg.threads = 2;
    const auto again = train(Model::initialize(ModelConfig::tiny(), 3), train_set_, val_set_, cfg);
    ASSERT_EQ(again.log.size(), 3u);
    for (std::size_t e = 0; e < 3; ++e) {
        EXPECT_EQ(again.log[e].train_loss, result_.log[e].train_loss);
        EXPECT_EQ(again.log[e].val_loss, result_.log[e].val_loss);
    }
}

TEST(Train, AllPairsUnusableThrows) {
    Rng rng(12);
    ScenePair p = toy_pair(rng, 0);
    for (auto& q : p.target.coords) q.x() += 500.0;
    TrainConfig cfg;
    cfg.voxel_size = 0.0;
    cfg.epochs = 1;
    EXPECT_THROW(train(Model::initialize(ModelConfig::tiny(), 1), {p}, {p}, cfg), UnusablePairError);
}

TEST(TrainingLog, CsvLayout) {
    const auto path = std::filesystem::temp_directory_path() / "pcreg_training_log.csv";
    write_training_log(path, {EpochRecord{1, 0.5, 0.25, 0.01, 0}, EpochRecord{2, -0.5, -0.125, 0.01, 1}});
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    header.pop_back();  // CRLF rows
    EXPECT_EQ(header, "epoch,train_loss,val_loss,learning_rate");
    EXPECT_EQ(row.substr(0, 2), "1,");
}
