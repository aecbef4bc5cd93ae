#pragma once

#include <vector>

#include <Eigen/Core>

#include "pcreg/geometry.hpp"
#include "pcreg/spatial.hpp"

namespace pcreg {

inline constexpr double kDefaultTemperature = 1e-2;

struct MatchTrace {
    Eigen::MatrixXd source_unit;  // row-normalized features
    Eigen::MatrixXd target_unit;
    Eigen::VectorXd source_norm;
    Eigen::VectorXd target_norm;
    Eigen::MatrixXd probabilities;
    double temperature = 0.0;
};

/// Row-stochastic matching map: softmax over rows of (U_X U_Yᵀ / T) where U
/// are the features scaled to unit norm (zero rows stay zero).
/// Throws InvalidArgumentError when temperature <= 0.
Eigen::MatrixXd match_probability_map(const Eigen::MatrixXd& source_features, const Eigen::MatrixXd& target_features,
                                      double temperature, MatchTrace* trace = nullptr);

struct MatchGrads {
    Eigen::MatrixXd source;
    Eigen::MatrixXd target;
};

/// Gradients of the loss w.r.t. the raw (unnormalized) feature rows.
MatchGrads match_probability_map_backward(const MatchTrace& trace, const Eigen::MatrixXd& grad_probabilities);

/// Source key points paired with their most probable target key point.
struct CorrespondenceSet {
    Points3 source;
    Points3 target;
    IndexList matched;                 // target index per source row
    std::vector<double> probability;  // peak probability per row

    std::size_t size() const { return source.size(); }
};

/// Row-wise argmax, ties to the lowest column.
CorrespondenceSet extract_correspondences(const Eigen::MatrixXd& probabilities, std::span<const Point3> source,
                                          std::span<const Point3> target);

}  // namespace pcreg
