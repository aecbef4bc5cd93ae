#include "pcreg/matcher.hpp"

#include <cmath>

namespace pcreg {
namespace {

void normalize_rows(const Eigen::MatrixXd& m, Eigen::MatrixXd& unit, Eigen::VectorXd& norms) {
    norms = m.rowwise().norm();
    unit = m;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (norms(i) > 0.0) {
            unit.row(i) /= norms(i);
        } else {
            unit.row(i).setZero();
        }
    }
}

Eigen::MatrixXd normalize_backward(const Eigen::MatrixXd& unit, const Eigen::VectorXd& norms,
                                   const Eigen::MatrixXd& grad_unit) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(unit.rows(), unit.cols());
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
        if (!(norms(i) > 0.0)) continue;
        const double proj = unit.row(i).dot(grad_unit.row(i));
        g.row(i) = (grad_unit.row(i) - proj * unit.row(i)) / norms(i);
    }
    return g;
}

}  // namespace

Eigen::MatrixXd match_probability_map(const Eigen::MatrixXd& source_features, const Eigen::MatrixXd& target_features,
                                      double temperature, MatchTrace* trace) {
    if (!(temperature > 0.0)) throw InvalidArgumentError("match_probability_map: temperature must be positive");
    if (source_features.cols() != target_features.cols())
        throw InvalidArgumentError("match_probability_map: feature widths differ");
    if (!source_features.allFinite() || !target_features.allFinite())
        throw InvalidArgumentError("match_probability_map: non-finite features");

    Eigen::MatrixXd su, tu;
    Eigen::VectorXd sn, tn;
    normalize_rows(source_features, su, sn);
    normalize_rows(target_features, tu, tn);

    Eigen::MatrixXd phi = (su * tu.transpose()) / temperature;
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
        auto row = phi.row(i);
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
    }
    if (trace) {
        trace->source_unit = std::move(su);
        trace->target_unit = std::move(tu);
        trace->source_norm = std::move(sn);
        trace->target_norm = std::move(tn);
        trace->probabilities = phi;
        trace->temperature = temperature;
    }
    return phi;
}

MatchGrads match_probability_map_backward(const MatchTrace& trace, const Eigen::MatrixXd& grad_probabilities) {
    const Eigen::MatrixXd& phi = trace.probabilities;
    // Softmax Jacobian per row: dS = φ ⊙ (dφ - <dφ, φ>).
    Eigen::MatrixXd grad_logits = phi.cwiseProduct(grad_probabilities);
    const Eigen::VectorXd inner = grad_logits.rowwise().sum();
    grad_logits -= phi.cwiseProduct(inner.replicate(1, phi.cols()));
    grad_logits /= trace.temperature;

    const Eigen::MatrixXd grad_su = grad_logits * trace.target_unit;
    const Eigen::MatrixXd grad_tu = grad_logits.transpose() * trace.source_unit;
    return {normalize_backward(trace.source_unit, trace.source_norm, grad_su),
            normalize_backward(trace.target_unit, trace.target_norm, grad_tu)};
}

CorrespondenceSet extract_correspondences(const Eigen::MatrixXd& probabilities, std::span<const Point3> source,
                                          std::span<const Point3> target) {
    if (static_cast<std::size_t>(probabilities.rows()) != source.size() ||
        static_cast<std::size_t>(probabilities.cols()) != target.size())
        throw InvalidArgumentError("extract_correspondences: probability map shape does not match key points");
    CorrespondenceSet out;
    out.source.assign(source.begin(), source.end());
    out.target.reserve(source.size());
    out.matched.reserve(source.size());
    out.probability.reserve(source.size());
    for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < probabilities.cols(); ++j)
            if (probabilities(i, j) > probabilities(i, best)) best = j;
        out.matched.push_back(static_cast<Index>(best));
        out.target.push_back(target[static_cast<std::size_t>(best)]);
        out.probability.push_back(probabilities(i, best));
    }
    return out;
}

}  // namespace pcreg
