#include "pcreg/robust.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include "pcreg/procrustes.hpp"
#include "pcreg/random.hpp"

namespace pcreg {

void RansacConfig::validate() const {
    if (!(inlier_threshold > 0.0)) throw InvalidArgumentError("ransac: inlier threshold must be positive");
    if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgumentError("ransac: confidence must be in (0, 1)");
    if (max_iterations < 1) throw InvalidArgumentError("ransac: max_iterations must be at least 1");
}

InlierSet count_inliers(const CorrespondenceSet& corr, const RigidTransform& t, double threshold) {
    if (!(threshold > 0.0)) throw InvalidArgumentError("count_inliers: threshold must be positive");
    InlierSet out;
    const double t2 = threshold * threshold;
    for (std::size_t i = 0; i < corr.size(); ++i)
        if ((t.apply(corr.source[i]) - corr.target[i]).squaredNorm() <= t2) out.indices.push_back(static_cast<Index>(i));
    out.count = out.indices.size();
    return out;
}

std::size_t adaptive_iterations(double inlier_ratio, double confidence, std::size_t sample_size,
                                std::size_t max_iterations) {
    if (!(confidence > 0.0 && confidence < 1.0))
        throw InvalidArgumentError("adaptive_iterations: confidence must be in (0, 1)");
    if (max_iterations < 1) max_iterations = 1;
    if (!(inlier_ratio > 0.0)) return max_iterations;
    if (inlier_ratio >= 1.0) return 1;
    const double all_inlier = std::pow(inlier_ratio, static_cast<double>(sample_size));
    const double denom = std::log1p(-all_inlier);
    if (!(denom < 0.0)) return max_iterations;
    const double n = std::ceil(std::log1p(-confidence) / denom);
    if (!(n < static_cast<double>(max_iterations))) return max_iterations;
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

RegistrationResult ransac_register(const CorrespondenceSet& corr, const RansacConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = corr.size();
    if (n < 3) throw InsufficientPointsError("ransac_register: at least 3 correspondences are required");
    const bool have_matches = corr.matched.size() == n;

    Rng rng(cfg.seed);
    RegistrationResult best;
    std::size_t bound = cfg.max_iterations;
    std::size_t valid = 0;
    std::size_t iteration = 0;
    std::array<Point3, 3> xs, ys;
    while (iteration < cfg.max_iterations && valid < bound) {
        ++iteration;
        const auto a = static_cast<std::size_t>(rng.below(n));
        std::size_t b, c;
        do b = static_cast<std::size_t>(rng.below(n)); while (b == a);
        do c = static_cast<std::size_t>(rng.below(n)); while (c == a || c == b);
        if (have_matches && (corr.matched[a] == corr.matched[b] || corr.matched[a] == corr.matched[c] ||
                             corr.matched[b] == corr.matched[c]))
            continue;
        xs = {corr.source[a], corr.source[b], corr.source[c]};
        ys = {corr.target[a], corr.target[b], corr.target[c]};
        RigidTransform hypothesis;
        try {
            hypothesis = fit_rigid(xs, ys);
        } catch (const DegenerateConfigurationError&) {
            continue;
        }
        ++valid;
        auto inliers = count_inliers(corr, hypothesis, cfg.inlier_threshold);
        if (inliers.count > best.inlier_count) {
            best.transform = hypothesis;
            best.inlier_count = inliers.count;
            best.inlier_indices = std::move(inliers.indices);
            bound = adaptive_iterations(static_cast<double>(best.inlier_count) / static_cast<double>(n),
                                        cfg.confidence, 3, cfg.max_iterations);
        }
    }
    best.iterations_run = iteration;
    if (best.inlier_count < 3)
        throw RegistrationFailure("ransac_register: no hypothesis with at least 3 inliers after " +
                                  std::to_string(iteration) + " iterations");

    Points3 xin, yin;
    for (Index i : best.inlier_indices) {
        xin.push_back(corr.source[i]);
        yin.push_back(corr.target[i]);
    }
    try {
        const RigidTransform refit = fit_rigid(xin, yin);
        auto inliers = count_inliers(corr, refit, cfg.inlier_threshold);
        if (inliers.count >= best.inlier_count) {
            best.transform = refit;
            best.inlier_count = inliers.count;
            best.inlier_indices = std::move(inliers.indices);
        }
    } catch (const DegenerateConfigurationError&) {
        // Collinear inlier set: keep the minimal-sample hypothesis.
    }
    best.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return best;
}

const char* to_string(IcpStatus status) {
    switch (status) {
        case IcpStatus::kConverged: return "converged";
        case IcpStatus::kMaxIterations: return "max_iterations";
        case IcpStatus::kNoCorrespondences: return "no_correspondences";
        case IcpStatus::kDegenerate: return "degenerate";
    }
    return "unknown";
}

namespace {

struct Pairing {
    Points3 source;
    Points3 target;
    double cost = 0.0;
};

Pairing pair_points(const PointCloud& source, const PointCloud& target, const GridIndex& index,
                    const RigidTransform& t, double max_distance) {
    Pairing p;
    const double cap = max_distance * max_distance;
    double sum = 0.0;
    for (const auto& x : source.coords) {
        const Point3 q = t.apply(x);
        const auto j = index.nearest(q, max_distance);
        if (j < 0) {
            sum += cap;
            continue;
        }
        const Point3& y = target.coords[static_cast<std::size_t>(j)];
        sum += std::min((y - q).squaredNorm(), cap);
        p.source.push_back(x);
        p.target.push_back(y);
    }
    p.cost = sum / static_cast<double>(source.size());
    return p;
}

}  // namespace

double icp_residual(const PointCloud& source, const PointCloud& target, const RigidTransform& t,
                    double max_correspondence_distance) {
    if (source.empty() || target.empty()) throw InvalidArgumentError("icp_residual: empty cloud");
    const GridIndex index(target.coords, max_correspondence_distance);
    return pair_points(source, target, index, t, max_correspondence_distance).cost;
}

IcpResult icp_refine(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                     const IcpConfig& cfg) {
    if (source.empty() || target.empty()) throw InvalidArgumentError("icp_refine: empty cloud");
    if (!(cfg.max_correspondence_distance > 0.0))
        throw InvalidArgumentError("icp_refine: max correspondence distance must be positive");

    const GridIndex index(target.coords, cfg.max_correspondence_distance);
    IcpResult result;
    result.transform = init;
    Pairing pairs = pair_points(source, target, index, init, cfg.max_correspondence_distance);
    result.residual = pairs.cost;
    result.correspondences = pairs.source.size();
    if (pairs.source.empty()) {
        result.status = IcpStatus::kNoCorrespondences;
        return result;
    }
    result.status = IcpStatus::kMaxIterations;
    if (pairs.cost == 0.0) {
        result.status = IcpStatus::kConverged;
        return result;
    }
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        RigidTransform next;
        try {
            next = fit_rigid(pairs.source, pairs.target);
        } catch (const std::runtime_error&) {
            result.status = IcpStatus::kDegenerate;
            break;
        }
        Pairing next_pairs = pair_points(source, target, index, next, cfg.max_correspondence_distance);
        if (next_pairs.cost > pairs.cost) {
            // Only reachable through rounding; keep the better iterate.
            result.status = IcpStatus::kConverged;
            break;
        }
        const double change = (pairs.cost - next_pairs.cost) / pairs.cost;
        result.transform = next;
        result.iterations = it + 1;
        result.residual = next_pairs.cost;
        result.correspondences = next_pairs.source.size();
        pairs = std::move(next_pairs);
        if (pairs.cost == 0.0 || change < cfg.relative_tolerance) {
            result.status = IcpStatus::kConverged;
            break;
        }
    }
    return result;
}

}  // namespace pcreg
