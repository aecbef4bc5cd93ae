#include "pcreg/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace pcreg {
namespace {

inline double sqdist(const Point3& a, const Point3& b) {
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
}

using Scored = std::pair<double, Index>;

// Ascending score, then ascending index.
inline bool scored_less(const Scored& a, const Scored& b) {
    return a.first < b.first || (a.first == b.first && a.second < b.second);
}

IndexList take_indices(std::vector<Scored>& scored, std::size_t limit) {
    if (scored.size() > limit) {
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(limit),
                          scored.end(), scored_less);
        scored.resize(limit);
    } else {
        std::sort(scored.begin(), scored.end(), scored_less);
    }
    IndexList out;
    out.reserve(scored.size());
    for (const auto& s : scored) out.push_back(s.second);
    return out;
}

}  // namespace

GridIndex::GridIndex(std::span<const Point3> points, double cell_size)
    : points_(points), cell_size_(cell_size) {
    if (!(cell_size > 0.0)) throw InvalidArgumentError("grid cell size must be positive");
    std::vector<std::pair<CellKey, Index>> keyed;
    keyed.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        keyed.emplace_back(key_of(points[i]), static_cast<Index>(i));
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        const auto& ka = a.first;
        const auto& kb = b.first;
        if (ka.x() != kb.x()) return ka.x() < kb.x();
        if (ka.y() != kb.y()) return ka.y() < kb.y();
        if (ka.z() != kb.z()) return ka.z() < kb.z();
        return a.second < b.second;
    });
    order_.reserve(keyed.size());
    cells_.reserve(keyed.size() / 4 + 1);
    for (std::size_t begin = 0; begin < keyed.size();) {
        std::size_t end = begin + 1;
        while (end < keyed.size() && keyed[end].first == keyed[begin].first) ++end;
        cells_.emplace(keyed[begin].first, Range{static_cast<Index>(begin), static_cast<Index>(end)});
        for (std::size_t k = begin; k < end; ++k) order_.push_back(keyed[k].second);
        begin = end;
    }
}

GridIndex::CellKey GridIndex::key_of(const Point3& p) const {
    return CellKey(static_cast<int>(std::floor(p.x() / cell_size_)),
                   static_cast<int>(std::floor(p.y() / cell_size_)),
                   static_cast<int>(std::floor(p.z() / cell_size_)));
}

IndexList GridIndex::radius_search(const Point3& query, double radius) const {
    const int ring = static_cast<int>(std::ceil(radius / cell_size_));
    const double r2 = radius * radius;
    std::vector<Scored> scored;
    for_each_in_ring(query, ring, [&](Index i) {
        const double d2 = sqdist(points_[i], query);
        if (d2 <= r2) scored.emplace_back(d2, i);
    });
    return take_indices(scored, scored.size());
}

std::int64_t GridIndex::nearest(const Point3& query, double max_distance) const {
    const int ring = static_cast<int>(std::ceil(max_distance / cell_size_));
    const double r2 = max_distance * max_distance;
    Scored best{std::numeric_limits<double>::infinity(), 0};
    bool found = false;
    for_each_in_ring(query, ring, [&](Index i) {
        const double d2 = sqdist(points_[i], query);
        if (d2 <= r2 && (!found || scored_less({d2, i}, best))) {
            best = {d2, i};
            found = true;
        }
    });
    return found ? static_cast<std::int64_t>(best.second) : -1;
}

IndexList GridIndex::knn(const Point3& query, std::size_t k) const {
    if (k > points_.size()) throw InsufficientPointsError("knn: k exceeds point count");
    std::vector<Scored> scored;
    if (k == 0) return {};
    for (int ring = 0;; ++ring) {
        for_each_on_ring(query, ring, [&](Index i) { scored.emplace_back(sqdist(points_[i], query), i); });
        if (scored.size() == points_.size()) break;
        if (scored.size() >= k) {
            std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k - 1),
                             scored.end(), scored_less);
            const double covered = static_cast<double>(ring) * cell_size_;
            if (scored[k - 1].first < covered * covered) break;
        }
    }
    return take_indices(scored, k);
}

IndexList farthest_point_sample(std::span<const Point3> coords, std::size_t n, std::size_t seed_index) {
    if (n == 0) throw InvalidArgumentError("farthest_point_sample: n must be at least 1");
    if (n > coords.size())
        throw InsufficientPointsError("farthest_point_sample: requested " + std::to_string(n) +
                                      " samples from " + std::to_string(coords.size()) + " points");
    if (seed_index >= coords.size()) throw InvalidArgumentError("farthest_point_sample: seed index out of range");

    IndexList selected;
    selected.reserve(n);
    std::vector<double> min_d2(coords.size(), std::numeric_limits<double>::infinity());
    std::size_t current = seed_index;
    for (;;) {
        selected.push_back(static_cast<Index>(current));
        min_d2[current] = -1.0;
        if (selected.size() == n) break;
        const Point3& c = coords[current];
        double best = -1.0;
        std::size_t best_index = 0;
        for (std::size_t i = 0; i < coords.size(); ++i) {
            if (min_d2[i] < 0.0) continue;
            const double d2 = sqdist(coords[i], c);
            if (d2 < min_d2[i]) min_d2[i] = d2;
            if (min_d2[i] > best) {
                best = min_d2[i];
                best_index = i;
            }
        }
        current = best_index;
    }
    return selected;
}

std::vector<IndexList> radius_neighbors(std::span<const Point3> queries, std::span<const Point3> points,
                                        double r, std::size_t max_neighbors) {
    if (!(r > 0.0)) throw InvalidArgumentError("radius_neighbors: radius must be positive");
    std::vector<IndexList> out(queries.size());
    if (points.size() <= kExhaustiveScanLimit) {
        const double r2 = r * r;
        std::vector<Scored> scored;
        for (std::size_t q = 0; q < queries.size(); ++q) {
            scored.clear();
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double d2 = sqdist(points[i], queries[q]);
                if (d2 <= r2) scored.emplace_back(d2, static_cast<Index>(i));
            }
            out[q] = take_indices(scored, max_neighbors);
        }
        return out;
    }
    const GridIndex index(points, r);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        out[q] = index.radius_search(queries[q], r);
        if (out[q].size() > max_neighbors) out[q].resize(max_neighbors);
    }
    return out;
}

std::vector<IndexList> knn(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& points, std::size_t k,
                           KnnMetric metric) {
    if (queries.rows() > 0 && queries.cols() != points.cols())
        throw InvalidArgumentError("knn: dimensionality mismatch");
    if (k > static_cast<std::size_t>(points.rows()))
        throw InsufficientPointsError("knn: k = " + std::to_string(k) + " exceeds point count " +
                                      std::to_string(points.rows()));
    const auto nq = static_cast<std::size_t>(queries.rows());
    const auto np = static_cast<std::size_t>(points.rows());
    std::vector<IndexList> out(nq);

    if (metric == KnnMetric::kEuclidean && points.cols() == 3 && np > kExhaustiveScanLimit) {
        Points3 pts(np);
        for (std::size_t i = 0; i < np; ++i) pts[i] = points.row(static_cast<Eigen::Index>(i)).transpose();
        // Cell size targets roughly k points per cell under uniform density.
        const Eigen::Vector3d extent = points.colwise().maxCoeff() - points.colwise().minCoeff();
        const double volume = std::max(extent.prod(), 1e-12);
        const double cell = std::max(std::cbrt(volume * static_cast<double>(std::max<std::size_t>(k, 1)) /
                                               static_cast<double>(np)),
                                     1e-6);
        const GridIndex index(pts, cell);
        for (std::size_t q = 0; q < nq; ++q)
            out[q] = index.knn(queries.row(static_cast<Eigen::Index>(q)).transpose(), k);
        return out;
    }

    std::vector<Scored> scored(np);
    for (std::size_t q = 0; q < nq; ++q) {
        const auto qi = static_cast<Eigen::Index>(q);
        for (std::size_t i = 0; i < np; ++i) {
            const auto pi = static_cast<Eigen::Index>(i);
            double s;
            if (metric == KnnMetric::kEuclidean) {
                s = (queries.row(qi) - points.row(pi)).squaredNorm();
            } else {
                s = -queries.row(qi).dot(points.row(pi));
            }
            scored[i] = {s, static_cast<Index>(i)};
        }
        std::vector<Scored> work = scored;
        out[q] = take_indices(work, k);
    }
    return out;
}

std::vector<IndexList> knn(std::span<const Point3> queries, std::span<const Point3> points, std::size_t k) {
    return knn(to_matrix(queries), to_matrix(points), k, KnnMetric::kEuclidean);
}

Eigen::MatrixXd to_matrix(std::span<const Point3> points) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), 3);
    for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
    return m;
}

}  // namespace pcreg
