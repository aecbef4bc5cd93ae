#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "pcreg/geometry.hpp"

namespace pcreg {

using Index = std::uint32_t;
using IndexList = std::vector<Index>;

/// Point sets with at most this many points are queried by exhaustive scan.
inline constexpr std::size_t kExhaustiveScanLimit = 1000;
inline constexpr std::size_t kDefaultMaxNeighbors = 64;

/// Uniform-grid bucket index over a fixed point set. Points are sorted by
/// cell so that every cell maps to a contiguous range.
class GridIndex {
public:
    GridIndex(std::span<const Point3> points, double cell_size);

    double cell_size() const { return cell_size_; }
    std::span<const Point3> points() const { return points_; }

    /// Calls fn(index) for every point in cells overlapping the cube of
    /// half-width `ring * cell_size` around the query's cell.
    template <typename Fn>
    void for_each_in_ring(const Point3& query, int ring, Fn&& fn) const;

    /// Calls fn(index) for the points of the cells at Chebyshev cell distance
    /// exactly `ring` from the query's cell.
    template <typename Fn>
    void for_each_on_ring(const Point3& query, int ring, Fn&& fn) const;

    /// Indices with |p - query| <= radius, sorted by (distance, index).
    IndexList radius_search(const Point3& query, double radius) const;

    /// Nearest point with distance <= `max_distance`, or -1 when none. Ties
    /// go to the lowest index.
    std::int64_t nearest(const Point3& query, double max_distance) const;

    /// k nearest neighbors, sorted by (distance, index).
    IndexList knn(const Point3& query, std::size_t k) const;

private:
    struct Range {
        Index begin;
        Index end;
    };
    using CellKey = Eigen::Vector3i;
    struct KeyHash {
        std::size_t operator()(const Eigen::Vector3i& k) const noexcept {
            std::uint64_t h = static_cast<std::uint32_t>(k.x()) * 0x9E3779B185EBCA87ULL;
            h ^= static_cast<std::uint32_t>(k.y()) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
            h ^= static_cast<std::uint32_t>(k.z()) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
            return static_cast<std::size_t>(h);
        }
    };
    struct KeyEq {
        bool operator()(const Eigen::Vector3i& a, const Eigen::Vector3i& b) const noexcept {
            return a == b;
        }
    };

    CellKey key_of(const Point3& p) const;
    template <typename Fn>
    void visit_cell(const CellKey& key, Fn&& fn) const;

    std::span<const Point3> points_;
    double cell_size_;
    IndexList order_;
    std::unordered_map<CellKey, Range, KeyHash, KeyEq> cells_;
};

/// Greedy farthest point sampling starting from `seed_index`. Ties go to the
/// lowest index.
IndexList farthest_point_sample(std::span<const Point3> coords, std::size_t n,
                                std::size_t seed_index = 0);

/// Per-query indices within distance r, sorted by (distance, index) and
/// truncated to `max_neighbors`.
std::vector<IndexList> radius_neighbors(std::span<const Point3> queries,
                                        std::span<const Point3> points, double r,
                                        std::size_t max_neighbors = kDefaultMaxNeighbors);

enum class KnnMetric { kEuclidean, kDotProduct };

/// Row-wise k-NN between `queries` and `points` (one vector per row). Euclidean
/// returns the k closest, dot product the k most similar; best first, ties by
/// lowest index.
std::vector<IndexList> knn(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& points,
                           std::size_t k, KnnMetric metric);

/// Convenience overload for 3D positions.
std::vector<IndexList> knn(std::span<const Point3> queries, std::span<const Point3> points,
                           std::size_t k);

Eigen::MatrixXd to_matrix(std::span<const Point3> points);

// ---------------------------------------------------------------------------

template <typename Fn>
void GridIndex::visit_cell(const CellKey& key, Fn&& fn) const {
    auto it = cells_.find(key);
    if (it == cells_.end()) return;
    for (Index i = it->second.begin; i < it->second.end; ++i) fn(order_[i]);
}

template <typename Fn>
void GridIndex::for_each_in_ring(const Point3& query, int ring, Fn&& fn) const {
    const CellKey c = key_of(query);
    for (int dx = -ring; dx <= ring; ++dx)
        for (int dy = -ring; dy <= ring; ++dy)
            for (int dz = -ring; dz <= ring; ++dz)
                visit_cell(CellKey(c.x() + dx, c.y() + dy, c.z() + dz), fn);
}

template <typename Fn>
void GridIndex::for_each_on_ring(const Point3& query, int ring, Fn&& fn) const {
    if (ring == 0) {
        visit_cell(key_of(query), fn);
        return;
    }
    const CellKey c = key_of(query);
    for (int dx = -ring; dx <= ring; ++dx)
        for (int dy = -ring; dy <= ring; ++dy) {
            const bool edge = std::abs(dx) == ring || std::abs(dy) == ring;
            if (edge) {
                for (int dz = -ring; dz <= ring; ++dz)
                    visit_cell(CellKey(c.x() + dx, c.y() + dy, c.z() + dz), fn);
            } else {
                visit_cell(CellKey(c.x() + dx, c.y() + dy, c.z() - ring), fn);
                visit_cell(CellKey(c.x() + dx, c.y() + dy, c.z() + ring), fn);
            }
        }
}

}  // namespace pcreg
