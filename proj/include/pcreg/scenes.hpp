#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcreg/geometry.hpp"
#include "pcreg/random.hpp"

namespace pcreg {

inline constexpr double kOverlapGamma = 0.3;

/// One registration sample. `ground_truth` maps source-frame points into the
/// target frame; the poses map each sensor frame into the world.
struct ScenePair {
    std::string scene_id;
    std::string split;
    PointCloud source;
    PointCloud target;
    RigidTransform ground_truth;
    RigidTransform source_pose;
    RigidTransform target_pose;
    double overlap = 0.0;
    double separation = 0.0;  // meters between the two sensors
};

struct SensorModel {
    double max_range = 80.0;               // meters
    double horizontal_resolution = 0.4;    // degrees
    std::size_t vertical_fans = 64;
    double vertical_min = -25.0;           // degrees
    double vertical_max = 5.0;             // degrees
    double height = 1.8;                   // meters above ground
};

struct SceneConfig {
    double world_extent = 100.0;  // side of the square world, meters
    std::size_t boxes = 25;
    std::size_t cylinders = 40;
    std::size_t walls = 6;
    double ground_tile = 4.0;     // meters; each ground tile has its own albedo
    SensorModel sensor;
    double min_sensor_separation = 0.0;
    double max_sensor_separation = 30.0;
    bool randomize_yaw = true;
    bool occlusion = true;
    double noise_sigma = 0.02;    // meters
    std::size_t min_points = 2000;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class PrimitiveKind { kBox, kCylinder };

/// Vertical prism standing on the ground plane. Boxes use (half_x, half_y)
/// in their yawed local frame, cylinders use `radius`.
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::kBox;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double yaw = 0.0;
    double half_x = 0.0;
    double half_y = 0.0;
    double radius = 0.0;
    double height = 0.0;
    double albedo = 0.5;
};

struct World {
    std::vector<Primitive> primitives;
    double ground_tile = 4.0;
    std::uint64_t ground_seed = 0;

    double ground_albedo(double x, double y) const;
    /// True when (x, y) lies inside a primitive footprint grown by `margin`.
    bool occupied(double x, double y, double margin) const;
};

World make_world(const SceneConfig& cfg, std::uint64_t seed);

/// Ray-casts one sensor at `pose` (sensor frame -> world). Returns points in
/// the sensor frame, rounded to float precision, with albedo intensities.
PointCloud scan(const World& world, const RigidTransform& pose, const SceneConfig& cfg, Rng& noise);

/// Scans both poses and fills ground truth, overlap and separation.
ScenePair make_pair(const World& world, const RigidTransform& source_pose, const RigidTransform& target_pose,
                    const SceneConfig& cfg, std::uint64_t seed, std::string scene_id);

/// Random world and sensor placement. Retries with derived sub-seeds (up to 10
/// attempts) while a cloud has fewer than cfg.min_points points.
ScenePair generate_scene(const SceneConfig& cfg, std::uint64_t seed, std::string scene_id = "scene");

/// Seed offsets keep the train / val / test seed ranges disjoint.
std::uint64_t split_seed_offset(const std::string& split);

/// `count` scenes with seeds cfg.seed + split offset + i and ids "<split>_NNNNNN".
std::vector<ScenePair> generate_dataset(const SceneConfig& cfg, const std::string& split, std::size_t count,
                                        std::size_t threads = 1);

/// Writes "manifest.jsonl" plus one FREG file per cloud.
void dataset_save(const std::vector<ScenePair>& pairs, const std::filesystem::path& directory);
/// Throws FormatError naming the offending file on malformed or missing data.
std::vector<ScenePair> dataset_load(const std::filesystem::path& directory);

struct EcdfPoint {
    double value = 0.0;
    double fraction = 0.0;
};

/// Sorted empirical CDF; repeated values collapse into one point.
std::vector<EcdfPoint> ecdf(std::vector<double> values);

struct DatasetStatistics {
    std::vector<EcdfPoint> distance;  // meters
    std::vector<EcdfPoint> rotation;  // degrees
    std::vector<EcdfPoint> overlap;
};

DatasetStatistics dataset_statistics(const std::vector<ScenePair>& pairs);

/// CSV with columns quantity,value,cumulative_fraction.
void write_statistics_csv(const std::filesystem::path& path, const DatasetStatistics& stats);

}  // namespace pcreg
