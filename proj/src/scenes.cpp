#include "pcreg/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "pcreg/csv.hpp"
#include "pcreg/io.hpp"
#include "pcreg/parallel.hpp"

namespace pcreg {

void SceneConfig::validate() const {
    if (!(world_extent > 0.0)) throw InvalidArgumentError("scene.world_extent must be positive");
    if (!(ground_tile > 0.0)) throw InvalidArgumentError("scene.ground_tile must be positive");
    if (!(sensor.max_range > 0.0)) throw InvalidArgumentError("scene.sensor.max_range must be positive");
    if (!(sensor.horizontal_resolution > 0.0))
        throw InvalidArgumentError("scene.sensor.horizontal_resolution must be positive");
    if (sensor.vertical_fans < 1) throw InvalidArgumentError("scene.sensor.vertical_fans must be positive");
    if (sensor.vertical_fans > 1 && !(sensor.vertical_max > sensor.vertical_min))
        throw InvalidArgumentError("scene.sensor.vertical_max must exceed vertical_min");
    if (!(sensor.height > 0.0)) throw InvalidArgumentError("scene.sensor.height must be positive");
    if (min_sensor_separation < 0.0 || max_sensor_separation < min_sensor_separation)
        throw InvalidArgumentError("scene sensor separation range is invalid");
    if (max_sensor_separation > world_extent)
        throw InvalidArgumentError("scene.max_separation exceeds the world extent");
    if (noise_sigma < 0.0) throw InvalidArgumentError("scene.noise_sigma must be non-negative");
}

double World::ground_albedo(double x, double y) const {
    const auto ix = static_cast<std::int64_t>(std::floor(x / ground_tile));
    const auto iy = static_cast<std::int64_t>(std::floor(y / ground_tile));
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32) |
                              static_cast<std::uint32_t>(iy);
    const std::uint64_t h = derive_seed(ground_seed, key);
    return 0.1 + 0.5 * static_cast<double>(h >> 11) * 0x1.0p-53;
}

bool World::occupied(double x, double y, double margin) const {
    for (const auto& p : primitives) {
        const double dx = x - p.center.x();
        const double dy = y - p.center.y();
        if (p.kind == PrimitiveKind::kCylinder) {
            if (std::hypot(dx, dy) < p.radius + margin) return true;
        } else {
            const double c = std::cos(p.yaw), s = std::sin(p.yaw);
            const double lx = c * dx + s * dy;
            const double ly = -s * dx + c * dy;
            if (std::abs(lx) < p.half_x + margin && std::abs(ly) < p.half_y + margin) return true;
        }
    }
    return false;
}

World make_world(const SceneConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed(seed, 1));
    World world;
    world.ground_tile = cfg.ground_tile;
    world.ground_seed = derive_seed(seed, 2);
    const double half = cfg.world_extent / 2.0;
    auto place = [&] { return Eigen::Vector2d(rng.uniform(-half, half), rng.uniform(-half, half)); };
    for (std::size_t i = 0; i < cfg.boxes; ++i) {
        Primitive p;
        p.kind = PrimitiveKind::kBox;
        p.center = place();
        p.yaw = rng.uniform(0.0, std::numbers::pi);
        p.half_x = rng.uniform(1.0, 5.0);
        p.half_y = rng.uniform(1.0, 5.0);
        p.height = rng.uniform(1.5, 8.0);
        p.albedo = rng.uniform(0.2, 1.0);
        world.primitives.push_back(p);
    }
    for (std::size_t i = 0; i < cfg.cylinders; ++i) {
        Primitive p;
        p.kind = PrimitiveKind::kCylinder;
        p.center = place();
        p.radius = rng.uniform(0.15, 0.8);
        p.height = rng.uniform(2.0, 8.0);
        p.albedo = rng.uniform(0.2, 1.0);
        world.primitives.push_back(p);
    }
    for (std::size_t i = 0; i < cfg.walls; ++i) {
        Primitive p;
        p.kind = PrimitiveKind::kBox;
        p.center = place();
        p.yaw = rng.uniform(0.0, std::numbers::pi);
        p.half_x = rng.uniform(5.0, 15.0);
        p.half_y = 0.15;
        p.height = rng.uniform(1.5, 4.0);
        p.albedo = rng.uniform(0.2, 1.0);
        world.primitives.push_back(p);
    }
    return world;
}

namespace {

constexpr double kHitEpsilon = 1e-6;
constexpr double kNoHit = std::numeric_limits<double>::infinity();

// Entry distance of the ray into a primitive, or +inf.
double intersect(const Primitive& p, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
    const double ox = origin.x() - p.center.x();
    const double oy = origin.y() - p.center.y();
    if (p.kind == PrimitiveKind::kCylinder) {
        const double a = dir.x() * dir.x() + dir.y() * dir.y();
        double best = kNoHit;
        if (a > 0.0) {
            const double b = 2.0 * (ox * dir.x() + oy * dir.y());
            const double c = ox * ox + oy * oy - p.radius * p.radius;
            const double disc = b * b - 4.0 * a * c;
            if (disc >= 0.0) {
                const double t = (-b - std::sqrt(disc)) / (2.0 * a);
                const double z = origin.z() + t * dir.z();
                if (t > kHitEpsilon && z >= 0.0 && z <= p.height) best = t;
            }
        }
        if (dir.z() < 0.0 && origin.z() > p.height) {
            const double t = (p.height - origin.z()) / dir.z();
            const double x = ox + t * dir.x(), y = oy + t * dir.y();
            if (x * x + y * y <= p.radius * p.radius) best = std::min(best, t);
        }
        return best;
    }
    const double c = std::cos(p.yaw), s = std::sin(p.yaw);
    const Eigen::Vector3d o(c * ox + s * oy, -s * ox + c * oy, origin.z());
    const Eigen::Vector3d d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
    const Eigen::Vector3d lo(-p.half_x, -p.half_y, 0.0);
    const Eigen::Vector3d hi(p.half_x, p.half_y, p.height);
    double t_enter = -kNoHit, t_exit = kNoHit;
    for (int k = 0; k < 3; ++k) {
        if (d[k] == 0.0) {
            if (o[k] < lo[k] || o[k] > hi[k]) return kNoHit;
            continue;
        }
        double t0 = (lo[k] - o[k]) / d[k];
        double t1 = (hi[k] - o[k]) / d[k];
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
    }
    if (t_enter > t_exit || t_enter <= kHitEpsilon) return kNoHit;
    return t_enter;
}

}  // namespace

namespace {

// Scalar and out of line on purpose: GCC 11's SLP vectorizer at -O3 folds a
// vectorized double -> float -> double round trip into a no-op.
[[gnu::noinline]] double round_to_float(double v) {
    return static_cast<double>(static_cast<float>(v));
}

}  // namespace

PointCloud scan(const World& world, const RigidTransform& pose, const SceneConfig& cfg, Rng& noise) {
    const auto& sensor = cfg.sensor;
    const Eigen::Vector3d origin = pose.translation;
    const RigidTransform to_sensor = invert(pose);
    const auto azimuth_steps = static_cast<std::size_t>(std::floor(360.0 / sensor.horizontal_resolution));
    const double deg = std::numbers::pi / 180.0;

    PointCloud cloud;
    std::vector<std::pair<double, double>> hits;  // (distance, albedo)
    for (std::size_t f = 0; f < sensor.vertical_fans; ++f) {
        const double elevation =
                sensor.vertical_fans == 1
                        ? sensor.vertical_min
                        : sensor.vertical_min + (sensor.vertical_max - sensor.vertical_min) * static_cast<double>(f) /
                                                        static_cast<double>(sensor.vertical_fans - 1);
        const double ce = std::cos(elevation * deg), se = std::sin(elevation * deg);
        for (std::size_t a = 0; a < azimuth_steps; ++a) {
            const double az = static_cast<double>(a) * sensor.horizontal_resolution * deg;
            const Eigen::Vector3d dir = pose.rotation * Eigen::Vector3d(ce * std::cos(az), ce * std::sin(az), se);
            hits.clear();
            if (dir.z() < 0.0) {
                const double t = -origin.z() / dir.z();
                const Eigen::Vector3d g = origin + t * dir;
                hits.emplace_back(t, world.ground_albedo(g.x(), g.y()));
            }
            for (const auto& p : world.primitives) {
                const double t = intersect(p, origin, dir);
                if (t < kNoHit) hits.emplace_back(t, p.albedo);
            }
            if (hits.empty()) continue;
            if (cfg.occlusion) {
                const auto nearest = std::ranges::min_element(hits, {}, &std::pair<double, double>::first);
                hits = {*nearest};
            }
            for (const auto& [t, albedo] : hits) {
                if (t > sensor.max_range) continue;
                Eigen::Vector3d p = origin + t * dir;
                if (cfg.noise_sigma > 0.0) {
                    const double nx = noise.normal(), ny = noise.normal(), nz = noise.normal();
                    p += cfg.noise_sigma * Eigen::Vector3d(nx, ny, nz);
                }
                const Eigen::Vector3d local = to_sensor.apply(p);
                cloud.coords.emplace_back(round_to_float(local.x()), round_to_float(local.y()), round_to_float(local.z()));
                cloud.intensity.push_back(static_cast<float>(albedo));
            }
        }
    }
    return cloud;
}

ScenePair make_pair(const World& world, const RigidTransform& source_pose, const RigidTransform& target_pose,
                    const SceneConfig& cfg, std::uint64_t seed, std::string scene_id) {
    ScenePair pair;
    pair.scene_id = std::move(scene_id);
    pair.source_pose = source_pose;
    pair.target_pose = target_pose;
    Rng source_noise(derive_seed(seed, 7));
    Rng target_noise(derive_seed(seed, 8));
    pair.source = scan(world, source_pose, cfg, source_noise);
    pair.target = scan(world, target_pose, cfg, target_noise);
    pair.ground_truth = compose(invert(target_pose), source_pose);
    pair.separation = (target_pose.translation - source_pose.translation).norm();
    pair.overlap = pair.source.empty() ? 0.0 : overlap_ratio(pair.source, pair.target, pair.ground_truth, kOverlapGamma);
    return pair;
}

namespace {

// Samples a free sensor position pair; returns false if placement keeps failing.
bool place_sensors(const World& world, const SceneConfig& cfg, Rng& rng, RigidTransform& a, RigidTransform& b) {
    const double quarter = cfg.world_extent / 4.0;
    constexpr double kMargin = 1.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
        const Eigen::Vector2d pa(rng.uniform(-quarter, quarter), rng.uniform(-quarter, quarter));
        if (world.occupied(pa.x(), pa.y(), kMargin)) continue;
        for (int inner = 0; inner < 50; ++inner) {
            const double sep = rng.uniform(cfg.min_sensor_separation, cfg.max_sensor_separation);
            const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const Eigen::Vector2d pb = pa + sep * Eigen::Vector2d(std::cos(dir), std::sin(dir));
            if (sep > 0.0 && world.occupied(pb.x(), pb.y(), kMargin)) continue;
            const double yaw_a = cfg.randomize_yaw ? rng.uniform(0.0, 2.0 * std::numbers::pi) : 0.0;
            const double yaw_b = cfg.randomize_yaw ? rng.uniform(0.0, 2.0 * std::numbers::pi) : 0.0;
            a = RigidTransform::from_yaw(yaw_a, Eigen::Vector3d(pa.x(), pa.y(), cfg.sensor.height));
            b = RigidTransform::from_yaw(yaw_b, Eigen::Vector3d(pb.x(), pb.y(), cfg.sensor.height));
            return true;
        }
    }
    return false;
}

}  // namespace

ScenePair generate_scene(const SceneConfig& cfg, std::uint64_t seed, std::string scene_id) {
    cfg.validate();
    constexpr int kAttempts = 10;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        const std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, 1000 + static_cast<std::uint64_t>(attempt));
        const World world = make_world(cfg, s);
        Rng rng(derive_seed(s, 3));
        RigidTransform a, b;
        if (!place_sensors(world, cfg, rng, a, b)) continue;
        ScenePair pair = make_pair(world, a, b, cfg, s, scene_id);
        if (pair.source.size() >= cfg.min_points && pair.target.size() >= cfg.min_points) return pair;
    }
    throw InsufficientPointsError("generate_scene: could not produce clouds with at least " +
                                  std::to_string(cfg.min_points) + " points for scene '" + scene_id + "'");
}

std::uint64_t split_seed_offset(const std::string& split) {
    if (split == "train") return 0;
    if (split == "val") return 1'000'000;
    if (split == "test") return 2'000'000;
    throw InvalidArgumentError("unknown split '" + split + "' (expected train, val or test)");
}

std::vector<ScenePair> generate_dataset(const SceneConfig& cfg, const std::string& split, std::size_t count,
                                        std::size_t threads) {
    const std::uint64_t offset = split_seed_offset(split);
    std::vector<ScenePair> pairs(count);
    parallel_for(count, threads, [&](std::size_t i) {
        char id[32];
        std::snprintf(id, sizeof(id), "%s_%06zu", split.c_str(), i);
        pairs[i] = generate_scene(cfg, cfg.seed + offset + i, id);
        pairs[i].split = split;
    });
    return pairs;
}

namespace {

nlohmann::ordered_json matrix_json(const RigidTransform& t) {
    const Eigen::Matrix4d m = t.matrix();
    auto arr = nlohmann::ordered_json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) arr.push_back(m(r, c));
    return arr;
}

RigidTransform matrix_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 16) throw FormatError(where + ": transform must have 16 numbers");
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            const auto& v = j[static_cast<std::size_t>(r * 4 + c)];
            if (!v.is_number()) throw FormatError(where + ": transform entries must be numbers");
            m(r, c) = v.get<double>();
        }
    try {
        return RigidTransform::from_matrix(m);
    } catch (const InvalidArgumentError& e) {
        throw FormatError(where + ": " + e.what());
    }
}

}  // namespace

void dataset_save(const std::vector<ScenePair>& pairs, const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw FormatError("cannot create directory " + directory.string() + ": " + ec.message());
    const auto manifest_path = directory / "manifest.jsonl";
    std::ofstream manifest(manifest_path, std::ios::binary | std::ios::trunc);
    if (!manifest) throw FormatError("cannot open for writing: " + manifest_path.string());
    for (const auto& p : pairs) {
        const std::string source_file = p.scene_id + "_source.freg";
        const std::string target_file = p.scene_id + "_target.freg";
        write_freg(directory / source_file, p.source);
        write_freg(directory / target_file, p.target);
        nlohmann::ordered_json rec;
        rec["scene_id"] = p.scene_id;
        rec["split"] = p.split;
        rec["source_file"] = source_file;
        rec["target_file"] = target_file;
        rec["ground_truth"] = matrix_json(p.ground_truth);
        rec["overlap"] = p.overlap;
        rec["separation"] = p.separation;
        rec["source_pose"] = matrix_json(p.source_pose);
        rec["target_pose"] = matrix_json(p.target_pose);
        manifest << rec.dump() << '\n';
    }
    if (!manifest) throw FormatError("write failed: " + manifest_path.string());
}

std::vector<ScenePair> dataset_load(const std::filesystem::path& directory) {
    const auto manifest_path = directory / "manifest.jsonl";
    std::ifstream manifest(manifest_path);
    if (!manifest) throw FormatError("cannot open for reading: " + manifest_path.string());
    std::vector<ScenePair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = manifest_path.string() + ":" + std::to_string(line_no);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        }
        try {
            ScenePair p;
            p.scene_id = rec.at("scene_id").get<std::string>();
            p.split = rec.value("split", std::string{});
            p.ground_truth = matrix_from_json(rec.at("ground_truth"), where);
            p.overlap = rec.at("overlap").get<double>();
            p.separation = rec.at("separation").get<double>();
            if (rec.contains("source_pose")) p.source_pose = matrix_from_json(rec["source_pose"], where);
            if (rec.contains("target_pose")) p.target_pose = matrix_from_json(rec["target_pose"], where);
            p.source = read_freg(directory / rec.at("source_file").get<std::string>());
            p.target = read_freg(directory / rec.at("target_file").get<std::string>());
            pairs.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    return pairs;
}

std::vector<EcdfPoint> ecdf(std::vector<double> values) {
    std::ranges::sort(values);
    std::vector<EcdfPoint> out;
    const double n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
        out.push_back({values[i], static_cast<double>(i + 1) / n});
    }
    return out;
}

DatasetStatistics dataset_statistics(const std::vector<ScenePair>& pairs) {
    if (pairs.empty()) throw InvalidArgumentError("dataset_statistics: empty dataset");
    std::vector<double> distance, rotation, overlap;
    for (const auto& p : pairs) {
        distance.push_back(p.ground_truth.translation.norm());
        rotation.push_back(rotation_error(p.ground_truth, RigidTransform::identity()));
        overlap.push_back(p.overlap);
    }
    return {ecdf(std::move(distance)), ecdf(std::move(rotation)), ecdf(std::move(overlap))};
}

void write_statistics_csv(const std::filesystem::path& path, const DatasetStatistics& stats) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    csv::write_row(out, {"quantity", "value", "cumulative_fraction"});
    auto emit = [&](const char* name, const std::vector<EcdfPoint>& points) {
        for (const auto& p : points) csv::write_row(out, {name, csv::format(p.value), csv::format(p.fraction)});
    };
    emit("distance", stats.distance);
    emit("rotation", stats.rotation);
    emit("overlap", stats.overlap);
    if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace pcreg
