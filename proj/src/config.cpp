#include "pcreg/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace pcreg {
namespace {

using Setter = std::function<void(Settings&, const std::string&)>;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
    return out;
}

std::size_t to_size(const std::string& v) {
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("expected a non-negative integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_widths(const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_size(trim(item)));
    if (out.empty()) throw ConfigError("expected a comma-separated width list");
    return out;
}

template <typename T, typename Conv>
Setter field(T Settings::*section, auto member, Conv conv) {
    return [section, member, conv](Settings& s, const std::string& v) { (s.*section).*member = conv(v); };
}

const std::map<std::string, Setter>& registry() {
    static const std::map<std::string, Setter> reg = [] {
        std::map<std::string, Setter> r;
        for (int l = 0; l < 4; ++l) {
            const std::string p = "encoder.sa" + std::to_string(l + 1) + ".";
            r[p + "samples"] = [l](Settings& s, const std::string& v) { s.model.encoder.sa[l].samples = to_size(v); };
            r[p + "radius"] = [l](Settings& s, const std::string& v) { s.model.encoder.sa[l].radius = to_double(v); };
            r[p + "widths"] = [l](Settings& s, const std::string& v) { s.model.encoder.sa[l].widths = to_widths(v); };
        }
        r["encoder.fp.widths"] = [](Settings& s, const std::string& v) { s.model.encoder.fp_widths = to_widths(v); };
        r["encoder.max_neighbors"] = [](Settings& s, const std::string& v) {
            s.model.encoder.max_neighbors = to_size(v);
        };
        r["attention.self_neighbors"] = field(&Settings::model, &ModelConfig::self_neighbors, to_size);
        r["attention.cross_neighbors"] = field(&Settings::model, &ModelConfig::cross_neighbors, to_size);

        r["pipeline.voxel_size"] = field(&Settings::pipeline, &PipelineConfig::voxel_size, to_double);
        r["pipeline.temperature"] = field(&Settings::pipeline, &PipelineConfig::temperature, to_double);
        r["pipeline.icp"] = field(&Settings::pipeline, &PipelineConfig::icp, to_bool);
        r["ransac.inlier_threshold"] = [](Settings& s, const std::string& v) {
            s.pipeline.ransac.inlier_threshold = to_double(v);
        };
        r["ransac.confidence"] = [](Settings& s, const std::string& v) { s.pipeline.ransac.confidence = to_double(v); };
        r["ransac.max_iterations"] = [](Settings& s, const std::string& v) {
            s.pipeline.ransac.max_iterations = to_size(v);
        };
        r["icp.max_correspondence_distance"] = [](Settings& s, const std::string& v) {
            s.pipeline.icp_config.max_correspondence_distance = to_double(v);
        };
        r["icp.max_iterations"] = [](Settings& s, const std::string& v) {
            s.pipeline.icp_config.max_iterations = to_size(v);
        };
        r["icp.relative_tolerance"] = [](Settings& s, const std::string& v) {
            s.pipeline.icp_config.relative_tolerance = to_double(v);
        };

        r["scene.world_extent"] = field(&Settings::scene, &SceneConfig::world_extent, to_double);
        r["scene.boxes"] = field(&Settings::scene, &SceneConfig::boxes, to_size);
        r["scene.cylinders"] = field(&Settings::scene, &SceneConfig::cylinders, to_size);
        r["scene.walls"] = field(&Settings::scene, &SceneConfig::walls, to_size);
        r["scene.ground_tile"] = field(&Settings::scene, &SceneConfig::ground_tile, to_double);
        r["scene.min_separation"] = field(&Settings::scene, &SceneConfig::min_sensor_separation, to_double);
        r["scene.max_separation"] = field(&Settings::scene, &SceneConfig::max_sensor_separation, to_double);
        r["scene.randomize_yaw"] = field(&Settings::scene, &SceneConfig::randomize_yaw, to_bool);
        r["scene.occlusion"] = field(&Settings::scene, &SceneConfig::occlusion, to_bool);
        r["scene.noise_sigma"] = field(&Settings::scene, &SceneConfig::noise_sigma, to_double);
        r["scene.min_points"] = field(&Settings::scene, &SceneConfig::min_points, to_size);
        r["sensor.max_range"] = [](Settings& s, const std::string& v) { s.scene.sensor.max_range = to_double(v); };
        r["sensor.horizontal_resolution"] = [](Settings& s, const std::string& v) {
            s.scene.sensor.horizontal_resolution = to_double(v);
        };
        r["sensor.vertical_fans"] = [](Settings& s, const std::string& v) { s.scene.sensor.vertical_fans = to_size(v); };
        r["sensor.vertical_min"] = [](Settings& s, const std::string& v) { s.scene.sensor.vertical_min = to_double(v); };
        r["sensor.vertical_max"] = [](Settings& s, const std::string& v) { s.scene.sensor.vertical_max = to_double(v); };
        r["sensor.height"] = [](Settings& s, const std::string& v) { s.scene.sensor.height = to_double(v); };

        r["train.learning_rate"] = field(&Settings::train, &TrainConfig::learning_rate, to_double);
        r["train.lr_halving_period"] = field(&Settings::train, &TrainConfig::lr_halving_period, to_size);
        r["train.epochs"] = field(&Settings::train, &TrainConfig::epochs, to_size);
        r["train.batch_size"] = field(&Settings::train, &TrainConfig::batch_size, to_size);
        r["train.lambda"] = field(&Settings::train, &TrainConfig::lambda, to_double);
        r["train.label_radius"] = field(&Settings::train, &TrainConfig::label_radius, to_double);
        r["train.temperature"] = field(&Settings::train, &TrainConfig::temperature, to_double);
        r["train.voxel_size"] = field(&Settings::train, &TrainConfig::voxel_size, to_double);
        r["train.augment"] = field(&Settings::train, &TrainConfig::augment, to_bool);
        r["train.beta1"] = field(&Settings::train, &TrainConfig::beta1, to_double);
        r["train.beta2"] = field(&Settings::train, &TrainConfig::beta2, to_double);
        r["train.epsilon"] = field(&Settings::train, &TrainConfig::epsilon, to_double);
        return r;
    }();
    return reg;
}

constexpr const char* kPresetKey = "model.preset";

ModelConfig preset(const std::string& name) {
    if (name == "full") return ModelConfig::full();
    if (name == "desk") return ModelConfig::desk();
    if (name == "tiny") return ModelConfig::tiny();
    throw ConfigError("unknown model preset '" + name + "' (expected full, desk or tiny)");
}

}  // namespace

void apply_config(const std::string& text, Settings& settings, const std::string& source_name) {
    struct Entry {
        std::string key, value;
        std::size_t line;
    };
    std::vector<Entry> entries;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key != kPresetKey && !registry().contains(key))
            throw ConfigError(source_name + ":" + std::to_string(line_no) + ": unknown configuration key '" + key +
                              "'");
        entries.push_back({key, trim(line.substr(eq + 1)), line_no});
    }
    auto fail = [&](const Entry& e, const std::exception& ex) {
        return ConfigError(source_name + ":" + std::to_string(e.line) + ": " + e.key + ": " + ex.what());
    };
    for (const auto& e : entries) {
        if (e.key != kPresetKey) continue;
        try {
            settings.model = preset(e.value);
        } catch (const ConfigError& ex) {
            throw fail(e, ex);
        }
    }
    for (const auto& e : entries) {
        if (e.key == kPresetKey) continue;
        try {
            registry().at(e.key)(settings, e.value);
        } catch (const ConfigError& ex) {
            throw fail(e, ex);
        }
    }
}

Settings load_config(const std::filesystem::path& path, Settings base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config(ss.str(), base, path.string());
    return base;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys{kPresetKey};
    for (const auto& [k, _] : registry()) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    return keys;
}

}  // namespace pcreg
