#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcreg/model.hpp"
#include "pcreg/pipeline.hpp"
#include "pcreg/scenes.hpp"
#include "pcreg/training.hpp"

namespace pcreg {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a config file can set. Seeds and thread counts come from the
/// command line, not from here.
struct Settings {
    ModelConfig model = ModelConfig::desk();
    PipelineConfig pipeline;
    SceneConfig scene;
    TrainConfig train;
};

/// Applies flat "section.name = value" lines ('#' starts a comment) on top of
/// `settings`. "model.preset" (full | desk | tiny) is applied before any
/// other model key regardless of its position. Unknown keys and malformed
/// values throw ConfigError naming the key and the line.
void apply_config(const std::string& text, Settings& settings, const std::string& source_name = "<config>");
Settings load_config(const std::filesystem::path& path, Settings base = {});

/// Every recognized key, sorted.
std::vector<std::string> config_keys();

}  // namespace pcreg
