#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcreg/config.hpp"
#include "pcreg/pipeline.hpp"
#include "pcreg/scenes.hpp"
#include "pcreg/training.hpp"

namespace pcreg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInputError = 2, kRegistrationFailure = 3 };

/// Maps the exception currently being handled to an exit code and prints it.
int report_error(std::ostream& err);

struct Common {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    Settings settings;
};

/// Loads a split directory (manifest.jsonl + clouds). `read_delay_ms` sleeps
/// after each pair to emulate slow storage.
std::vector<ScenePair> load_split(const std::filesystem::path& dir, double read_delay_ms = 0.0);

struct GenerateOptions {
    std::filesystem::path out;  // dataset root; the split lands in out/<split>
    std::size_t count = 0;
    std::string split = "train";
};
void run_generate(const Common& common, const GenerateOptions& opt, std::ostream& log);

struct TrainOptions {
    std::filesystem::path data;  // root with train/ and val/
    std::filesystem::path weights;
    std::filesystem::path log_csv;  // empty: <weights>.csv
};
TrainResult run_train(const Common& common, const TrainOptions& opt, std::ostream& log);

struct RegisterOptions {
    std::filesystem::path source;
    std::filesystem::path target;
    std::filesystem::path weights;
    std::filesystem::path result_json;  // empty: no file
    bool icp = false;
    std::optional<double> kappa;
    std::optional<double> temperature;
};
PipelineResult run_register(const Common& common, const RegisterOptions& opt, std::ostream& out);

struct EvalSample {
    std::string scene_id;
    double overlap = 0.0;
    std::optional<double> translation_error;  // absent when the pipeline failed
    std::optional<double> rotation_error;
    bool success = false;
    std::size_t inliers = 0;
    double elapsed = 0.0;  // seconds
    std::string error;
};

struct EvalBin {
    std::string label;        // "overlap>0.6", ...
    double threshold = 0.0;
    std::size_t count = 0;
    std::optional<double> mean_translation_error;
    std::optional<double> mean_rotation_error;
    std::optional<double> recall;
    std::optional<double> time_mean;
    std::optional<double> time_std;
};

inline constexpr double kOverlapBins[] = {0.6, 0.5, 0.4, 0.0};

/// Registers every pair (ransac seed derived from `seed` and the pair index).
/// Failures become unsuccessful rows. Rows are ordered by scene_id.
std::vector<EvalSample> evaluate_pairs(const std::vector<ScenePair>& pairs, const Model& model,
                                       const PipelineConfig& cfg, std::uint64_t seed, std::size_t threads);
/// Per-bin means over samples with overlap > threshold. TE/RE means skip
/// failed rows; recall counts them as failures. Std is the population std.
std::vector<EvalBin> aggregate(const std::vector<EvalSample>& samples);
void write_samples_csv(const std::filesystem::path& path, const std::vector<EvalSample>& samples);
void write_summary_csv(const std::filesystem::path& path, const std::vector<EvalBin>& bins);

struct EvalOptions {
    std::filesystem::path data;  // split directory
    std::filesystem::path weights;
    std::filesystem::path out;   // directory for samples.csv and summary.csv
    bool icp = false;
};
std::vector<EvalBin> run_eval(const Common& common, const EvalOptions& opt, std::ostream& log);

struct StageStats {
    std::string stage;
    double mean_ms = 0.0;
    double std_ms = 0.0;
};

struct BenchOptions {
    std::filesystem::path data;
    std::filesystem::path weights;
    std::filesystem::path out;  // CSV; empty: stdout only
    std::size_t repetitions = 3;
    bool icp = true;
    double read_delay_ms = 0.0;
};
/// Rows for downsample, encode, attention, match, ransac, icp and total.
/// Only registration is timed; loading happens before the first timer.
std::vector<StageStats> run_bench(const Common& common, const BenchOptions& opt, std::ostream& log);
void write_bench_csv(const std::filesystem::path& path, const std::vector<StageStats>& stats);

}  // namespace pcreg::cli
