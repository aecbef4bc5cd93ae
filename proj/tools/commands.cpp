#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "pcreg/csv.hpp"
#include "pcreg/io.hpp"
#include "pcreg/parallel.hpp"

namespace pcreg::cli {
namespace fs = std::filesystem;

namespace {

std::string format_optional(const std::optional<double>& v) {
    return v ? csv::format(*v) : std::string{};
}

void mean_std(const std::vector<double>& values, double& mean, double& stddev) {
    mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    stddev = std::sqrt(var / static_cast<double>(values.size()));
}

PipelineConfig pipeline_config(const Common& common, bool icp) {
    PipelineConfig cfg = common.settings.pipeline;
    cfg.icp = cfg.icp || icp;
    cfg.ransac.seed = common.seed;
    return cfg;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    return out;
}

}  // namespace

int report_error(std::ostream& err) {
    try {
        throw;
    } catch (const StageError& e) {
        err << "error: " << e.what() << '\n';
        return e.registration_failure() ? kRegistrationFailure : kInputError;
    } catch (const RegistrationFailure& e) {
        err << "error: " << e.what() << '\n';
        return kRegistrationFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
}

std::vector<ScenePair> load_split(const fs::path& dir, double read_delay_ms) {
    auto pairs = dataset_load(dir);
    if (read_delay_ms > 0.0)
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(read_delay_ms * static_cast<double>(pairs.size())));
    return pairs;
}

void run_generate(const Common& common, const GenerateOptions& opt, std::ostream& log) {
    if (opt.count == 0) throw InvalidArgumentError("generate: --count must be positive");
    SceneConfig cfg = common.settings.scene;
    cfg.seed = common.seed;
    const auto pairs = generate_dataset(cfg, opt.split, opt.count, common.threads);
    const fs::path dir = opt.out / opt.split;
    dataset_save(pairs, dir);
    write_statistics_csv(dir / "statistics.csv", dataset_statistics(pairs));
    log << "wrote " << pairs.size() << " pairs to " << dir.string() << '\n';
}

TrainResult run_train(const Common& common, const TrainOptions& opt, std::ostream& log) {
    const auto train_set = load_split(opt.data / "train");
    const auto val_set = load_split(opt.data / "val");
    if (train_set.empty() || val_set.empty()) throw InvalidArgumentError("train: train and val splits must be non-empty");
    TrainConfig cfg = common.settings.train;
    cfg.seed = common.seed;
    cfg.threads = common.threads;
    const Model initial = Model::initialize(common.settings.model, derive_seed(common.seed, 0x5eed));
    log << "training on " << train_set.size() << " pairs, validating on " << val_set.size() << '\n';
    auto result = train(initial, train_set, val_set, cfg, [&](const EpochRecord& r) {
        log << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << " lr " << r.learning_rate;
        if (r.skipped) log << " (skipped " << r.skipped << " unusable pairs)";
        log << std::endl;
    });
    save_model(opt.weights, result.model);
    const fs::path log_csv = opt.log_csv.empty() ? fs::path(opt.weights.string() + ".csv") : opt.log_csv;
    write_training_log(log_csv, result.log);
    log << "best epoch " << result.best_epoch << " (val " << result.best_val_loss << "), weights "
        << opt.weights.string() << '\n';
    return result;
}

PipelineResult run_register(const Common& common, const RegisterOptions& opt, std::ostream& out) {
    const Model model = load_model(opt.weights);
    const PointCloud source = read_cloud(opt.source);
    const PointCloud target = read_cloud(opt.target);
    PipelineConfig cfg = pipeline_config(common, opt.icp);
    if (opt.kappa) cfg.ransac.inlier_threshold = *opt.kappa;
    if (opt.temperature) cfg.temperature = *opt.temperature;
    cfg.ransac.validate();

    const PipelineResult r = register_pair(source, target, model, cfg);
    const Eigen::Matrix4d m = r.transform.matrix();
    std::ostringstream text;
    text << std::setprecision(9) << std::fixed;
    for (int row = 0; row < 4; ++row) {
        for (int col = 0; col < 4; ++col) text << (col ? " " : "") << std::setw(14) << m(row, col);
        text << '\n';
    }
    out << text.str();

    if (!opt.result_json.empty()) {
        nlohmann::ordered_json j;
        auto arr = nlohmann::ordered_json::array();
        for (int row = 0; row < 4; ++row)
            for (int col = 0; col < 4; ++col) arr.push_back(m(row, col));
        j["transform"] = arr;
        j["inliers"] = r.registration.inlier_count;
        j["correspondences"] = r.correspondences.size();
        j["ransac_iterations"] = r.registration.iterations_run;
        j["source_points"] = r.source_points;
        j["target_points"] = r.target_points;
        if (r.icp) {
            j["icp"] = {{"status", to_string(r.icp->status)},
                        {"iterations", r.icp->iterations},
                        {"residual", r.icp->residual}};
        } else {
            j["icp"] = nullptr;
        }
        const auto& t = r.timings;
        j["timings_ms"] = {{"downsample", t.downsample}, {"encode", t.encode}, {"attention", t.attention},
                           {"match", t.match},           {"ransac", t.ransac}, {"icp", t.icp},
                           {"total", t.total}};
        auto file = open_output(opt.result_json);
        file << j.dump(2) << '\n';
        if (!file) throw FormatError("write failed: " + opt.result_json.string());
    }
    return r;
}

std::vector<EvalSample> evaluate_pairs(const std::vector<ScenePair>& pairs, const Model& model,
                                       const PipelineConfig& cfg, std::uint64_t seed, std::size_t threads) {
    std::vector<EvalSample> rows(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
        const auto& p = pairs[i];
        EvalSample& s = rows[i];
        s.scene_id = p.scene_id;
        s.overlap = p.overlap;
        PipelineConfig c = cfg;
        c.ransac.seed = derive_seed(seed, i);
        const auto start = std::chrono::steady_clock::now();
        try {
            const auto r = register_pair(p.source, p.target, model, c);
            const auto metrics = evaluate(r.transform, p.ground_truth);
            s.translation_error = metrics.translation_error;
            s.rotation_error = metrics.rotation_error;
            s.success = metrics.success;
            s.inliers = r.registration.inlier_count;
        } catch (const std::exception& e) {
            s.error = e.what();
        }
        s.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    std::stable_sort(rows.begin(), rows.end(),
                     [](const EvalSample& a, const EvalSample& b) { return a.scene_id < b.scene_id; });
    return rows;
}

std::vector<EvalBin> aggregate(const std::vector<EvalSample>& samples) {
    std::vector<EvalBin> bins;
    for (double threshold : kOverlapBins) {
        EvalBin bin;
        std::ostringstream label;
        label << "overlap>" << threshold;
        bin.label = label.str();
        bin.threshold = threshold;
        std::vector<double> te, re, times;
        std::size_t hits = 0;
        for (const auto& s : samples) {
            if (!(s.overlap > threshold)) continue;
            ++bin.count;
            times.push_back(s.elapsed);
            hits += s.success ? 1 : 0;
            if (s.translation_error) te.push_back(*s.translation_error);
            if (s.rotation_error) re.push_back(*s.rotation_error);
        }
        if (bin.count > 0) {
            double mean = 0.0, sd = 0.0;
            if (!te.empty()) {
                mean_std(te, mean, sd);
                bin.mean_translation_error = mean;
            }
            if (!re.empty()) {
                mean_std(re, mean, sd);
                bin.mean_rotation_error = mean;
            }
            bin.recall = static_cast<double>(hits) / static_cast<double>(bin.count);
            mean_std(times, mean, sd);
            bin.time_mean = mean;
            bin.time_std = sd;
        }
        bins.push_back(std::move(bin));
    }
    return bins;
}

void write_samples_csv(const fs::path& path, const std::vector<EvalSample>& samples) {
    auto out = open_output(path);
    csv::write_row(out, {"scene_id", "overlap", "te_m", "re_deg", "success", "inliers", "elapsed_s", "error"});
    for (const auto& s : samples)
        csv::write_row(out, {s.scene_id, csv::format(s.overlap), format_optional(s.translation_error),
                             format_optional(s.rotation_error), s.success ? "1" : "0", std::to_string(s.inliers),
                             csv::format(s.elapsed), s.error});
    if (!out) throw FormatError("write failed: " + path.string());
}

void write_summary_csv(const fs::path& path, const std::vector<EvalBin>& bins) {
    auto out = open_output(path);
    csv::write_row(out, {"bin", "count", "mte_m", "mre_deg", "recall", "time_mean_s", "time_std_s"});
    for (const auto& b : bins)
        csv::write_row(out, {b.label, std::to_string(b.count), format_optional(b.mean_translation_error),
                             format_optional(b.mean_rotation_error), format_optional(b.recall),
                             format_optional(b.time_mean), format_optional(b.time_std)});
    if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<EvalBin> run_eval(const Common& common, const EvalOptions& opt, std::ostream& log) {
    const Model model = load_model(opt.weights);
    const auto pairs = load_split(opt.data);
    if (pairs.empty()) throw InvalidArgumentError("eval: dataset is empty");
    const auto rows = evaluate_pairs(pairs, model, pipeline_config(common, opt.icp), common.seed, common.threads);
    const auto bins = aggregate(rows);
    write_samples_csv(opt.out / "samples.csv", rows);
    write_summary_csv(opt.out / "summary.csv", bins);
    for (const auto& b : bins) {
        log << b.label << ": " << b.count << " samples";
        if (b.recall) log << ", recall " << *b.recall;
        log << '\n';
    }
    return bins;
}

std::vector<StageStats> run_bench(const Common& common, const BenchOptions& opt, std::ostream& log) {
    if (opt.repetitions == 0) throw InvalidArgumentError("bench: repetitions must be positive");
    const Model model = load_model(opt.weights);
    const auto pairs = load_split(opt.data, opt.read_delay_ms);
    if (pairs.empty()) throw InvalidArgumentError("bench: dataset is empty");
    const PipelineConfig cfg = pipeline_config(common, opt.icp);

    const char* names[] = {"downsample", "encode", "attention", "match", "ransac", "icp", "total"};
    std::vector<std::vector<double>> samples(std::size(names));
    std::size_t failures = 0;
    for (std::size_t rep = 0; rep < opt.repetitions; ++rep) {
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            try {
                const auto r = register_pair(pairs[i].source, pairs[i].target, model, cfg);
                const auto& t = r.timings;
                const double v[] = {t.downsample, t.encode, t.attention, t.match, t.ransac, t.icp, t.total};
                for (std::size_t s = 0; s < std::size(names); ++s) samples[s].push_back(v[s]);
            } catch (const StageError&) {
                ++failures;
            }
        }
    }
    if (samples[0].empty()) throw StageError("bench", "every registration failed", true);
    std::vector<StageStats> stats;
    for (std::size_t s = 0; s < std::size(names); ++s) {
        StageStats st{names[s], 0.0, 0.0};
        mean_std(samples[s], st.mean_ms, st.std_ms);
        stats.push_back(st);
    }
    log << "timed " << samples[0].size() << " registrations";
    if (failures) log << " (" << failures << " failed and were left out)";
    log << '\n';
    if (!opt.out.empty()) write_bench_csv(opt.out, stats);
    return stats;
}

void write_bench_csv(const fs::path& path, const std::vector<StageStats>& stats) {
    auto out = open_output(path);
    csv::write_row(out, {"stage", "mean_ms", "std_ms"});
    for (const auto& s : stats) csv::write_row(out, {s.stage, csv::format(s.mean_ms), csv::format(s.std_ms)});
    if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace pcreg::cli
