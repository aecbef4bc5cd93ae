#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "commands.hpp"

namespace fs = std::filesystem;
using namespace pcreg;

int main(int argc, char** argv) {
    CLI::App app{"pcreg: learned point cloud registration (generate, train, register, eval, bench)"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    std::string config_path;
    app.add_option("--seed", seed, "Seed for scene generation, training and RANSAC")->capture_default_str();
    app.add_option("--config", config_path, "Flat key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    cli::GenerateOptions gen;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset split");
    generate->add_option("--out", gen.out, "Dataset root; the split is written to <out>/<split>")->required();
    generate->add_option("--count", gen.count, "Number of scene pairs")->required()->check(CLI::PositiveNumber);
    generate->add_option("--split", gen.split, "train, val or test")
            ->capture_default_str()
            ->check(CLI::IsMember({"train", "val", "test"}));

    cli::TrainOptions tr;
    auto* train = app.add_subcommand("train", "Train on <data>/train, select on <data>/val");
    train->add_option("--data", tr.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", tr.weights, "Output weights file (FRWT)")->required();
    train->add_option("--log", tr.log_csv, "Per-epoch CSV (default <out>.csv)");

    cli::RegisterOptions reg;
    double kappa = 0.0, temperature = 0.0;
    auto* registration = app.add_subcommand("register", "Register a source cloud onto a target cloud");
    registration->add_option("source", reg.source, "Source cloud (FREG or ASCII PLY)")->required();
    registration->add_option("target", reg.target, "Target cloud (FREG or ASCII PLY)")->required();
    registration->add_option("--weights", reg.weights, "Model weights (FRWT)")->required();
    registration->add_option("--result", reg.result_json, "Write a JSON record with inliers and stage timings");
    registration->add_flag("--icp", reg.icp, "Refine with point-to-point ICP");
    auto* kappa_opt = registration->add_option("--kappa", kappa, "RANSAC inlier threshold in meters");
    auto* temp_opt = registration->add_option("--temperature", temperature, "Softmax temperature");

    cli::EvalOptions ev;
    auto* eval = app.add_subcommand("eval", "Evaluate registration recall on a dataset split");
    eval->add_option("--data", ev.data, "Split directory containing manifest.jsonl")->required();
    eval->add_option("--weights", ev.weights, "Model weights (FRWT)")->required();
    eval->add_option("--out", ev.out, "Output directory for samples.csv and summary.csv")->required();
    eval->add_flag("--icp", ev.icp, "Refine with point-to-point ICP");

    cli::BenchOptions bn;
    bool no_icp = false;
    auto* bench = app.add_subcommand("bench", "Per-stage timing over a dataset split");
    bench->add_option("--data", bn.data, "Split directory containing manifest.jsonl")->required();
    bench->add_option("--weights", bn.weights, "Model weights (FRWT)")->required();
    bench->add_option("--repetitions", bn.repetitions, "Passes over the split")->capture_default_str();
    bench->add_option("--out", bn.out, "Output CSV");
    bench->add_flag("--no-icp", no_icp, "Skip the ICP stage");
    bench->add_option("--read-delay-ms", bn.read_delay_ms, "Artificial delay per loaded pair (testing)")
            ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kOk : cli::kUsage;
    }

    try {
        cli::Common common;
        common.seed = seed;
        common.threads = threads;
        if (!config_path.empty()) common.settings = load_config(config_path);

        if (*generate) {
            cli::run_generate(common, gen, std::cerr);
        } else if (*train) {
            cli::run_train(common, tr, std::cerr);
        } else if (*registration) {
            if (*kappa_opt) reg.kappa = kappa;
            if (*temp_opt) reg.temperature = temperature;
            const auto r = cli::run_register(common, reg, std::cout);
            std::cerr << "inliers " << r.registration.inlier_count << " / " << r.correspondences.size() << ", "
                      << r.timings.total << " ms\n";
        } else if (*eval) {
            cli::run_eval(common, ev, std::cerr);
        } else if (*bench) {
            bn.icp = !no_icp;
            for (const auto& s : cli::run_bench(common, bn, std::cerr))
                std::cout << s.stage << ' ' << s.mean_ms << " ms (std " << s.std_ms << ")\n";
        }
    } catch (...) {
        return cli::report_error(std::cerr);
    }
    return cli::kOk;
}
