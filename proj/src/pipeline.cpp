#include "pcreg/pipeline.hpp"

#include <chrono>

namespace pcreg {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <typename Fn>
auto run_stage(const char* stage, double* elapsed_ms, Fn&& fn) {
    const auto start = Clock::now();
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            if (elapsed_ms) *elapsed_ms += ms_since(start);
        } else {
            auto out = fn();
            if (elapsed_ms) *elapsed_ms += ms_since(start);
            return out;
        }
    } catch (const StageError&) {
        throw;
    } catch (const RegistrationFailure& e) {
        throw StageError(stage, e.what(), true);
    } catch (const std::exception& e) {
        throw StageError(stage, e.what(), false);
    }
}

}  // namespace

PairFeatures forward_pair(const Model& model, const PointCloud& source, const PointCloud& target, double temperature,
                          PairTrace* trace, StageTimings* timings) {
    const auto& cfg = model.config;
    KeyPointSet src = run_stage("encode", timings ? &timings->encode : nullptr, [&] {
        return encode(source, cfg.encoder, model.encoder, trace ? &trace->encode_source : nullptr);
    });
    KeyPointSet tgt = run_stage("encode", timings ? &timings->encode : nullptr, [&] {
        return encode(target, cfg.encoder, model.encoder, trace ? &trace->encode_target : nullptr);
    });
    if (trace) {
        trace->encoded_source = src;
        trace->encoded_target = tgt;
    }

    PairFeatures out = run_stage("attention", timings ? &timings->attention : nullptr, [&] {
        const auto& w = model.attention;
        auto s = self_attention(src, w.self_gate, w.self_core, cfg.self_neighbors,
                                trace ? &trace->self_source : nullptr);
        auto t = self_attention(tgt, w.self_gate, w.self_core, cfg.self_neighbors,
                                trace ? &trace->self_target : nullptr);
        auto [cs, ct] = cross_attention(s, t, w.cross_gate, w.cross_core, cfg.cross_neighbors,
                                        trace ? &trace->cross : nullptr);
        return PairFeatures{std::move(cs), std::move(ct), {}};
    });

    out.probabilities = run_stage("match", timings ? &timings->match : nullptr, [&] {
        return match_probability_map(out.source.features, out.target.features, temperature,
                                     trace ? &trace->match : nullptr);
    });
    return out;
}

PipelineResult register_pair(const PointCloud& source, const PointCloud& target, const Model& model,
                             const PipelineConfig& cfg) {
    const auto start = Clock::now();
    PipelineResult result;
    auto& tm = result.timings;

    auto [src, tgt] = run_stage("downsample", &tm.downsample, [&] {
        source.validate();
        target.validate();
        if (source.empty() || target.empty()) throw InvalidArgumentError("empty input cloud");
        if (cfg.voxel_size > 0.0)
            return std::pair{voxel_downsample(source, cfg.voxel_size), voxel_downsample(target, cfg.voxel_size)};
        return std::pair{source, target};
    });
    result.source_points = src.size();
    result.target_points = tgt.size();

    const PairFeatures features = forward_pair(model, src, tgt, cfg.temperature, nullptr, &tm);

    run_stage("match", &tm.match, [&] {
        result.correspondences =
                extract_correspondences(features.probabilities, features.source.coords, features.target.coords);
    });
    result.registration = run_stage("ransac", &tm.ransac, [&] { return ransac_register(result.correspondences, cfg.ransac); });
    result.transform = result.registration.transform;

    if (cfg.icp) {
        result.icp = run_stage("icp", &tm.icp, [&] {
            return icp_refine(src, tgt, result.registration.transform, cfg.icp_config);
        });
        result.transform = result.icp->transform;
    }
    tm.total = ms_since(start);
    return result;
}

}  // namespace pcreg
