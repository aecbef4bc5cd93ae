#include "pcreg/model.hpp"

#include <cmath>

#include "pcreg/io.hpp"

namespace pcreg {

void ModelConfig::validate() const {
    encoder.validate();
    if (self_neighbors == 0 || cross_neighbors == 0)
        throw InvalidArgumentError("attention neighbor counts must be positive");
    if (self_neighbors + 1 > encoder.keypoints())
        throw InvalidArgumentError("attention.self_neighbors must be below the key point count");
    if (cross_neighbors > encoder.keypoints())
        throw InvalidArgumentError("attention.cross_neighbors must not exceed the key point count");
}

ModelConfig ModelConfig::full() {
    ModelConfig c;
    c.encoder.sa = {SaConfig{4096, 1.0, {32, 32}}, SaConfig{2048, 2.0, {64, 64}}, SaConfig{512, 4.0, {128, 128}},
                    SaConfig{128, 8.0, {256, 256}}};
    c.encoder.fp_widths = {128, 128};
    c.self_neighbors = 32;
    c.cross_neighbors = 32;
    return c;
}

ModelConfig ModelConfig::desk() {
    ModelConfig c;
    c.encoder.sa = {SaConfig{1024, 1.0, {16, 16}}, SaConfig{512, 2.0, {32, 32}}, SaConfig{256, 4.0, {32, 32}},
                    SaConfig{64, 8.0, {64, 64}}};
    c.encoder.fp_widths = {32, 32};
    c.self_neighbors = 16;
    c.cross_neighbors = 16;
    return c;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.encoder.sa = {SaConfig{24, 0.5, {5, 4}}, SaConfig{20, 0.8, {5}}, SaConfig{16, 1.2, {4}}, SaConfig{6, 2.5, {5}}};
    c.encoder.fp_widths = {6, 4};
    c.encoder.max_neighbors = 8;
    c.self_neighbors = 2;
    c.cross_neighbors = 2;
    return c;
}

Model Model::initialize(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    Model m;
    m.config = config;
    m.encoder = EncoderWeights::uniform(config.encoder, rng);
    m.attention = AttentionWeights::uniform(config.encoder.feature_dim(), rng);
    return m;
}

Model Model::zeros(const ModelConfig& config) {
    config.validate();
    Model m;
    m.config = config;
    m.encoder = EncoderWeights::zeros(config.encoder);
    m.attention = AttentionWeights::zeros(config.encoder.feature_dim());
    return m;
}

Model Model::zeros_like() const {
    Model m;
    m.config = config;
    m.encoder = encoder.zeros_like();
    m.attention = attention.zeros_like();
    return m;
}

namespace {

void add_mlp(std::vector<ParameterView>& out, const std::string& prefix, Mlp& mlp) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        auto& layer = mlp.layers[l];
        const std::string base = prefix + ".mlp." + std::to_string(l);
        out.push_back({base + ".weight", layer.weight.data(), layer.weight.rows(), layer.weight.cols(), 2});
        out.push_back({base + ".bias", layer.bias.data(), layer.bias.size(), 1, 1});
    }
}

void add_matrix(std::vector<ParameterView>& out, const std::string& name, Eigen::MatrixXd& m) {
    out.push_back({name, m.data(), m.rows(), m.cols(), 2});
}

}  // namespace

std::vector<ParameterView> parameters(Model& model) {
    std::vector<ParameterView> out;
    for (std::size_t l = 0; l < 4; ++l) add_mlp(out, "sa" + std::to_string(l + 1), model.encoder.sa[l]);
    add_mlp(out, "fp", model.encoder.fp);
    add_matrix(out, "att.self.wf", model.attention.self_gate);
    add_matrix(out, "att.self.ws", model.attention.self_core);
    add_matrix(out, "att.cross.wf", model.attention.cross_gate);
    add_matrix(out, "att.cross.ws", model.attention.cross_core);
    return out;
}

std::size_t parameter_count(const Model& model) {
    std::size_t n = 0;
    for (const auto& p : parameters(const_cast<Model&>(model))) n += static_cast<std::size_t>(p.size());
    return n;
}

namespace {

Tensor vector_tensor(const std::vector<float>& values) {
    return Tensor{{values.size()}, values};
}

const Tensor& require(const TensorTable& table, const std::string& name, const std::filesystem::path& path) {
    const auto it = table.find(name);
    if (it == table.end()) throw FormatError(path.string() + ": missing tensor '" + name + "'");
    return it->second;
}

std::size_t as_count(float v, const std::string& what, const std::filesystem::path& path) {
    if (!(v >= 1.0f) || v != std::floor(v) || v > 1e9f)
        throw FormatError(path.string() + ": invalid " + what);
    return static_cast<std::size_t>(v);
}

}  // namespace

void save_model(const std::filesystem::path& path, const Model& model) {
    model.config.validate();
    TensorTable table;
    const auto& enc = model.config.encoder;
    std::vector<float> samples, radii;
    for (const auto& sa : enc.sa) {
        samples.push_back(static_cast<float>(sa.samples));
        radii.push_back(static_cast<float>(sa.radius));
    }
    table["meta.sa.samples"] = vector_tensor(samples);
    table["meta.sa.radius"] = vector_tensor(radii);
    table["meta.max_neighbors"] = vector_tensor({static_cast<float>(enc.max_neighbors)});
    table["meta.attention.k"] = vector_tensor(
            {static_cast<float>(model.config.self_neighbors), static_cast<float>(model.config.cross_neighbors)});

    for (const auto& p : parameters(const_cast<Model&>(model))) {
        Tensor t;
        if (p.rank == 1) {
            t.dims = {static_cast<std::uint64_t>(p.rows)};
        } else {
            t.dims = {static_cast<std::uint64_t>(p.rows), static_cast<std::uint64_t>(p.cols)};
        }
        t.data.reserve(static_cast<std::size_t>(p.size()));
        for (Eigen::Index r = 0; r < p.rows; ++r)
            for (Eigen::Index c = 0; c < p.cols; ++c) t.data.push_back(static_cast<float>(p.data[c * p.rows + r]));
        table[p.name] = std::move(t);
    }
    write_tensors(path, table);
}

Model load_model(const std::filesystem::path& path) {
    const TensorTable table = read_tensors(path);
    const auto& samples = require(table, "meta.sa.samples", path);
    const auto& radii = require(table, "meta.sa.radius", path);
    const auto& max_nb = require(table, "meta.max_neighbors", path);
    const auto& k = require(table, "meta.attention.k", path);
    if (samples.data.size() != 4 || radii.data.size() != 4 || max_nb.data.size() != 1 || k.data.size() != 2)
        throw FormatError(path.string() + ": malformed meta tensors");

    auto count_layers = [&](const std::string& prefix) {
        std::size_t n = 0;
        while (table.contains(prefix + ".mlp." + std::to_string(n) + ".weight")) ++n;
        return n;
    };
    auto widths_of = [&](const std::string& prefix) {
        std::vector<std::size_t> widths;
        const std::size_t layers = count_layers(prefix);
        if (layers == 0) throw FormatError(path.string() + ": no layers for '" + prefix + "'");
        for (std::size_t l = 0; l < layers; ++l) {
            const auto& w = require(table, prefix + ".mlp." + std::to_string(l) + ".weight", path);
            if (w.dims.size() != 2) throw FormatError(path.string() + ": '" + prefix + "' weight must be rank 2");
            widths.push_back(static_cast<std::size_t>(w.dims[1]));
        }
        return widths;
    };

    ModelConfig cfg;
    for (std::size_t l = 0; l < 4; ++l) {
        const std::string prefix = "sa" + std::to_string(l + 1);
        cfg.encoder.sa[l] = SaConfig{as_count(samples.data[l], "meta.sa.samples", path),
                                     static_cast<double>(radii.data[l]), widths_of(prefix)};
    }
    cfg.encoder.fp_widths = widths_of("fp");
    cfg.encoder.max_neighbors = as_count(max_nb.data[0], "meta.max_neighbors", path);
    cfg.self_neighbors = as_count(k.data[0], "meta.attention.k", path);
    cfg.cross_neighbors = as_count(k.data[1], "meta.attention.k", path);
    const auto first = require(table, "sa1.mlp.0.weight", path).dims[0];
    if (first < 4) throw FormatError(path.string() + ": 'sa1.mlp.0.weight' has too few input rows");
    cfg.encoder.input_dim = static_cast<std::size_t>(first - 3);
    try {
        cfg.validate();
    } catch (const InvalidArgumentError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }

    // Shapes implied by the config must match every stored tensor exactly.
    Model model = Model::zeros(cfg);
    std::size_t consumed = 4;
    for (auto& p : parameters(model)) {
        const auto& t = require(table, p.name, path);
        const std::vector<std::uint64_t> expected =
                p.rank == 1 ? std::vector<std::uint64_t>{static_cast<std::uint64_t>(p.rows)}
                            : std::vector<std::uint64_t>{static_cast<std::uint64_t>(p.rows),
                                                         static_cast<std::uint64_t>(p.cols)};
        if (t.dims != expected) throw FormatError(path.string() + ": tensor '" + p.name + "' breaks the dimension chain");
        std::size_t i = 0;
        for (Eigen::Index r = 0; r < p.rows; ++r)
            for (Eigen::Index c = 0; c < p.cols; ++c) p.data[c * p.rows + r] = static_cast<double>(t.data[i++]);
        ++consumed;
    }
    if (consumed != table.size()) throw FormatError(path.string() + ": unexpected extra tensors");
    return model;
}

}  // namespace pcreg
