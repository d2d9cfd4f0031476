#include "ntpp/train.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

namespace ntpp {

using nlohmann::json;

TrainingDiverged::TrainingDiverged(std::size_t step, double loss_value)
    : std::runtime_error("training diverged at step " + std::to_string(step) +
                         ": loss = " + std::to_string(loss_value)),
      step_(step) {}

double trailing_mean(const std::vector<double>& values, std::size_t window) {
    if (values.empty()) return 0.0;
    const std::size_t n = std::min(window, values.size());
    double acc = 0.0;
    for (std::size_t i = values.size() - n; i < values.size(); ++i) acc += values[i];
    return acc / static_cast<double>(n);
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

DualTokenStream sample_crop(const std::vector<DualTokenStream>& corpus, std::size_t window,
                            std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
    const auto& s = corpus[pick(rng)];
    if (s.steps() <= window) return s;
    std::uniform_int_distribution<std::size_t> start(0, s.steps() - window);
    const std::size_t b = start(rng);
    return s.slice(b, b + window);
}

}  // namespace

std::vector<double> train_params(ModelParams& params, const std::vector<DualTokenStream>& corpus,
                                 const TrainHyper& hyper, const TrainProgress& progress) {
    if (corpus.empty()) throw ModelError("train: empty corpus");
    for (const auto& s : corpus) {
        if (s.steps() < 2) throw ModelError("train: every stream needs at least 2 frames");
    }
    if (hyper.window + 1 > params.config.max_steps) {
        throw ModelError("train: window does not fit max_steps");
    }
    const auto tensors = params.tensors();
    AdamState adam;
    for (const auto& t : tensors) {
        adam.m.emplace_back(t.numel(), 0.0);
        adam.v.emplace_back(t.numel(), 0.0);
    }
    std::mt19937_64 rng(hyper.seed);
    std::vector<double> history;
    history.reserve(hyper.steps);
    const double inv_batch = 1.0 / static_cast<double>(hyper.batch);

    for (std::size_t step = 0; step < hyper.steps; ++step) {
        params.zero_grad();
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < hyper.batch; ++b) {
            const DualTokenStream crop = sample_crop(corpus, hyper.window, rng);
            try {
                Tensor l = loss(params, crop);
                batch_loss += l.item();
                backward(scale(l, inv_batch));
            } catch (const NumericError& e) {
                if (e.kind() != NumericErrorKind::non_finite) throw;
                throw TrainingDiverged(step, std::numeric_limits<double>::quiet_NaN());
            }
        }
        batch_loss *= inv_batch;
        if (!std::isfinite(batch_loss)) throw TrainingDiverged(step, batch_loss);
        history.push_back(batch_loss);

        double sq = 0.0;
        for (const auto& t : tensors)
            for (double g : t.grad()) sq += g * g;
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm)) throw TrainingDiverged(step, norm);
        const double clip = (hyper.grad_clip > 0.0 && norm > hyper.grad_clip) ? hyper.grad_clip / norm : 1.0;

        const double t1 = static_cast<double>(step + 1);
        const double bc1 = 1.0 - std::pow(hyper.beta1, t1);
        const double bc2 = 1.0 - std::pow(hyper.beta2, t1);
        for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
            Tensor p = tensors[ti];
            auto data = p.mutable_data();
            auto grad = p.grad();
            auto& m = adam.m[ti];
            auto& v = adam.v[ti];
            for (std::size_t i = 0; i < data.size(); ++i) {
                const double g = grad[i] * clip;
                m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
                v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                data[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.adam_eps);
            }
        }
        if (progress) progress(step, batch_loss);
    }
    params.zero_grad();
    return history;
}

TrainResult train(const ModelConfig& config, const std::vector<DualTokenStream>& corpus,
                  const TrainHyper& hyper, const TrainProgress& progress) {
    TrainResult r{init_params(config), {}};
    r.loss_history = train_params(r.params, corpus, hyper, progress);
    return r;
}

// ---- checkpoint --------------------------------------------------------------

json config_to_json(const ModelConfig& c) {
    return json{{"d_model", c.d_model},     {"n_layers", c.n_layers},   {"n_heads", c.n_heads},
                {"vocab", c.vocab},         {"depth", c.depth},         {"max_steps", c.max_steps},
                {"ffn_mult", c.ffn_mult},   {"rope_base", c.rope_base}, {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j, const ModelConfig& defaults) {
    ModelConfig c = defaults;
    c.d_model = j.value("d_model", c.d_model);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.vocab = j.value("vocab", c.vocab);
    c.depth = j.value("depth", c.depth);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
    c.rope_base = j.value("rope_base", c.rope_base);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

void save_checkpoint(const std::string& dir, const ModelParams& params, std::size_t step,
                     const std::vector<double>& loss_history) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json tensors = json::array();
    std::ofstream bin(fs::path(dir) / "weights.bin", std::ios::binary);
    if (!bin) throw ModelError("cannot write checkpoint weights in " + dir);
    std::size_t offset = 0;
    for (const auto& [name, t] : params.named_tensors()) {
        tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.numel()}});
        for (double v : t.data()) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            char bytes[8];
            for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
            bin.write(bytes, 8);
        }
        offset += t.numel();
    }
    json manifest{{"format", "ntpp-checkpoint"},
                  {"version", 1},
                  {"config", config_to_json(params.config)},
                  {"step", step},
                  {"loss_history", loss_history},
                  {"dtype", "float64"},
                  {"byte_order", "little"},
                  {"tensors", tensors}};
    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw ModelError("cannot write checkpoint manifest in " + dir);
    mf << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw ModelError("no checkpoint manifest in " + dir);
    json manifest;
    try {
        manifest = json::parse(mf);
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed checkpoint manifest: ") + e.what());
    }
    if (manifest.value("format", "") != "ntpp-checkpoint") {
        throw ModelError("not an ntpp checkpoint: " + dir);
    }
    Checkpoint ck;
    ck.params = init_params(config_from_json(manifest.at("config")));
    ck.step = manifest.value("step", std::size_t{0});
    ck.loss_history = manifest.value("loss_history", std::vector<double>{});

    std::ifstream bin(fs::path(dir) / "weights.bin", std::ios::binary);
    if (!bin) throw ModelError("no checkpoint weights in " + dir);
    std::vector<char> raw((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    auto named = ck.params.named_tensors();
    const auto& entries = manifest.at("tensors");
    if (entries.size() != named.size()) throw ModelError("checkpoint tensor count mismatch");
    for (std::size_t k = 0; k < named.size(); ++k) {
        auto& [name, t] = named[k];
        const auto& e = entries[k];
        if (e.at("name").get<std::string>() != name || e.at("shape").get<Shape>() != t.shape()) {
            throw ModelError("checkpoint tensor '" + name + "' does not match config");
        }
        const auto offset = e.at("offset").get<std::size_t>();
        if ((offset + t.numel()) * 8 > raw.size()) throw ModelError("checkpoint weights truncated");
        auto data = t.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) {
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[(offset + i) * 8 + b]))
                        << (8 * b);
            }
            data[i] = std::bit_cast<double>(bits);
        }
    }
    return ck;
}

}  // namespace ntpp
