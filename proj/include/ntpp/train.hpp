#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ntpp/model.hpp"
#include "ntpp/sequence.hpp"

namespace ntpp {

struct TrainHyper {
    double lr = 3e-3;
    std::size_t steps = 500;
    std::size_t batch = 8;
    double grad_clip = 1.0;
    std::size_t window = 32;  // frames per training crop
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;  // crop sampling
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::size_t step, double loss_value);
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_history;  // mean batch loss per step
};

using TrainProgress = std::function<void(std::size_t step, double loss)>;

/// Single-stage Adam training on random crops of the corpus, with global-norm
/// gradient clipping. Deterministic for a given config, corpus and hyper.
TrainResult train(const ModelConfig& config, const std::vector<DualTokenStream>& corpus,
                  const TrainHyper& hyper, const TrainProgress& progress = {});

/// Continues training from existing parameters (modified in place).
std::vector<double> train_params(ModelParams& params, const std::vector<DualTokenStream>& corpus,
                                 const TrainHyper& hyper, const TrainProgress& progress = {});

/// Mean of the last `window` entries (all of them if fewer).
double trailing_mean(const std::vector<double>& values, std::size_t window);

// ---- checkpoint --------------------------------------------------------------
// <dir>/manifest.json : {"format": "ntpp-checkpoint", "version": 1, "config": {...},
//                        "step": n, "loss_history": [...], "dtype": "float64",
//                        "byte_order": "little", "tensors": [{"name", "shape",
//                        "offset", "count"}, ...]}
// <dir>/weights.bin   : tensors concatenated in ModelParams::named_tensors() order,
//                        each as little-endian IEEE-754 binary64, row-major.

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j, const ModelConfig& defaults = {});

struct Checkpoint {
    ModelParams params;
    std::size_t step = 0;
    std::vector<double> loss_history;
};

void save_checkpoint(const std::string& dir, const ModelParams& params, std::size_t step,
                     const std::vector<double>& loss_history);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace ntpp
