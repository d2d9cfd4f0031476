#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "ntpp/synthetic.hpp"
#include "ntpp/train.hpp"

using namespace ntpp;
namespace fs = std::filesystem;

namespace {

ModelConfig small() {
    ModelConfig c;
    c.d_model = 16;
    c.n_layers = 1;
    c.n_heads = 2;
    c.vocab = 8;
    c.ffn_mult = 2;
    c.max_steps = 64;
    return c;
}

std::vector<DualTokenStream> corpus() {
    DialogueProfile p;
    p.vocab = 8;
    return generate(p, 200, 8).streams;
}

TrainHyper quick(std::size_t steps) {
    TrainHyper h;
    h.steps = steps;
    h.batch = 2;
    h.window = 16;
    h.lr = 1e-2;
    return h;
}

fs::path temp_dir(const char* name) {
    auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("training lowers the loss and is deterministic") {
    const auto data = corpus();
    const auto r1 = train(small(), data, quick(60));
    const auto r2 = train(small(), data, quick(60));
    CHECK(r1.loss_history == r2.loss_history);
    REQUIRE(r1.loss_history.size() == 60);
    const double first = std::accumulate(r1.loss_history.begin(), r1.loss_history.begin() + 5, 0.0) / 5;
    CHECK(trailing_mean(r1.loss_history, 5) < 0.9 * first);
}

TEST_CASE("checkpoints round trip bit-exactly") {
    const auto data = corpus();
    const auto r = train(small(), data, quick(5));
    const auto dir = temp_dir("ntpp_ckpt_test");
    save_checkpoint(dir.string(), r.params, 5, r.loss_history);
    const Checkpoint ck = load_checkpoint(dir.string());
    CHECK(ck.step == 5);
    CHECK(ck.loss_history == r.loss_history);
    CHECK(ck.params.config == r.params.config);
    const auto a = r.params.named_tensors();
    const auto b = ck.params.named_tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin()));
    }
    CHECK(loss_value(r.params, data[0].slice(0, 20)) == loss_value(ck.params, data[0].slice(0, 20)));
    CHECK(fs::file_size(dir / "weights.bin") == 8 * r.params.parameter_count());
    fs::remove_all(dir);
}

TEST_CASE("corrupt checkpoints are rejected") {
    const auto dir = temp_dir("ntpp_ckpt_bad");
    CHECK_THROWS_AS(load_checkpoint(dir.string()), ModelError);
    const auto r = init_params(small());
    save_checkpoint(dir.string(), r, 0, {});
    fs::resize_file(dir / "weights.bin", 16);
    CHECK_THROWS_AS(load_checkpoint(dir.string()), ModelError);
    std::ofstream(dir / "manifest.json") << "{\"format\": \"other\"}";
    CHECK_THROWS_AS(load_checkpoint(dir.string()), ModelError);
    fs::remove_all(dir);
}

TEST_CASE("non-finite losses stop training") {
    ModelParams p = init_params(small());
    p.head.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
    try {
        train_params(p, corpus(), quick(3));
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        CHECK(e.step() == 0);
    }
}

TEST_CASE("config JSON round trip and trailing mean") {
    ModelConfig c = small();
    c.depth = 3;
    c.rope_base = 500.0;
    CHECK(config_from_json(config_to_json(c)) == c);
    CHECK(trailing_mean({1.0, 2.0, 3.0, 4.0}, 2) == 3.5);
    CHECK(trailing_mean({1.0, 2.0}, 10) == 1.5);
}
