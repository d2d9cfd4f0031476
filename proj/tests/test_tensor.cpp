#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ntpp/tensor.hpp"

using namespace ntpp;
using testutil::max_grad_error;
using testutil::random_tensor;

namespace {

// Non-linear scalar read-out so that every output entry gets its own weight.
Tensor readout(const Tensor& t) { return sum(gelu(scale(t, 0.8))); }

}  // namespace

TEST_CASE("matmul, transpose, add and scale gradients match finite differences") {
    std::mt19937_64 rng(1);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    Tensor c = random_tensor({2, 3}, rng);
    auto f = [&] { return readout(add(matmul(a, b, ReduceOrder{2}), scale(transpose(c), -1.5))); };
    CHECK(max_grad_error({a, b, c}, f) < 1e-6);
}

TEST_CASE("add_row, rms_norm and embedding gradients") {
    std::mt19937_64 rng(2);
    Tensor table = random_tensor({5, 4}, rng);
    Tensor gain = random_tensor({4}, rng);
    Tensor bias = random_tensor({4}, rng);
    const std::vector<std::int32_t> ids = {3, 0, 3, 4};
    auto f = [&] { return readout(add_row(rms_norm(embedding(table, ids), gain), bias)); };
    CHECK(max_grad_error({table, gain, bias}, f) < 1e-6);
}

TEST_CASE("softmax and cross-entropy gradients") {
    std::mt19937_64 rng(3);
    Tensor x = random_tensor({4, 5}, rng);
    Tensor y = random_tensor({4, 5}, rng);
    const std::vector<std::int32_t> targets = {1, -1, 4, 0};
    auto f = [&] { return add(readout(softmax(x, ReduceOrder{1})), cross_entropy(y, targets, ReduceOrder{2})); };
    CHECK(max_grad_error({x, y}, f) < 1e-6);
}

TEST_CASE("slice, concat, masked_fill and rotate_pairs gradients") {
    std::mt19937_64 rng(4);
    Tensor x = random_tensor({3, 4}, rng);
    const std::vector<std::uint8_t> keep = {1, 0, 1, 1, 0, 1, 1, 1, 1, 1, 0, 0};
    const std::vector<double> angles = {0.3, -1.1, 2.0, 0.5, 0.0, 1.7};
    std::vector<double> cs, sn;
    for (double t : angles) {
        cs.push_back(std::cos(t));
        sn.push_back(std::sin(t));
    }
    auto f = [&] {
        Tensor r = rotate_pairs(x, cs, sn);
        const Tensor parts[] = {slice_cols(r, 2, 4), slice_cols(r, 0, 2)};
        return readout(masked_fill(concat_cols(parts), keep, -3.0));
    };
    CHECK(max_grad_error({x}, f) < 1e-6);
}

TEST_CASE("cross-entropy value is the mean NLL over targeted rows") {
    const Tensor logits = Tensor::from({2, 3}, {1.0, 2.0, 0.5, -1.0, 0.0, 3.0});
    const std::vector<std::int32_t> targets = {2, -1};
    const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
    CHECK(cross_entropy(logits, targets).item() == doctest::Approx(lse - 0.5).epsilon(1e-14));
}

TEST_CASE("masked entries receive the fill value and no gradient") {
    Tensor x = Tensor::from({1, 3}, {1.0, 2.0, 3.0}, true);
    const std::vector<std::uint8_t> keep = {1, 0, 1};
    Tensor y = masked_fill(x, keep, -1e30);
    CHECK(y.at(0, 1) == -1e30);
    backward(sum(y));
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("gelu uses the tanh approximation") {
    for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
        const double expect = 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
        CHECK(gelu_value(x) == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("pair-block summation is invariant to swapping the halves of each block") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (std::size_t h : {1u, 2u, 3u}) {
        std::vector<double> x(8 * h);
        for (auto& v : x) v = u(rng);
        std::vector<double> swapped(x.size());
        for (std::size_t base = 0; base < x.size(); base += 2 * h) {
            for (std::size_t j = 0; j < h; ++j) {
                swapped[base + j] = x[base + h + j];
                swapped[base + h + j] = x[base + j];
            }
        }
        const double s1 = ordered_sum(x.size(), ReduceOrder{h}, [&](std::size_t j) { return x[j]; });
        const double s2 = ordered_sum(x.size(), ReduceOrder{h}, [&](std::size_t j) { return swapped[j]; });
        CHECK(s1 == s2);
    }
}

TEST_CASE("errors") {
    const Tensor a = Tensor::zeros({2, 3});
    const Tensor b = Tensor::zeros({2, 3});
    try {
        (void)matmul(a, b);
        FAIL("expected shape mismatch");
    } catch (const NumericError& e) {
        CHECK(e.kind() == NumericErrorKind::shape_mismatch);
    }
    const Tensor bad = Tensor::from({1, 2}, {NAN, 1.0});
    try {
        (void)softmax(bad);
        FAIL("expected non-finite error");
    } catch (const NumericError& e) {
        CHECK(e.kind() == NumericErrorKind::non_finite);
    }
    Tensor v = Tensor::zeros({3}, true);
    CHECK_THROWS_AS(backward(scale(v, 2.0)), NumericError);
}

TEST_CASE("gradients accumulate across backward calls until cleared") {
    Tensor x = Tensor::from({2}, {1.0, -2.0}, true);
    backward(sum(scale(x, 3.0)));
    backward(sum(scale(x, 3.0)));
    CHECK(x.grad()[0] == 6.0);
    x.zero_grad();
    backward(sum(x));
    CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("no graph is recorded under NoGradGuard") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    NoGradGuard guard;
    const Tensor y = scale(x, 2.0);
    CHECK_FALSE(y.requires_grad());
}
