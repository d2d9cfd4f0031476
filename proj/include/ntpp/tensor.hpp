#pragma once

// Dense row-major float64 tensors with a small reverse-mode autodiff engine.
//
// Every op returns a new Tensor whose node remembers its inputs and a backward
// rule. backward(loss) sorts the reachable nodes topologically and runs each
// rule once, accumulating into grad buffers of nodes that require gradients.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ntpp {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

enum class NumericErrorKind { shape_mismatch, non_finite, invalid_argument };

class NumericError : public std::runtime_error {
public:
    NumericError(NumericErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    NumericErrorKind kind() const noexcept { return kind_; }

private:
    NumericErrorKind kind_;
};

/// Summation order for reductions over an axis whose entries come in
/// (channel-A half, channel-B half) blocks. With half == 0 the reduction is a
/// plain left-to-right sum. With half == h, indices are grouped into blocks of
/// 2h; each block contributes (sum of first h) + (sum of last h), and blocks
/// are accumulated left to right. Because a single addition commutes exactly,
/// exchanging the two halves of every block leaves the result bit-identical.
struct ReduceOrder {
    std::size_t half = 0;
};

template <class Term>
double ordered_sum(std::size_t n, ReduceOrder order, Term&& term) {
    if (order.half == 0) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += term(j);
        return acc;
    }
    const std::size_t h = order.half;
    double acc = 0.0;
    for (std::size_t base = 0; base < n; base += 2 * h) {
        double first = 0.0;
        double second = 0.0;
        for (std::size_t j = base; j < base + h && j < n; ++j) first += term(j);
        for (std::size_t j = base + h; j < base + 2 * h && j < n; ++j) second += term(j);
        acc += first + second;
    }
    return acc;
}

namespace detail {
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    void accumulate(std::size_t idx, double g) {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        grad[idx] += g;
    }
    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};
}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rows() const { return node_->shape.at(0); }
    std::size_t cols() const { return node_->shape.size() > 1 ? node_->shape[1] : 1; }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const double> data() const { return node_->data; }
    std::span<double> mutable_data() { return node_->data; }
    double item() const;
    double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    /// Gradient buffer; all zeros if nothing has been accumulated yet.
    std::span<const double> grad() const;
    void zero_grad();

    /// Fresh leaf holding a copy of the data, detached from any graph.
    Tensor detach_copy(bool requires_grad = false) const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

/// Nodes reachable from a root, inputs before consumers.
struct ComputeGraph {
    std::vector<std::shared_ptr<detail::Node>> nodes;

    static ComputeGraph collect(const Tensor& root);
};

/// Runs reverse-mode differentiation from a scalar loss. Gradients accumulate
/// into every reachable node with requires_grad set.
void backward(const Tensor& loss);
void backward(const ComputeGraph& graph, const Tensor& loss);

/// While alive on this thread, ops produce leaves without backward records.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// ---- forward ops ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, ReduceOrder order = {});
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
/// a[m,n] + b[n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sum(const Tensor& a);
Tensor gelu(const Tensor& a);
/// Softmax over the last axis of a 2-D tensor (or the only axis of a 1-D one).
Tensor softmax(const Tensor& a, ReduceOrder order = {});
/// x / rms(x) * gain, per row.
Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps = 1e-6);
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);
/// Mean negative log-likelihood over rows whose target is >= 0. Rows with a
/// negative target are ignored. The row reduction follows `order`.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     ReduceOrder order = {});
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_cols(std::span<const Tensor> parts);
/// Entries whose mask byte is zero are replaced by `value`; their gradient is zero.
Tensor masked_fill(const Tensor& a, std::span<const std::uint8_t> keep, double value);
/// Rotates consecutive column pairs (2j, 2j+1) of each row by angle[row, j].
Tensor rotate_pairs(const Tensor& a, std::span<const double> cos_table,
                    std::span<const double> sin_table);

double gelu_value(double x);

}  // namespace ntpp
