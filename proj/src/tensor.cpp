#include "ntpp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ntpp {

namespace {

thread_local bool g_grad_disabled = false;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
    throw NumericError(NumericErrorKind::shape_mismatch,
                       op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_rank2(const std::string& op, const Tensor& t) {
    if (t.shape().size() != 2) {
        throw NumericError(NumericErrorKind::shape_mismatch,
                           op + ": expected a 2-D tensor, got " + shape_str(t.shape()));
    }
}

void require_finite(const std::string& op, const Tensor& t) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) {
            throw NumericError(NumericErrorKind::non_finite, op + ": non-finite input");
        }
    }
}

Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> inputs,
                   std::function<void(Node&)> backward_rule) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    if (!g_grad_disabled) {
        bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const NodePtr& n) { return n->requires_grad; });
        if (any) {
            node->requires_grad = true;
            node->inputs = std::move(inputs);
            node->backward = std::move(backward_rule);
        }
    }
    return Tensor(std::move(node));
}

}  // namespace

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape.empty() || std::any_of(shape.begin(), shape.end(), [](auto s) { return s == 0; })) {
        throw NumericError(NumericErrorKind::invalid_argument,
                           "tensor shape must be non-empty with positive extents, got " +
                               shape_str(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw NumericError(NumericErrorKind::shape_mismatch,
                           "tensor data length " + std::to_string(data.size()) +
                               " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

double Tensor::item() const {
    if (numel() != 1) {
        throw NumericError(NumericErrorKind::shape_mismatch,
                           "item() on non-scalar tensor " + shape_str(shape()));
    }
    return node_->data[0];
}

std::span<const double> Tensor::grad() const {
    if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach_copy(bool requires_grad) const {
    return from(shape(), node_->data, requires_grad);
}

// ---- graph -----------------------------------------------------------------

ComputeGraph ComputeGraph::collect(const Tensor& root) {
    ComputeGraph g;
    std::unordered_set<const Node*> seen;
    // Iterative post-order DFS; a frame is (node, next input index).
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    std::vector<Node*> order;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // Rebuild shared ownership in topological (inputs-first) order.
    std::unordered_map<const Node*, NodePtr> owners;
    owners[root.node().get()] = root.node();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        for (auto& in : (*it)->inputs) owners.emplace(in.get(), in);
    }
    g.nodes.reserve(order.size());
    for (Node* n : order) g.nodes.push_back(owners.at(n));
    return g;
}

void backward(const ComputeGraph& graph, const Tensor& loss) {
    if (loss.numel() != 1) {
        throw NumericError(NumericErrorKind::shape_mismatch,
                           "backward: loss must be scalar, got " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) return;
    loss.node()->accumulate(0, 1.0);
    for (auto it = graph.nodes.rbegin(); it != graph.nodes.rend(); ++it) {
        Node& n = **it;
        if (n.backward && !n.grad.empty()) n.backward(n);
    }
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw NumericError(NumericErrorKind::shape_mismatch,
                           "backward: loss must be scalar, got " + shape_str(loss.shape()));
    }
    backward(ComputeGraph::collect(loss), loss);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_disabled) { g_grad_disabled = true; }
NoGradGuard::~NoGradGuard() { g_grad_disabled = previous_; }

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, ReduceOrder order) {
    require_rank2("matmul", a);
    require_rank2("matmul", b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) shape_error("matmul", a.shape(), b.shape());
    std::vector<double> out(m * n, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    if (order.half == 0) {
        for (std::size_t i = 0; i < m; ++i) {
            double* row = out.data() + i * n;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = A[i * k + p];
                const double* brow = B + p * n;
                for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
            }
        }
    } else {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                out[i * n + j] =
                    ordered_sum(k, order, [&](std::size_t p) { return A[i * k + p] * B[p * n + j]; });
            }
        }
    }
    NodePtr an = a.node(), bn = b.node();
    return make_result({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
        const auto& G = self.grad;
        if (an->requires_grad) {
            auto& ga = an->grad_buffer();
            const auto& Bd = bn->data;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * Bd[p * n + j];
                    ga[i * k + p] += acc;
                }
            }
        }
        if (bn->requires_grad) {
            auto& gb = bn->grad_buffer();
            const auto& Ad = an->data;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = Ad[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2("transpose", a);
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    auto src = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = src[i * n + j];
    NodePtr an = a.node();
    return make_result({n, m}, std::move(out), {an}, [an, m, n](Node& self) {
        auto& ga = an->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
    std::vector<double> out(a.numel());
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    NodePtr an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
        for (auto* in : {an.get(), bn.get()}) {
            if (!in->requires_grad) continue;
            auto& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor add_row(const Tensor& a, const Tensor& b) {
    require_rank2("add_row", a);
    const std::size_t m = a.rows(), n = a.cols();
    if (b.numel() != n || b.shape().size() != 1) shape_error("add_row", a.shape(), b.shape());
    std::vector<double> out(m * n);
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + y[j];
    NodePtr an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(out), {an, bn}, [an, bn, m, n](Node& self) {
        if (an->requires_grad) {
            auto& g = an->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            auto& g = bn->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.data().begin(), a.data().end());
    for (auto& v : out) v *= s;
    NodePtr an = a.node();
    return make_result(a.shape(), std::move(out), {an}, [an, s](Node& self) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    NodePtr an = a.node();
    return make_result({1}, {acc}, {an}, [an](Node& self) {
        auto& g = an->grad_buffer();
        for (auto& v : g) v += self.grad[0];
    });
}

double gelu_value(double x) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

Tensor gelu(const Tensor& a) {
    std::vector<double> out(a.numel());
    auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_value(x[i]);
    NodePtr an = a.node();
    return make_result(a.shape(), std::move(out), {an}, [an](Node& self) {
        constexpr double c = 0.7978845608028654;
        auto& g = an->grad_buffer();
        const auto& xd = an->data;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = xd[i];
            const double th = std::tanh(c * (v + 0.044715 * v * v * v));
            const double d = 0.5 * (1.0 + th) +
                             0.5 * v * (1.0 - th * th) * c * (1.0 + 3.0 * 0.044715 * v * v);
            g[i] += d * self.grad[i];
        }
    });
}

Tensor softmax(const Tensor& a, ReduceOrder order) {
    require_finite("softmax", a);
    const std::size_t n = a.shape().back();
    const std::size_t m = a.numel() / n;
    std::vector<double> out(a.numel());
    auto x = a.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x.data() + i * n;
        double mx = *std::max_element(row, row + n);
        double* o = out.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) o[j] = std::exp(row[j] - mx);
        const double z = ordered_sum(n, order, [&](std::size_t j) { return o[j]; });
        for (std::size_t j = 0; j < n; ++j) o[j] /= z;
    }
    NodePtr an = a.node();
    auto result = make_result(a.shape(), std::move(out), {an}, nullptr);
    if (result.requires_grad()) {
        auto* self_raw = result.node().get();
        self_raw->backward = [an, m, n](Node& self) {
            auto& g = an->grad_buffer();
            for (std::size_t i = 0; i < m; ++i) {
                const double* y = self.data.data() + i * n;
                const double* gy = self.grad.data() + i * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
            }
        };
    }
    return result;
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps) {
    require_rank2("rms_norm", x);
    const std::size_t m = x.rows(), n = x.cols();
    if (gain.numel() != n) shape_error("rms_norm", x.shape(), gain.shape());
    std::vector<double> out(m * n);
    std::vector<double> inv(m);
    auto xd = x.data(), gd = gain.data();
    for (std::size_t i = 0; i < m; ++i) {
        double ss = 0.0;
        for (std::size_t j = 0; j < n; ++j) ss += xd[i * n + j] * xd[i * n + j];
        inv[i] = 1.0 / std::sqrt(ss / static_cast<double>(n) + eps);
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xd[i * n + j] * inv[i] * gd[j];
    }
    NodePtr xn = x.node(), gn = gain.node();
    return make_result(x.shape(), std::move(out), {xn, gn},
                       [xn, gn, m, n, inv = std::move(inv)](Node& self) {
                           const auto& xv = xn->data;
                           const auto& gv = gn->data;
                           const auto& G = self.grad;
                           if (xn->requires_grad) {
                               auto& gx = xn->grad_buffer();
                               for (std::size_t i = 0; i < m; ++i) {
                                   const double r = inv[i];
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < n; ++j)
                                       dot += G[i * n + j] * gv[j] * xv[i * n + j];
                                   const double k = r * r * r * dot / static_cast<double>(n);
                                   for (std::size_t j = 0; j < n; ++j)
                                       gx[i * n + j] += r * gv[j] * G[i * n + j] - k * xv[i * n + j];
                               }
                           }
                           if (gn->requires_grad) {
                               auto& gg = gn->grad_buffer();
                               for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t j = 0; j < n; ++j)
                                       gg[j] += G[i * n + j] * xv[i * n + j] * inv[i];
                           }
                       });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
    require_rank2("embedding", table);
    const std::size_t vocab = table.rows(), d = table.cols();
    if (ids.empty()) {
        throw NumericError(NumericErrorKind::invalid_argument, "embedding: empty id list");
    }
    std::vector<double> out(ids.size() * d);
    auto td = table.data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
            throw NumericError(NumericErrorKind::invalid_argument,
                               "embedding: id " + std::to_string(ids[i]) +
                                   " out of range for table " + shape_str(table.shape()));
        }
        std::copy_n(td.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
    }
    NodePtr tn = table.node();
    std::vector<std::int32_t> idv(ids.begin(), ids.end());
    return make_result({ids.size(), d}, std::move(out), {tn},
                       [tn, d, idv = std::move(idv)](Node& self) {
                           auto& g = tn->grad_buffer();
                           for (std::size_t i = 0; i < idv.size(); ++i) {
                               const std::size_t r = static_cast<std::size_t>(idv[i]);
                               for (std::size_t j = 0; j < d; ++j) g[r * d + j] += self.grad[i * d + j];
                           }
                       });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     ReduceOrder order) {
    require_rank2("cross_entropy", logits);
    require_finite("cross_entropy", logits);
    const std::size_t m = logits.rows(), c = logits.cols();
    if (targets.size() != m) {
        shape_error("cross_entropy", logits.shape(), Shape{targets.size()});
    }
    auto x = logits.data();
    std::vector<double> nll(m, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (targets[i] < 0) continue;
        if (static_cast<std::size_t>(targets[i]) >= c) {
            throw NumericError(NumericErrorKind::invalid_argument,
                               "cross_entropy: target " + std::to_string(targets[i]) +
                                   " out of range for " + std::to_string(c) + " classes");
        }
        const double* row = x.data() + i * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        nll[i] = mx + std::log(z) - row[targets[i]];
        ++count;
    }
    if (count == 0) {
        throw NumericError(NumericErrorKind::invalid_argument, "cross_entropy: no targets");
    }
    const double total = ordered_sum(m, order, [&](std::size_t i) { return nll[i]; });
    const double mean = total / static_cast<double>(count);
    NodePtr ln = logits.node();
    std::vector<std::int32_t> tv(targets.begin(), targets.end());
    return make_result({1}, {mean}, {ln}, [ln, m, c, count, tv = std::move(tv)](Node& self) {
        auto& g = ln->grad_buffer();
        const auto& xd = ln->data;
        const double s = self.grad[0] / static_cast<double>(count);
        for (std::size_t i = 0; i < m; ++i) {
            if (tv[i] < 0) continue;
            const double* row = xd.data() + i * c;
            const double mx = *std::max_element(row, row + c);
            double z = 0.0;
            for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
            for (std::size_t j = 0; j < c; ++j) {
                double p = std::exp(row[j] - mx) / z;
                if (static_cast<std::int32_t>(j) == tv[i]) p -= 1.0;
                g[i * c + j] += s * p;
            }
        }
    });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
    require_rank2("slice_cols", a);
    const std::size_t m = a.rows(), n = a.cols();
    if (begin >= end || end > n) {
        throw NumericError(NumericErrorKind::shape_mismatch,
                           "slice_cols: range [" + std::to_string(begin) + ", " +
                               std::to_string(end) + ") invalid for " + shape_str(a.shape()));
    }
    const std::size_t w = end - begin;
    std::vector<double> out(m * w);
    auto src = a.data();
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(src.data() + i * n + begin, w, out.data() + i * w);
    NodePtr an = a.node();
    return make_result({m, w}, std::move(out), {an}, [an, m, n, w, begin](Node& self) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw NumericError(NumericErrorKind::invalid_argument, "concat_cols: no inputs");
    }
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    std::vector<NodePtr> inputs;
    for (const auto& p : parts) {
        require_rank2("concat_cols", p);
        if (p.rows() != m) shape_error("concat_cols", parts[0].shape(), p.shape());
        n += p.cols();
        inputs.push_back(p.node());
    }
    std::vector<double> out(m * n);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.cols();
        auto src = p.data();
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(src.data() + i * w, w, out.data() + i * n + off);
        off += w;
    }
    return make_result({m, n}, std::move(out), inputs, [inputs, m, n](Node& self) {
        std::size_t off = 0;
        for (const auto& in : inputs) {
            const std::size_t w = in->shape[1];
            if (in->requires_grad) {
                auto& g = in->grad_buffer();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * n + off + j];
            }
            off += w;
        }
    });
}

Tensor masked_fill(const Tensor& a, std::span<const std::uint8_t> keep, double value) {
    if (keep.size() != a.numel()) shape_error("masked_fill", a.shape(), Shape{keep.size()});
    std::vector<double> out(a.data().begin(), a.data().end());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!keep[i]) out[i] = value;
    NodePtr an = a.node();
    std::vector<std::uint8_t> kv(keep.begin(), keep.end());
    return make_result(a.shape(), std::move(out), {an}, [an, kv = std::move(kv)](Node& self) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (kv[i]) g[i] += self.grad[i];
    });
}

Tensor rotate_pairs(const Tensor& a, std::span<const double> cos_table,
                    std::span<const double> sin_table) {
    require_rank2("rotate_pairs", a);
    const std::size_t m = a.rows(), n = a.cols();
    if (n % 2 != 0 || cos_table.size() != m * n / 2 || sin_table.size() != m * n / 2) {
        shape_error("rotate_pairs", a.shape(), Shape{cos_table.size()});
    }
    const std::size_t h = n / 2;
    std::vector<double> out(m * n);
    auto x = a.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < h; ++j) {
            const double c = cos_table[i * h + j], s = sin_table[i * h + j];
            const double x0 = x[i * n + 2 * j], x1 = x[i * n + 2 * j + 1];
            out[i * n + 2 * j] = x0 * c - x1 * s;
            out[i * n + 2 * j + 1] = x0 * s + x1 * c;
        }
    }
    NodePtr an = a.node();
    std::vector<double> cv(cos_table.begin(), cos_table.end());
    std::vector<double> sv(sin_table.begin(), sin_table.end());
    return make_result(a.shape(), std::move(out), {an},
                       [an, m, n, h, cv = std::move(cv), sv = std::move(sv)](Node& self) {
                           auto& g = an->grad_buffer();
                           for (std::size_t i = 0; i < m; ++i) {
                               for (std::size_t j = 0; j < h; ++j) {
                                   const double c = cv[i * h + j], s = sv[i * h + j];
                                   const double g0 = self.grad[i * n + 2 * j];
                                   const double g1 = self.grad[i * n + 2 * j + 1];
                                   g[i * n + 2 * j] += g0 * c + g1 * s;
                                   g[i * n + 2 * j + 1] += -g0 * s + g1 * c;
                               }
                           }
                       });
}

}  // namespace ntpp
