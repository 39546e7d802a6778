#include "gamcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "gamcn/errors.hpp"

namespace gamcn {

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::vector<double>& detail::Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor make_tensor(std::shared_ptr<detail::Node> node);

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

void check_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > 3) {
        throw DimensionError("tensor rank must be 1..3, got " + shape_string(shape));
    }
    for (auto e : shape) {
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
    }
}

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite value");
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
    }
}

void require_defined(const Tensor& a, const char* op) {
    if (!a.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

// Builds the output node; attaches inputs and the backward rule only if some
// input participates in differentiation.
Tensor make_output(const char* op, Shape shape, std::vector<double> value,
                   std::vector<NodePtr> inputs, std::function<void(Node&)> backward_fn) {
    check_finite(value, op);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool any = false;
    for (const auto& in : inputs) any = any || (in && in->requires_grad);
    if (any && grad_mode_flag()) {
        node->requires_grad = true;
        node->inputs = std::move(inputs);
        node->backward_fn = std::move(backward_fn);
    }
    return make_tensor(std::move(node));
}

bool wants(const NodePtr& n) { return n && n->requires_grad; }

}  // namespace

bool grad_enabled() { return grad_mode_flag(); }

NoGradGuard::NoGradGuard() : previous_(grad_mode_flag()) { grad_mode_flag() = false; }
NoGradGuard::~NoGradGuard() { grad_mode_flag() = previous_; }

Tensor make_tensor(std::shared_ptr<detail::Node> node) { return Tensor(std::move(node)); }

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    check_shape(shape);
    if (shape_size(shape) != values.size()) {
        throw DimensionError("tensor data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_string(shape));
    }
    check_finite(values, "tensor");
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape(shape);
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
    require_defined(*this, "shape");
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
    return s[axis];
}

std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::values() const& {
    require_defined(*this, "values");
    return node_->value;
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(shape()));
    return node_->value[0];
}

double Tensor::at(std::size_t i) const { return node_->value.at(i); }

double Tensor::at(std::size_t i, std::size_t j) const {
    const auto& s = shape();
    if (s.size() != 2 || i >= s[0] || j >= s[1]) throw DimensionError("index out of range");
    return node_->value[i * s[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
    const auto& s = shape();
    if (s.size() != 3 || i >= s[0] || j >= s[1] || k >= s[2]) throw DimensionError("index out of range");
    return node_->value[(i * s[1] + j) * s[2] + k];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && !node_->backward_fn; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const& {
    if (!node_) return {};
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    require_defined(*this, "detach");
    auto node = std::make_shared<Node>();
    node->shape = node_->shape;
    node->value = node_->value;
    return Tensor(std::move(node));
}

std::span<double> Tensor::mutable_values() {
    require_defined(*this, "mutable_values");
    if (node_->backward_fn) throw ContractError("mutable_values: only leaf tensors may be modified");
    return node_->value;
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double x = av[i * k + l];
            if (x == 0.0) continue;
            const double* brow = bv.data() + l * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
        }
    }
    return make_output("matmul", {m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
        const auto& g = self.grad;
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        if (an.requires_grad) {
            auto& ga = an.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = g.data() + i * n;
                for (std::size_t l = 0; l < k; ++l) {
                    const double* brow = bn.value.data() + l * n;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    ga[i * k + l] += acc;
                }
            }
        }
        if (bn.requires_grad) {
            auto& gb = bn.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = g.data() + i * n;
                for (std::size_t l = 0; l < k; ++l) {
                    const double x = an.value[i * k + l];
                    if (x == 0.0) continue;
                    double* gbrow = gb.data() + l * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += x * grow[j];
                }
            }
        }
    });
}

Tensor left_matmul(const Tensor& m, const Tensor& x) {
    require_defined(m, "left_matmul");
    require_defined(x, "left_matmul");
    if (m.rank() != 2 || x.rank() != 3 || m.dim(1) != x.dim(1)) {
        throw DimensionError("left_matmul: cannot apply " + shape_string(m.shape()) + " to " + shape_string(x.shape()));
    }
    const std::size_t r = m.dim(0), k = m.dim(1), batch = x.dim(0), d = x.dim(2);
    const auto& mv = m.node()->value;
    const auto& xv = x.node()->value;
    std::vector<double> out(batch * r * d, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = xv.data() + b * k * d;
        double* ob = out.data() + b * r * d;
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t l = 0; l < k; ++l) {
                const double w = mv[i * k + l];
                if (w == 0.0) continue;
                const double* xr = xb + l * d;
                double* orow = ob + i * d;
                for (std::size_t j = 0; j < d; ++j) orow[j] += w * xr[j];
            }
        }
    }
    return make_output("left_matmul", {batch, r, d}, std::move(out), {m.node(), x.node()}, [r, k, batch, d](Node& self) {
        auto& mn = *self.inputs[0];
        auto& xn = *self.inputs[1];
        const auto& g = self.grad;
        if (mn.requires_grad) {
            auto& gm = mn.ensure_grad();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t i = 0; i < r; ++i) {
                    const double* grow = g.data() + (b * r + i) * d;
                    for (std::size_t l = 0; l < k; ++l) {
                        const double* xr = xn.value.data() + (b * k + l) * d;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < d; ++j) acc += grow[j] * xr[j];
                        gm[i * k + l] += acc;
                    }
                }
            }
        }
        if (xn.requires_grad) {
            auto& gx = xn.ensure_grad();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t i = 0; i < r; ++i) {
                    const double* grow = g.data() + (b * r + i) * d;
                    for (std::size_t l = 0; l < k; ++l) {
                        const double w = mn.value[i * k + l];
                        if (w == 0.0) continue;
                        double* gxr = gx.data() + (b * k + l) * d;
                        for (std::size_t j = 0; j < d; ++j) gxr[j] += w * grow[j];
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

template <class Fwd, class Local>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Local local) {
    require_defined(a, op);
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    return make_output(op, a.shape(), std::move(out), {a.node()}, [local](Node& self) {
        auto& in = *self.inputs[0];
        auto& g = in.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * local(in.value[i], self.value[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return make_output("add", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
        for (auto& in : self.inputs) {
            if (!in->requires_grad) continue;
            auto& g = in->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return make_output("sub", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
        if (wants(self.inputs[0])) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants(self.inputs[1])) {
            auto& g = self.inputs[1]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return make_output("mul", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        if (an.requires_grad) {
            auto& g = an.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.value[i];
        }
        if (bn.requires_grad) {
            auto& g = bn.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.value[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary("scale", a, [factor](double x) { return factor * x; },
                 [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
    return unary("add_scalar", a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
    return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor log(const Tensor& a) {
    require_defined(a, "log");
    for (double x : a.values()) {
        if (!(x > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(x));
    }
    return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor log_clamped(const Tensor& a, double floor) {
    if (!(floor > 0.0)) throw DomainError("log_clamped: floor must be positive");
    return unary("log_clamped", a, [floor](double x) { return std::log(std::max(x, floor)); },
                 [floor](double x, double) { return x >= floor ? 1.0 / x : 0.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw ContractError("clamp: empty interval");
    return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                 [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
    require_defined(a, "add_bias");
    require_defined(bias, "add_bias");
    const std::size_t n = a.shape().back();
    if (bias.size() != n) {
        throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match " + shape_string(a.shape()));
    }
    const auto& av = a.node()->value;
    const auto& bv = bias.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % n];
    return make_output("add_bias", a.shape(), std::move(out), {a.node(), bias.node()}, [n](Node& self) {
        if (wants(self.inputs[0])) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants(self.inputs[1])) {
            auto& g = self.inputs[1]->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
        }
    });
}

Tensor broadcast_rows(const Tensor& v, std::size_t rows) {
    require_defined(v, "broadcast_rows");
    if (v.rank() != 1) throw DimensionError("broadcast_rows: expected rank-1 input, got " + shape_string(v.shape()));
    const std::size_t m = v.size();
    std::vector<double> out(rows * m);
    for (std::size_t r = 0; r < rows; ++r) std::copy(v.values().begin(), v.values().end(), out.begin() + r * m);
    return make_output("broadcast_rows", {rows, m}, std::move(out), {v.node()}, [m](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % m] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    double s = 0.0;
    for (double x : a.values()) s += x;
    return make_output("sum", {1}, {s}, {a.node()}, [](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (auto& x : g) x += self.grad[0];
    });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor mean_squared_error(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mean_squared_error");
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double r = av[i] - bv[i];
        s += r * r;
    }
    const double inv = 1.0 / static_cast<double>(av.size());
    return make_output("mean_squared_error", {1}, {s * inv}, {a.node(), b.node()}, [inv](Node& self) {
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        const double g0 = self.grad[0] * 2.0 * inv;
        if (an.requires_grad) {
            auto& g = an.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * (an.value[i] - bn.value[i]);
        }
        if (bn.requires_grad) {
            auto& g = bn.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= g0 * (an.value[i] - bn.value[i]);
        }
    });
}

Tensor softmax_rows(const Tensor& a) {
    require_defined(a, "softmax_rows");
    if (a.rank() != 2) throw DimensionError("softmax_rows: expected rank 2, got " + shape_string(a.shape()));
    const std::size_t m = a.dim(0), n = a.dim(1);
    const auto& av = a.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = av.data() + i * n;
        double* orow = out.data() + i * n;
        const double mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += (orow[j] = std::exp(row[j] - mx));
        for (std::size_t j = 0; j < n; ++j) orow[j] /= z;
    }
    return make_output("softmax_rows", a.shape(), std::move(out), {a.node()}, [m, n](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            const double* y = self.value.data() + i * n;
            const double* gy = self.grad.data() + i * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
        }
    });
}

// ---------------------------------------------------------------------------
// Sequence / layout ops

Tensor conv1d_time(const Tensor& seq, const Tensor& kernel, const Tensor& bias) {
    require_defined(seq, "conv1d_time");
    require_defined(kernel, "conv1d_time");
    if (seq.rank() != 3) throw DimensionError("conv1d_time: sequence must be [p x n x d], got " + shape_string(seq.shape()));
    const std::size_t p = seq.dim(0), lanes = seq.dim(1), d = seq.dim(2);
    if (kernel.rank() != 2 || kernel.dim(1) != d) {
        throw DimensionError("conv1d_time: kernel " + shape_string(kernel.shape()) + " incompatible with " +
                             shape_string(seq.shape()));
    }
    const std::size_t j = kernel.dim(0);
    if (j > p) {
        throw ConfigError("conv1d_time: kernel width " + std::to_string(j) + " exceeds sequence length " + std::to_string(p));
    }
    if (bias.defined() && bias.size() != d) throw DimensionError("conv1d_time: bias must have length " + std::to_string(d));
    const std::size_t out_t = p - j + 1;
    const auto& sv = seq.node()->value;
    const auto& kv = kernel.node()->value;
    const std::size_t plane = lanes * d;
    std::vector<double> out(out_t * plane, 0.0);
    for (std::size_t t = 0; t < out_t; ++t) {
        double* o = out.data() + t * plane;
        if (bias.defined()) {
            for (std::size_t i = 0; i < plane; ++i) o[i] = bias.node()->value[i % d];
        }
        for (std::size_t s = 0; s < j; ++s) {
            const double* x = sv.data() + (t + s) * plane;
            const double* w = kv.data() + s * d;
            for (std::size_t v = 0; v < lanes; ++v) {
                for (std::size_t k = 0; k < d; ++k) o[v * d + k] += w[k] * x[v * d + k];
            }
        }
    }
    std::vector<NodePtr> inputs{seq.node(), kernel.node()};
    if (bias.defined()) inputs.push_back(bias.node());
    return make_output("conv1d_time", {out_t, lanes, d}, std::move(out), std::move(inputs),
                       [out_t, j, lanes, d, plane](Node& self) {
                           auto& sn = *self.inputs[0];
                           auto& kn = *self.inputs[1];
                           const auto& g = self.grad;
                           if (sn.requires_grad) {
                               auto& gs = sn.ensure_grad();
                               for (std::size_t t = 0; t < out_t; ++t) {
                                   for (std::size_t s = 0; s < j; ++s) {
                                       const double* w = kn.value.data() + s * d;
                                       double* gx = gs.data() + (t + s) * plane;
                                       const double* go = g.data() + t * plane;
                                       for (std::size_t i = 0; i < plane; ++i) gx[i] += w[i % d] * go[i];
                                   }
                               }
                           }
                           if (kn.requires_grad) {
                               auto& gk = kn.ensure_grad();
                               for (std::size_t t = 0; t < out_t; ++t) {
                                   const double* go = g.data() + t * plane;
                                   for (std::size_t s = 0; s < j; ++s) {
                                       const double* x = sn.value.data() + (t + s) * plane;
                                       double* gw = gk.data() + s * d;
                                       for (std::size_t v = 0; v < lanes; ++v) {
                                           for (std::size_t k = 0; k < d; ++k) gw[k] += x[v * d + k] * go[v * d + k];
                                       }
                                   }
                               }
                           }
                           if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
                               auto& gb = self.inputs[2]->ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
                           }
                       });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no parts");
    for (const auto& p : parts) require_defined(p, "concat");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_string(first));
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
        if (!ok) throw DimensionError("concat: ragged parts " + shape_string(first) + " and " + shape_string(s));
        total += s[axis];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
    for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
    Shape shape = first;
    shape[axis] = total;
    std::vector<double> out(shape_size(shape));
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> widths;
    std::vector<NodePtr> inputs;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.dim(axis) * inner;
        const auto& pv = p.node()->value;
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy(pv.begin() + o * w, pv.begin() + (o + 1) * w, out.begin() + o * total * inner + offset);
        }
        offsets.push_back(offset);
        widths.push_back(w);
        inputs.push_back(p.node());
        offset += w;
    }
    const std::size_t row = total * inner;
    return make_output("concat", std::move(shape), std::move(out), std::move(inputs),
                       [offsets, widths, outer, row](Node& self) {
                           for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                               if (!self.inputs[k]->requires_grad) continue;
                               auto& g = self.inputs[k]->ensure_grad();
                               const std::size_t w = widths[k];
                               for (std::size_t o = 0; o < outer; ++o) {
                                   const double* src = self.grad.data() + o * row + offsets[k];
                                   for (std::size_t i = 0; i < w; ++i) g[o * w + i] += src[i];
                               }
                           }
                       });
}

Tensor stack(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("stack: no parts");
    const Shape& first = parts.front().shape();
    if (first.size() >= 3) throw DimensionError("stack: result would exceed rank 3");
    std::vector<Tensor> lifted;
    lifted.reserve(parts.size());
    for (const auto& p : parts) {
        if (p.shape() != first) throw DimensionError("stack: ragged parts " + shape_string(first) + " and " + shape_string(p.shape()));
        Shape s{1};
        s.insert(s.end(), first.begin(), first.end());
        lifted.push_back(reshape(p, s));
    }
    return concat(lifted, 0);
}

Tensor select(const Tensor& a, std::size_t index) {
    require_defined(a, "select");
    if (a.rank() < 2) throw DimensionError("select: rank must be >= 2, got " + shape_string(a.shape()));
    if (index >= a.dim(0)) throw DimensionError("select: index out of range for " + shape_string(a.shape()));
    Shape shape(a.shape().begin() + 1, a.shape().end());
    const std::size_t w = shape_size(shape);
    const auto& av = a.node()->value;
    std::vector<double> out(av.begin() + index * w, av.begin() + (index + 1) * w);
    return make_output("select", std::move(shape), std::move(out), {a.node()}, [index, w](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < w; ++i) g[index * w + i] += self.grad[i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    require_defined(a, "reshape");
    check_shape(shape);
    if (shape_size(shape) != a.size()) {
        throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
    }
    return make_output("reshape", std::move(shape), a.node()->value, {a.node()}, [](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor slice_mix(const Tensor& slices, const Tensor& weights) {
    require_defined(slices, "slice_mix");
    require_defined(weights, "slice_mix");
    if (slices.rank() != 3 || weights.rank() != 2 || weights.dim(0) != slices.dim(1) || weights.dim(1) != slices.dim(0)) {
        throw DimensionError("slice_mix: slices " + shape_string(slices.shape()) + " incompatible with weights " +
                             shape_string(weights.shape()));
    }
    const std::size_t S = slices.dim(0), n = slices.dim(1), d = slices.dim(2);
    const auto& xv = slices.node()->value;
    const auto& wv = weights.node()->value;
    std::vector<double> out(n * d, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        const double* x = xv.data() + s * n * d;
        for (std::size_t v = 0; v < n; ++v) {
            const double w = wv[v * S + s];
            double* o = out.data() + v * d;
            for (std::size_t k = 0; k < d; ++k) o[k] += w * x[v * d + k];
        }
    }
    return make_output("slice_mix", {n, d}, std::move(out), {slices.node(), weights.node()}, [S, n, d](Node& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        const auto& g = self.grad;
        if (xn.requires_grad) {
            auto& gx = xn.ensure_grad();
            for (std::size_t s = 0; s < S; ++s) {
                for (std::size_t v = 0; v < n; ++v) {
                    const double w = wn.value[v * S + s];
                    double* dst = gx.data() + (s * n + v) * d;
                    for (std::size_t k = 0; k < d; ++k) dst[k] += w * g[v * d + k];
                }
            }
        }
        if (wn.requires_grad) {
            auto& gw = wn.ensure_grad();
            for (std::size_t s = 0; s < S; ++s) {
                for (std::size_t v = 0; v < n; ++v) {
                    const double* x = xn.value.data() + (s * n + v) * d;
                    double acc = 0.0;
                    for (std::size_t k = 0; k < d; ++k) acc += x[k] * g[v * d + k];
                    gw[v * S + s] += acc;
                }
            }
        }
    });
}

Tensor sum_rows(const Tensor& table, std::span<const std::size_t> rows) {
    require_defined(table, "sum_rows");
    if (table.rank() != 2) throw DimensionError("sum_rows: expected rank 2, got " + shape_string(table.shape()));
    const std::size_t r = table.dim(0), m = table.dim(1);
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    for (auto i : idx) {
        if (i >= r) throw DimensionError("sum_rows: row " + std::to_string(i) + " out of range for " + shape_string(table.shape()));
    }
    const auto& tv = table.node()->value;
    std::vector<double> out(m, 0.0);
    for (auto i : idx) {
        for (std::size_t j = 0; j < m; ++j) out[j] += tv[i * m + j];
    }
    return make_output("sum_rows", {m}, std::move(out), {table.node()}, [idx, m](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (auto i : idx) {
            for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[j];
        }
    });
}

Tensor learned_pmi(const Tensor& frequencies, double floor) {
    require_defined(frequencies, "learned_pmi");
    if (frequencies.rank() != 2 || frequencies.dim(0) != frequencies.dim(1)) {
        throw DimensionError("learned_pmi: expected square matrix, got " + shape_string(frequencies.shape()));
    }
    const std::size_t n = frequencies.dim(0);
    const auto& fv = frequencies.node()->value;
    std::vector<double> f(fv.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::max(fv[i], floor);
    std::vector<double> rows(n, 0.0), cols(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            rows[i] += f[i * n + j];
            cols[j] += f[i * n + j];
        }
    }
    for (double r : rows) total += r;
    std::vector<double> out(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double ratio = f[i * n + j] * total / (rows[i] * cols[j]);
            out[i * n + j] = std::max(std::log(ratio), 0.0);
        }
    }
    return make_output("learned_pmi", {n, n}, std::move(out), {frequencies.node()},
                       [n, floor, f = std::move(f), rows = std::move(rows), cols = std::move(cols), total](Node& self) {
                           // Active entries (strictly positive log ratio) pass the upstream
                           // gradient; the kink and the negative side get zero.
                           std::vector<double> gm(n * n, 0.0);
                           std::vector<double> grow(n, 0.0), gcol(n, 0.0);
                           double gall = 0.0;
                           for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t j = 0; j < n; ++j) {
                                   if (self.value[i * n + j] > 0.0) {
                                       const double g = self.grad[i * n + j];
                                       gm[i * n + j] = g;
                                       grow[i] += g;
                                       gcol[j] += g;
                                       gall += g;
                                   }
                               }
                           }
                           auto& in = *self.inputs[0];
                           auto& gf = in.ensure_grad();
                           for (std::size_t k = 0; k < n; ++k) {
                               for (std::size_t l = 0; l < n; ++l) {
                                   if (in.value[k * n + l] < floor) continue;
                                   gf[k * n + l] += gm[k * n + l] / f[k * n + l] + gall / total - grow[k] / rows[k] -
                                                    gcol[l] / cols[l];
                               }
                           }
                       });
}

// ---------------------------------------------------------------------------
// Tape

Tape Tape::record(const Tensor& root) {
    require_defined(root, "backward");
    Tape tape;
    if (!root.requires_grad()) return tape;
    // Iterative post-order DFS; post-order is a topological order.
    std::unordered_set<const Node*> seen;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            const auto& child = node->inputs[next++];
            if (child->requires_grad && seen.insert(child.get()).second) stack.emplace_back(child, 0);
        } else {
            tape.nodes_.push_back(node);
            stack.pop_back();
        }
    }
    return tape;
}

void Tape::backward() {
    if (nodes_.empty()) return;
    auto& root = *nodes_.back();
    if (root.value.size() != 1) throw ContractError("backward: root must be a scalar, got " + shape_string(root.shape));
    root.ensure_grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& node = **it;
        if (node.backward_fn && !node.grad.empty()) node.backward_fn(node);
    }
}

void backward(const Tensor& root) {
    require_defined(root, "backward");
    if (root.size() != 1) throw ContractError("backward: root must be a scalar, got " + shape_string(root.shape()));
    Tape::record(root).backward();
}

}  // namespace gamcn
