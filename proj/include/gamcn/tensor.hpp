#pragma once

// Dense double-precision tensors (rank 1..3, row-major) with reverse-mode
// automatic differentiation. Every op records its inputs and a local backward
// rule when any input requires a gradient; `backward()` replays those rules in
// reverse topological order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gamcn {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into the grads of `inputs`.
    std::function<void(Node&)> backward_fn;

    std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const;

    /// The span aliases node storage, so it is unavailable on temporaries.
    std::span<const double> values() const&;
    std::span<const double> values() const&& = delete;
    double item() const;
    double at(std::size_t i) const;
    double at(std::size_t i, std::size_t j) const;
    double at(std::size_t i, std::size_t j, std::size_t k) const;

    bool requires_grad() const;
    bool is_leaf() const;
    bool has_grad() const;
    /// Gradient accumulated by the last backward passes; empty span if none.
    std::span<const double> grad() const&;
    std::span<const double> grad() const&& = delete;
    void zero_grad();

    /// Same values, disconnected from the tape.
    Tensor detach() const;

    /// In-place access for optimizer updates. Only leaves may be mutated.
    std::span<double> mutable_values();

    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    friend Tensor make_tensor(std::shared_ptr<detail::Node>);

    std::shared_ptr<detail::Node> node_;
};

// ---------------------------------------------------------------------------
// Primitives

/// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Applies `m` [r x k] to every slice of `x` [B x k x d] -> [B x r x d].
Tensor left_matmul(const Tensor& m, const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Natural log; throws DomainError on any non-positive entry.
Tensor log(const Tensor& a);
/// Natural log of max(a, floor); entries below the floor get zero gradient.
Tensor log_clamped(const Tensor& a, double floor);
/// Clamp into [lo, hi]; zero gradient outside the interval.
Tensor clamp(const Tensor& a, double lo, double hi);

/// Adds `bias` (length = last extent of `a`) to every trailing row of `a`.
Tensor add_bias(const Tensor& a, const Tensor& bias);
/// Repeats a rank-1 tensor [m] into [rows x m].
Tensor broadcast_rows(const Tensor& v, std::size_t rows);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean of squared differences over all entries.
Tensor mean_squared_error(const Tensor& a, const Tensor& b);

/// Row-wise softmax of a rank-2 tensor, max-subtracted.
Tensor softmax_rows(const Tensor& a);

/// Depthwise 1-D convolution along axis 0 with stride 1.
/// seq [p x n x d], kernel [j x d], optional bias [d] -> [(p-j+1) x n x d].
/// One kernel column per latent channel, shared across the n lanes.
Tensor conv1d_time(const Tensor& seq, const Tensor& kernel, const Tensor& bias = {});

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);
/// Index along axis 0, dropping that axis.
Tensor select(const Tensor& a, std::size_t index);
Tensor reshape(const Tensor& a, Shape shape);

/// out[v, k] = sum_s weights[v, s] * slices[s, v, k]
/// slices [S x n x d], weights [n x S] -> [n x d].
Tensor slice_mix(const Tensor& slices, const Tensor& weights);

/// Sum of the listed rows of `table` [r x m] -> [m]. Equals onehot * table
/// for a multi-hot vector with ones at `rows`.
Tensor sum_rows(const Tensor& table, std::span<const std::size_t> rows);

/// Point-wise mutual information of a frequency matrix, differentiable in the
/// frequencies: P = max(log(F_ij * S / (R_i * C_j)), 0) with F clamped to
/// >= floor, R/C the row/column sums and S the total.
Tensor learned_pmi(const Tensor& frequencies, double floor = 1e-12);

// ---------------------------------------------------------------------------
// Reverse pass

/// False inside a NoGradGuard: ops then record no inputs or backward rules.
bool grad_enabled();

/// Disables graph construction on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Reverse-topological record of the primitive applications reachable from a
/// scalar root through nodes that require gradients.
class Tape {
public:
    static Tape record(const Tensor& root);

    std::size_t size() const { return nodes_.size(); }
    /// Nodes in topological order (inputs before their consumers).
    const std::vector<std::shared_ptr<detail::Node>>& nodes() const { return nodes_; }

    /// Seeds d(root)/d(root) = 1 and replays every backward rule from the
    /// root towards the leaves. Leaf gradients accumulate additively.
    void backward();

private:
    std::vector<std::shared_ptr<detail::Node>> nodes_;
};

void backward(const Tensor& root);

}  // namespace gamcn
