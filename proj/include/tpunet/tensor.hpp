// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tpunet {

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for inputs outside an operation's mathematical domain (log of a
/// non-positive value, division by zero, out-of-range ids).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a forward operation on finite inputs produces NaN or Inf.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised on misuse of the autodiff engine (non-scalar or detached loss,
/// repeated backward over the same graph).
class AutogradError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulated into
    bool requires_grad = false;
    bool backward_done = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;  // reads this->grad, accumulates into inputs

    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

/// Handle to a float64 n-dimensional array that optionally participates in
/// reverse-mode differentiation. Copies share storage; operations never
/// mutate their inputs.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;

    std::span<const double> data() const;
    /// In-place access for parameter updates. Never call on a tensor that an
    /// un-replayed graph still depends on.
    std::span<double> mutable_data();
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Populates gradients of every requires_grad leaf reachable from this
    /// scalar. A graph can be replayed once.
    void backward() const;

    /// New leaf with a copy of the data and no history.
    Tensor detach() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

using NamedTensor = std::pair<std::string, Tensor>;
using NamedTensors = std::vector<NamedTensor>;

/// Topologically ordered list of the differentiable nodes reachable from a root.
class Tape {
public:
    explicit Tape(const Tensor& root);

    const std::vector<detail::Node*>& nodes() const { return order_; }
    std::size_t size() const { return order_.size(); }

private:
    std::vector<detail::Node*> order_;
};

/// Records a user-defined operation. `backward` receives the output node and
/// must accumulate into the inputs' gradients. Used for extensions and for
/// negative-control tests of the gradient checker.
Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
               std::function<void(detail::Node&)> backward);

/// While alive, operations on this thread record no history. Used for
/// evaluation and finite-difference probing.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool active();

private:
    bool previous_;
};

// ---- kink probe -----------------------------------------------------------
// Non-differentiable points (relu at 0, maxpool ties, clamp bounds) make
// finite differences meaningless. While a probe is active, these ops fold
// their branch decisions into a hash so a caller can detect that a
// perturbation crossed a kink.

class KinkProbe {
public:
    KinkProbe();
    ~KinkProbe();
    KinkProbe(const KinkProbe&) = delete;
    KinkProbe& operator=(const KinkProbe&) = delete;

    std::uint64_t hash() const { return hash_; }
    void mix(std::uint64_t value);

    static KinkProbe* active();

private:
    std::uint64_t hash_ = 1469598103934665603ULL;
    KinkProbe* previous_ = nullptr;
};

// ---- linear algebra ---------------------------------------------------------

/// a[..., m, k] x b[..., k, n]; leading batch dimensions broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

enum class Padding { same, valid };

/// Stride-1 2D cross-correlation (no kernel flip) over NCHW input.
/// `bias` may be an undefined tensor.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Padding padding);

// ---- normalisation ----------------------------------------------------------

Tensor softmax(const Tensor& x, int axis);

/// Softmax over the last axis where `keep[j] == 0` removes element j from the
/// distribution (probability exactly 0). A slice with nothing kept puts all
/// its mass on the slice's first element. `keep` has x.numel() entries.
Tensor masked_softmax(const Tensor& x, const std::vector<std::uint8_t>& keep);

// ---- elementwise ------------------------------------------------------------

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- structural -------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
std::vector<Tensor> split(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& sizes);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
/// Swaps two axes.
Tensor transpose(const Tensor& x, std::size_t axis_a, std::size_t axis_b);
Tensor reduce_sum(const Tensor& x);
Tensor reduce_sum(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor reduce_mean(const Tensor& x);
Tensor reduce_mean(const Tensor& x, std::size_t axis, bool keepdim = false);
/// Nearest-neighbour x2 upsampling of the last two axes.
Tensor upsample_nearest2x(const Tensor& x);
/// 2x2 stride-2 max pooling of the last two axes. Ties go to the first
/// element in row-major order.
Tensor maxpool2x2(const Tensor& x);
/// Gathers rows of `table[V, D]`; result shape is ids_shape + {D}.
Tensor embed_lookup(const Tensor& table, const std::vector<std::int64_t>& ids, const Shape& ids_shape);

}  // namespace tpunet
