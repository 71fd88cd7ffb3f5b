// Copyright (C) 2026 The tpunet authors
// SPDX-License-Identifier: Apache-2.0

#include "tpunet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <Eigen/Core>

namespace tpunet {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

thread_local KinkProbe* g_probe = nullptr;
thread_local bool g_no_grad = false;

void check_finite(const std::vector<double>& values, const char* op) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": produced a non-finite value");
        }
    }
}

Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward, const char* op) {
    check_finite(data, op);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    bool needs = false;
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
    if (needs && !g_no_grad) {
        node->requires_grad = true;
        for (const Tensor* t : inputs) node->inputs.push_back(t->node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward, const char* op) {
    check_finite(data, op);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    bool needs = false;
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
    if (needs && !g_no_grad) {
        node->requires_grad = true;
        for (const Tensor& t : inputs) node->inputs.push_back(t.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

std::size_t normalize_axis(int axis, std::size_t rank, const char* op) {
    const int r = static_cast<int>(rank);
    if (axis < -r || axis >= r) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
    }
    return static_cast<std::size_t>(axis < 0 ? axis + r : axis);
}

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a) + " and " + shape_to_string(b) +
                             " are not broadcastable");
        }
        out[i] = std::max(da, db);
    }
    return out;
}

// Flat index into `in` for every flat index of `out`, where `in` broadcasts to `out`.
std::vector<std::size_t> broadcast_index(const Shape& out, const Shape& in) {
    const std::size_t rank = out.size();
    const std::size_t offset = rank - in.size();
    std::vector<std::size_t> in_strides(rank, 0);
    std::size_t stride = 1;
    for (std::size_t i = rank; i-- > offset;) {
        const std::size_t d = in[i - offset];
        in_strides[i] = d == 1 ? 0 : stride;
        stride *= d;
    }
    const std::size_t n = shape_numel(out);
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> counter(rank, 0);
    std::size_t pos = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        map[flat] = pos;
        for (std::size_t i = rank; i-- > 0;) {
            ++counter[i];
            pos += in_strides[i];
            if (counter[i] < out[i]) break;
            pos -= in_strides[i] * counter[i];
            counter[i] = 0;
        }
    }
    return map;
}

template <class Forward, class Derivative>
Tensor unary_op(const Tensor& x, const char* op, Forward f, Derivative dfdx) {
    require_defined(x, op);
    const auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    return make_result(
        x.shape(), std::move(out), {&x},
        [dfdx](Node& self) {
            Node& input = *self.inputs[0];
            if (!input.requires_grad) return;
            auto& g = input.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx(input.data[i], self.data[i]);
        },
        op);
}

template <class Forward, class DerivA, class DerivB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* op, Forward f, DerivA dfa, DerivB dfb) {
    require_defined(a, op);
    require_defined(b, op);
    const auto da = a.data();
    const auto db = b.data();
    if (a.shape() == b.shape()) {
        std::vector<double> out(da.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(da[i], db[i]);
        return make_result(
            a.shape(), std::move(out), {&a, &b},
            [dfa, dfb](Node& self) {
                Node& na = *self.inputs[0];
                Node& nb = *self.inputs[1];
                if (na.requires_grad) {
                    auto& g = na.ensure_grad();
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfa(na.data[i], nb.data[i]);
                }
                if (nb.requires_grad) {
                    auto& g = nb.ensure_grad();
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfb(na.data[i], nb.data[i]);
                }
            },
            op);
    }
    Shape shape = broadcast_shapes(a.shape(), b.shape(), op);
    auto ia = std::make_shared<std::vector<std::size_t>>(broadcast_index(shape, a.shape()));
    auto ib = std::make_shared<std::vector<std::size_t>>(broadcast_index(shape, b.shape()));
    std::vector<double> out(ia->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(da[(*ia)[i]], db[(*ib)[i]]);
    return make_result(
        std::move(shape), std::move(out), {&a, &b},
        [ia, ib, dfa, dfb](Node& self) {
            Node& na = *self.inputs[0];
            Node& nb = *self.inputs[1];
            if (na.requires_grad) {
                auto& g = na.ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) {
                    g[(*ia)[i]] += self.grad[i] * dfa(na.data[(*ia)[i]], nb.data[(*ib)[i]]);
                }
            }
            if (nb.requires_grad) {
                auto& g = nb.ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) {
                    g[(*ib)[i]] += self.grad[i] * dfb(na.data[(*ia)[i]], nb.data[(*ib)[i]]);
                }
            }
        },
        op);
}

// Number of elements before, along, and after `axis`.
struct AxisSplit {
    std::size_t outer;
    std::size_t extent;
    std::size_t inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s{1, shape[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

// ---- shape helpers ----------------------------------------------------------

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ')';
    return out.str();
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("shape " + shape_to_string(shape) + " does not match " + std::to_string(data.size()) +
                         " values");
    }
    check_finite(data, "from_data");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
    require_defined(*this, "shape");
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) throw ShapeError("dim: axis out of range for " + shape_to_string(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->data.size() : 0; }

std::span<const double> Tensor::data() const {
    require_defined(*this, "data");
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    require_defined(*this, "mutable_data");
    return node_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_to_string(shape()) + " is not a scalar");
    return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    const Shape& s = shape();
    if (index.size() != s.size()) throw ShapeError("at: index rank does not match " + shape_to_string(s));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= s[axis]) throw ShapeError("at: index out of range for " + shape_to_string(s));
        flat = flat * s[axis] + i;
        ++axis;
    }
    return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
    require_defined(*this, "set_requires_grad");
    if (node_->backward) throw AutogradError("set_requires_grad: only leaf tensors can be toggled");
    node_->requires_grad = value;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    require_defined(*this, "grad");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    require_defined(*this, "grad");
    return node_->ensure_grad();
}

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    require_defined(*this, "detach");
    return from_data(node_->shape, node_->data, false);
}

void Tensor::backward() const {
    require_defined(*this, "backward");
    if (numel() != 1) {
        throw AutogradError("backward: loss must be a scalar, got shape " + shape_to_string(shape()));
    }
    if (!node_->requires_grad) throw AutogradError("backward: loss is detached from any differentiable input");
    if (node_->backward_done) throw AutogradError("backward: this graph was already replayed");
    Tape tape(*this);
    node_->ensure_grad()[0] += 1.0;
    const auto& order = tape.nodes();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
    for (Node* n : order) {
        if (n->backward) std::vector<double>().swap(n->grad);
    }
    node_->backward_done = true;
}

Tape::Tape(const Tensor& root) {
    require_defined(root, "Tape");
    if (!root.requires_grad()) return;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order_.push_back(node);
            stack.pop_back();
        }
    }
}

Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward) {
    if (shape_numel(shape) != data.size()) throw ShapeError("make_op: shape does not match data");
    return make_result(std::move(shape), std::move(data), inputs, std::move(backward), "make_op");
}

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

KinkProbe::KinkProbe() : previous_(g_probe) { g_probe = this; }
KinkProbe::~KinkProbe() { g_probe = previous_; }
KinkProbe* KinkProbe::active() { return g_probe; }

void KinkProbe::mix(std::uint64_t value) {
    hash_ ^= value;
    hash_ *= 1099511628211ULL;
}

// ---- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2 || sa[sa.size() - 1] != sb[sb.size() - 2]) {
        throw ShapeError("matmul: incompatible shapes " + shape_to_string(sa) + " and " + shape_to_string(sb));
    }
    const std::size_t m = sa[sa.size() - 2];
    const std::size_t k = sa[sa.size() - 1];
    const std::size_t n = sb[sb.size() - 1];
    const Shape batch_a(sa.begin(), sa.end() - 2);
    const Shape batch_b(sb.begin(), sb.end() - 2);
    Shape batch;
    try {
        batch = broadcast_shapes(batch_a, batch_b, "matmul");
    } catch (const ShapeError&) {
        throw ShapeError("matmul: incompatible shapes " + shape_to_string(sa) + " and " + shape_to_string(sb));
    }
    auto map_a = std::make_shared<std::vector<std::size_t>>(broadcast_index(batch, batch_a));
    auto map_b = std::make_shared<std::vector<std::size_t>>(broadcast_index(batch, batch_b));
    const std::size_t nb = map_a->size();

    std::vector<double> out(nb * m * n);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < nb; ++i) {
        ConstMap A(pa + (*map_a)[i] * m * k, m, k);
        ConstMap B(pb + (*map_b)[i] * k * n, k, n);
        MutMap C(out.data() + i * m * n, m, n);
        C.noalias() = A * B;
    }
    Shape shape = batch;
    shape.push_back(m);
    shape.push_back(n);
    return make_result(
        std::move(shape), std::move(out), {&a, &b},
        [map_a, map_b, m, k, n](Node& self) {
            Node& na = *self.inputs[0];
            Node& nb_ = *self.inputs[1];
            const std::size_t count = map_a->size();
            for (std::size_t i = 0; i < count; ++i) {
                ConstMap G(self.grad.data() + i * m * n, m, n);
                if (na.requires_grad) {
                    MutMap GA(na.ensure_grad().data() + (*map_a)[i] * m * k, m, k);
                    ConstMap B(nb_.data.data() + (*map_b)[i] * k * n, k, n);
                    GA.noalias() += G * B.transpose();
                }
                if (nb_.requires_grad) {
                    MutMap GB(nb_.ensure_grad().data() + (*map_b)[i] * k * n, k, n);
                    ConstMap A(na.data.data() + (*map_a)[i] * m * k, m, k);
                    GB.noalias() += A.transpose() * G;
                }
            }
        },
        "matmul");
}

namespace {

struct ConvGeometry {
    std::size_t batch, cin, h, w, cout, kh, kw, ph, pw, ho, wo;
    std::size_t patch() const { return cin * kh * kw; }
    std::size_t pixels() const { return ho * wo; }
    bool pointwise() const { return kh == 1 && kw == 1; }
};

// Output columns [lo, hi) read inside the input row for kernel column j.
inline void valid_span(const ConvGeometry& g, std::size_t j, std::size_t& lo, std::size_t& hi) {
    lo = j < g.pw ? g.pw - j : 0;
    const std::size_t limit = g.w + g.pw;
    hi = limit > j ? std::min(g.wo, limit - j) : 0;
    if (hi < lo) hi = lo;
}

// Patch matrix for output rows [oy0, oy1): [patch, (oy1 - oy0) * wo].
void im2col(const double* x, const ConvGeometry& g, double* cols, std::size_t oy0, std::size_t oy1) {
    const std::size_t n = (oy1 - oy0) * g.wo;
    for (std::size_t c = 0; c < g.cin; ++c) {
        const double* plane = x + c * g.h * g.w;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                double* row = cols + ((c * g.kh + i) * g.kw + j) * n;
                std::size_t lo = 0;
                std::size_t hi = 0;
                valid_span(g, j, lo, hi);
                for (std::size_t oy = oy0; oy < oy1; ++oy) {
                    double* dst = row + (oy - oy0) * g.wo;
                    const std::size_t y = oy + i;
                    if (y < g.ph || y - g.ph >= g.h) {
                        std::fill(dst, dst + g.wo, 0.0);
                        continue;
                    }
                    const double* src = plane + (y - g.ph) * g.w + (lo + j - g.pw);
                    std::fill(dst, dst + lo, 0.0);
                    std::copy(src, src + (hi - lo), dst + lo);
                    std::fill(dst + hi, dst + g.wo, 0.0);
                }
            }
        }
    }
}

// Output rows per GEMM tile; keeps the patch matrix cache-sized.
std::size_t tile_rows(const ConvGeometry& g) {
    const std::size_t target = 128;
    return std::max<std::size_t>(1, std::min(g.ho, target / std::max<std::size_t>(1, g.wo)));
}

void col2im_add(const double* cols, const ConvGeometry& g, double* dx) {
    for (std::size_t c = 0; c < g.cin; ++c) {
        double* plane = dx + c * g.h * g.w;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const double* row = cols + ((c * g.kh + i) * g.kw + j) * g.pixels();
                std::size_t lo = 0;
                std::size_t hi = 0;
                valid_span(g, j, lo, hi);
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const std::size_t y = oy + i;
                    if (y < g.ph || y - g.ph >= g.h) continue;
                    const double* src = row + oy * g.wo;
                    double* dst = plane + (y - g.ph) * g.w + (lo + j - g.pw);
                    for (std::size_t ox = lo; ox < hi; ++ox) dst[ox - lo] += src[ox];
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Padding padding) {
    require_defined(x, "conv2d");
    require_defined(kernel, "conv2d");
    const Shape& sx = x.shape();
    const Shape& sk = kernel.shape();
    if (sx.size() != 4 || sk.size() != 4 || sx[1] != sk[1]) {
        throw ShapeError("conv2d: input " + shape_to_string(sx) + " incompatible with kernel " + shape_to_string(sk));
    }
    ConvGeometry g{};
    g.batch = sx[0];
    g.cin = sx[1];
    g.h = sx[2];
    g.w = sx[3];
    g.cout = sk[0];
    g.kh = sk[2];
    g.kw = sk[3];
    if (padding == Padding::same) {
        if (g.kh % 2 == 0 || g.kw % 2 == 0) {
            throw ShapeError("conv2d: same padding needs odd kernel sizes, got " + shape_to_string(sk));
        }
        g.ph = g.kh / 2;
        g.pw = g.kw / 2;
    } else {
        if (g.kh > g.h || g.kw > g.w) {
            throw ShapeError("conv2d: kernel " + shape_to_string(sk) + " larger than input " + shape_to_string(sx));
        }
        g.ph = g.pw = 0;
    }
    g.ho = g.h + 2 * g.ph - g.kh + 1;
    g.wo = g.w + 2 * g.pw - g.kw + 1;
    const bool has_bias = bias.defined();
    if (has_bias && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
        throw ShapeError("conv2d: bias " + shape_to_string(bias.shape()) + " does not match kernel " +
                         shape_to_string(sk));
    }

    const std::size_t in_plane = g.cin * g.h * g.w;
    const std::size_t out_plane = g.cout * g.pixels();
    std::vector<double> out(g.batch * out_plane);
    const std::size_t rows = tile_rows(g);
    std::vector<double> cols(g.pointwise() ? 0 : g.patch() * rows * g.wo);
    ConstMap W(kernel.data().data(), g.cout, g.patch());
    const double* px = x.data().data();
    for (std::size_t b = 0; b < g.batch; ++b) {
        MutMap O(out.data() + b * out_plane, g.cout, g.pixels());
        if (g.pointwise()) {
            O.noalias() = W * ConstMap(px + b * in_plane, g.patch(), g.pixels());
        } else {
            for (std::size_t oy = 0; oy < g.ho; oy += rows) {
                const std::size_t end = std::min(g.ho, oy + rows);
                const std::size_t n = (end - oy) * g.wo;
                im2col(px + b * in_plane, g, cols.data(), oy, end);
                O.middleCols(oy * g.wo, n).noalias() = W * ConstMap(cols.data(), g.patch(), n);
            }
        }
        if (has_bias) {
            const auto bv = bias.data();
            for (std::size_t c = 0; c < g.cout; ++c) O.row(c).array() += bv[c];
        }
    }

    std::vector<Tensor> inputs{x, kernel};
    if (has_bias) inputs.push_back(bias);
    Shape shape{g.batch, g.cout, g.ho, g.wo};
    return make_result(
        std::move(shape), std::move(out), inputs,
        [g, has_bias, in_plane, out_plane](Node& self) {
            Node& nx = *self.inputs[0];
            Node& nk = *self.inputs[1];
            const std::size_t rows = tile_rows(g);
            std::vector<double> cols(g.pointwise() ? 0 : g.patch() * rows * g.wo);
            ConstMap W(nk.data.data(), g.cout, g.patch());
            // With same padding the input gradient is a same-padded correlation
            // of the output gradient with the flipped, channel-swapped kernel.
            const bool flipped = nx.requires_grad && !g.pointwise() && g.ph * 2 + 1 == g.kh && g.pw * 2 + 1 == g.kw;
            ConvGeometry gt = g;
            std::vector<double> wflip;
            std::vector<double> gcols;
            std::vector<double> dcols;
            if (flipped) {
                gt.cin = g.cout;
                gt.cout = g.cin;
                gt.h = g.ho;
                gt.w = g.wo;
                wflip.resize(g.cin * g.cout * g.kh * g.kw);
                for (std::size_t co = 0; co < g.cout; ++co) {
                    for (std::size_t ci = 0; ci < g.cin; ++ci) {
                        for (std::size_t i = 0; i < g.kh; ++i) {
                            for (std::size_t j = 0; j < g.kw; ++j) {
                                wflip[((ci * g.cout + co) * g.kh + i) * g.kw + j] =
                                    nk.data[((co * g.cin + ci) * g.kh + (g.kh - 1 - i)) * g.kw + (g.kw - 1 - j)];
                            }
                        }
                    }
                }
                gcols.resize(gt.patch() * tile_rows(gt) * gt.wo);
            } else if (nx.requires_grad && !g.pointwise()) {
                dcols.resize(g.patch() * g.pixels());
            }
            for (std::size_t b = 0; b < g.batch; ++b) {
                ConstMap G(self.grad.data() + b * out_plane, g.cout, g.pixels());
                if (nk.requires_grad) {
                    MutMap GW(nk.ensure_grad().data(), g.cout, g.patch());
                    const double* src = nx.data.data() + b * in_plane;
                    if (g.pointwise()) {
                        GW.noalias() += G * ConstMap(src, g.patch(), g.pixels()).transpose();
                    } else {
                        for (std::size_t oy = 0; oy < g.ho; oy += rows) {
                            const std::size_t end = std::min(g.ho, oy + rows);
                            const std::size_t n = (end - oy) * g.wo;
                            im2col(src, g, cols.data(), oy, end);
                            GW.noalias() += G.middleCols(oy * g.wo, n) * ConstMap(cols.data(), g.patch(), n).transpose();
                        }
                    }
                }
                if (nx.requires_grad) {
                    double* dx = nx.ensure_grad().data() + b * in_plane;
                    if (g.pointwise()) {
                        MutMap DX(dx, g.cin, g.pixels());
                        DX.noalias() += W.transpose() * G;
                    } else if (flipped) {
                        MutMap DX(dx, g.cin, g.h * g.w);
                        const ConstMap WF(wflip.data(), g.cin, gt.patch());
                        const std::size_t trows = tile_rows(gt);
                        for (std::size_t oy = 0; oy < gt.ho; oy += trows) {
                            const std::size_t end = std::min(gt.ho, oy + trows);
                            const std::size_t n = (end - oy) * gt.wo;
                            im2col(self.grad.data() + b * out_plane, gt, gcols.data(), oy, end);
                            DX.middleCols(oy * gt.wo, n).noalias() += WF * ConstMap(gcols.data(), gt.patch(), n);
                        }
                    } else {
                        MutMap DC(dcols.data(), g.patch(), g.pixels());
                        DC.noalias() = W.transpose() * G;
                        col2im_add(dcols.data(), g, dx);
                    }
                }
                if (has_bias && self.inputs[2]->requires_grad) {
                    auto& gb = self.inputs[2]->ensure_grad();
                    // plain loop: Eigen's vectorised sum depends on pointer alignment
                    for (std::size_t c = 0; c < g.cout; ++c) {
                        const double* row = self.grad.data() + b * out_plane + c * g.pixels();
                        double acc = 0.0;
                        for (std::size_t i = 0; i < g.pixels(); ++i) acc += row[i];
                        gb[c] += acc;
                    }
                }
            }
        },
        "conv2d");
}

// ---- normalisation ----------------------------------------------------------

Tensor softmax(const Tensor& x, int axis_arg) {
    require_defined(x, "softmax");
    const std::size_t axis = normalize_axis(axis_arg, x.rank(), "softmax");
    const AxisSplit s = split_at(x.shape(), axis);
    const auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.extent * s.inner + i;
            double mx = in[base];
            for (std::size_t j = 1; j < s.extent; ++j) mx = std::max(mx, in[base + j * s.inner]);
            double total = 0.0;
            for (std::size_t j = 0; j < s.extent; ++j) {
                const double e = std::exp(in[base + j * s.inner] - mx);
                out[base + j * s.inner] = e;
                total += e;
            }
            for (std::size_t j = 0; j < s.extent; ++j) out[base + j * s.inner] /= total;
        }
    }
    return make_result(
        x.shape(), std::move(out), {&x},
        [s](Node& self) {
            Node& nx = *self.inputs[0];
            if (!nx.requires_grad) return;
            auto& g = nx.ensure_grad();
            for (std::size_t o = 0; o < s.outer; ++o) {
                for (std::size_t i = 0; i < s.inner; ++i) {
                    const std::size_t base = o * s.extent * s.inner + i;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < s.extent; ++j) {
                        const std::size_t p = base + j * s.inner;
                        dot += self.grad[p] * self.data[p];
                    }
                    for (std::size_t j = 0; j < s.extent; ++j) {
                        const std::size_t p = base + j * s.inner;
                        g[p] += self.data[p] * (self.grad[p] - dot);
                    }
                }
            }
        },
        "softmax");
}

Tensor masked_softmax(const Tensor& x, const std::vector<std::uint8_t>& keep) {
    require_defined(x, "masked_softmax");
    if (x.rank() == 0) throw ShapeError("masked_softmax: scalar input");
    if (keep.size() != x.numel()) throw ShapeError("masked_softmax: mask size does not match " + shape_to_string(x.shape()));
    const std::size_t extent = x.shape().back();
    const std::size_t rows = x.numel() / extent;
    const auto in = x.data();
    std::vector<double> out(in.size(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * extent;
        bool any = false;
        double mx = 0.0;
        for (std::size_t j = 0; j < extent; ++j) {
            if (!keep[base + j]) continue;
            mx = any ? std::max(mx, in[base + j]) : in[base + j];
            any = true;
        }
        if (!any) {
            out[base] = 1.0;
            continue;
        }
        double total = 0.0;
        for (std::size_t j = 0; j < extent; ++j) {
            if (!keep[base + j]) continue;
            out[base + j] = std::exp(in[base + j] - mx);
            total += out[base + j];
        }
        for (std::size_t j = 0; j < extent; ++j) out[base + j] /= total;
    }
    return make_result(
        x.shape(), std::move(out), {&x},
        [extent, rows](Node& self) {
            Node& nx = *self.inputs[0];
            if (!nx.requires_grad) return;
            auto& g = nx.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t base = r * extent;
                double dot = 0.0;
                for (std::size_t j = 0; j < extent; ++j) dot += self.grad[base + j] * self.data[base + j];
                for (std::size_t j = 0; j < extent; ++j) {
                    g[base + j] += self.data[base + j] * (self.grad[base + j] - dot);
                }
            }
        },
        "masked_softmax");
}

// ---- elementwise ------------------------------------------------------------

Tensor relu(const Tensor& x) {
    if (KinkProbe* probe = KinkProbe::active(); probe && x.defined()) {
        for (double v : x.data()) probe->mix(v > 0.0 ? 2 : 1);
    }
    return unary_op(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, "sigmoid",
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
    return unary_op(
        x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    require_defined(x, "log");
    for (double v : x.data()) {
        if (!(v > 0.0)) throw DomainError("log: input contains non-positive value " + std::to_string(v));
    }
    return unary_op(
        x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor neg(const Tensor& x) {
    return unary_op(
        x, "neg", [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor square(const Tensor& x) {
    return unary_op(
        x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
    require_defined(x, "sqrt");
    for (double v : x.data()) {
        if (v < 0.0) throw DomainError("sqrt: input contains negative value " + std::to_string(v));
    }
    return unary_op(
        x, "sqrt", [](double v) { return std::sqrt(v); },
        [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw DomainError("clamp: lower bound exceeds upper bound");
    if (KinkProbe* probe = KinkProbe::active(); probe && x.defined()) {
        for (double v : x.data()) probe->mix(v < lo ? 1 : (v > hi ? 3 : 2));
    }
    return unary_op(
        x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
        [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor scale(const Tensor& x, double factor) {
    return unary_op(
        x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
    return unary_op(
        x, "add_scalar", [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double p, double q) { return p + q; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double p, double q) { return p - q; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double p, double q) { return p * q; }, [](double, double q) { return q; },
        [](double p, double) { return p; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_defined(b, "div");
    for (double v : b.data()) {
        if (v == 0.0) throw DomainError("div: division by zero");
    }
    return binary_op(
        a, b, "div", [](double p, double q) { return p / q; }, [](double, double q) { return 1.0 / q; },
        [](double p, double q) { return -p / (q * q); });
}

// ---- structural -------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    for (const Tensor& p : parts) require_defined(p, "concat");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_to_string(first));
    Shape shape = first;
    shape[axis] = 0;
    for (const Tensor& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
        if (!ok) {
            throw ShapeError("concat: shapes " + shape_to_string(first) + " and " + shape_to_string(s) +
                             " disagree off axis " + std::to_string(axis));
        }
        shape[axis] += s[axis];
    }
    const AxisSplit outer_split = split_at(shape, axis);
    const std::size_t out_block = outer_split.extent * outer_split.inner;
    std::vector<double> out(shape_numel(shape));
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        offsets.push_back(offset);
        const std::size_t block = p.shape()[axis] * outer_split.inner;
        const double* src = p.data().data();
        for (std::size_t o = 0; o < outer_split.outer; ++o) {
            std::copy(src + o * block, src + (o + 1) * block, out.begin() + o * out_block + offset);
        }
        offset += block;
    }
    return make_result(
        std::move(shape), std::move(out), parts,
        [offsets, outer_split, out_block, axis](Node& self) {
            for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                Node& in = *self.inputs[k];
                if (!in.requires_grad) continue;
                auto& g = in.ensure_grad();
                const std::size_t block = in.shape[axis] * outer_split.inner;
                for (std::size_t o = 0; o < outer_split.outer; ++o) {
                    const double* src = self.grad.data() + o * out_block + offsets[k];
                    for (std::size_t i = 0; i < block; ++i) g[o * block + i] += src[i];
                }
            }
        },
        "concat");
}

Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
    require_defined(x, "narrow");
    const Shape& sx = x.shape();
    if (axis >= sx.size() || length == 0 || start + length > sx[axis]) {
        throw ShapeError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") invalid on axis " + std::to_string(axis) + " of " + shape_to_string(sx));
    }
    const AxisSplit s = split_at(sx, axis);
    Shape shape = sx;
    shape[axis] = length;
    const std::size_t block = length * s.inner;
    const std::size_t in_block = s.extent * s.inner;
    const std::size_t skip = start * s.inner;
    std::vector<double> out(s.outer * block);
    const double* src = x.data().data();
    for (std::size_t o = 0; o < s.outer; ++o) {
        std::copy(src + o * in_block + skip, src + o * in_block + skip + block, out.begin() + o * block);
    }
    return make_result(
        std::move(shape), std::move(out), {&x},
        [s, block, in_block, skip](Node& self) {
            Node& nx = *self.inputs[0];
            if (!nx.requires_grad) return;
            auto& g = nx.ensure_grad();
            for (std::size_t o = 0; o < s.outer; ++o) {
                for (std::size_t i = 0; i < block; ++i) g[o * in_block + skip + i] += self.grad[o * block + i];
            }
        },
        "narrow");
}

std::vector<Tensor> split(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& sizes) {
    require_defined(x, "split");
    if (axis >= x.rank()) throw ShapeError("split: axis out of range for " + shape_to_string(x.shape()));
    if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != x.shape()[axis]) {
        throw ShapeError("split: sizes do not add up to axis extent of " + shape_to_string(x.shape()));
    }
    std::vector<Tensor> parts;
    std::size_t start = 0;
    for (std::size_t size : sizes) {
        parts.push_back(narrow(x, axis, start, size));
        start += size;
    }
    return parts;
}

Tensor reshape(const Tensor& x, Shape shape) {
    require_defined(x, "reshape");
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " + shape_to_string(shape));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_result(
        std::move(shape), std::move(out), {&x},
        [](Node& self) {
            Node& nx = *self.inputs[0];
            if (!nx.requires_grad) return;
            auto& g = nx.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        },
        "reshape");
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
    require_defined(x, "permute");
    const Shape& sx = x.shape();
    const std::size_t rank = sx.size();
    std::vector<bool> seen(rank, false);
    if (order.size() != rank) throw ShapeError("permute: order rank does not match " + shape_to_string(sx));
    for (std::size_t a : order) {
        if (a >= rank || seen[a]) throw ShapeError("permute: invalid axis order for " + shape_to_string(sx));
        seen[a] = true;
    }
    std::vector<std::size_t> in_strides(rank);
    std::size_t stride = 1;
    for (std::size_t i = rank; i-- > 0;) {
        in_strides[i] = stride;
        stride *= sx[i];
    }
    Shape shape(rank);
    std::vector<std::size_t> strides(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        shape[i] = sx[order[i]];
        strides[i] = in_strides[order[i]];
    }
    const std::size_t n = x.numel();
    auto map = std::make_shared<std::vector<std::size_t>>(n);
    std::vector<std::size_t> counter(rank, 0);
    std::size_t pos = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        (*map)[flat] = pos;
        for (std::size_t i = rank; i-- > 0;) {
            ++counter[i];
            pos += strides[i];
            if (counter[i] < shape[i]) break;
            pos -= strides[i] * counter[i];
            counter[i] = 0;
        }
    }
    const auto in = x.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = in[(*map)[i]];
    return make_result(
        std::move(shape), std::move(out), {&x},
        [map](Node& self) {
            Node& nx = *self.inputs[0];
            if (!nx.requires_grad) return;
            auto& g = nx.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[(*map)[i]] += self.grad[i];
        },
        "permute");
}

Tensor transpose(const Tensor& x, std::size_t axis_a, std::size_t axis_b) {
    require_defined(x, "transpose");
    if (axis_a >= x.rank() || axis_b >= x.rank()) {
        throw ShapeError("transpose: axis out of range for " + shape_to_string(x.shape()));
    }
    std::vector<std::size_t> order(x.rank());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::swap(order[axis_a], order[axis_b]);
    return permute(x, order);
}

Tensor reduce_sum(const Tensor& x) {
    require_defined(x, "reduce_sum");
    double total = 0.0;
    for (double v : x.data()) total += v;
    return make_result(
        {}, {total}, {&x},
        [](Node& self) {
            Node& nx = *self.inputs[0];
            if (!nx.requires_grad) return;
            auto& g = nx.ensure_grad();
            for (double& v : g) v += self.grad[0];
        },
        "reduce_sum");
}

Tensor reduce_sum(const Tensor& x, std::size_t axis, bool keepdim) {
    require_defined(x, "reduce_sum");
    if (axis >= x.rank()) throw ShapeError("reduce_sum: axis out of range for " + shape_to_string(x.shape()));
    const AxisSplit s = split_at(x.shape(), axis);
    Shape shape = x.shape();
    if (keepdim) {
        shape[axis] = 1;
    } else {
        shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    }
    const auto in = x.data();
    std::vector<double> out(s.outer * s.inner, 0.0);
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.extent; ++j) {
            const double* src = in.data() + (o * s.extent + j) * s.inner;
            double* dst = out.data() + o * s.inner;
            for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
        }
    }
    return make_result(
        std::move(shape), std::move(out), {&x},
        [s](Node& self) {
            Node& nx = *self.inputs[0];
            if (!nx.requires_grad) return;
            auto& g = nx.ensure_grad();
            for (std::size_t o = 0; o < s.outer; ++o) {
                for (std::size_t j = 0; j < s.extent; ++j) {
                    double* dst = g.data() + (o * s.extent + j) * s.inner;
                    const double* src = self.grad.data() + o * s.inner;
                    for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
                }
            }
        },
        "reduce_sum");
}

Tensor reduce_mean(const Tensor& x) {
    require_defined(x, "reduce_mean");
    return scale(reduce_sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reduce_mean(const Tensor& x, std::size_t axis, bool keepdim) {
    require_defined(x, "reduce_mean");
    if (axis >= x.rank()) throw ShapeError("reduce_mean: axis out of range for " + shape_to_string(x.shape()));
    return scale(reduce_sum(x, axis, keepdim), 1.0 / static_cast<double>(x.shape()[axis]));
}

Tensor upsample_nearest2x(const Tensor& x) {
    require_defined(x, "upsample_nearest2x");
    const Shape& sx = x.shape();
    if (sx.size() < 2) throw ShapeError("upsample_nearest2x: needs rank >= 2, got " + shape_to_string(sx));
    const std::size_t h = sx[sx.size() - 2];
    const std::size_t w = sx[sx.size() - 1];
    const std::size_t planes = x.numel() / (h * w);
    Shape shape = sx;
    shape[shape.size() - 2] = 2 * h;
    shape[shape.size() - 1] = 2 * w;
    const auto in = x.data();
    std::vector<double> out(4 * x.numel());
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = in.data() + p * h * w;
        double* dst = out.data() + p * 4 * h * w;
        for (std::size_t y = 0; y < 2 * h; ++y) {
            for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
        }
    }
    return make_result(
        std::move(shape), std::move(out), {&x},
        [planes, h, w](Node& self) {
            Node& nx = *self.inputs[0];
            if (!nx.requires_grad) return;
            auto& g = nx.ensure_grad();
            for (std::size_t p = 0; p < planes; ++p) {
                const double* src = self.grad.data() + p * 4 * h * w;
                double* dst = g.data() + p * h * w;
                for (std::size_t y = 0; y < 2 * h; ++y) {
                    for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[(y / 2) * w + xx / 2] += src[y * 2 * w + xx];
                }
            }
        },
        "upsample_nearest2x");
}

Tensor maxpool2x2(const Tensor& x) {
    require_defined(x, "maxpool2x2");
    const Shape& sx = x.shape();
    if (sx.size() < 2 || sx[sx.size() - 2] % 2 != 0 || sx[sx.size() - 1] % 2 != 0) {
        throw ShapeError("maxpool2x2: spatial dims of " + shape_to_string(sx) + " must be even");
    }
    const std::size_t h = sx[sx.size() - 2];
    const std::size_t w = sx[sx.size() - 1];
    const std::size_t planes = x.numel() / (h * w);
    Shape shape = sx;
    shape[shape.size() - 2] = h / 2;
    shape[shape.size() - 1] = w / 2;
    const std::size_t n = x.numel() / 4;
    auto argmax = std::make_shared<std::vector<std::size_t>>(n);
    std::vector<double> out(n);
    const auto in = x.data();
    KinkProbe* probe = KinkProbe::active();
    std::size_t k = 0;
    for (std::size_t p = 0; p < planes; ++p) {
        const std::size_t base = p * h * w;
        for (std::size_t y = 0; y < h; y += 2) {
            for (std::size_t xx = 0; xx < w; xx += 2) {
                const std::size_t cand[4] = {base + y * w + xx, base + y * w + xx + 1, base + (y + 1) * w + xx,
                                             base + (y + 1) * w + xx + 1};
                std::size_t best = cand[0];
                for (std::size_t c = 1; c < 4; ++c) {
                    if (in[cand[c]] > in[best]) best = cand[c];
                }
                (*argmax)[k] = best;
                out[k] = in[best];
                if (probe) probe->mix(best);
                ++k;
            }
        }
    }
    return make_result(
        std::move(shape), std::move(out), {&x},
        [argmax](Node& self) {
            Node& nx = *self.inputs[0];
            if (!nx.requires_grad) return;
            auto& g = nx.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[(*argmax)[i]] += self.grad[i];
        },
        "maxpool2x2");
}

Tensor embed_lookup(const Tensor& table, const std::vector<std::int64_t>& ids, const Shape& ids_shape) {
    require_defined(table, "embed_lookup");
    if (table.rank() != 2) throw ShapeError("embed_lookup: table must be 2-D, got " + shape_to_string(table.shape()));
    if (shape_numel(ids_shape) != ids.size()) throw ShapeError("embed_lookup: ids do not match their shape");
    const std::size_t vocab = table.dim(0);
    const std::size_t width = table.dim(1);
    for (std::int64_t id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
            throw DomainError("embed_lookup: id " + std::to_string(id) + " outside table of " +
                              std::to_string(vocab) + " rows");
        }
    }
    const auto src = table.data();
    std::vector<double> out(ids.size() * width);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * width), width,
                    out.begin() + static_cast<std::ptrdiff_t>(i * width));
    }
    Shape shape = ids_shape;
    shape.push_back(width);
    return make_result(
        std::move(shape), std::move(out), {&table},
        [ids, width](Node& self) {
            Node& nt = *self.inputs[0];
            if (!nt.requires_grad) return;
            auto& g = nt.ensure_grad();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                double* dst = g.data() + static_cast<std::size_t>(ids[i]) * width;
                for (std::size_t d = 0; d < width; ++d) dst[d] += self.grad[i * width + d];
            }
        },
        "embed_lookup");
}

}  // namespace tpunet
