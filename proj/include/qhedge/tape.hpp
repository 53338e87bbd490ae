#ifndef QHEDGE_TAPE_HPP
#define QHEDGE_TAPE_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

#include "qhedge/common.hpp"
#include "qhedge/rng.hpp"

namespace qhedge::ad {

/// Persistent parameter block: values plus a gradient accumulator that
/// backward passes add into. Layout is row-major rows x cols.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<Real> v;
    std::vector<Real> g;

    Tensor() = default;
    Tensor(int r, int c)
        : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0),
          g(static_cast<std::size_t>(r) * c, 0.0) {}

    std::size_t size() const { return v.size(); }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

enum class Op : unsigned char {
    Leaf,
    Affine,
    Relu,
    Sigmoid,
    Add,
    Sub,
    Mul,
    AddScalar,
    MulScalar,
    Abs,
    Square,
    MeanAll,
    Concat,
    Dropout,
    LayerNorm,
};

/// Reverse-mode tape over batched matrices.
///
/// Every node is a batch x dim value block in one contiguous arena; ops are
/// dispatched by opcode, no per-node closures. Gradients of parameter
/// Tensors accumulate across backward() calls until the caller zeroes them,
/// which lets composite losses touch several networks in one sweep.
class Tape {
public:
    /// Copies external data in as a constant input node.
    int leaf(const Real* data, int rows, int cols) {
        const int id = new_node(Op::Leaf, rows, cols);
        Real* dst = val(id);
        for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i) dst[i] = data[i];
        return id;
    }

    int leaf_fill(Real value, int rows, int cols) {
        const int id = new_node(Op::Leaf, rows, cols);
        Real* dst = val(id);
        for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i) dst[i] = value;
        return id;
    }

    /// y = x W + b with x:(n,in), W:(in,out), b:(1,out).
    int affine(int x, Tensor& W, Tensor& b) {
        const Node& xs = node(x);
        if (xs.cols != W.rows || W.cols != b.cols || b.rows != 1)
            throw std::invalid_argument("affine: shape mismatch");
        const int id = new_node(Op::Affine, xs.rows, W.cols, x);
        nodes_[static_cast<std::size_t>(id)].W = &W;
        nodes_[static_cast<std::size_t>(id)].B = &b;
        const Real* xv = val(x);
        Real* yv = val(id);
        const int n = xs.rows, in = W.rows, out = W.cols;
        for (int r = 0; r < n; ++r) {
            Real* yrow = yv + static_cast<std::size_t>(r) * out;
            for (int o = 0; o < out; ++o) yrow[o] = b.v[static_cast<std::size_t>(o)];
            const Real* xrow = xv + static_cast<std::size_t>(r) * in;
            for (int i = 0; i < in; ++i) {
                const Real xi = xrow[i];
                const Real* wrow = W.v.data() + static_cast<std::size_t>(i) * out;
                for (int o = 0; o < out; ++o) yrow[o] += xi * wrow[o];
            }
        }
        return id;
    }

    int relu(int x) {
        const int id = same_shape(Op::Relu, x);
        const Real* xv = val(x);
        Real* yv = val(id);
        for (std::size_t i = 0; i < count(id); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
        return id;
    }

    int sigmoid(int x) {
        const int id = same_shape(Op::Sigmoid, x);
        const Real* xv = val(x);
        Real* yv = val(id);
        for (std::size_t i = 0; i < count(id); ++i) yv[i] = 1.0 / (1.0 + std::exp(-xv[i]));
        return id;
    }

    int add(int a, int b) { return binary(Op::Add, a, b); }
    int sub(int a, int b) { return binary(Op::Sub, a, b); }
    int mul(int a, int b) { return binary(Op::Mul, a, b); }

    int add_scalar(int x, Real c) {
        const int id = same_shape(Op::AddScalar, x);
        nodes_[static_cast<std::size_t>(id)].scalar = c;
        const Real* xv = val(x);
        Real* yv = val(id);
        for (std::size_t i = 0; i < count(id); ++i) yv[i] = xv[i] + c;
        return id;
    }

    int mul_scalar(int x, Real c) {
        const int id = same_shape(Op::MulScalar, x);
        nodes_[static_cast<std::size_t>(id)].scalar = c;
        const Real* xv = val(x);
        Real* yv = val(id);
        for (std::size_t i = 0; i < count(id); ++i) yv[i] = xv[i] * c;
        return id;
    }

    /// |x| elementwise; backward uses subgradient 0 at the kink.
    int abs(int x) {
        const int id = same_shape(Op::Abs, x);
        const Real* xv = val(x);
        Real* yv = val(id);
        for (std::size_t i = 0; i < count(id); ++i) yv[i] = std::abs(xv[i]);
        return id;
    }

    int square(int x) {
        const int id = same_shape(Op::Square, x);
        const Real* xv = val(x);
        Real* yv = val(id);
        for (std::size_t i = 0; i < count(id); ++i) yv[i] = xv[i] * xv[i];
        return id;
    }

    /// Mean over every element; produces the 1x1 loss node.
    int mean_all(int x) {
        const int id = new_node(Op::MeanAll, 1, 1, x);
        const Real* xv = val(x);
        Real s = 0.0;
        for (std::size_t i = 0; i < count(x); ++i) s += xv[i];
        *val(id) = s / static_cast<Real>(count(x));
        return id;
    }

    /// Column-wise concatenation of up to three equal-row nodes.
    int concat(std::initializer_list<int> xs) {
        if (xs.size() < 1 || xs.size() > 3) throw std::invalid_argument("concat: 1..3 inputs");
        int rows = -1, cols = 0;
        for (int x : xs) {
            const Node& s = node(x);
            if (rows < 0) rows = s.rows;
            if (s.rows != rows) throw std::invalid_argument("concat: row mismatch");
            cols += s.cols;
        }
        auto it = xs.begin();
        const int a = *it++;
        const int b = it != xs.end() ? *it++ : -1;
        const int c = it != xs.end() ? *it++ : -1;
        const int id = new_node(Op::Concat, rows, cols, a, b, c);
        Real* yv = val(id);
        int col0 = 0;
        for (int x : xs) {
            const Node& s = node(x);
            const Real* xv = val(x);
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < s.cols; ++j)
                    yv[static_cast<std::size_t>(r) * cols + col0 + j] =
                        xv[static_cast<std::size_t>(r) * s.cols + j];
            col0 += s.cols;
        }
        return id;
    }

    /// Inverted dropout: keeps with probability 1-p and rescales by
    /// 1/(1-p), so eval mode needs no compensation.
    int dropout(int x, Real p, NormalSource& rng) {
        if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p in [0,1)");
        const int id = same_shape(Op::Dropout, x);
        Node& nd = nodes_[static_cast<std::size_t>(id)];
        nd.aux = aux_.size();
        aux_.resize(nd.aux + count(id));
        const Real keep = 1.0 - p;
        const Real* xv = val(x);
        Real* yv = val(id);
        Real* mask = aux_.data() + nd.aux;
        for (std::size_t i = 0; i < count(id); ++i) {
            mask[i] = rng.uniform01() <= keep ? 1.0 / keep : 0.0;
            yv[i] = xv[i] * mask[i];
        }
        return id;
    }

    /// Per-row (per-sample) normalization with learned gain/shift.
    int layer_norm(int x, Tensor& gamma, Tensor& beta) {
        const Node& xs = node(x);
        if (gamma.rows != 1 || gamma.cols != xs.cols || beta.rows != 1 || beta.cols != xs.cols)
            throw std::invalid_argument("layer_norm: gain/shift shape mismatch");
        const int id = same_shape(Op::LayerNorm, x);
        Node& nd = nodes_[static_cast<std::size_t>(id)];
        nd.W = &gamma;
        nd.B = &beta;
        const int n = xs.rows, c = xs.cols;
        nd.aux = aux_.size();
        aux_.resize(nd.aux + count(id) + static_cast<std::size_t>(n));  // xhat, then istd
        Real* xhat = aux_.data() + nd.aux;
        Real* istd = xhat + count(id);
        const Real* xv = val(x);
        Real* yv = val(id);
        constexpr Real eps = 1e-5;
        for (int r = 0; r < n; ++r) {
            const Real* xrow = xv + static_cast<std::size_t>(r) * c;
            Real m = 0.0;
            for (int j = 0; j < c; ++j) m += xrow[j];
            m /= static_cast<Real>(c);
            Real var = 0.0;
            for (int j = 0; j < c; ++j) var += (xrow[j] - m) * (xrow[j] - m);
            var /= static_cast<Real>(c);
            const Real is = 1.0 / std::sqrt(var + eps);
            istd[r] = is;
            Real* hrow = xhat + static_cast<std::size_t>(r) * c;
            Real* yrow = yv + static_cast<std::size_t>(r) * c;
            for (int j = 0; j < c; ++j) {
                hrow[j] = (xrow[j] - m) * is;
                yrow[j] = gamma.v[static_cast<std::size_t>(j)] * hrow[j] +
                          beta.v[static_cast<std::size_t>(j)];
            }
        }
        return id;
    }

    int rows(int id) const { return node(id).rows; }
    int cols(int id) const { return node(id).cols; }
    const Real* value(int id) const { return val_.data() + node(id).off; }
    const Real* gradient(int id) const { return grad_.data() + node(id).off; }

    /// Reverse sweep from a scalar node; accumulates parameter gradients
    /// into their Tensors. The tape is consumed: clear() before reuse.
    void backward(int loss_id) {
        if (consumed_) throw std::logic_error("tape: backward on a consumed tape");
        const Node& top = node(loss_id);
        if (top.rows != 1 || top.cols != 1)
            throw std::invalid_argument("backward: loss node must be scalar");
        consumed_ = true;
        grad_.assign(val_.size(), 0.0);
        grad_[top.off] = 1.0;
        for (int id = loss_id; id >= 0; --id) backprop_node(id);
    }

    void clear() {
        nodes_.clear();
        val_.clear();
        grad_.clear();
        aux_.clear();
        consumed_ = false;
    }

private:
    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        Tensor* W = nullptr;
        Tensor* B = nullptr;
        int rows = 0, cols = 0;
        std::size_t off = 0;
        std::size_t aux = 0;
        Real scalar = 0.0;
    };

    std::vector<Node> nodes_;
    std::vector<Real> val_;
    std::vector<Real> grad_;
    std::vector<Real> aux_;
    bool consumed_ = false;

    const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    Real* val(int id) { return val_.data() + node(id).off; }
    Real* grd(int id) { return grad_.data() + node(id).off; }
    std::size_t count(int id) const {
        return static_cast<std::size_t>(node(id).rows) * node(id).cols;
    }

    int new_node(Op op, int rows, int cols, int a = -1, int b = -1, int c = -1) {
        if (consumed_) throw std::logic_error("tape: build on a consumed tape; clear() first");
        Node nd;
        nd.op = op;
        nd.a = a;
        nd.b = b;
        nd.c = c;
        nd.rows = rows;
        nd.cols = cols;
        nd.off = val_.size();
        val_.resize(nd.off + static_cast<std::size_t>(rows) * cols, 0.0);
        nodes_.push_back(nd);
        return static_cast<int>(nodes_.size()) - 1;
    }

    int same_shape(Op op, int x) { return new_node(op, node(x).rows, node(x).cols, x); }

    int binary(Op op, int a, int b) {
        const Node& as = node(a);
        const Node& bs = node(b);
        if (as.rows != bs.rows || as.cols != bs.cols)
            throw std::invalid_argument("binary op: shape mismatch");
        const int id = new_node(op, as.rows, as.cols, a, b);
        const Real* av = val(a);
        const Real* bv = val(b);
        Real* yv = val(id);
        const std::size_t cnt = count(id);
        switch (op) {
            case Op::Add:
                for (std::size_t i = 0; i < cnt; ++i) yv[i] = av[i] + bv[i];
                break;
            case Op::Sub:
                for (std::size_t i = 0; i < cnt; ++i) yv[i] = av[i] - bv[i];
                break;
            case Op::Mul:
                for (std::size_t i = 0; i < cnt; ++i) yv[i] = av[i] * bv[i];
                break;
            default:
                throw std::logic_error("binary: bad op");
        }
        return id;
    }

    void backprop_node(int id) {
        Node& nd = nodes_[static_cast<std::size_t>(id)];
        const Real* dy = grd(id);
        switch (nd.op) {
            case Op::Leaf:
                break;
            case Op::Affine: {
                const Node& xs = node(nd.a);
                Tensor& W = *nd.W;
                Tensor& B = *nd.B;
                const Real* xv = val(nd.a);
                Real* dx = grd(nd.a);
                const int n = xs.rows, in = W.rows, out = W.cols;
                for (int r = 0; r < n; ++r) {
                    const Real* dyrow = dy + static_cast<std::size_t>(r) * out;
                    const Real* xrow = xv + static_cast<std::size_t>(r) * in;
                    Real* dxrow = dx + static_cast<std::size_t>(r) * in;
                    for (int o = 0; o < out; ++o) B.g[static_cast<std::size_t>(o)] += dyrow[o];
                    for (int i = 0; i < in; ++i) {
                        const Real* wrow = W.v.data() + static_cast<std::size_t>(i) * out;
                        Real* gwrow = W.g.data() + static_cast<std::size_t>(i) * out;
                        Real acc = 0.0;
                        const Real xi = xrow[i];
                        for (int o = 0; o < out; ++o) {
                            acc += dyrow[o] * wrow[o];
                            gwrow[o] += xi * dyrow[o];
                        }
                        dxrow[i] += acc;
                    }
                }
                break;
            }
            case Op::Relu: {
                const Real* xv = val(nd.a);
                Real* dx = grd(nd.a);
                for (std::size_t i = 0; i < count(id); ++i)
                    if (xv[i] > 0.0) dx[i] += dy[i];
                break;
            }
            case Op::Sigmoid: {
                const Real* yv = val(id);
                Real* dx = grd(nd.a);
                for (std::size_t i = 0; i < count(id); ++i)
                    dx[i] += dy[i] * yv[i] * (1.0 - yv[i]);
                break;
            }
            case Op::Add: {
                Real* da = grd(nd.a);
                Real* db = grd(nd.b);
                for (std::size_t i = 0; i < count(id); ++i) {
                    da[i] += dy[i];
                    db[i] += dy[i];
                }
                break;
            }
            case Op::Sub: {
                Real* da = grd(nd.a);
                Real* db = grd(nd.b);
                for (std::size_t i = 0; i < count(id); ++i) {
                    da[i] += dy[i];
                    db[i] -= dy[i];
                }
                break;
            }
            case Op::Mul: {
                const Real* av = val(nd.a);
                const Real* bv = val(nd.b);
                Real* da = grd(nd.a);
                Real* db = grd(nd.b);
                for (std::size_t i = 0; i < count(id); ++i) {
                    da[i] += dy[i] * bv[i];
                    db[i] += dy[i] * av[i];
                }
                break;
            }
            case Op::AddScalar: {
                Real* dx = grd(nd.a);
                for (std::size_t i = 0; i < count(id); ++i) dx[i] += dy[i];
                break;
            }
            case Op::MulScalar: {
                Real* dx = grd(nd.a);
                for (std::size_t i = 0; i < count(id); ++i) dx[i] += dy[i] * nd.scalar;
                break;
            }
            case Op::Abs: {
                const Real* xv = val(nd.a);
                Real* dx = grd(nd.a);
                for (std::size_t i = 0; i < count(id); ++i) {
                    if (xv[i] > 0.0)
                        dx[i] += dy[i];
                    else if (xv[i] < 0.0)
                        dx[i] -= dy[i];
                    // subgradient 0 exactly at the kink
                }
                break;
            }
            case Op::Square: {
                const Real* xv = val(nd.a);
                Real* dx = grd(nd.a);
                for (std::size_t i = 0; i < count(id); ++i) dx[i] += 2.0 * xv[i] * dy[i];
                break;
            }
            case Op::MeanAll: {
                Real* dx = grd(nd.a);
                const Real w = dy[0] / static_cast<Real>(count(nd.a));
                for (std::size_t i = 0; i < count(nd.a); ++i) dx[i] += w;
                break;
            }
            case Op::Concat: {
                const int rows_n = nd.rows;
                int col0 = 0;
                for (int src : {nd.a, nd.b, nd.c}) {
                    if (src < 0) break;
                    const Node& s = node(src);
                    Real* dx = grd(src);
                    for (int r = 0; r < rows_n; ++r)
                        for (int j = 0; j < s.cols; ++j)
                            dx[static_cast<std::size_t>(r) * s.cols + j] +=
                                dy[static_cast<std::size_t>(r) * nd.cols + col0 + j];
                    col0 += s.cols;
                }
                break;
            }
            case Op::Dropout: {
                const Real* mask = aux_.data() + nd.aux;
                Real* dx = grd(nd.a);
                for (std::size_t i = 0; i < count(id); ++i) dx[i] += dy[i] * mask[i];
                break;
            }
            case Op::LayerNorm: {
                Tensor& gamma = *nd.W;
                Tensor& beta = *nd.B;
                const int n = nd.rows, c = nd.cols;
                const Real* xhat = aux_.data() + nd.aux;
                const Real* istd = xhat + count(id);
                Real* dx = grd(nd.a);
                for (int r = 0; r < n; ++r) {
                    const Real* dyrow = dy + static_cast<std::size_t>(r) * c;
                    const Real* hrow = xhat + static_cast<std::size_t>(r) * c;
                    Real* dxrow = dx + static_cast<std::size_t>(r) * c;
                    Real sum_dh = 0.0, sum_dh_h = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const Real dh = dyrow[j] * gamma.v[static_cast<std::size_t>(j)];
                        sum_dh += dh;
                        sum_dh_h += dh * hrow[j];
                        gamma.g[static_cast<std::size_t>(j)] += dyrow[j] * hrow[j];
                        beta.g[static_cast<std::size_t>(j)] += dyrow[j];
                    }
                    const Real inv_c = 1.0 / static_cast<Real>(c);
                    for (int j = 0; j < c; ++j) {
                        const Real dh = dyrow[j] * gamma.v[static_cast<std::size_t>(j)];
                        dxrow[j] += istd[r] * (dh - inv_c * sum_dh - hrow[j] * inv_c * sum_dh_h);
                    }
                }
                break;
            }
        }
    }
};

}  // namespace qhedge::ad

#endif
