#include "texter/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace texter {

using detail::Node;

namespace {

size_t shape_size(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor extent must be positive");
        n *= static_cast<size_t>(d);
    }
    return n;
}

void check_finite(const Node& n, const char* op) {
    for (double v : n.value) {
        if (!std::isfinite(v))
            throw std::runtime_error(std::string("non-finite value produced by ") + op);
    }
}

std::shared_ptr<Node> make_node(std::vector<int> shape,
                                std::initializer_list<Tensor> parents) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(shape_size(n->shape), 0.0);
    for (const Tensor& p : parents) {
        if (!p.defined()) throw std::invalid_argument("undefined tensor operand");
        n->needs_grad = n->needs_grad || p.node()->requires_grad || p.node()->needs_grad;
        n->parents.push_back(p.handle());
    }
    return n;
}

std::shared_ptr<Node> make_node(std::vector<int> shape, const std::vector<Tensor>& parents) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(shape_size(n->shape), 0.0);
    for (const Tensor& p : parents) {
        if (!p.defined()) throw std::invalid_argument("undefined tensor operand");
        n->needs_grad = n->needs_grad || p.node()->requires_grad || p.node()->needs_grad;
        n->parents.push_back(p.handle());
    }
    return n;
}

// ensure a parent's grad buffer exists before accumulating into it
std::vector<double>& grad_of(Node& n) {
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

void require_vector(const Tensor& v, const char* op) {
    if (v.shape().size() != 1)
        throw std::invalid_argument(std::string(op) + ": expected a vector");
}

} // namespace

// ---------------------------------------------------------------------------
// Tensor basics
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(shape_size(n->shape), 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    if (shape_size(shape) != data.size())
        throw std::invalid_argument("tensor data length does not match shape");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    check_finite(*n, "tensor construction");
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

void Tensor::zero_grad() {
    if (n_) n_->grad.assign(n_->value.size(), 0.0);
}

double Tensor::item() const {
    if (!n_ || n_->value.size() != 1)
        throw std::invalid_argument("item(): tensor is not scalar");
    return n_->value[0];
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void backward(const Tensor& root) {
    if (!root.defined() || root.size() != 1)
        throw std::invalid_argument("backward: root must be a scalar tensor");

    // iterative post-order DFS over parents; order is deterministic
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.node());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if ((p->needs_grad || p->requires_grad) && visited.insert(p).second)
                stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    grad_of(*root.node())[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->back) {
            if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
            n->back(*n);
        }
    }

    // consume the graph: drop tape structure and intermediate buffers
    for (Node* n : order) {
        if (n->back) {
            n->back = nullptr;
            n->parents.clear();
        }
        if (!n->requires_grad) {
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
    }
}

// ---------------------------------------------------------------------------
// elementwise / arithmetic
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto n = make_node(a.shape(), {a, b});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] + b.value()[i];
    check_finite(*n, "add");
    if (n->needs_grad)
        n->back = [](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            auto& gb = grad_of(*self.parents[1]);
            for (size_t i = 0; i < self.grad.size(); ++i) {
                ga[i] += self.grad[i];
                gb[i] += self.grad[i];
            }
        };
    return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto n = make_node(a.shape(), {a, b});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] - b.value()[i];
    check_finite(*n, "sub");
    if (n->needs_grad)
        n->back = [](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            auto& gb = grad_of(*self.parents[1]);
            for (size_t i = 0; i < self.grad.size(); ++i) {
                ga[i] += self.grad[i];
                gb[i] -= self.grad[i];
            }
        };
    return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto n = make_node(a.shape(), {a, b});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] * b.value()[i];
    check_finite(*n, "mul");
    if (n->needs_grad)
        n->back = [](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            auto& ga = grad_of(pa);
            auto& gb = grad_of(pb);
            for (size_t i = 0; i < self.grad.size(); ++i) {
                ga[i] += self.grad[i] * pb.value[i];
                gb[i] += self.grad[i] * pa.value[i];
            }
        };
    return Tensor(n);
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor add_scalar(const Tensor& a, double c) {
    auto n = make_node(a.shape(), {a});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] + c;
    check_finite(*n, "add_scalar");
    if (n->needs_grad)
        n->back = [](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            for (size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
        };
    return Tensor(n);
}

Tensor mul_scalar(const Tensor& a, double c) {
    auto n = make_node(a.shape(), {a});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] * c;
    check_finite(*n, "mul_scalar");
    if (n->needs_grad)
        n->back = [c](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            for (size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * c;
        };
    return Tensor(n);
}

Tensor recip(const Tensor& a) {
    auto n = make_node(a.shape(), {a});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = 1.0 / a.value()[i];
    check_finite(*n, "recip");
    if (n->needs_grad)
        n->back = [](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            for (size_t i = 0; i < self.grad.size(); ++i)
                ga[i] -= self.grad[i] * self.value[i] * self.value[i];
        };
    return Tensor(n);
}

Tensor scale(const Tensor& a, const Tensor& s) {
    if (s.size() != 1) throw std::invalid_argument("scale: scalar operand expected");
    auto n = make_node(a.shape(), {a, s});
    const double sv = s.value()[0];
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] * sv;
    check_finite(*n, "scale");
    if (n->needs_grad)
        n->back = [](Node& self) {
            Node& pa = *self.parents[0];
            Node& ps = *self.parents[1];
            auto& ga = grad_of(pa);
            auto& gs = grad_of(ps);
            const double sv = ps.value[0];
            double acc = 0.0;
            for (size_t i = 0; i < self.grad.size(); ++i) {
                ga[i] += self.grad[i] * sv;
                acc += self.grad[i] * pa.value[i];
            }
            gs[0] += acc;
        };
    return Tensor(n);
}

Tensor shift(const Tensor& a, const Tensor& s) {
    if (s.size() != 1) throw std::invalid_argument("shift: scalar operand expected");
    auto n = make_node(a.shape(), {a, s});
    const double sv = s.value()[0];
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] + sv;
    check_finite(*n, "shift");
    if (n->needs_grad)
        n->back = [](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            auto& gs = grad_of(*self.parents[1]);
            double acc = 0.0;
            for (size_t i = 0; i < self.grad.size(); ++i) {
                ga[i] += self.grad[i];
                acc += self.grad[i];
            }
            gs[0] += acc;
        };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// nonlinearities
// ---------------------------------------------------------------------------

namespace {

template <typename F, typename DF>
Tensor unary_op(const Tensor& a, const char* name, F f, DF df_from_in_out) {
    auto n = make_node(a.shape(), {a});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = f(a.value()[i]);
    check_finite(*n, name);
    if (n->needs_grad)
        n->back = [df_from_in_out](Node& self) {
            Node& pa = *self.parents[0];
            auto& ga = grad_of(pa);
            for (size_t i = 0; i < self.grad.size(); ++i)
                ga[i] += self.grad[i] * df_from_in_out(pa.value[i], self.value[i]);
        };
    return Tensor(n);
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Tensor relu(const Tensor& a) {
    return unary_op(a, "relu",
                    [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(a, "sigmoid",
                    [](double x) { return stable_sigmoid(x); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_t(const Tensor& a) {
    return unary_op(a, "tanh",
                    [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor exp_t(const Tensor& a) {
    return unary_op(a, "exp",
                    [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
    return unary_op(a, "log",
                    [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_t(const Tensor& a) {
    return unary_op(a, "sqrt",
                    [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / y; });
}

Tensor cos_t(const Tensor& a) {
    return unary_op(a, "cos",
                    [](double x) { return std::cos(x); },
                    [](double x, double) { return -std::sin(x); });
}

Tensor sin_t(const Tensor& a) {
    return unary_op(a, "sin",
                    [](double x) { return std::sin(x); },
                    [](double x, double) { return std::cos(x); });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tensor matvec(const Tensor& m, const Tensor& v) {
    if (m.shape().size() != 2) throw std::invalid_argument("matvec: matrix expected");
    require_vector(v, "matvec");
    const int rows = m.shape()[0], cols = m.shape()[1];
    if (cols != v.shape()[0]) throw std::invalid_argument("matvec: dimension mismatch");
    auto n = make_node({rows}, {m, v});
    const double* mv = m.value().data();
    const double* vv = v.value().data();
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* mrow = mv + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += mrow[c] * vv[c];
        n->value[r] = acc;
    }
    check_finite(*n, "matvec");
    if (n->needs_grad)
        n->back = [rows, cols](Node& self) {
            Node& pm = *self.parents[0];
            Node& pv = *self.parents[1];
            auto& gm = grad_of(pm);
            auto& gv = grad_of(pv);
            for (int r = 0; r < rows; ++r) {
                const double g = self.grad[r];
                if (g == 0.0) continue;
                double* gmrow = gm.data() + static_cast<size_t>(r) * cols;
                const double* mrow = pm.value.data() + static_cast<size_t>(r) * cols;
                for (int c = 0; c < cols; ++c) {
                    gmrow[c] += g * pv.value[c];
                    gv[c] += g * mrow[c];
                }
            }
        };
    return Tensor(n);
}

Tensor dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    auto n = make_node({1}, {a, b});
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a.value()[i] * b.value()[i];
    n->value[0] = acc;
    check_finite(*n, "dot");
    if (n->needs_grad)
        n->back = [](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            auto& ga = grad_of(pa);
            auto& gb = grad_of(pb);
            const double g = self.grad[0];
            for (size_t i = 0; i < pa.value.size(); ++i) {
                ga[i] += g * pb.value[i];
                gb[i] += g * pa.value[i];
            }
        };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// reductions / indexing
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
    auto n = make_node({1}, {a});
    double acc = 0.0;
    for (double v : a.value()) acc += v;
    n->value[0] = acc;
    check_finite(*n, "sum");
    if (n->needs_grad)
        n->back = [](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            const double g = self.grad[0];
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        };
    return Tensor(n);
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.size());
    auto n = make_node({1}, {a});
    double acc = 0.0;
    for (double v : a.value()) acc += v;
    n->value[0] = acc * inv;
    check_finite(*n, "mean");
    if (n->needs_grad)
        n->back = [inv](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            const double g = self.grad[0] * inv;
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        };
    return Tensor(n);
}

Tensor log_sum_exp(const Tensor& a) {
    require_vector(a, "log_sum_exp");
    auto n = make_node({1}, {a});
    const double m = *std::max_element(a.value().begin(), a.value().end());
    double acc = 0.0;
    for (double v : a.value()) acc += std::exp(v - m);
    n->value[0] = m + std::log(acc);
    check_finite(*n, "log_sum_exp");
    if (n->needs_grad)
        n->back = [](Node& self) {
            Node& pa = *self.parents[0];
            auto& ga = grad_of(pa);
            const double g = self.grad[0];
            const double lse = self.value[0];
            for (size_t i = 0; i < pa.value.size(); ++i)
                ga[i] += g * std::exp(pa.value[i] - lse);
        };
    return Tensor(n);
}

Tensor at(const Tensor& v, int i) {
    require_vector(v, "at");
    if (i < 0 || i >= v.shape()[0]) throw std::invalid_argument("at: index out of range");
    auto n = make_node({1}, {v});
    n->value[0] = v.value()[static_cast<size_t>(i)];
    if (n->needs_grad)
        n->back = [i](Node& self) {
            grad_of(*self.parents[0])[static_cast<size_t>(i)] += self.grad[0];
        };
    return Tensor(n);
}

Tensor row(const Tensor& m, int i) {
    if (m.shape().size() != 2) throw std::invalid_argument("row: matrix expected");
    const int rows = m.shape()[0], cols = m.shape()[1];
    if (i < 0 || i >= rows) throw std::invalid_argument("row: index out of range");
    auto n = make_node({cols}, {m});
    const size_t off = static_cast<size_t>(i) * cols;
    std::copy_n(m.value().begin() + off, cols, n->value.begin());
    if (n->needs_grad)
        n->back = [off, cols](Node& self) {
            auto& gm = grad_of(*self.parents[0]);
            for (int c = 0; c < cols; ++c) gm[off + c] += self.grad[c];
        };
    return Tensor(n);
}

Tensor stack(const std::vector<Tensor>& scalars) {
    if (scalars.empty()) throw std::invalid_argument("stack: empty input");
    for (const auto& s : scalars)
        if (s.size() != 1) throw std::invalid_argument("stack: scalar operands expected");
    auto n = make_node({static_cast<int>(scalars.size())}, scalars);
    for (size_t i = 0; i < scalars.size(); ++i) n->value[i] = scalars[i].value()[0];
    check_finite(*n, "stack");
    if (n->needs_grad)
        n->back = [](Node& self) {
            for (size_t i = 0; i < self.parents.size(); ++i)
                grad_of(*self.parents[i])[0] += self.grad[i];
        };
    return Tensor(n);
}

Tensor concat0(const std::vector<Tensor>& grids) {
    if (grids.empty()) throw std::invalid_argument("concat0: empty input");
    const auto& s0 = grids[0].shape();
    if (s0.size() != 2) throw std::invalid_argument("concat0: [H,W] grids expected");
    for (const auto& g : grids)
        if (g.shape() != s0) throw std::invalid_argument("concat0: shape mismatch");
    const int hw = s0[0] * s0[1];
    auto n = make_node({static_cast<int>(grids.size()), s0[0], s0[1]}, grids);
    for (size_t c = 0; c < grids.size(); ++c)
        std::copy_n(grids[c].value().begin(), hw, n->value.begin() + c * hw);
    if (n->needs_grad)
        n->back = [hw](Node& self) {
            for (size_t c = 0; c < self.parents.size(); ++c) {
                auto& g = grad_of(*self.parents[c]);
                for (int i = 0; i < hw; ++i) g[i] += self.grad[c * hw + i];
            }
        };
    return Tensor(n);
}

Tensor flatten(const Tensor& a) {
    auto n = make_node({static_cast<int>(a.size())}, {a});
    n->value = a.value();
    if (n->needs_grad)
        n->back = [](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            for (size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
        };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// image ops
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W]");
    if (w.shape().size() != 4) throw std::invalid_argument("conv2d: weight must be [O,C,k,k]");
    require_vector(b, "conv2d");
    const int ci = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
    const int co = w.shape()[0], k = w.shape()[2];
    if (w.shape()[1] != ci || w.shape()[3] != k || b.shape()[0] != co || k % 2 == 0)
        throw std::invalid_argument("conv2d: inconsistent shapes (odd square kernel required)");
    const int pad = k / 2;
    auto n = make_node({co, h, wd}, {x, w, b});
    const double* xv = x.value().data();
    const double* wv = w.value().data();
    double* ov = n->value.data();
    for (int oc = 0; oc < co; ++oc) {
        const double bias = b.value()[oc];
        double* oplane = ov + static_cast<size_t>(oc) * h * wd;
        for (int i = 0; i < h * wd; ++i) oplane[i] = bias;
        for (int ic = 0; ic < ci; ++ic) {
            const double* xplane = xv + static_cast<size_t>(ic) * h * wd;
            const double* wk = wv + ((static_cast<size_t>(oc) * ci + ic) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double wgt = wk[ky * k + kx];
                    if (wgt == 0.0) continue;
                    const int dy = ky - pad, dx = kx - pad;
                    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                    for (int y = y0; y < y1; ++y) {
                        double* orow = oplane + static_cast<size_t>(y) * wd;
                        const double* xrow = xplane + static_cast<size_t>(y + dy) * wd + dx;
                        for (int xx = x0; xx < x1; ++xx) orow[xx] += wgt * xrow[xx];
                    }
                }
            }
        }
    }
    check_finite(*n, "conv2d");
    if (n->needs_grad)
        n->back = [ci, h, wd, co, k, pad](Node& self) {
            Node& px = *self.parents[0];
            Node& pw = *self.parents[1];
            Node& pb = *self.parents[2];
            auto& gx = grad_of(px);
            auto& gw = grad_of(pw);
            auto& gb = grad_of(pb);
            const double* g = self.grad.data();
            for (int oc = 0; oc < co; ++oc) {
                const double* gplane = g + static_cast<size_t>(oc) * h * wd;
                double acc = 0.0;
                for (int i = 0; i < h * wd; ++i) acc += gplane[i];
                gb[oc] += acc;
                for (int ic = 0; ic < ci; ++ic) {
                    const double* xplane = px.value.data() + static_cast<size_t>(ic) * h * wd;
                    double* gxplane = gx.data() + static_cast<size_t>(ic) * h * wd;
                    const size_t wbase = ((static_cast<size_t>(oc) * ci + ic) * k) * k;
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const double wgt = pw.value[wbase + ky * k + kx];
                            const int dy = ky - pad, dx = kx - pad;
                            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                            const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                            double wacc = 0.0;
                            for (int y = y0; y < y1; ++y) {
                                const double* grow = gplane + static_cast<size_t>(y) * wd;
                                const double* xrow = xplane + static_cast<size_t>(y + dy) * wd + dx;
                                double* gxrow = gxplane + static_cast<size_t>(y + dy) * wd + dx;
                                for (int xx = x0; xx < x1; ++xx) {
                                    wacc += grow[xx] * xrow[xx];
                                    gxrow[xx] += grow[xx] * wgt;
                                }
                            }
                            gw[wbase + ky * k + kx] += wacc;
                        }
                    }
                }
            }
        };
    return Tensor(n);
}

Tensor avgpool2(const Tensor& x) {
    if (x.shape().size() != 3) throw std::invalid_argument("avgpool2: input must be [C,H,W]");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (h % 2 != 0 || w % 2 != 0) throw std::invalid_argument("avgpool2: even extents required");
    const int oh = h / 2, ow = w / 2;
    auto n = make_node({c, oh, ow}, {x});
    for (int ch = 0; ch < c; ++ch) {
        const double* xp = x.value().data() + static_cast<size_t>(ch) * h * w;
        double* op = n->value.data() + static_cast<size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) {
                const double* r0 = xp + static_cast<size_t>(2 * y) * w + 2 * xx;
                const double* r1 = r0 + w;
                op[y * ow + xx] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
            }
    }
    if (n->needs_grad)
        n->back = [c, h, w, oh, ow](Node& self) {
            auto& gx = grad_of(*self.parents[0]);
            for (int ch = 0; ch < c; ++ch) {
                const double* gp = self.grad.data() + static_cast<size_t>(ch) * oh * ow;
                double* gxp = gx.data() + static_cast<size_t>(ch) * h * w;
                for (int y = 0; y < oh; ++y)
                    for (int xx = 0; xx < ow; ++xx) {
                        const double g = 0.25 * gp[y * ow + xx];
                        double* r0 = gxp + static_cast<size_t>(2 * y) * w + 2 * xx;
                        double* r1 = r0 + w;
                        r0[0] += g; r0[1] += g; r1[0] += g; r1[1] += g;
                    }
            }
        };
    return Tensor(n);
}

Tensor spatial_mean(const Tensor& x) {
    if (x.shape().size() != 3) throw std::invalid_argument("spatial_mean: input must be [C,H,W]");
    const int c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
    const double inv = 1.0 / static_cast<double>(hw);
    auto n = make_node({c}, {x});
    for (int ch = 0; ch < c; ++ch) {
        const double* xp = x.value().data() + static_cast<size_t>(ch) * hw;
        double acc = 0.0;
        for (int i = 0; i < hw; ++i) acc += xp[i];
        n->value[ch] = acc * inv;
    }
    check_finite(*n, "spatial_mean");
    if (n->needs_grad)
        n->back = [c, hw, inv](Node& self) {
            auto& gx = grad_of(*self.parents[0]);
            for (int ch = 0; ch < c; ++ch) {
                const double g = self.grad[ch] * inv;
                double* gxp = gx.data() + static_cast<size_t>(ch) * hw;
                for (int i = 0; i < hw; ++i) gxp[i] += g;
            }
        };
    return Tensor(n);
}

Tensor total_variation(const Tensor& x) {
    if (x.shape().size() != 3) throw std::invalid_argument("total_variation: input must be [C,H,W]");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    auto n = make_node({1}, {x});
    double acc = 0.0;
    const double* xv = x.value().data();
    for (int ch = 0; ch < c; ++ch) {
        const double* p = xv + static_cast<size_t>(ch) * h * w;
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                if (y + 1 < h) acc += std::abs(p[(y + 1) * w + xx] - p[y * w + xx]);
                if (xx + 1 < w) acc += std::abs(p[y * w + xx + 1] - p[y * w + xx]);
            }
    }
    n->value[0] = acc;
    check_finite(*n, "total_variation");
    if (n->needs_grad)
        n->back = [c, h, w](Node& self) {
            Node& px = *self.parents[0];
            auto& gx = grad_of(px);
            const double g = self.grad[0];
            const double* p = px.value.data();
            for (int ch = 0; ch < c; ++ch) {
                const size_t off = static_cast<size_t>(ch) * h * w;
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) {
                        const size_t i = off + static_cast<size_t>(y) * w + xx;
                        if (y + 1 < h) {
                            const size_t j = i + w;
                            const double s = p[j] > p[i] ? 1.0 : (p[j] < p[i] ? -1.0 : 0.0);
                            gx[j] += g * s;
                            gx[i] -= g * s;
                        }
                        if (xx + 1 < w) {
                            const size_t j = i + 1;
                            const double s = p[j] > p[i] ? 1.0 : (p[j] < p[i] ? -1.0 : 0.0);
                            gx[j] += g * s;
                            gx[i] -= g * s;
                        }
                    }
            }
        };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// sparsity / permutation
// ---------------------------------------------------------------------------

Tensor topk_mask(const Tensor& v, int k) {
    require_vector(v, "topk_mask");
    const int dim = v.shape()[0];
    if (k < 1 || k > dim) throw std::invalid_argument("topk_mask: K out of range");
    std::vector<int> idx(dim);
    std::iota(idx.begin(), idx.end(), 0);
    // descending by magnitude; ties broken toward the lowest index
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return std::abs(v.value()[a]) > std::abs(v.value()[b]);
    });
    auto kept = std::make_shared<std::vector<int>>(idx.begin(), idx.begin() + k);
    auto n = make_node({dim}, {v});
    for (int i : *kept) n->value[i] = v.value()[i];
    if (n->needs_grad)
        n->back = [kept](Node& self) {
            auto& gv = grad_of(*self.parents[0]);
            for (int i : *kept) gv[i] += self.grad[i];
        };
    return Tensor(n);
}

Tensor permute(const Tensor& a, const std::vector<int>& index) {
    if (index.size() != a.size()) throw std::invalid_argument("permute: index size mismatch");
    for (int i : index)
        if (i < 0 || static_cast<size_t>(i) >= a.size())
            throw std::invalid_argument("permute: index out of range");
    auto idx = std::make_shared<std::vector<int>>(index);
    auto n = make_node(a.shape(), {a});
    for (size_t i = 0; i < a.size(); ++i) n->value[i] = a.value()[(*idx)[i]];
    if (n->needs_grad)
        n->back = [idx](Node& self) {
            auto& ga = grad_of(*self.parents[0]);
            for (size_t i = 0; i < self.grad.size(); ++i) ga[(*idx)[i]] += self.grad[i];
        };
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// composites / utilities
// ---------------------------------------------------------------------------

Tensor l2_normalize(const Tensor& v) {
    Tensor nrm = sqrt_t(add_scalar(dot(v, v), 1e-24));
    return scale(v, recip(nrm));
}

Tensor softmax(const Tensor& v) {
    Tensor lse = log_sum_exp(v);
    return exp_t(shift(v, neg(lse)));
}

void snap_to_float32(Tensor& t) {
    for (double& v : t.mutable_value()) v = static_cast<double>(static_cast<float>(v));
}

double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = std::sqrt(vec_dot(a, a));
    const double nb = std::sqrt(vec_dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return vec_dot(a, b) / (na * nb);
}

} // namespace texter
