#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace texter {

// Dense double-precision tensor participating in reverse-mode autodiff.
// Ops build a DAG of coarse nodes (one node per primitive); backward()
// walks it once in reverse topological order and then consumes it.
// A graph is confined to one thread; tensors with requires_grad == false
// are freely shareable read-only.

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;   // allocated lazily during backward
    bool requires_grad = false; // leaf flag: gradient is wanted here
    bool needs_grad = false;    // true if any ancestor leaf requires grad
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> back; // pulls this->grad, pushes into parents

    size_t size() const { return value.size(); }
};

} // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    const std::vector<int>& shape() const { return n_->shape; }
    size_t size() const { return n_->value.size(); }
    const std::vector<double>& value() const { return n_->value; }
    std::vector<double>& mutable_value() { return n_->value; }
    const std::vector<double>& grad() const { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }
    void zero_grad();

    // scalar access; throws unless the tensor holds exactly one element
    double item() const;

    bool defined() const { return n_ != nullptr; }
    detail::Node* node() const { return n_.get(); }
    const std::shared_ptr<detail::Node>& handle() const { return n_; }

    // internal: wrap an existing node
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> n_;
};

// Accumulates d(root)/d(leaf) into every requires_grad leaf reachable from
// root, then resets the traversed graph. root must be scalar.
void backward(const Tensor& root);

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor recip(const Tensor& a);
// broadcast ops against a scalar tensor
Tensor scale(const Tensor& a, const Tensor& s);  // a * s
Tensor shift(const Tensor& a, const Tensor& s);  // a + s

// ---- nonlinearities ----
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sqrt_t(const Tensor& a);
Tensor cos_t(const Tensor& a);
Tensor sin_t(const Tensor& a);

// ---- linear algebra ----
Tensor matvec(const Tensor& m, const Tensor& v); // m: [r, c], v: [c] -> [r]
Tensor dot(const Tensor& a, const Tensor& b);    // -> scalar

// ---- reductions / indexing ----
Tensor sum(const Tensor& a);           // -> scalar
Tensor mean(const Tensor& a);          // -> scalar
Tensor log_sum_exp(const Tensor& a);   // vector -> scalar, stable
Tensor at(const Tensor& v, int i);     // vector element -> scalar
Tensor row(const Tensor& m, int i);    // matrix row -> vector
Tensor stack(const std::vector<Tensor>& scalars);  // n scalars -> [n]
Tensor concat0(const std::vector<Tensor>& grids);  // C x [H,W] -> [C,H,W]
Tensor flatten(const Tensor& a);       // any shape -> [size]

// ---- image ops (planar [C,H,W]) ----
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b); // same pad
Tensor avgpool2(const Tensor& x);      // [C,H,W] -> [C,H/2,W/2]
Tensor spatial_mean(const Tensor& x);  // [C,H,W] -> [C]
Tensor total_variation(const Tensor& x); // -> scalar

// ---- sparsity ----
// Keeps the K largest-magnitude entries (ties toward the lowest index),
// zeroes the rest. Gradient flows only through the kept entries.
Tensor topk_mask(const Tensor& v, int k);

// ---- permutation / Fourier ----
Tensor permute(const Tensor& a, const std::vector<int>& index);
// real part of the (1/HW)-normalized inverse 2-D DFT of (re + i*im)
Tensor idft2_real(const Tensor& re, const Tensor& im);

// ---- composites ----
Tensor l2_normalize(const Tensor& v);
Tensor softmax(const Tensor& v);

// rounds every element through float32; used before checkpointing so that
// a save/load round trip is bit-exact
void snap_to_float32(Tensor& t);

// non-autodiff helpers
double vec_dot(const std::vector<double>& a, const std::vector<double>& b);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

} // namespace texter
