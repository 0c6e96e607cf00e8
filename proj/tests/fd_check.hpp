#pragma once

// Finite-difference gradient oracle for autodiff primitives. Independent of
// the backward pass: evaluates the forward function twice per coordinate.

#include <cmath>
#include <functional>
#include <vector>

#include "texter/rng.hpp"
#include "texter/tensor.hpp"

namespace fdtest {

struct FdSpec {
    std::vector<std::vector<int>> shapes;
    std::vector<std::vector<double>> values;
};

using BuildFn = std::function<texter::Tensor(std::vector<texter::Tensor>&)>;

inline double eval_scalar(const FdSpec& spec, const BuildFn& f) {
    std::vector<texter::Tensor> leaves;
    leaves.reserve(spec.shapes.size());
    for (size_t i = 0; i < spec.shapes.size(); ++i)
        leaves.push_back(texter::Tensor::from(spec.shapes[i], spec.values[i]));
    std::vector<texter::Tensor> args = leaves;
    return f(args).item();
}

// Returns the maximum relative error between analytic and central-difference
// gradients over every coordinate of every input.
inline double max_grad_rel_err(const FdSpec& spec, const BuildFn& f, double h = 1e-4) {
    std::vector<texter::Tensor> leaves;
    for (size_t i = 0; i < spec.shapes.size(); ++i)
        leaves.push_back(texter::Tensor::from(spec.shapes[i], spec.values[i], true));
    std::vector<texter::Tensor> args = leaves;
    texter::Tensor root = f(args);
    texter::backward(root);

    double worst = 0.0;
    for (size_t i = 0; i < leaves.size(); ++i) {
        const auto& g = leaves[i].grad();
        for (size_t j = 0; j < spec.values[i].size(); ++j) {
            FdSpec plus = spec, minus = spec;
            plus.values[i][j] += h;
            minus.values[i][j] -= h;
            const double fd = (eval_scalar(plus, f) - eval_scalar(minus, f)) / (2.0 * h);
            const double an = g.empty() ? 0.0 : g[j];
            const double err = std::abs(an - fd) / std::max({1e-6, std::abs(an), std::abs(fd)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

inline std::vector<double> random_vec(texter::Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

} // namespace fdtest
