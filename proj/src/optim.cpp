#include "texter/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace texter {

void adam_step(OptimizerState& state, Tensor& param, const std::vector<double>& grad) {
    auto& p = param.mutable_value();
    if (grad.size() != p.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    if (state.kind != OptKind::Adam)
        throw std::invalid_argument("adam_step: state kind is not adam");
    if (state.m.size() != p.size()) state.m.assign(p.size(), 0.0);
    if (state.v.size() != p.size()) state.v.assign(p.size(), 0.0);

    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (size_t i = 0; i < p.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

void sgd_step(OptimizerState& state, Tensor& param, const std::vector<double>& grad) {
    auto& p = param.mutable_value();
    if (grad.size() != p.size())
        throw std::invalid_argument("sgd_step: gradient shape mismatch");
    state.step += 1;
    for (size_t i = 0; i < p.size(); ++i) p[i] -= state.lr * grad[i];
}

void Optimizer::add_param(Tensor& t) {
    params_.push_back(t);
    OptimizerState s;
    s.kind = kind_;
    s.lr = lr_;
    states_.push_back(std::move(s));
}

void Optimizer::step() {
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (p.grad().size() != p.size()) continue; // no gradient reached this param
        if (kind_ == OptKind::Adam)
            adam_step(states_[i], p, p.grad());
        else
            sgd_step(states_[i], p, p.grad());
        p.zero_grad();
    }
}

void Optimizer::set_lr(double lr) {
    lr_ = lr;
    for (auto& s : states_) s.lr = lr;
}

} // namespace texter
