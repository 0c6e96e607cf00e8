#pragma once

#include <vector>

#include "texter/tensor.hpp"

namespace texter {

enum class OptKind { Sgd, Adam };

// Per-parameter optimizer state. Moments are shaped like the tracked
// parameter; the step counter is strictly increasing.
struct OptimizerState {
    OptKind kind = OptKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

// Standard Adam update with bias correction, applied in place.
void adam_step(OptimizerState& state, Tensor& param, const std::vector<double>& grad);

// Plain SGD update.
void sgd_step(OptimizerState& state, Tensor& param, const std::vector<double>& grad);

// Convenience driver that owns one state per parameter. Parameters are
// registered once; step() applies the update from each param's .grad()
// and clears it.
class Optimizer {
public:
    Optimizer(OptKind kind, double lr) : kind_(kind), lr_(lr) {}

    void add_param(Tensor& t);
    void step();
    double lr() const { return lr_; }
    void set_lr(double lr);

private:
    OptKind kind_;
    double lr_;
    std::vector<Tensor> params_;
    std::vector<OptimizerState> states_;
};

} // namespace texter
