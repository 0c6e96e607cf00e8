#pragma once

#include <vector>

#include "texter/tensor.hpp"

namespace texter {

// 2-D complex spectrum stored as separate real/imaginary planes.
struct ComplexGrid {
    int h = 0;
    int w = 0;
    std::vector<double> re;
    std::vector<double> im;

    ComplexGrid() = default;
    ComplexGrid(int h_, int w_) : h(h_), w(w_), re(size_t(h_) * w_, 0.0), im(size_t(h_) * w_, 0.0) {}
    size_t size() const { return re.size(); }
};

// Unnormalized forward DFT: G[k,l] = sum_{u,v} g[u,v] e^{-2*pi*i (ku/H + lv/W)}.
// Dense separable evaluation; intended for desk resolutions (<= 64x64).
ComplexGrid dft2(const std::vector<double>& grid, int h, int w);

// Inverse with 1/(HW) normalization; returns the real part.
std::vector<double> idft2(const ComplexGrid& spec);

// Elementwise magnitude |G|.
std::vector<double> magnitude(const ComplexGrid& spec);

} // namespace texter
