#pragma once

#include <string>
#include <vector>

#include "texter/tensor.hpp"

namespace texter {

// Planar RGB image with values in [0,1]; channel-major layout [3][H][W]
// so conversion to/from [C,H,W] tensors is a straight copy.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> data; // size 3*h*w

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), data(size_t(3) * h_ * w_, 0.0) {}

    double& at(int c, int y, int x) { return data[(size_t(c) * h + y) * w + x]; }
    double at(int c, int y, int x) const { return data[(size_t(c) * h + y) * w + x]; }

    void clamp01();
};

Tensor to_tensor(const Image& img, bool requires_grad = false);
Image from_tensor(const Tensor& t);

// Binary PPM (P6), 8-bit; the only raster format the pipeline emits.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// Bilinear resize with half-pixel centers; resizing to the same extents
// reproduces the input exactly.
Image resize_bilinear(const Image& img, int oh, int ow);

// Square crop (top-left y0,x0, side s) — bounds checked.
Image crop(const Image& img, int y0, int x0, int side);

} // namespace texter
