#include "texter/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace texter {

void Image::clamp01() {
    for (double& v : data) v = std::clamp(v, 0.0, 1.0);
}

Tensor to_tensor(const Image& img, bool requires_grad) {
    return Tensor::from({3, img.h, img.w}, img.data, requires_grad);
}

Image from_tensor(const Tensor& t) {
    const auto& s = t.shape();
    if (s.size() != 3 || s[0] != 3)
        throw std::invalid_argument("from_tensor: [3,H,W] tensor expected");
    Image img(s[1], s[2]);
    img.data = t.value();
    return img;
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<uint8_t> buf(size_t(3) * img.h * img.w);
    size_t i = 0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                buf[i++] = static_cast<uint8_t>(std::lround(v * 255.0));
            }
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    f >> magic;
    int w = 0, h = 0, maxv = 0;
    f >> w >> h >> maxv;
    if (magic != "P6" || w < 1 || h < 1 || maxv != 255)
        throw std::runtime_error("read_ppm: unsupported header in " + path);
    f.get(); // single whitespace after header
    std::vector<uint8_t> buf(size_t(3) * h * w);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("read_ppm: truncated data in " + path);
    Image img(h, w);
    size_t i = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = buf[i++] / 255.0;
    return img;
}

Image resize_bilinear(const Image& img, int oh, int ow) {
    if (oh < 1 || ow < 1) throw std::invalid_argument("resize_bilinear: bad extents");
    Image out(oh, ow);
    const double sy = static_cast<double>(img.h) / oh;
    const double sx = static_cast<double>(img.w) / ow;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < oh; ++y) {
            const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.h - 1.0);
            const int y0 = static_cast<int>(fy);
            const int y1 = std::min(y0 + 1, img.h - 1);
            const double wy = fy - y0;
            for (int x = 0; x < ow; ++x) {
                const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.w - 1.0);
                const int x0 = static_cast<int>(fx);
                const int x1 = std::min(x0 + 1, img.w - 1);
                const double wx = fx - x0;
                const double top = (1.0 - wx) * img.at(c, y0, x0) + wx * img.at(c, y0, x1);
                const double bot = (1.0 - wx) * img.at(c, y1, x0) + wx * img.at(c, y1, x1);
                out.at(c, y, x) = (1.0 - wy) * top + wy * bot;
            }
        }
    return out;
}

Image crop(const Image& img, int y0, int x0, int side) {
    if (side < 1 || y0 < 0 || x0 < 0 || y0 + side > img.h || x0 + side > img.w)
        throw std::invalid_argument("crop: rectangle out of bounds");
    Image out(side, side);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    return out;
}

} // namespace texter
