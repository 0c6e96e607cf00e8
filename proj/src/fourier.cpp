#include "texter/fourier.hpp"

#include <cmath>
#include <stdexcept>

namespace texter {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct TwiddleTable {
    // c[k*n + u] = cos(2*pi*k*u/n), s likewise with sin
    std::vector<double> c, s;
    int n = 0;
    explicit TwiddleTable(int n_) : c(size_t(n_) * n_), s(size_t(n_) * n_), n(n_) {
        for (int k = 0; k < n; ++k)
            for (int u = 0; u < n; ++u) {
                const double ang = kTwoPi * ((static_cast<long long>(k) * u) % n) / n;
                c[size_t(k) * n + u] = std::cos(ang);
                s[size_t(k) * n + u] = std::sin(ang);
            }
    }
};

// 1-D transform along contiguous rows of an h x w complex array.
// sign = -1 forward, +1 inverse (no normalization here).
void dft_rows(const double* re, const double* im, double* ore, double* oim,
              int h, int w, int sign, const TwiddleTable& tw) {
    for (int r = 0; r < h; ++r) {
        const double* rr = re + size_t(r) * w;
        const double* ri = im + size_t(r) * w;
        double* qr = ore + size_t(r) * w;
        double* qi = oim + size_t(r) * w;
        for (int k = 0; k < w; ++k) {
            const double* tc = tw.c.data() + size_t(k) * w;
            const double* ts = tw.s.data() + size_t(k) * w;
            double ar = 0.0, ai = 0.0;
            for (int u = 0; u < w; ++u) {
                const double cs = tc[u];
                const double sn = sign * ts[u];
                ar += rr[u] * cs - ri[u] * sn;
                ai += rr[u] * sn + ri[u] * cs;
            }
            qr[k] = ar;
            qi[k] = ai;
        }
    }
}

void transpose(const double* a, double* out, int h, int w) {
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out[size_t(x) * h + y] = a[size_t(y) * w + x];
}

// full separable 2-D transform; sign as above
void dft2_core(const double* re, const double* im, double* ore, double* oim,
               int h, int w, int sign) {
    TwiddleTable tww(w), twh(h);
    std::vector<double> tr(size_t(h) * w), ti(size_t(h) * w);
    dft_rows(re, im, tr.data(), ti.data(), h, w, sign, tww);
    std::vector<double> ttr(size_t(h) * w), tti(size_t(h) * w);
    transpose(tr.data(), ttr.data(), h, w);
    transpose(ti.data(), tti.data(), h, w);
    std::vector<double> sr(size_t(h) * w), si(size_t(h) * w);
    dft_rows(ttr.data(), tti.data(), sr.data(), si.data(), w, h, sign, twh);
    transpose(sr.data(), ore, w, h);
    transpose(si.data(), oim, w, h);
}

} // namespace

ComplexGrid dft2(const std::vector<double>& grid, int h, int w) {
    if (h < 1 || w < 1 || grid.size() != size_t(h) * w)
        throw std::invalid_argument("dft2: bad grid shape");
    ComplexGrid out(h, w);
    std::vector<double> zim(grid.size(), 0.0);
    dft2_core(grid.data(), zim.data(), out.re.data(), out.im.data(), h, w, -1);
    return out;
}

std::vector<double> idft2(const ComplexGrid& spec) {
    if (spec.h < 1 || spec.w < 1 || spec.re.size() != spec.size() || spec.im.size() != spec.size())
        throw std::invalid_argument("idft2: bad spectrum shape");
    std::vector<double> ore(spec.size()), oim(spec.size());
    dft2_core(spec.re.data(), spec.im.data(), ore.data(), oim.data(), spec.h, spec.w, +1);
    const double inv = 1.0 / (double(spec.h) * spec.w);
    for (double& v : ore) v *= inv;
    return ore;
}

std::vector<double> magnitude(const ComplexGrid& spec) {
    std::vector<double> m(spec.size());
    for (size_t i = 0; i < m.size(); ++i)
        m[i] = std::hypot(spec.re[i], spec.im[i]);
    return m;
}

// ---------------------------------------------------------------------------
// autodiff primitive: real part of the normalized inverse DFT
// ---------------------------------------------------------------------------

Tensor idft2_real(const Tensor& re, const Tensor& im) {
    if (re.shape().size() != 2 || re.shape() != im.shape())
        throw std::invalid_argument("idft2_real: matching [H,W] operands expected");
    const int h = re.shape()[0], w = re.shape()[1];
    const double inv = 1.0 / (double(h) * w);

    ComplexGrid spec(h, w);
    spec.re = re.value();
    spec.im = im.value();
    std::vector<double> ore(spec.size()), oim(spec.size());
    dft2_core(spec.re.data(), spec.im.data(), ore.data(), oim.data(), h, w, +1);

    std::vector<double> val(spec.size());
    for (size_t i = 0; i < val.size(); ++i) val[i] = ore[i] * inv;
    Tensor out = Tensor::from({h, w}, std::move(val));
    detail::Node* n = out.node();
    n->parents = {re.handle(), im.handle()};
    n->needs_grad = re.node()->requires_grad || re.node()->needs_grad ||
                    im.node()->requires_grad || im.node()->needs_grad;
    if (n->needs_grad)
        n->back = [h, w, inv](detail::Node& self) {
            // adjoint of a linear map: forward-signed transform of the grad
            std::vector<double> zim(self.grad.size(), 0.0);
            std::vector<double> gr(self.grad.size()), gi(self.grad.size());
            dft2_core(self.grad.data(), zim.data(), gr.data(), gi.data(), h, w, +1);
            auto& gre = self.parents[0]->grad;
            auto& gim = self.parents[1]->grad;
            if (gre.size() != self.grad.size()) gre.assign(self.grad.size(), 0.0);
            if (gim.size() != self.grad.size()) gim.assign(self.grad.size(), 0.0);
            for (size_t i = 0; i < self.grad.size(); ++i) {
                gre[i] += gr[i] * inv;
                gim[i] -= gi[i] * inv;
            }
        };
    return out;
}

} // namespace texter
