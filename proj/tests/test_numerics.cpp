#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fd_check.hpp"
#include "texter/fourier.hpp"
#include "texter/optim.hpp"
#include "texter/rng.hpp"
#include "texter/tensor.hpp"

using namespace texter;
using fdtest::FdSpec;
using fdtest::max_grad_rel_err;
using fdtest::random_vec;

namespace {

// reduce any output to a scalar through fixed weights so that every output
// coordinate influences the check
Tensor weighted(const Tensor& t, const std::vector<double>& w) {
    return dot(flatten(t), Tensor::from({static_cast<int>(w.size())}, w));
}

} // namespace

TEST_CASE("backward: square at x=3 gives 6") {
    Tensor x = Tensor::scalar(3.0, true);
    Tensor y = mul(x, x);
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward: constant root leaves grads at zero") {
    Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0}, true);
    Tensor c = Tensor::from({3}, {5.0, 5.0, 5.0});
    backward(sum(c));
    CHECK(x.grad().empty());
    // and a root that ignores x entirely
    Tensor r = sum(add(c, c));
    backward(r);
    CHECK(x.grad().empty());
}

TEST_CASE("backward: sum(relu(A*v)) matches finite differences") {
    Rng rng(42);
    FdSpec spec;
    spec.shapes = {{4, 3}, {3}};
    spec.values = {random_vec(rng, 12), random_vec(rng, 3)};
    auto f = [](std::vector<Tensor>& a) { return sum(relu(matvec(a[0], a[1]))); };
    CHECK(max_grad_rel_err(spec, f) < 1e-4);
}

TEST_CASE("backward: rejects non-scalar root") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    CHECK_THROWS(backward(add(x, x)));
}

TEST_CASE("fd: every differentiable primitive") {
    Rng rng(7);
    auto vec_w = [&](size_t n) { return random_vec(rng, n); };

    struct Case {
        const char* name;
        FdSpec spec;
        fdtest::BuildFn f;
    };
    std::vector<Case> cases;

    auto w3 = vec_w(3);
    cases.push_back({"add", {{{3}, {3}}, {vec_w(3), vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(add(a[0], a[1]), w3); }});
    cases.push_back({"sub", {{{3}, {3}}, {vec_w(3), vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(sub(a[0], a[1]), w3); }});
    cases.push_back({"mul", {{{3}, {3}}, {vec_w(3), vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(mul(a[0], a[1]), w3); }});
    cases.push_back({"neg", {{{3}}, {vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(neg(a[0]), w3); }});
    cases.push_back({"add_scalar", {{{3}}, {vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(add_scalar(a[0], 0.37), w3); }});
    cases.push_back({"mul_scalar", {{{3}}, {vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(mul_scalar(a[0], -1.3), w3); }});
    cases.push_back({"recip", {{{3}}, {{0.7, 1.2, -0.9}}},
                     [w3](std::vector<Tensor>& a) { return weighted(recip(a[0]), w3); }});
    cases.push_back({"scale", {{{3}, {1}}, {vec_w(3), {0.8}}},
                     [w3](std::vector<Tensor>& a) { return weighted(scale(a[0], a[1]), w3); }});
    cases.push_back({"shift", {{{3}, {1}}, {vec_w(3), {0.4}}},
                     [w3](std::vector<Tensor>& a) { return weighted(shift(a[0], a[1]), w3); }});
    // kink-free inputs for relu / total_variation
    cases.push_back({"relu", {{{4}}, {{0.5, -0.6, 0.8, -0.2}}},
                     [&, w4 = vec_w(4)](std::vector<Tensor>& a) { return weighted(relu(a[0]), w4); }});
    cases.push_back({"sigmoid", {{{3}}, {vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(sigmoid(a[0]), w3); }});
    cases.push_back({"tanh", {{{3}}, {vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(tanh_t(a[0]), w3); }});
    cases.push_back({"exp", {{{3}}, {vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(exp_t(a[0]), w3); }});
    cases.push_back({"log", {{{3}}, {{0.4, 1.1, 0.8}}},
                     [w3](std::vector<Tensor>& a) { return weighted(log_t(a[0]), w3); }});
    cases.push_back({"sqrt", {{{3}}, {{0.4, 1.1, 0.8}}},
                     [w3](std::vector<Tensor>& a) { return weighted(sqrt_t(a[0]), w3); }});
    cases.push_back({"cos", {{{3}}, {vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(cos_t(a[0]), w3); }});
    cases.push_back({"sin", {{{3}}, {vec_w(3)}},
                     [w3](std::vector<Tensor>& a) { return weighted(sin_t(a[0]), w3); }});
    {
        auto w4 = vec_w(4);
        cases.push_back({"matvec", {{{4, 3}, {3}}, {vec_w(12), vec_w(3)}},
                         [w4](std::vector<Tensor>& a) { return weighted(matvec(a[0], a[1]), w4); }});
    }
    cases.push_back({"dot", {{{4}, {4}}, {vec_w(4), vec_w(4)}},
                     [](std::vector<Tensor>& a) { return dot(a[0], a[1]); }});
    cases.push_back({"sum", {{{5}}, {vec_w(5)}},
                     [](std::vector<Tensor>& a) { return sum(a[0]); }});
    cases.push_back({"mean", {{{5}}, {vec_w(5)}},
                     [](std::vector<Tensor>& a) { return mean(a[0]); }});
    cases.push_back({"log_sum_exp", {{{5}}, {vec_w(5)}},
                     [](std::vector<Tensor>& a) { return log_sum_exp(a[0]); }});
    cases.push_back({"at", {{{5}}, {vec_w(5)}},
                     [](std::vector<Tensor>& a) { return at(a[0], 2); }});
    {
        auto w4 = vec_w(4);
        cases.push_back({"row", {{{3, 4}}, {vec_w(12)}},
                         [w4](std::vector<Tensor>& a) { return weighted(row(a[0], 1), w4); }});
    }
    {
        auto w3b = vec_w(3);
        cases.push_back({"stack", {{{1}, {1}, {1}}, {{0.3}, {-0.8}, {0.5}}},
                         [w3b](std::vector<Tensor>& a) {
                             return weighted(stack({a[0], a[1], a[2]}), w3b);
                         }});
    }
    {
        auto w8 = vec_w(8);
        cases.push_back({"concat0", {{{2, 2}, {2, 2}}, {vec_w(4), vec_w(4)}},
                         [w8](std::vector<Tensor>& a) {
                             return weighted(concat0({a[0], a[1]}), w8);
                         }});
    }
    {
        auto w6 = vec_w(6);
        cases.push_back({"flatten", {{{2, 3}}, {vec_w(6)}},
                         [w6](std::vector<Tensor>& a) { return weighted(flatten(a[0]), w6); }});
    }
    {
        auto wo = vec_w(2 * 4 * 4);
        cases.push_back({"conv2d", {{{2, 4, 4}, {2, 2, 3, 3}, {2}},
                                    {vec_w(32), vec_w(36), vec_w(2)}},
                         [wo](std::vector<Tensor>& a) {
                             return weighted(conv2d(a[0], a[1], a[2]), wo);
                         }});
    }
    {
        auto wo = vec_w(2 * 2 * 2);
        cases.push_back({"avgpool2", {{{2, 4, 4}}, {vec_w(32)}},
                         [wo](std::vector<Tensor>& a) { return weighted(avgpool2(a[0]), wo); }});
    }
    {
        auto wo = vec_w(2);
        cases.push_back({"spatial_mean", {{{2, 3, 3}}, {vec_w(18)}},
                         [wo](std::vector<Tensor>& a) { return weighted(spatial_mean(a[0]), wo); }});
    }
    cases.push_back({"total_variation",
                     {{{1, 3, 3}}, {{0.1, 0.5, 0.2, 0.9, 0.3, 0.7, 0.4, 0.8, 0.6}}},
                     [](std::vector<Tensor>& a) { return total_variation(a[0]); }});
    {
        auto w5 = vec_w(5);
        cases.push_back({"topk_mask", {{{5}}, {{0.9, -0.4, 0.7, 0.1, -0.8}}},
                         [w5](std::vector<Tensor>& a) { return weighted(topk_mask(a[0], 2), w5); }});
    }
    {
        auto w4 = vec_w(4);
        std::vector<int> idx = {2, 0, 3, 1};
        cases.push_back({"permute", {{{4}}, {vec_w(4)}},
                         [w4, idx](std::vector<Tensor>& a) {
                             return weighted(permute(a[0], idx), w4);
                         }});
    }
    {
        auto wo = vec_w(16);
        cases.push_back({"idft2_real", {{{4, 4}, {4, 4}}, {vec_w(16), vec_w(16)}},
                         [wo](std::vector<Tensor>& a) {
                             return weighted(idft2_real(a[0], a[1]), wo);
                         }});
    }
    // composites ride on the same harness
    cases.push_back({"l2_normalize", {{{4}}, {{0.9, -0.3, 0.5, 0.2}}},
                     [w3, w4 = vec_w(4)](std::vector<Tensor>& a) {
                         return weighted(l2_normalize(a[0]), w4);
                     }});
    cases.push_back({"softmax", {{{4}}, {vec_w(4)}},
                     [w4 = vec_w(4)](std::vector<Tensor>& a) {
                         return weighted(softmax(a[0]), w4);
                     }});

    for (auto& c : cases) {
        INFO("primitive: " << c.name);
        CHECK(max_grad_rel_err(c.spec, c.f) < 1e-4);
    }
}

TEST_CASE("dft2: 2x2 all-ones concentrates at DC") {
    ComplexGrid g = dft2({1.0, 1.0, 1.0, 1.0}, 2, 2);
    CHECK(g.re[0] == doctest::Approx(4.0).epsilon(1e-12));
    for (size_t i = 1; i < 4; ++i) {
        CHECK(std::abs(g.re[i]) < 1e-12);
        CHECK(std::abs(g.im[i]) < 1e-12);
    }
    CHECK(std::abs(g.im[0]) < 1e-12);
}

TEST_CASE("dft2 matches the literal definition on a random grid") {
    Rng rng(11);
    const int h = 5, w = 6;
    auto g = random_vec(rng, size_t(h) * w);
    ComplexGrid fast = dft2(g, h, w);
    const double twopi = 6.283185307179586476925286766559;
    for (int k = 0; k < h; ++k)
        for (int l = 0; l < w; ++l) {
            double re = 0.0, im = 0.0;
            for (int u = 0; u < h; ++u)
                for (int v = 0; v < w; ++v) {
                    const double ang = -twopi * (double(k) * u / h + double(l) * v / w);
                    re += g[size_t(u) * w + v] * std::cos(ang);
                    im += g[size_t(u) * w + v] * std::sin(ang);
                }
            CHECK(fast.re[size_t(k) * w + l] == doctest::Approx(re).epsilon(1e-9));
            CHECK(fast.im[size_t(k) * w + l] == doctest::Approx(im).epsilon(1e-9));
        }
}

TEST_CASE("idft2(dft2(g)) roundtrip within 1e-9 relative") {
    Rng rng(3);
    const int n = 8;
    auto g = random_vec(rng, n * n);
    auto back = idft2(dft2(g, n, n));
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n * n; ++i) {
        num += (back[i] - g[i]) * (back[i] - g[i]);
        den += g[i] * g[i];
    }
    CHECK(std::sqrt(num / den) < 1e-9);
}

TEST_CASE("Parseval on random 16x16 input") {
    Rng rng(17);
    const int n = 16;
    auto g = random_vec(rng, n * n);
    ComplexGrid G = dft2(g, n, n);
    double lhs = 0.0;
    for (double v : g) lhs += v * v;
    double rhs = 0.0;
    for (size_t i = 0; i < G.size(); ++i) rhs += G.re[i] * G.re[i] + G.im[i] * G.im[i];
    rhs /= double(n) * n;
    CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-7);
}

TEST_CASE("dft2 linearity on random pairs") {
    Rng rng(23);
    const int n = 8;
    auto a = random_vec(rng, n * n);
    auto b = random_vec(rng, n * n);
    const double alpha = 0.7, beta = -1.9;
    std::vector<double> combo(a.size());
    for (size_t i = 0; i < a.size(); ++i) combo[i] = alpha * a[i] + beta * b[i];
    ComplexGrid ga = dft2(a, n, n), gb = dft2(b, n, n), gc = dft2(combo, n, n);
    for (size_t i = 0; i < gc.size(); ++i) {
        CHECK(gc.re[i] == doctest::Approx(alpha * ga.re[i] + beta * gb.re[i]).epsilon(1e-9));
        CHECK(gc.im[i] == doctest::Approx(alpha * ga.im[i] + beta * gb.im[i]).epsilon(1e-9));
    }
}

TEST_CASE("adam: zero gradient at step 1 leaves the parameter unchanged") {
    OptimizerState s;
    s.lr = 0.05;
    Tensor p = Tensor::from({3}, {1.0, -2.0, 0.5});
    auto before = p.value();
    adam_step(s, p, {0.0, 0.0, 0.0});
    CHECK(p.value() == before);
    CHECK(s.step == 1);
}

TEST_CASE("adam: first step with constant gradient moves by ~lr per element") {
    OptimizerState s;
    s.lr = 5e-4;
    Tensor p = Tensor::from({2}, {0.3, -0.7});
    auto before = p.value();
    adam_step(s, p, {2.0, -3.0});
    // bias-corrected first step: delta = lr * g / (|g| + eps)
    for (size_t i = 0; i < 2; ++i)
        CHECK(std::abs(std::abs(p.value()[i] - before[i]) - s.lr) < 1e-6);
    CHECK(p.value()[0] < before[0]); // gradient descent direction
    CHECK(p.value()[1] > before[1]);
}

TEST_CASE("adam: identical call sequences are bit-identical") {
    auto run = [] {
        OptimizerState s;
        s.lr = 1e-2;
        Tensor p = Tensor::from({3}, {0.1, 0.2, 0.3});
        for (int i = 0; i < 50; ++i)
            adam_step(s, p, {0.3 * (i % 3), -0.2, 0.05 * i});
        return p.value();
    };
    CHECK(run() == run());
}

TEST_CASE("adam: shape mismatch throws") {
    OptimizerState s;
    Tensor p = Tensor::from({3}, {1.0, 2.0, 3.0});
    CHECK_THROWS(adam_step(s, p, {1.0, 2.0}));
}

TEST_CASE("topk_mask examples") {
    Tensor v = Tensor::from({3}, {3.0, 1.0, 2.0});
    CHECK(topk_mask(v, 2).value() == std::vector<double>{3.0, 0.0, 2.0});
    CHECK(topk_mask(v, 3).value() == v.value());
    Tensor t = Tensor::from({3}, {1.0, 1.0, 0.0});
    CHECK(topk_mask(t, 1).value() == std::vector<double>{1.0, 0.0, 0.0});
    CHECK_THROWS(topk_mask(v, 0));
    CHECK_THROWS(topk_mask(v, 4));
}

TEST_CASE("topk_mask sparsity is min(K, nonzeros)") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 1 + int(rng.next_below(12));
        std::vector<double> vals(dim);
        int nonzero = 0;
        for (auto& v : vals) {
            v = rng.next_below(3) == 0 ? 0.0 : rng.uniform(-1.0, 1.0);
            if (v != 0.0) ++nonzero;
        }
        const int k = 1 + int(rng.next_below(uint64_t(dim)));
        auto out = topk_mask(Tensor::from({dim}, vals), k).value();
        int outnz = 0;
        for (double v : out)
            if (v != 0.0) ++outnz;
        CHECK(outnz == std::min(k, nonzero));
    }
}

TEST_CASE("graph reuse after backward is reset") {
    Tensor x = Tensor::scalar(2.0, true);
    Tensor y = mul(x, x);
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    x.zero_grad();
    Tensor z = mul(x, x);
    backward(z);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("snap_to_float32 is idempotent") {
    Tensor t = Tensor::from({3}, {0.1, 1.0 / 3.0, 2.0 / 7.0});
    snap_to_float32(t);
    auto once = t.value();
    snap_to_float32(t);
    CHECK(t.value() == once);
}
