#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "sfreq/autograd.hpp"

using namespace sfreq;

namespace {

// Central finite differences against the analytic gradient, touching every
// element of every parameter. `eval` must rebuild the graph from the current
// parameter values and return the scalar loss.
void gradcheck(const std::function<double()>& eval, const std::function<void()>& backward,
               std::vector<Parameter<double>*> params, double tol = 1e-4) {
    for (Parameter<double>* p : params) p->zero_grad();
    backward();
    for (Parameter<double>* p : params) {
        for (std::size_t j = 0; j < p->value.data.size(); ++j) {
            const double saved = p->value.data[j];
            const double h = 1e-5 * std::max(1.0, std::abs(saved));
            p->value.data[j] = saved + h;
            const double up = eval();
            p->value.data[j] = saved - h;
            const double down = eval();
            p->value.data[j] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = p->grad.data[j];
            // a parameter can be provably inert (a shift fully absorbed by
            // normalization); both sides then sit at rounding level
            if (std::abs(fd) < 1e-7 && std::abs(an) < 1e-7) continue;
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            CAPTURE(p->name);
            CAPTURE(j);
            CHECK(std::abs(fd - an) / denom < tol);
        }
    }
}

Tensor<double> filled(std::vector<int> shape, std::vector<double> data) {
    return Tensor<double>(std::move(shape), std::move(data));
}

// deterministic pseudo-random fill for test fixtures
void scramble(Tensor<double>& t, std::uint64_t key) {
    RandomStream rng(key, stream_id("autograd-fixture"));
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
}

}  // namespace

TEST_CASE("linear applies x W^T + b") {
    Graph<double> g;
    Parameter<double> w("w", {1, 2}), b("b", {1});
    w.value.data = {1.0, 2.0};
    b.value.data = {3.0};
    const auto y = g.linear(g.input(filled({1, 2}, {4.0, 5.0})), w, b);
    CHECK(g.value(y).data[0] == doctest::Approx(17.0));
}

TEST_CASE("linear with identity weight passes the input through") {
    Graph<double> g;
    Parameter<double> w("w", {3, 3}), b("b", {3});
    for (int i = 0; i < 3; ++i) w.value.data[static_cast<std::size_t>(i) * 3 + i] = 1.0;
    Tensor<double> x({2, 3});
    scramble(x, 1);
    const auto y = g.linear(g.input(x), w, b);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        CHECK(g.value(y).data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("linear rejects mismatched shapes") {
    Graph<double> g;
    Parameter<double> w("w", {2, 3}), b("b", {2}), bad_b("b2", {3});
    const auto x = g.input(filled({1, 2}, {1.0, 2.0}));  // in=2, weight wants 3
    CHECK_THROWS(g.linear(x, w, b));
    const auto x3 = g.input(filled({1, 3}, {1.0, 2.0, 3.0}));
    CHECK_THROWS(g.linear(x3, w, bad_b));
}

TEST_CASE("summed linear output propagates the input as weight gradient") {
    Graph<double> g;
    Parameter<double> w("w", {2, 3}), b("b", {2});
    scramble(w.value, 2);
    Tensor<double> x({1, 3});
    scramble(x, 3);
    const auto loss = g.sum(g.linear(g.input(x), w, b));
    g.backward(loss);
    // d(sum(xW^T + b))/dW[o][i] = x[i] for every o
    for (int o = 0; o < 2; ++o)
        for (int i = 0; i < 3; ++i)
            CHECK(w.grad.data[static_cast<std::size_t>(o) * 3 + i] == doctest::Approx(x.data[static_cast<std::size_t>(i)]));
    for (int o = 0; o < 2; ++o) CHECK(b.grad.data[static_cast<std::size_t>(o)] == doctest::Approx(1.0));
}

TEST_CASE("two backward passes accumulate gradients exactly twice") {
    Graph<double> g;
    Parameter<double> w("w", {2, 3}), b("b", {2});
    scramble(w.value, 4);
    Tensor<double> x({2, 3});
    scramble(x, 5);
    Tensor<double> target({2, 2});
    scramble(target, 6);
    const auto loss = g.mse_loss(g.linear(g.input(x), w, b), target);
    g.backward(loss);
    const auto once = w.grad.data;
    g.backward(loss);
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(w.grad.data[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}

TEST_CASE("conv with a centered unit tap is the identity") {
    Graph<double> g;
    Parameter<double> w("w", {1, 1, 3}), b("b", {1});
    w.value.data = {0.0, 1.0, 0.0};
    Tensor<double> x({1, 1, 6});
    scramble(x, 7);
    const auto y = g.conv1d(g.input(x), w, b, 1);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        CHECK(g.value(y).data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("conv with a left tap shifts circularly") {
    Graph<double> g;
    Parameter<double> w("w", {1, 1, 3}), b("b", {1});
    w.value.data = {1.0, 0.0, 0.0};
    const auto y = g.conv1d(g.input(filled({1, 1, 4}, {1.0, 2.0, 3.0, 4.0})), w, b, 1);
    const std::vector<double> want{4.0, 1.0, 2.0, 3.0};
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(g.value(y).data[i] == doctest::Approx(want[i]));
}

TEST_CASE("conv matches a direct nested-loop evaluation") {
    const int batch = 2, ci = 3, co = 4, length = 12, kernel = 5, stride = 3;
    Graph<double> g;
    Parameter<double> w("w", {co, ci, kernel}), b("b", {co});
    scramble(w.value, 8);
    scramble(b.value, 9);
    Tensor<double> x({batch, ci, length});
    scramble(x, 10);
    const auto y = g.conv1d(g.input(x), w, b, stride);

    const int t_out = length / stride, pad = (kernel - 1) / 2;
    REQUIRE(g.value(y).shape == std::vector<int>{batch, co, t_out});
    for (int bi = 0; bi < batch; ++bi)
        for (int c = 0; c < co; ++c)
            for (int t = 0; t < t_out; ++t) {
                double acc = b.value.data[static_cast<std::size_t>(c)];
                for (int i = 0; i < ci; ++i)
                    for (int k = 0; k < kernel; ++k) {
                        const int src = ((t * stride + k - pad) % length + length) % length;
                        acc += w.value.data[(static_cast<std::size_t>(c) * ci + i) * kernel + k] *
                               x.data[(static_cast<std::size_t>(bi) * ci + i) * length + src];
                    }
                CHECK(g.value(y).data[(static_cast<std::size_t>(bi) * co + c) * t_out + t] ==
                      doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("conv validates kernel parity and stride divisibility") {
    Graph<double> g;
    Parameter<double> w_even("w", {1, 1, 4}), w("w", {1, 1, 3}), b("b", {1});
    Tensor<double> x({1, 1, 6});
    const auto xid = g.input(x);
    CHECK_THROWS(g.conv1d(xid, w_even, b, 1));
    CHECK_THROWS(g.conv1d(xid, w, b, 4));  // 4 does not divide 6
}

TEST_CASE("transposed conv of an impulse copies the kernel with wrap") {
    Graph<double> g;
    Parameter<double> w("w", {1, 1, 3}), b("b", {1});
    w.value.data = {10.0, 20.0, 30.0};
    Tensor<double> x({1, 1, 4});
    x.data[0] = 1.0;  // impulse at position 0, stride 2 -> output length 8
    const auto y = g.conv_transpose1d(g.input(x), w, b, 2);
    REQUIRE(g.value(y).shape == std::vector<int>{1, 1, 8});
    // taps land at (0*2 + k - 1) mod 8 for k = 0,1,2
    std::vector<double> want{20.0, 30.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0};
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(g.value(y).data[i] == doctest::Approx(want[i]));
}

TEST_CASE("transposed conv upsamples 125 to 1000 at stride 8") {
    Graph<double> g;
    Parameter<double> w("w", {2, 1, 25}), b("b", {1});
    scramble(w.value, 11);
    Tensor<double> x({1, 2, 125});
    scramble(x, 12);
    const auto y = g.conv_transpose1d(g.input(x), w, b, 8);
    CHECK(g.value(y).shape == std::vector<int>{1, 1, 1000});
}

TEST_CASE("conv and transposed conv are adjoint") {
    const int ci = 3, co = 2, length = 12, kernel = 5, stride = 2;
    Parameter<double> w_conv("w", {co, ci, kernel}), b0("b0", {co}), b1("b1", {ci});
    scramble(w_conv.value, 13);
    // same raw buffer, read as [ci_in=co, co_out=ci, kernel]
    Parameter<double> w_t("wt", {co, ci, kernel});
    w_t.value.data = w_conv.value.data;

    Tensor<double> x({1, ci, length}), y({1, co, length / stride});
    scramble(x, 14);
    scramble(y, 15);

    Graph<double> g;
    const auto cx = g.conv1d(g.input(x), w_conv, b0, stride);
    const auto ty = g.conv_transpose1d(g.input(y), w_t, b1, stride);

    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) lhs += g.value(cx).data[i] * y.data[i];
    for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * g.value(ty).data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("batchnorm maps a constant channel to zero in training mode") {
    Graph<double> g;
    BatchNorm<double> bn("bn", 2);
    Tensor<double> x({3, 2, 4});
    x.fill(5.0);
    const auto y = g.batchnorm1d(g.input(x), bn, true);
    for (const double v : g.value(y).data) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("batchnorm rescales standardized data to the affine parameters") {
    Graph<double> g;
    BatchNorm<double> bn("bn", 1);
    bn.gamma.value.data = {2.0};
    bn.beta.value.data = {3.0};
    // mean 0, variance 1 by construction
    Tensor<double> x = filled({2, 1, 2}, {-1.0, 1.0, 1.0, -1.0});
    const auto y = g.batchnorm1d(g.input(x), bn, true);
    double mean = 0.0, var = 0.0;
    for (const double v : g.value(y).data) mean += v / 4.0;
    for (const double v : g.value(y).data) var += (v - mean) * (v - mean) / 4.0;
    CHECK(mean == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("batchnorm running statistics blend batch statistics at decay 0.9") {
    BatchNorm<double> bn("bn", 1);
    Tensor<double> x = filled({2, 1, 2}, {1.0, 2.0, 3.0, 6.0});
    // batch mean 3, biased variance (4+1+0+9)/4 = 3.5, unbiased 14/3
    Graph<double> g;
    g.batchnorm1d(g.input(x), bn, true);
    CHECK(bn.running_mean.data[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 3.0).epsilon(1e-12));
    CHECK(bn.running_var.data[0] == doctest::Approx(0.9 * 1.0 + 0.1 * (14.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("batchnorm eval mode applies the stored running statistics") {
    BatchNorm<double> bn("bn", 2);
    bn.running_mean.data = {1.0, -2.0};
    bn.running_var.data = {4.0, 0.25};
    bn.gamma.value.data = {3.0, 1.0};
    bn.beta.value.data = {0.5, 0.0};
    Tensor<double> x({1, 2, 3});
    scramble(x, 16);
    Graph<double> g;
    const auto y = g.batchnorm1d(g.input(x), bn, false);
    for (int c = 0; c < 2; ++c)
        for (int t = 0; t < 3; ++t) {
            const std::size_t i = static_cast<std::size_t>(c) * 3 + t;
            const double want = bn.gamma.value.data[static_cast<std::size_t>(c)] *
                                    (x.data[i] - bn.running_mean.data[static_cast<std::size_t>(c)]) /
                                    std::sqrt(bn.running_var.data[static_cast<std::size_t>(c)] + 1e-5) +
                                bn.beta.value.data[static_cast<std::size_t>(c)];
            CHECK(g.value(y).data[i] == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("batchnorm training mode rejects a single-sample batch") {
    Graph<double> g;
    BatchNorm<double> bn("bn", 1);
    Tensor<double> x({1, 1, 4});
    const auto xid = g.input(x);
    CHECK_THROWS(g.batchnorm1d(xid, bn, true));
    CHECK_NOTHROW(g.batchnorm1d(xid, bn, false));
}

TEST_CASE("relu clamps negatives and mse averages squared error") {
    Graph<double> g;
    const auto y = g.relu(g.input(filled({1, 3}, {-1.0, 0.0, 2.0})));
    CHECK(g.value(y).data == std::vector<double>{0.0, 0.0, 2.0});

    Graph<double> g2;
    const auto same = g2.mse_loss(g2.input(filled({1, 2}, {0.7, -0.3})), filled({1, 2}, {0.7, -0.3}));
    CHECK(g2.value(same).data[0] == doctest::Approx(0.0));
    const auto loss = g2.mse_loss(g2.input(filled({1, 2}, {0.0, 0.0})), filled({1, 2}, {1.0, 3.0}));
    CHECK(g2.value(loss).data[0] == doctest::Approx(5.0));
}

TEST_CASE("gradients of a conv stack match finite differences") {
    const int batch = 2;
    Parameter<double> w1("w1", {4, 3}), b1("b1", {4});
    Parameter<double> wc("wc", {3, 2, 3}), bc("bc", {3});
    Parameter<double> wt("wt", {3, 2, 3}), bt("bt", {2});
    scramble(w1.value, 20);
    scramble(b1.value, 21);
    scramble(wc.value, 22);
    scramble(bc.value, 23);
    scramble(wt.value, 24);
    scramble(bt.value, 25);
    Tensor<double> x({batch, 3}), target({batch, 2, 4});
    scramble(x, 26);
    scramble(target, 27);

    Graph<double>::Id loss_id{};
    Graph<double>* live = nullptr;
    const auto build = [&](Graph<double>& g) {
        auto h = g.linear(g.input(x), w1, b1);           // [B,4]
        h = g.reshape(h, {batch, 2, 2});                 // [B,2,2]
        h = g.conv1d(h, wc, bc, 1);                      // [B,3,2]
        h = g.relu(h);
        h = g.conv_transpose1d(h, wt, bt, 2);            // [B,2,4]
        return g.mse_loss(h, target);
    };
    const auto eval = [&]() {
        Graph<double> g;
        return g.value(build(g)).data[0];
    };
    Graph<double> g;
    loss_id = build(g);
    live = &g;
    gradcheck(eval, [&]() { live->backward(loss_id); }, {&w1, &b1, &wc, &bc, &wt, &bt});
}

TEST_CASE("gradients through batchnorm and strided conv match finite differences") {
    const int batch = 3;
    Parameter<double> w1("w1", {8, 5}), b1("b1", {8});
    Parameter<double> wc("wc", {2, 2, 3}), bc("bc", {2});
    Parameter<double> w2("w2", {3, 4}), b2("b2", {3});
    BatchNorm<double> bn("bn", 2);
    scramble(w1.value, 30);
    scramble(b1.value, 31);
    scramble(wc.value, 32);
    scramble(bc.value, 33);
    scramble(w2.value, 34);
    scramble(b2.value, 35);
    scramble(bn.gamma.value, 36);
    scramble(bn.beta.value, 37);
    Tensor<double> x({batch, 5}), target({batch, 3});
    scramble(x, 38);
    scramble(target, 39);

    BatchNorm<double> bn_scratch("bn", 2);
    const auto build = [&](Graph<double>& g, BatchNorm<double>& state) {
        auto h = g.linear(g.input(x), w1, b1);   // [B,8]
        h = g.reshape(h, {batch, 2, 4});
        h = g.batchnorm1d(h, state, true);
        h = g.relu(h);
        h = g.conv1d(h, wc, bc, 2);              // [B,2,2]
        h = g.reshape(h, {batch, 4});
        h = g.linear(h, w2, b2);                 // [B,3]
        return g.mse_loss(h, target);
    };
    const auto eval = [&]() {
        // running stats are mutated per pass; evaluate against a throwaway copy
        bn_scratch.gamma.value = bn.gamma.value;
        bn_scratch.beta.value = bn.beta.value;
        bn_scratch.running_mean.fill(0.0);
        bn_scratch.running_var.fill(1.0);
        Graph<double> g;
        return g.value(build(g, bn_scratch)).data[0];
    };
    Graph<double> g;
    const auto loss_id = build(g, bn);
    gradcheck(eval, [&]() { g.backward(loss_id); },
              {&w1, &b1, &wc, &bc, &w2, &b2, &bn.gamma, &bn.beta});
}

TEST_CASE("backward requires a scalar root") {
    Graph<double> g;
    const auto x = g.input(filled({1, 2}, {1.0, 2.0}));
    CHECK_THROWS(g.backward(x));
}

TEST_CASE("adam first step moves each weight by about lr in the gradient direction") {
    Parameter<double> p("p", {4});
    p.value.data = {1.0, -2.0, 0.5, 3.0};
    const auto before = p.value.data;
    p.grad.data = {0.3, -0.7, 2.0, 0.0};
    Adam<double> opt({&p}, 0.01);
    opt.step();
    for (std::size_t i = 0; i < 3; ++i) {
        const double delta = p.value.data[i] - before[i];
        const double sign = p.grad.data[i] > 0 ? 1.0 : -1.0;
        CHECK(delta == doctest::Approx(-0.01 * sign).epsilon(1e-4));
    }
    CHECK(p.value.data[3] == doctest::Approx(before[3]));  // zero gradient, no motion
}

TEST_CASE("adam drives a quadratic toward zero") {
    Parameter<double> p("p", {3});
    p.value.data = {4.0, -3.0, 2.0};
    Adam<double> opt({&p}, 0.1);
    double prev = 1e300;
    for (int step = 0; step < 100; ++step) {
        // loss = 0.5 ||p||^2, gradient = p
        opt.zero_grad();
        p.grad.data = p.value.data;
        opt.step();
        double norm = 0.0;
        for (const double v : p.value.data) norm += v * v;
        if (step >= 5) CHECK(norm < prev);
        prev = norm;
    }
    CHECK(prev < 1.0);
    CHECK(opt.steps_taken() == 100);
}

TEST_CASE("fan-in initialization stays inside its bound and is reproducible") {
    Parameter<double> a("a", {50, 24}), b("b", {50, 24});
    RandomStream r1(5, stream_id("init")), r2(5, stream_id("init"));
    init_uniform_fanin(a, 24, r1);
    init_uniform_fanin(b, 24, r2);
    CHECK(a.value.data == b.value.data);
    const double bound = std::sqrt(6.0 / 24);
    double lo = 0.0, hi = 0.0;
    for (const double v : a.value.data) {
        CHECK(std::abs(v) <= bound);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // draws actually spread over the interval
    CHECK(lo < -0.8 * bound);
    CHECK(hi > 0.8 * bound);
}
