#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "datta/autodiff.hpp"
#include "support/test_utils.hpp"

using namespace datta;
using testsupport::finite_diff;
using testsupport::random_tensor;

namespace {

// Finite-difference check of d(scalar)/d(param entry) for every entry of
// every parameter, against a fresh tape per evaluation.
void grad_check(std::vector<Param *> params, const std::function<VarId(Tape &)> &build,
                double h = 1e-3, double tol = 2e-2) {
    Tape tape;
    VarId loss = build(tape);
    zero_grads(params);
    tape.backward(loss);

    for (Param *p : params) {
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            const double fd = finite_diff(&p->value.data[i], [&]() {
                Tape t2;
                return static_cast<double>(t2.scalar(build(t2)));
            }, h);
            const double ad = p->grad.data[i];
            const double scale = std::max({std::fabs(fd), std::fabs(ad), 1e-2});
            CHECK(std::fabs(fd - ad) / scale < tol);
        }
    }
}

} // namespace

TEST_CASE("linear + relu gradients match finite differences") {
    Param w("w", random_tensor({4, 3}, 21));
    Param b("b", random_tensor({3}, 22));
    Tensor x = random_tensor({5, 4}, 23);
    Tensor weights({5, 3}, 0.3f);
    grad_check({&w, &b}, [&](Tape &t) {
        return t.wsum(t.relu(t.linear(t.leaf(x), t.param(w), t.param(b))), weights);
    });
}

TEST_CASE("bmm gradients match finite differences for all transpose flags") {
    for (bool ta : {false, true})
        for (bool tb : {false, true}) {
            CAPTURE(ta);
            CAPTURE(tb);
            // logical shapes: (2,3,4) x (2,4,5)
            Param a("a", random_tensor(ta ? std::vector<int64_t>{2, 4, 3}
                                          : std::vector<int64_t>{2, 3, 4}, 31));
            Param b("b", random_tensor(tb ? std::vector<int64_t>{2, 5, 4}
                                          : std::vector<int64_t>{2, 4, 5}, 32));
            Tensor weights({2, 3, 5}, 0.21f);
            grad_check({&a, &b}, [&](Tape &t) {
                return t.wsum(t.bmm(t.param(a), t.param(b), ta, tb), weights);
            });
        }
}

TEST_CASE("conv1d gradients match finite differences") {
    Param w("w", random_tensor({3, 4, 5}, 41));  // (cout, cin, k)
    Param b("b", random_tensor({3}, 42));
    Tensor x = random_tensor({2, 4, 23}, 43);
    Tensor weights({2, 10, 3}, 0.17f);  // tout = (23-5)/2+1 = 10
    // the map is linear in w and b, so a larger step only reduces FD noise
    grad_check({&w, &b}, [&](Tape &t) {
        return t.wsum(t.conv1d(t.leaf(x), t.param(w), t.param(b), 2), weights);
    }, 1e-2);
}

TEST_CASE("layernorm and softmax gradients match finite differences") {
    Param x("x", random_tensor({6, 7}, 51));
    Param g("g", random_tensor({7}, 52, 0.5f, 1.5f));
    Param b("b", random_tensor({7}, 53));
    Tensor weights({6, 7}, 0.13f);
    grad_check({&x, &g, &b}, [&](Tape &t) {
        return t.wsum(t.softmax_lastdim(t.layernorm(t.param(x), t.param(g), t.param(b))), weights);
    });
}

TEST_CASE("gaussian positional encoding gradients match finite differences") {
    Param c("c", random_tensor({5}, 61, 0.0f, 10.0f));
    Param w("w", random_tensor({5}, 62, 2.0f, 4.0f));
    Param x("x", random_tensor({2, 12, 5}, 63));
    Tensor weights({2, 12, 5}, 0.07f);
    grad_check({&c, &w, &x}, [&](Tape &t) {
        return t.wsum(t.gaussian_pos_encoding(t.param(x), t.param(c), t.param(w)), weights);
    });
}

TEST_CASE("class token, slicing and stat reductions match finite differences") {
    Param tok("tok", random_tensor({5}, 71));
    Param x("x", random_tensor({2, 6, 5}, 72));
    Tensor weights({2, 5}, 0.19f);
    grad_check({&tok, &x}, [&](Tape &t) {
        VarId with_tok = t.prepend_token(t.param(x), t.param(tok));
        VarId body = t.slice_axis1(with_tok, 1, 6);
        VarId mean = t.reduce_mean_axis1(body);
        VarId var = t.reduce_mean_axis1(t.square(t.sub_broadcast_rows(body, mean)));
        return t.wsum(t.add(mean, var), weights);
    });
}

TEST_CASE("l2norm and log/clamp gradients match finite differences") {
    Param x("x", random_tensor({6}, 81, 0.2f, 0.9f));
    Tensor w({1}, 1.0f);
    grad_check({&x}, [&](Tape &t) {
        VarId c = t.clamp(t.param(x), 0.25f, 0.85f);
        return t.wsum(t.add(t.l2norm(t.log(c)), t.l1norm(c)), w);
    });
}

TEST_CASE("grl forward is exact identity") {
    Tensor x = random_tensor({3, 4}, 91);
    Tape t;
    VarId out = t.grl(t.leaf(x), 3.7f);
    const Tensor &v = t.value(out);
    REQUIRE(v.shape == x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(v.data[i] == x.data[i]);  // bitwise
}

TEST_CASE("grl backward multiplies gradients by -lambda") {
    // y = w2 . grl(w1 * x); d y/d w1 must equal -lambda * (d y/d w1 without GRL)
    for (float lambda : {0.0f, 0.5f, 2.0f, 8.0f}) {
        CAPTURE(lambda);
        Param w1("w1", random_tensor({3, 3}, 92));
        Param w2("w2", random_tensor({3, 1}, 93));
        Tensor x = random_tensor({2, 3}, 94);
        Tensor sum_w({2, 1}, 1.0f);

        auto run = [&](bool with_grl) {
            Tape t;
            VarId h = t.linear(t.leaf(x), t.param(w1));
            if (with_grl) h = t.grl(h, lambda);
            VarId y = t.wsum(t.linear(h, t.param(w2)), sum_w);
            zero_grads({&w1, &w2});
            t.backward(y);
            return w1.grad;
        };

        Tensor with = run(true);
        Tensor without = run(false);
        for (int64_t i = 0; i < with.numel(); ++i)
            CHECK(with.data[i] == doctest::Approx(-lambda * without.data[i]).epsilon(1e-5));
    }
}

TEST_CASE("scalar chain through grl reports -lambda * w") {
    // y = w * grl(x, 2): dy/dx = -2w
    Param x("x", Tensor({1}, 1.3f));
    const float w = 0.75f;
    Tape t;
    VarId y = t.affine(t.grl(t.param(x), 2.0f), w, 0.0f);
    zero_grads({&x});
    t.backward(y);
    CHECK(x.grad.data[0] == doctest::Approx(-2.0f * w).epsilon(1e-6));
}

TEST_CASE("sgd and adam move parameters in the gradient direction") {
    Param p("p", Tensor({2}, 1.0f));
    p.grad.data = {0.5f, -0.25f};
    sgd_step({&p}, 0.1f);
    CHECK(p.value.data[0] == doctest::Approx(0.95f));
    CHECK(p.value.data[1] == doctest::Approx(1.025f));

    Param q("q", Tensor({1}, 0.0f));
    q.grad.data = {1.0f};
    adam_step({&q}, 0.1f, 1);
    CHECK(q.value.data[0] == doctest::Approx(-0.1f).epsilon(1e-3));  // full first step
}
