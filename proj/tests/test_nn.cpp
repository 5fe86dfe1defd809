#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "han/nn.hpp"
#include "han/rng.hpp"
#include "han/tape.hpp"
#include "han/tensor.hpp"

using namespace han;
using namespace han::nn;

namespace {

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool tensor_close(const Tensor& a, const Tensor& b, double tol) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("rng is deterministic and fork streams diverge") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    Rng parent(7);
    Rng c1 = parent.fork(1);
    Rng c2 = parent.fork(2);
    CHECK(c1.next() != c2.next());

    Rng u(3);
    for (int i = 0; i < 1000; ++i) {
        double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    for (int i = 0; i < 1000; ++i) CHECK(u.index(7) < 7);
}

TEST_CASE("rng shuffle permutes without loss") {
    Rng rng(11);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    auto sorted = v;
    rng.shuffle(v);
    auto back = v;
    std::sort(back.begin(), back.end());
    CHECK(back == sorted);
}

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK_THROWS(Tensor({2, 2}, {1.0, 2.0, 3.0}));

    Tensor bad = Tensor::row({1.0, std::nan("")});
    CHECK_THROWS(check_finite(bad, "test"));
}

TEST_CASE("tape elementwise ops and their gradients") {
    Tape tape;
    Tensor av = Tensor::row({1.0, -2.0});
    Tensor bv = Tensor::row({3.0, 0.5});
    Var a = tape.constant(av);
    Var b = tape.constant(bv);
    Var s = tape.dot(tape.mul(a, b), tape.constant(Tensor::row({1.0, 1.0})));
    tape.backward(s);
    // d(a.b elementwise summed)/da = b
    CHECK(tensor_close(tape.grad(a), bv, 1e-15));
    CHECK(tensor_close(tape.grad(b), av, 1e-15));
}

TEST_CASE("matvec forward and backward against hand math") {
    Tape tape;
    Tensor w({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor x = Tensor::row({1, 0, -1});
    Var wv = tape.constant(w);
    Var xv = tape.constant(x);
    Var y = tape.matvec(wv, xv);
    CHECK(tape.value(y)[0] == doctest::Approx(-2.0));
    CHECK(tape.value(y)[1] == doctest::Approx(-2.0));

    Var loss = tape.dot(y, tape.constant(Tensor::row({1.0, 2.0})));
    tape.backward(loss);
    // dL/dW = g outer x with g = [1,2]
    Tensor expect_w({2, 3}, {1, 0, -1, 2, 0, -2});
    Tensor expect_x = Tensor::row({1 * 1.0 + 2 * 4.0, 1 * 2.0 + 2 * 5.0, 1 * 3.0 + 2 * 6.0});
    CHECK(tensor_close(tape.grad(wv), expect_w, 1e-15));
    CHECK(tensor_close(tape.grad(xv), expect_x, 1e-15));
}

TEST_CASE("softmax of equal scores is uniform") {
    Tensor p = softmax(Tensor::row({0.0, 0.0}));
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant") {
    Tensor z = Tensor::row({0.3, -1.2, 2.5, 0.0});
    Tensor shifted = z;
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 123.456;
    Tensor a = softmax(z), b = softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - b[i]) < 1e-12);
}

TEST_CASE("masked softmax zeroes masked entries exactly") {
    Tape tape;
    std::vector<unsigned char> mask{1, 0, 1, 0};
    Var p = tape.softmax(tape.constant(Tensor::row({1.0, 5.0, 2.0, 5.0})), &mask);
    const Tensor& w = tape.value(p);
    CHECK(w[1] == 0.0);
    CHECK(w[3] == 0.0);
    CHECK(w[0] + w[2] == doctest::Approx(1.0).epsilon(1e-12));
    // only the unmasked pair competes
    double e0 = std::exp(1.0), e2 = std::exp(2.0);
    CHECK(w[0] == doctest::Approx(e0 / (e0 + e2)).epsilon(1e-12));

    std::vector<unsigned char> none{0, 0, 0, 0};
    CHECK_THROWS(tape.softmax(tape.constant(Tensor::row({1.0, 1.0, 1.0, 1.0})), &none));
}

TEST_CASE("cross entropy of a confident correct prediction is near zero") {
    CHECK(cross_entropy(Tensor::row({1.0, 0.0}), 0) == doctest::Approx(0.0).epsilon(1e-12));
    // zero probability is clamped rather than infinite
    double clamped = cross_entropy(Tensor::row({0.0, 1.0}), 0);
    CHECK(clamped == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("dropout is identity in eval mode and rescales in train mode") {
    Rng rng(5);
    Tensor x = Tensor::row({1.0, 2.0, 3.0, 4.0});
    Tensor eval = dropout(x, 0.5, rng, false);
    CHECK(tensor_close(eval, x, 0.0));

    Tensor train = dropout(x, 0.5, rng, true);
    for (std::size_t i = 0; i < train.size(); ++i) {
        bool dropped = train[i] == 0.0;
        bool scaled = std::abs(train[i] - 2.0 * x[i]) < 1e-12;
        CHECK((dropped || scaled));
    }
    CHECK_THROWS(dropout(x, 1.0, rng, true));
    CHECK_THROWS(dropout(x, -0.1, rng, true));
}

TEST_CASE("gru cell with zero parameters halves the previous state") {
    // z = r = sigmoid(0) = 0.5, candidate = tanh(0) = 0, h' = 0.5*h
    GruParams p = GruParams::zeros(3, 2);
    Tensor h0 = Tensor::row({0.4, -1.0, 2.0});
    Tensor x = Tensor::row({1.0, 1.0});
    Tensor h1 = gru_cell(x, h0, p);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(h1[i] == doctest::Approx(0.5 * h0[i]).epsilon(1e-12));

    Tensor hz = gru_cell(x, Tensor({3}), p);
    for (std::size_t i = 0; i < 3; ++i) CHECK(hz[i] == 0.0);
}

TEST_CASE("gru cell matches a scalar hand computation") {
    GruParams p = GruParams::zeros(1, 1);
    p.w_update = Tensor({1, 1}, {0.5});
    p.u_update = Tensor({1, 1}, {-0.3});
    p.b_update = Tensor::row({0.1});
    p.w_reset = Tensor({1, 1}, {0.2});
    p.u_reset = Tensor({1, 1}, {0.4});
    p.b_reset = Tensor::row({-0.2});
    p.w_cand = Tensor({1, 1}, {1.1});
    p.u_cand = Tensor({1, 1}, {0.7});
    p.b_cand = Tensor::row({0.05});

    double x = 0.8, h = -0.6;
    double z = sigmoid_ref(0.5 * x + (-0.3) * h + 0.1);
    double r = sigmoid_ref(0.2 * x + 0.4 * h + (-0.2));
    double cand = std::tanh(1.1 * x + 0.7 * (r * h) + 0.05);
    double expect = (1.0 - z) * h + z * cand;

    Tensor got = gru_cell(Tensor::row({x}), Tensor::row({h}), p);
    CHECK(got[0] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("gru cell saturation keeps the new state in the averaging band") {
    // huge candidate weight saturates tanh to 1; z stays at 1/2
    GruParams p = GruParams::zeros(1, 1);
    p.w_cand = Tensor({1, 1}, {1000.0});
    double h_prev = 0.3;
    Tensor h1 = gru_cell(Tensor::row({10.0}), Tensor::row({h_prev}), p);
    CHECK(h1[0] >= h_prev / 2 - 1e-12);
    CHECK(h1[0] <= (h_prev + 1) / 2 + 1e-12);
    CHECK(h1[0] == doctest::Approx((h_prev + 1) / 2).epsilon(1e-9));
}

TEST_CASE("gru cell bounded by max of previous state and one") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        GruParams p = GruParams::init(4, 3, rng);
        Tensor x({3}), h({4});
        for (std::size_t i = 0; i < 3; ++i) x[i] = rng.uniform(-3, 3);
        for (std::size_t i = 0; i < 4; ++i) h[i] = rng.uniform(-2, 2);
        Tensor h1 = gru_cell(x, h, p);
        double bound = std::max(h.max_abs(), 1.0);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(h1[i]) <= bound + 1e-12);
    }
}

TEST_CASE("gru update gate forced shut preserves the state") {
    Rng rng(3);
    GruParams p = GruParams::init(3, 2, rng);
    p.b_update.fill(-40.0);  // z ~ 0
    p.w_update.fill(0.0);
    p.u_update.fill(0.0);
    Tensor h0 = Tensor::row({0.2, -0.7, 1.3});
    Tensor h1 = gru_cell(Tensor::row({0.5, -0.5}), h0, p);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(h1[i] - h0[i]) < 1e-6);
}

TEST_CASE("gru cell rejects mismatched shapes") {
    GruParams p = GruParams::zeros(3, 2);
    CHECK_THROWS(gru_cell(Tensor::row({1.0, 2.0, 3.0}), Tensor({3}), p));
    CHECK_THROWS(gru_cell(Tensor::row({1.0, 2.0}), Tensor({4}), p));
}

TEST_CASE("bidirectional encoder on a single step sees both directions equal") {
    Rng rng(17);
    GruParams fwd = GruParams::init(3, 2, rng);
    GruParams bwd = GruParams::init(3, 2, rng);
    Tensor x({1, 2}, {0.4, -0.9});
    Tensor states = bigru_encode(x, fwd, bwd);
    CHECK(states.rows() == 1);
    CHECK(states.cols() == 6);

    Tensor hf = gru_cell(Tensor::row({0.4, -0.9}), Tensor({3}), fwd);
    Tensor hb = gru_cell(Tensor::row({0.4, -0.9}), Tensor({3}), bwd);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(states.at(0, j) == doctest::Approx(hf[j]).epsilon(1e-14));
        CHECK(states.at(0, 3 + j) == doctest::Approx(hb[j]).epsilon(1e-14));
    }
}

TEST_CASE("bidirectional encoder reversal symmetry") {
    Rng rng(23);
    GruParams a = GruParams::init(3, 2, rng);
    GruParams b = GruParams::init(3, 2, rng);
    std::size_t t_len = 5;
    Tensor x({t_len, 2});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);

    Tensor rev({t_len, 2});
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t j = 0; j < 2; ++j) rev.at(t, j) = x.at(t_len - 1 - t, j);

    Tensor s = bigru_encode(x, a, b);
    Tensor s_rev = bigru_encode(rev, b, a);
    for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(s.at(t, j) == doctest::Approx(s_rev.at(t_len - 1 - t, 3 + j)).epsilon(1e-12));
            CHECK(s.at(t, 3 + j) == doctest::Approx(s_rev.at(t_len - 1 - t, j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("bidirectional encoder edge cases") {
    GruParams z = GruParams::zeros(2, 2);
    Tensor x({2, 2}, {1, 2, 3, 4});
    Tensor s = bigru_encode(x, z, z);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == 0.0);

    CHECK_THROWS(bigru_encode(Tensor({0, 2}), z, z));
}

TEST_CASE("attention pooling of identical rows is the row itself") {
    Rng rng(31);
    AttnParams p = AttnParams::init(4, 3, rng);
    Tensor h({3, 3});
    for (std::size_t t = 0; t < 3; ++t) {
        h.at(t, 0) = 0.2;
        h.at(t, 1) = -1.1;
        h.at(t, 2) = 0.9;
    }
    AttnResult r = attention_pool(h, p);
    for (std::size_t t = 0; t < 3; ++t)
        CHECK(r.weights[t] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(r.pooled[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.pooled[1] == doctest::Approx(-1.1).epsilon(1e-12));
    CHECK(r.pooled[2] == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("attention with a zero scorer averages the rows") {
    Rng rng(37);
    AttnParams p = AttnParams::init(4, 2, rng);
    p.score_vec.fill(0.0);
    Tensor h({3, 2}, {1, 2, 3, 4, 5, 6});
    AttnResult r = attention_pool(h, p);
    CHECK(r.pooled[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.pooled[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("attention weights match a scalar hand computation") {
    AttnParams p = AttnParams::zeros(2, 2);
    p.proj = Tensor({2, 2}, {0.3, -0.2, 0.1, 0.4});
    p.proj_bias = Tensor::row({0.05, -0.1});
    p.score_vec = Tensor::row({1.2, -0.7});

    Tensor h({3, 2}, {1.0, 0.0, 0.0, 1.0, 0.5, -0.5});

    double scores[3];
    for (int t = 0; t < 3; ++t) {
        double h0 = h.at(t, 0), h1 = h.at(t, 1);
        double a0 = std::tanh(0.3 * h0 - 0.2 * h1 + 0.05);
        double a1 = std::tanh(0.1 * h0 + 0.4 * h1 - 0.1);
        scores[t] = 1.2 * a0 - 0.7 * a1;
    }
    double mx = std::max({scores[0], scores[1], scores[2]});
    double e[3], denom = 0.0;
    for (int t = 0; t < 3; ++t) {
        e[t] = std::exp(scores[t] - mx);
        denom += e[t];
    }

    AttnResult r = attention_pool(h, p);
    double want_pooled0 = 0.0, want_pooled1 = 0.0;
    for (int t = 0; t < 3; ++t) {
        double alpha = e[t] / denom;
        CHECK(std::abs(r.weights[t] - alpha) < 1e-12);
        want_pooled0 += alpha * h.at(t, 0);
        want_pooled1 += alpha * h.at(t, 1);
    }
    CHECK(std::abs(r.pooled[0] - want_pooled0) < 1e-12);
    CHECK(std::abs(r.pooled[1] - want_pooled1) < 1e-12);
}

TEST_CASE("attention weights form a distribution and respect masks") {
    Rng rng(41);
    AttnParams p = AttnParams::init(3, 2, rng);
    Tensor h({4, 2});
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = rng.uniform(-2, 2);
    std::vector<unsigned char> mask{1, 0, 1, 1};

    AttnResult r = attention_pool(h, p, &mask);
    CHECK(r.weights[1] == 0.0);
    double sum = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(r.weights[t] >= 0.0);
        sum += r.weights[t];
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);

    std::vector<unsigned char> none{0, 0, 0, 0};
    CHECK_THROWS(attention_pool(h, p, &none));
}

TEST_CASE("attention pooling stays in the convex hull of its rows") {
    Rng rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        AttnParams p = AttnParams::init(3, 3, rng);
        Tensor h({5, 3});
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = rng.uniform(-4, 4);
        AttnResult r = attention_pool(h, p);
        for (std::size_t j = 0; j < 3; ++j) {
            double lo = h.at(0, j), hi = h.at(0, j);
            for (std::size_t t = 1; t < 5; ++t) {
                lo = std::min(lo, h.at(t, j));
                hi = std::max(hi, h.at(t, j));
            }
            CHECK(r.pooled[j] >= lo - 1e-12);
            CHECK(r.pooled[j] <= hi + 1e-12);
        }
    }
}

TEST_CASE("conditioned attention with zero contexts reduces to plain attention") {
    Rng rng(47);
    std::size_t m = 3, l = 2;
    AttnParams wide = AttnParams::init(4, m + l, rng);
    Tensor h({3, m});
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = rng.uniform(-1, 1);
    Tensor c({3, l});  // zeros

    AttnResult cond = conditioned_attention_pool(h, c, wide);

    AttnParams narrow = AttnParams::zeros(4, m);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t j = 0; j < m; ++j) narrow.proj.at(r, j) = wide.proj.at(r, j);
    narrow.proj_bias = wide.proj_bias;
    narrow.score_vec = wide.score_vec;
    AttnResult plain = attention_pool(h, narrow);

    CHECK(cond.pooled.size() == m + l);
    for (std::size_t t = 0; t < 3; ++t)
        CHECK(cond.weights[t] == doctest::Approx(plain.weights[t]).epsilon(1e-12));
    for (std::size_t j = 0; j < m; ++j)
        CHECK(cond.pooled[j] == doctest::Approx(plain.pooled[j]).epsilon(1e-12));
    for (std::size_t j = 0; j < l; ++j) CHECK(cond.pooled[m + j] == 0.0);
}

TEST_CASE("conditioned attention with empty contexts is plain attention") {
    Rng rng(53);
    AttnParams p = AttnParams::init(3, 2, rng);
    Tensor h({3, 2});
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = rng.uniform(-1, 1);
    Tensor c({3, 0});
    AttnResult a = conditioned_attention_pool(h, c, p);
    AttnResult b = attention_pool(h, p);
    CHECK(tensor_close(a.weights, b.weights, 1e-15));
    CHECK(tensor_close(a.pooled, b.pooled, 1e-15));
}

TEST_CASE("conditioned attention carries the context average in its tail") {
    Rng rng(59);
    std::size_t m = 2, l = 3;
    AttnParams p = AttnParams::init(3, m + l, rng);
    Tensor h({2, m}, {0.3, -0.1, 0.8, 0.5});
    Tensor c({2, l}, {1.0, 2.0, 3.0, -1.0, 0.5, 0.25});

    AttnResult r = conditioned_attention_pool(h, c, p);
    double a0 = r.weights[0], a1 = r.weights[1];
    for (std::size_t j = 0; j < l; ++j) {
        double want = a0 * c.at(0, j) + a1 * c.at(1, j);
        CHECK(r.pooled[m + j] == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK_THROWS(conditioned_attention_pool(h, Tensor({3, l}), p));
}

TEST_CASE("dense layer computes an affine map") {
    Tensor w({2, 3}, {1, 0, -1, 2, 1, 0});
    Tensor b = Tensor::row({0.5, -0.5});
    Tensor y = dense(Tensor::row({1.0, 2.0, 3.0}), w, b);
    CHECK(y[0] == doctest::Approx(1 - 3 + 0.5));
    CHECK(y[1] == doctest::Approx(2 + 2 - 0.5));
}

TEST_CASE("adam first step moves by roughly the learning rate against the gradient") {
    AdamConfig cfg;
    cfg.eps = 1e-12;
    Tensor w = Tensor::row({1.0, -2.0});
    Tensor g = Tensor::row({0.3, -7.0});
    AdamSlot slot;
    adam_step(w, g, slot, 1, cfg);
    CHECK(w[0] == doctest::Approx(1.0 - cfg.lr).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(-2.0 + cfg.lr).epsilon(1e-6));
}

TEST_CASE("adam leaves parameters alone on a zero gradient") {
    Tensor w = Tensor::row({0.7});
    AdamSlot slot;
    adam_step(w, Tensor({1}), slot, 1);
    CHECK(w[0] == 0.7);
}

TEST_CASE("adam matches an independent scalar trace on a quadratic") {
    // minimize f(w) = w^2 from w = 1; gradients 2w
    AdamConfig cfg;
    Tensor w = Tensor::row({1.0});
    AdamSlot slot;

    double wm = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
        Tensor g = Tensor::row({2.0 * w[0]});
        adam_step(w, g, slot, static_cast<std::uint64_t>(t), cfg);

        double gm = 2.0 * wm;
        m = 0.9 * m + 0.1 * gm;
        v = 0.999 * v + 0.001 * gm * gm;
        double mh = m / (1.0 - std::pow(0.9, t));
        double vh = v / (1.0 - std::pow(0.999, t));
        wm -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);

        CHECK(w[0] == doctest::Approx(wm).epsilon(1e-12));
    }

    Tensor bad = Tensor::row({std::nan("")});
    Tensor p = Tensor::row({0.0});
    AdamSlot s2;
    CHECK_THROWS(adam_step(p, bad, s2, 1));
}

TEST_CASE("gradient check on a linear map is exact to machine precision") {
    Rng rng(61);
    Tensor w({4}), g({4});
    for (std::size_t i = 0; i < 4; ++i) w[i] = rng.uniform(-1, 1);
    Tensor x = Tensor::row({0.5, -1.0, 2.0, 0.25});

    std::vector<ParamRef> params{{"w", &w, &g}};
    auto loss = [&]() {
        Tape tape;
        Var wv = tape.param(&w, &g);
        Var l = tape.dot(wv, tape.constant(x));
        tape.backward(l);
        return tape.value(l)[0];
    };
    Rng pick(1);
    CHECK(grad_check(loss, params, 100, pick) < 1e-9);
}

TEST_CASE("gradient check on softmax cross entropy") {
    Rng rng(67);
    Tensor z({3}), gz({3});
    for (std::size_t i = 0; i < 3; ++i) z[i] = rng.uniform(-2, 2);

    std::vector<ParamRef> params{{"z", &z, &gz}};
    auto loss = [&]() {
        Tape tape;
        Var zv = tape.param(&z, &gz);
        Var l = tape.cross_entropy(tape.softmax(zv), 1);
        tape.backward(l);
        return tape.value(l)[0];
    };
    Rng pick(2);
    CHECK(grad_check(loss, params, 100, pick) < 1e-7);
}

TEST_CASE("gradient check through encoder, attention and classifier") {
    Rng rng(71);
    std::size_t hid = 3, dim = 2;
    GruParams fwd = GruParams::init(hid, dim, rng);
    GruParams bwd = GruParams::init(hid, dim, rng);
    AttnParams attn = AttnParams::init(3, 2 * hid, rng);
    DenseParams top = DenseParams::init(2, 2 * hid, rng);
    GruParams gfwd = GruParams::zeros(hid, dim);
    GruParams gbwd = GruParams::zeros(hid, dim);
    AttnParams gattn = AttnParams::zeros(3, 2 * hid);
    DenseParams gtop = DenseParams::zeros(2, 2 * hid);

    std::vector<Tensor> inputs;
    for (int t = 0; t < 4; ++t) {
        Tensor x({dim});
        for (std::size_t j = 0; j < dim; ++j) x[j] = rng.uniform(-1, 1);
        inputs.push_back(std::move(x));
    }

    std::vector<ParamRef> params;
    for (auto& r : gru_param_refs("fwd", fwd, gfwd)) params.push_back(r);
    for (auto& r : gru_param_refs("bwd", bwd, gbwd)) params.push_back(r);
    for (auto& r : attn_param_refs("attn", attn, gattn)) params.push_back(r);
    for (auto& r : dense_param_refs("top", top, gtop)) params.push_back(r);

    auto loss = [&]() {
        Tape tape;
        GruVars fv = register_gru(tape, fwd, &gfwd);
        GruVars bv = register_gru(tape, bwd, &gbwd);
        AttnVars av = register_attn(tape, attn, &gattn);
        DenseVars tv = register_dense(tape, top, &gtop);
        std::vector<Var> xs;
        for (const Tensor& x : inputs) xs.push_back(tape.constant(x));
        std::vector<Var> states = bigru_encode(tape, fv, bv, xs, hid);
        AttnPoolVars pooled = attention_pool(tape, av, states);
        Var logits = dense(tape, tv, pooled.pooled);
        Var l = tape.cross_entropy(tape.softmax(logits), 1);
        tape.backward(l);
        return tape.value(l)[0];
    };

    Rng pick(3);
    CHECK(grad_check(loss, params, 60, pick) < 1e-5);
}

TEST_CASE("two optimizer steps from the same seed are bit identical") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        GruParams enc = GruParams::init(2, 2, rng);
        GruParams genc = GruParams::zeros(2, 2);
        DenseParams top = DenseParams::init(2, 2, rng);
        DenseParams gtop = DenseParams::zeros(2, 2);

        std::vector<ParamRef> params;
        for (auto& r : gru_param_refs("enc", enc, genc)) params.push_back(r);
        for (auto& r : dense_param_refs("top", top, gtop)) params.push_back(r);

        Adam opt;
        Tensor x = Tensor::row({0.5, -0.25});
        for (int step = 0; step < 2; ++step) {
            zero_grads(params);
            Tape tape;
            GruVars ev = register_gru(tape, enc, &genc);
            DenseVars tv = register_dense(tape, top, &gtop);
            Var h = gru_cell(tape, ev, tape.constant(x), tape.constant(Tensor({2})));
            Var l = tape.cross_entropy(tape.softmax(dense(tape, tv, h)), 0);
            tape.backward(l);
            opt.step(params);
        }
        std::vector<double> flat;
        for (auto& r : params)
            for (std::size_t i = 0; i < r.value->size(); ++i) flat.push_back((*r.value)[i]);
        return flat;
    };
    auto a = run(12345), b = run(12345);
    CHECK(a == b);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("embedding rows receive gradient through lookups") {
    Tensor table({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor gtable({3, 2});
    Tape tape;
    Var r0 = tape.matrix_row(&table, &gtable, 0);
    Var r2 = tape.matrix_row(&table, &gtable, 2);
    Var l = tape.dot(r0, r2);  // 1*5 + 2*6 = 17
    CHECK(tape.value(l)[0] == doctest::Approx(17.0));
    tape.backward(l);
    CHECK(gtable.at(0, 0) == doctest::Approx(5.0));
    CHECK(gtable.at(0, 1) == doctest::Approx(6.0));
    CHECK(gtable.at(1, 0) == 0.0);
    CHECK(gtable.at(2, 0) == doctest::Approx(1.0));
    CHECK(gtable.at(2, 1) == doctest::Approx(2.0));

    CHECK_THROWS(tape.matrix_row(&table, &gtable, 3));
}

}  // TEST_SUITE
