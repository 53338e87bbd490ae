#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qhedge/nn.hpp"
#include "qhedge/rng.hpp"
#include "qhedge/tape.hpp"

#include "support/gradcheck.hpp"

using qhedge::Real;
namespace ad = qhedge::ad;

namespace {

/// Loss = mean of squares of a node, with every parameter checked by
/// central finite differences through a rebuildable graph.
void check_params_fd(const std::function<int(ad::Tape&)>& build,
                     const std::vector<ad::Tensor*>& params, Real tol = 1e-6) {
    ad::Tape tape;
    const int loss = build(tape);
    for (auto* p : params) p->zero_grad();
    tape.backward(loss);
    const auto eval = [&]() {
        ad::Tape t2;
        return *t2.value(build(t2));
    };
    for (auto* p : params)
        for (std::size_t i = 0; i < p->size(); ++i) {
            const Real h = 1e-6 * std::max(Real(1.0), std::abs(p->v[i]));
            const Real fd = qhedge_test::central_fd(eval, p->v[i], h);
            CHECK(qhedge_test::grad_rel_err(p->g[i], fd) < tol);
        }
}

ad::Tensor make_tensor(int rows, int cols, qhedge::NormalSource& rng, Real scale = 0.5) {
    ad::Tensor t(rows, cols);
    for (auto& v : t.v) v = scale * rng.next_gauss();
    return t;
}

}  // namespace

TEST_CASE("affine forward values") {
    ad::Tape tape;
    const Real x[] = {1.0, 2.0, 3.0, 4.0};
    ad::Tensor W(2, 3), b(1, 3);
    W.v = {1.0, 0.0, 2.0, 0.0, 1.0, -1.0};
    b.v = {0.5, -0.5, 0.0};
    const int id = tape.affine(tape.leaf(x, 2, 2), W, b);
    const Real* y = tape.value(id);
    // row 0: [1*1+2*0+0.5, 1*0+2*1-0.5, 1*2+2*(-1)+0]
    CHECK(y[0] == Catch::Approx(1.5));
    CHECK(y[1] == Catch::Approx(1.5));
    CHECK(y[2] == Catch::Approx(0.0));
    // row 1: [3+0.5, 4-0.5, 6-4]
    CHECK(y[3] == Catch::Approx(3.5));
    CHECK(y[4] == Catch::Approx(3.5));
    CHECK(y[5] == Catch::Approx(2.0));
}

TEST_CASE("elementwise op forward values") {
    ad::Tape tape;
    const Real x[] = {-2.0, -0.5, 0.0, 1.5};
    const int leaf = tape.leaf(x, 1, 4);
    const Real* r = tape.value(tape.relu(leaf));
    CHECK(r[0] == 0.0);
    CHECK(r[3] == 1.5);
    const Real* s = tape.value(tape.sigmoid(leaf));
    CHECK(s[2] == Catch::Approx(0.5));
    CHECK(s[3] == Catch::Approx(1.0 / (1.0 + std::exp(-1.5))).epsilon(1e-14));
    const Real* a = tape.value(tape.abs(leaf));
    CHECK(a[0] == 2.0);
    CHECK(a[1] == 0.5);
    const Real* q = tape.value(tape.square(leaf));
    CHECK(q[0] == 4.0);
    const Real* m = tape.value(tape.mean_all(leaf));
    CHECK(m[0] == Catch::Approx((-2.0 - 0.5 + 0.0 + 1.5) / 4.0));
    const Real* sc = tape.value(tape.mul_scalar(tape.add_scalar(leaf, 1.0), 2.0));
    CHECK(sc[0] == -2.0);
    CHECK(sc[3] == 5.0);
}

TEST_CASE("binary ops and concat forward values") {
    ad::Tape tape;
    const Real a[] = {1.0, 2.0};
    const Real b[] = {3.0, 5.0};
    const int la = tape.leaf(a, 1, 2);
    const int lb = tape.leaf(b, 1, 2);
    CHECK(tape.value(tape.add(la, lb))[1] == 7.0);
    CHECK(tape.value(tape.sub(la, lb))[0] == -2.0);
    CHECK(tape.value(tape.mul(la, lb))[1] == 10.0);
    const Real* c = tape.value(tape.concat({la, lb}));
    CHECK(c[0] == 1.0);
    CHECK(c[2] == 3.0);
    CHECK(c[3] == 5.0);
}

TEST_CASE("gradients through an affine relu chain match finite differences") {
    qhedge::NormalSource rng(11);
    ad::Tensor W1 = make_tensor(3, 5, rng), b1 = make_tensor(1, 5, rng);
    ad::Tensor W2 = make_tensor(5, 1, rng), b2 = make_tensor(1, 1, rng);
    std::vector<Real> x(12);
    for (auto& v : x) v = rng.next_gauss();
    const auto build = [&](ad::Tape& t) {
        const int in = t.leaf(x.data(), 4, 3);
        const int h = t.relu(t.affine(in, W1, b1));
        const int out = t.affine(h, W2, b2);
        return t.mean_all(t.square(out));
    };
    check_params_fd(build, {&W1, &b1, &W2, &b2});
}

TEST_CASE("gradients through sigmoid, abs, mul and concat match finite differences") {
    qhedge::NormalSource rng(12);
    ad::Tensor W1 = make_tensor(2, 4, rng), b1 = make_tensor(1, 4, rng);
    ad::Tensor W2 = make_tensor(8, 1, rng), b2 = make_tensor(1, 1, rng);
    std::vector<Real> x(6);
    for (auto& v : x) v = 1.0 + 0.3 * rng.next_gauss();
    const auto build = [&](ad::Tape& t) {
        const int in = t.leaf(x.data(), 3, 2);
        const int h = t.sigmoid(t.affine(in, W1, b1));
        const int g = t.abs(t.add_scalar(h, -0.4));
        const int cat = t.concat({h, g});
        const int out = t.affine(cat, W2, b2);
        const int prod = t.mul(out, out);
        return t.mean_all(prod);
    };
    check_params_fd(build, {&W1, &b1, &W2, &b2});
}

TEST_CASE("layer normalization forward and gradients") {
    qhedge::NormalSource rng(13);
    ad::Tensor gamma(1, 4), beta(1, 4);
    gamma.v = {1.0, 1.0, 1.0, 1.0};
    beta.v = {0.0, 0.0, 0.0, 0.0};
    std::vector<Real> x = {1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 2.0, 0.1};
    {
        ad::Tape tape;
        const int ln = tape.layer_norm(tape.leaf(x.data(), 2, 4), gamma, beta);
        const Real* y = tape.value(ln);
        // each row is standardized: mean 0, unit variance
        for (int r = 0; r < 2; ++r) {
            Real m = 0.0, v = 0.0;
            for (int ccol = 0; ccol < 4; ++ccol) m += y[r * 4 + ccol];
            m /= 4.0;
            for (int ccol = 0; ccol < 4; ++ccol)
                v += (y[r * 4 + ccol] - m) * (y[r * 4 + ccol] - m);
            v /= 4.0;
            CHECK(std::abs(m) < 1e-12);
            // the stabilizing epsilon inside the norm pulls variance a hair under 1
            CHECK(v == Catch::Approx(1.0).epsilon(1e-4));
        }
    }
    ad::Tensor W = make_tensor(4, 4, rng), b = make_tensor(1, 4, rng);
    ad::Tensor g2 = make_tensor(1, 4, rng, 0.3), b2 = make_tensor(1, 4, rng, 0.3);
    for (auto& v : g2.v) v += 1.0;
    const auto build = [&](ad::Tape& t) {
        const int in = t.leaf(x.data(), 2, 4);
        const int h = t.affine(in, W, b);
        const int ln = t.layer_norm(h, g2, b2);
        return t.mean_all(t.square(ln));
    };
    check_params_fd(build, {&W, &b, &g2, &b2}, 1e-5);
}

TEST_CASE("dropout scales kept units and is reproducible from the rng state") {
    qhedge::NormalSource rng(77);
    const std::string state = rng.state_string();
    std::vector<Real> x(64, 1.0);
    ad::Tape tape;
    const Real p = 0.25;
    const int d = tape.dropout(tape.leaf(x.data(), 8, 8), p, rng);
    const Real* y = tape.value(d);
    int kept = 0;
    for (int i = 0; i < 64; ++i) {
        if (y[i] != 0.0) {
            CHECK(y[i] == Catch::Approx(1.0 / (1.0 - p)).epsilon(1e-14));
            ++kept;
        }
    }
    CHECK(kept > 24);
    CHECK(kept < 64);
    // identical rng state reproduces the identical mask
    qhedge::NormalSource rng2(1);
    rng2.set_state(state);
    ad::Tape tape2;
    const Real* y2 = tape2.value(tape2.dropout(tape2.leaf(x.data(), 8, 8), p, rng2));
    for (int i = 0; i < 64; ++i) CHECK(y[i] == y2[i]);
}

TEST_CASE("gradients accumulate across tapes until zeroed") {
    ad::Tensor W(1, 1), b(1, 1);
    W.v = {2.0};
    b.v = {0.0};
    const Real x = 3.0;
    const auto run_once = [&]() {
        ad::Tape tape;
        tape.backward(tape.mean_all(tape.affine(tape.leaf(&x, 1, 1), W, b)));
    };
    W.zero_grad();
    run_once();
    CHECK(W.g[0] == Catch::Approx(3.0));
    run_once();
    CHECK(W.g[0] == Catch::Approx(6.0));
    W.zero_grad();
    CHECK(W.g[0] == 0.0);
}

TEST_CASE("a consumed tape rejects further use") {
    ad::Tensor W(1, 1), b(1, 1);
    W.v = {1.0};
    b.v = {0.0};
    const Real x = 1.0;
    ad::Tape tape;
    const int loss = tape.mean_all(tape.affine(tape.leaf(&x, 1, 1), W, b));
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
    CHECK_THROWS_AS(tape.leaf(&x, 1, 1), std::logic_error);
    tape.clear();
    const int loss2 = tape.mean_all(tape.affine(tape.leaf(&x, 1, 1), W, b));
    W.zero_grad();
    tape.backward(loss2);
    CHECK(W.g[0] == Catch::Approx(1.0));
}

TEST_CASE("backward rejects non-scalar loss nodes") {
    const Real x[] = {1.0, 2.0};
    ad::Tape tape;
    const int leaf = tape.leaf(x, 1, 2);
    CHECK_THROWS_AS(tape.backward(leaf), std::invalid_argument);
}

TEST_CASE("randomized network gradient checks") {
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        CHECK(qhedge_test::mlp_grad_check(900 + seed, false) < 1e-5);
}

TEST_CASE("randomized composite two-network gradient checks") {
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        CHECK(qhedge_test::mlp_grad_check(1900 + seed, true) < 1e-5);
}
