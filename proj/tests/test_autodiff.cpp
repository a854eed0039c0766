// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "occufield/autodiff.hpp"

using namespace occufield;

namespace {

// Central finite difference of a scalar function of one tape-rebuilt input.
template <class F>
Real fd(const F& f, Real x, Real h = Real(1e-6)) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

}  // namespace

TEST_CASE("unary chain values and gradients match finite differences") {
    const auto build = [](Real x) {
        Tape tape;
        const Real xs[1] = {x};
        const Tape::Value leaf = tape.input(xs);
        // y = log(1 + exp(sin(x)^2))  exercised through mul/exp/log/offset
        const Tape::Value s = tape.sin(leaf);
        const Tape::Value sq = tape.mul(s, s);
        const Tape::Value e = tape.exp(sq);
        const Tape::Value y = tape.log(tape.offset(e, Real(1)));
        return std::pair{tape.value_of(y), [&tape, leaf, y]() mutable {
                             tape.backward(y);
                             return tape.adjoint_of(leaf)[0];
                         }()};
    };
    for (Real x : {Real(-1.3), Real(0.2), Real(2.7)}) {
        const auto [val, grad] = build(x);
        const Real expect = std::log(1 + std::exp(std::sin(x) * std::sin(x)));
        CHECK(val == doctest::Approx(expect).epsilon(1e-12));
        const Real numeric = fd([&](Real v) { return build(v).first; }, x);
        CHECK(grad == doctest::Approx(numeric).epsilon(1e-6));
    }
}

TEST_CASE("logistic, sqrt, softplus, leaky_relu, clamp gradients") {
    const auto run = [](auto op, Real x) {
        Tape tape;
        const Real xs[1] = {x};
        const Tape::Value leaf = tape.input(xs);
        const Tape::Value y = op(tape, leaf);
        const Real val = tape.value_of(y);
        tape.backward(y);
        return std::pair{val, tape.adjoint_of(leaf)[0]};
    };

    const auto logistic_op = [](Tape& t, Tape::Value v) { return t.logistic(v); };
    const auto [lv, lg] = run(logistic_op, Real(0.7));
    CHECK(lv == doctest::Approx(logistic(Real(0.7))).epsilon(1e-14));
    CHECK(lg == doctest::Approx(lv * (1 - lv)).epsilon(1e-12));

    const auto sqrt_op = [](Tape& t, Tape::Value v) { return t.sqrt(v); };
    const auto [sv, sg] = run(sqrt_op, Real(4));
    CHECK(sv == doctest::Approx(2).epsilon(1e-14));
    CHECK(sg == doctest::Approx(0.25).epsilon(1e-12));

    const auto soft_op = [](Tape& t, Tape::Value v) { return t.softplus(v); };
    const auto [pv, pg] = run(soft_op, Real(1.2));
    CHECK(pv == doctest::Approx(std::log(1 + std::exp(1.2))).epsilon(1e-12));
    CHECK(pg == doctest::Approx(logistic(Real(1.2))).epsilon(1e-12));

    const auto leaky_op = [](Tape& t, Tape::Value v) { return t.leaky_relu(v, Real(0.2)); };
    CHECK(run(leaky_op, Real(3)).second == doctest::Approx(1));
    CHECK(run(leaky_op, Real(-3)).second == doctest::Approx(0.2));
    CHECK(run(leaky_op, Real(-3)).first == doctest::Approx(-0.6));

    const auto clamp_op = [](Tape& t, Tape::Value v) { return t.clamp(v, Real(0), Real(1)); };
    CHECK(run(clamp_op, Real(0.4)).second == doctest::Approx(1));
    CHECK(run(clamp_op, Real(1.7)).second == doctest::Approx(0));
    CHECK(run(clamp_op, Real(1.7)).first == doctest::Approx(1));
}

TEST_CASE("binary broadcast and reductions") {
    Tape tape;
    const Real a_data[3] = {1, 2, 3};
    const Real s_data[1] = {2};
    const Tape::Value a = tape.input(a_data);
    const Tape::Value s = tape.input(s_data);

    const Tape::Value scaled = tape.mul(a, s);  // {2, 4, 6}
    const Tape::Value total = tape.sum(scaled);
    CHECK(tape.value_of(total) == doctest::Approx(12));
    tape.backward(total);
    const auto ga = tape.adjoint_of(a);
    CHECK(ga[0] == doctest::Approx(2));
    CHECK(ga[1] == doctest::Approx(2));
    CHECK(ga[2] == doctest::Approx(2));
    CHECK(tape.adjoint_of(s)[0] == doctest::Approx(6));  // 1+2+3
}

TEST_CASE("dot, concat, slice") {
    Tape tape;
    const Real a_data[3] = {1, 2, 3};
    const Real b_data[3] = {4, 5, 6};
    const Tape::Value a = tape.input(a_data);
    const Tape::Value b = tape.input(b_data);
    const Tape::Value d = tape.dot(a, b);
    CHECK(tape.value_of(d) == doctest::Approx(32));

    const Tape::Value cat = tape.concat(a, b);
    CHECK(cat.size == 6);
    const Tape::Value sl = tape.slice(cat, 2, 2);  // {3, 4}
    const auto vals = tape.values_of(sl);
    CHECK(vals[0] == doctest::Approx(3));
    CHECK(vals[1] == doctest::Approx(4));

    const Tape::Value y = tape.sum(tape.mul(sl, sl));  // 9 + 16
    CHECK(tape.value_of(y) == doctest::Approx(25));
    tape.backward(y);
    const auto ga = tape.adjoint_of(a);
    const auto gb = tape.adjoint_of(b);
    CHECK(ga[2] == doctest::Approx(6));  // d(3^2)/d3
    CHECK(gb[0] == doctest::Approx(8));  // d(4^2)/d4
    CHECK(ga[0] == doctest::Approx(0));
    CHECK(gb[2] == doctest::Approx(0));
}

TEST_CASE("div gradient") {
    Tape tape;
    const Real a_data[1] = {3};
    const Real b_data[1] = {4};
    const Tape::Value a = tape.input(a_data);
    const Tape::Value b = tape.input(b_data);
    const Tape::Value q = tape.div(a, b);
    CHECK(tape.value_of(q) == doctest::Approx(0.75));
    tape.backward(q);
    CHECK(tape.adjoint_of(a)[0] == doctest::Approx(0.25));
    CHECK(tape.adjoint_of(b)[0] == doctest::Approx(-3.0 / 16.0));
}

TEST_CASE("affine layer against hand-computed matrix product") {
    // params = [W(2x3) row-major | b(2)]
    std::vector<Real> params = {1, 2, 3, 4, 5, 6, Real(0.5), Real(-0.5)};
    Tape tape(params);
    const Real x_data[3] = {1, 1, 2};
    const Tape::Value x = tape.input(x_data);
    const Tape::Value y = tape.affine(x, 0, 6, 2);
    const auto vals = tape.values_of(y);
    CHECK(vals[0] == doctest::Approx(1 + 2 + 6 + 0.5));
    CHECK(vals[1] == doctest::Approx(4 + 5 + 12 - 0.5));

    tape.backward(tape.sum(y));
    const auto pg = tape.param_gradients();
    // dW[r][c] = x[c]; db[r] = 1
    CHECK(pg[0] == doctest::Approx(1));
    CHECK(pg[2] == doctest::Approx(2));
    CHECK(pg[3] == doctest::Approx(1));
    CHECK(pg[5] == doctest::Approx(2));
    CHECK(pg[6] == doctest::Approx(1));
    CHECK(pg[7] == doctest::Approx(1));
    // dx[c] = sum_r W[r][c]
    const auto gx = tape.adjoint_of(x);
    CHECK(gx[0] == doctest::Approx(5));
    CHECK(gx[1] == doctest::Approx(7));
    CHECK(gx[2] == doctest::Approx(9));
}

TEST_CASE("film node y = sin(freq*x + phase)") {
    Tape tape;
    const Real x_data[2] = {Real(0.3), Real(-0.8)};
    const Real f_data[2] = {Real(2), Real(5)};
    const Real p_data[2] = {Real(0.1), Real(-0.2)};
    const Tape::Value x = tape.input(x_data);
    const Tape::Value f = tape.input(f_data);
    const Tape::Value p = tape.input(p_data);
    const Tape::Value y = tape.film(x, f, p);
    const auto vals = tape.values_of(y);
    CHECK(vals[0] == doctest::Approx(std::sin(2 * 0.3 + 0.1)).epsilon(1e-14));
    CHECK(vals[1] == doctest::Approx(std::sin(5 * -0.8 - 0.2)).epsilon(1e-14));

    tape.backward(tape.sum(y));
    const Real c0 = std::cos(2 * 0.3 + 0.1), c1 = std::cos(5 * -0.8 - 0.2);
    CHECK(tape.adjoint_of(x)[0] == doctest::Approx(2 * c0).epsilon(1e-12));
    CHECK(tape.adjoint_of(x)[1] == doctest::Approx(5 * c1).epsilon(1e-12));
    CHECK(tape.adjoint_of(f)[0] == doctest::Approx(0.3 * c0).epsilon(1e-12));
    CHECK(tape.adjoint_of(p)[1] == doctest::Approx(c1).epsilon(1e-12));
}

TEST_CASE("param_vector reads and differentiates the registry") {
    std::vector<Real> params = {10, 20, 30};
    Tape tape(params);
    const Tape::Value pv = tape.param_vector(1, 2);
    const Tape::Value y = tape.dot(pv, pv);  // 400 + 900
    CHECK(tape.value_of(y) == doctest::Approx(1300));
    tape.backward(y);
    const auto pg = tape.param_gradients();
    CHECK(pg[0] == doctest::Approx(0));
    CHECK(pg[1] == doctest::Approx(40));
    CHECK(pg[2] == doctest::Approx(60));
}

TEST_CASE("clear resets gradients and reuses the tape") {
    std::vector<Real> params = {2};
    Tape tape(params);
    const Tape::Value pv = tape.param_vector(0, 1);
    tape.backward(tape.mul(pv, pv));
    CHECK(tape.param_gradients()[0] == doctest::Approx(4));

    tape.clear();
    CHECK(tape.param_gradients()[0] == Real(0));
    CHECK(tape.node_count() == 0);

    const Tape::Value pv2 = tape.param_vector(0, 1);
    tape.backward(tape.mul(tape.mul(pv2, pv2), pv2));
    CHECK(tape.param_gradients()[0] == doctest::Approx(12));
}

TEST_CASE("double backward without clear is rejected") {
    Tape tape;
    const Real xs[1] = {1};
    const Tape::Value x = tape.input(xs);
    const Tape::Value y = tape.mul(x, x);
    tape.backward(y);
    CHECK(tape.backward_done());
    CHECK_THROWS_AS(tape.backward(y), std::logic_error);
}

TEST_CASE("non-finite primal raises NumericError") {
    Tape tape;
    const Real xs[1] = {0};
    const Tape::Value x = tape.input(xs);
    const Tape::Value y = tape.log(x);  // -inf
    CHECK_THROWS_AS(tape.backward(y), NumericError);
}

TEST_CASE("sgd_step and momentum optimizer") {
    std::vector<Real> params = {1, 2};
    const std::vector<Real> grads = {Real(0.5), Real(-1)};
    sgd_step(params, grads, Real(0.1));
    CHECK(params[0] == doctest::Approx(0.95));
    CHECK(params[1] == doctest::Approx(2.1));

    const std::vector<Real> bad = {std::numeric_limits<Real>::quiet_NaN(), 0};
    CHECK_THROWS_AS(sgd_step(params, bad, Real(0.1)), NumericError);

    // Heavy ball: v <- m v + g, p <- p - lr v.
    std::vector<Real> p2 = {0};
    SgdMomentum opt(Real(0.1), Real(0.5));
    const std::vector<Real> g2 = {1};
    opt.step(p2, g2);  // v=1, p=-0.1
    CHECK(p2[0] == doctest::Approx(-0.1));
    opt.step(p2, g2);  // v=1.5, p=-0.25
    CHECK(p2[0] == doctest::Approx(-0.25));
}
