// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "occufield/loss.hpp"

using namespace occufield;

TEST_CASE("lambda_opacity anneals exponentially up to the cap") {
    const LossWeights w;  // 0.1, 4e-5, cap 10
    CHECK(lambda_opacity(w, 0) == Real(0.1));
    CHECK(std::abs(lambda_opacity(w, 115129) - Real(9.999898140637862)) < Real(1e-9));
    CHECK(lambda_opacity(w, 115130) == Real(10));
    CHECK(lambda_opacity(w, 10000000) == Real(10));

    LossWeights flat = w;
    flat.gamma_opac = 0;
    CHECK(lambda_opacity(flat, 123456) == Real(0.1));
}

TEST_CASE("gan_softplus is stable on both tails") {
    CHECK(std::abs(gan_softplus(Real(0)) + Real(0.6931471805599453)) < Real(1e-15));
    CHECK(gan_softplus(Real(50)) < Real(0));
    CHECK(gan_softplus(Real(50)) > Real(-1e-20));
    CHECK(std::abs(gan_softplus(Real(-50)) + Real(50)) < Real(1e-9));
    CHECK(std::isfinite(gan_softplus(Real(-1000))));
    CHECK(std::isfinite(gan_softplus(Real(1000))));

    // Identity f(u) - f(-u) = u.
    for (Real u : {Real(-3), Real(-0.7), Real(0.2), Real(4)})
        CHECK(std::abs(gan_softplus(u) - gan_softplus(-u) - u) < Real(1e-12));
}

TEST_CASE("gan_softplus tape variant matches values and finite differences") {
    for (Real u : {Real(-5), Real(-0.3), Real(0), Real(1.2), Real(8)}) {
        Tape tape;
        const std::vector<Real> in{u};
        Tape::Value leaf = tape.input(in);
        Tape::Value y = gan_softplus(tape, leaf);
        CHECK(std::abs(tape.value_of(y) - gan_softplus(u)) < Real(1e-14));

        tape.backward(y);
        const Real g = tape.adjoint_of(leaf)[0];
        const Real h = Real(1e-6);
        const Real fd = (gan_softplus(u + h) - gan_softplus(u - h)) / (2 * h);
        CHECK(std::abs(g - fd) < Real(1e-8));
    }
}

TEST_CASE("gan_objective combines both sides with the R1 term") {
    const std::vector<Real> fake{Real(0)};
    const std::vector<Real> real{Real(0)};
    const std::vector<Real> sq{Real(0.2)};
    // f(0) + f(0) + 10*0.2 = 2 - 2 ln 2
    CHECK(std::abs(gan_objective(fake, real, sq, Real(10)) - Real(0.6137056388801094)) <
          Real(1e-12));

    // Means, not sums: duplicating every entry changes nothing.
    const std::vector<Real> fake2{Real(0), Real(0)};
    const std::vector<Real> real2{Real(0), Real(0)};
    const std::vector<Real> sq2{Real(0.2), Real(0.2)};
    CHECK(std::abs(gan_objective(fake2, real2, sq2, Real(10)) - Real(0.6137056388801094)) <
          Real(1e-12));

    CHECK(gan_objective({}, {}, {}, Real(10)) == Real(0));
    CHECK_THROWS_AS(gan_objective(fake, real2, sq, Real(10)), ConfigError);
}

TEST_CASE("r1_penalty closed forms") {
    // Linear discriminator: gradient is the weight vector everywhere.
    const std::vector<Real> w{Real(0.3), Real(-0.7), Real(0.2)};
    const DiscriminatorFn linear = [&w](Tape& tape, Tape::Value x) {
        return tape.dot(x, tape.constant(w));
    };
    const std::vector<Real> x0{Real(5), Real(-2), Real(0.1)};
    CHECK(std::abs(r1_penalty(linear, x0, Real(10)) - Real(6.2)) < Real(1e-12));

    // Quadratic discriminator: gradient 2x, squared norm 4|x|^2.
    const DiscriminatorFn quad = [](Tape& tape, Tape::Value x) { return tape.dot(x, x); };
    const std::vector<Real> x1{Real(0.5), Real(-1), Real(2)};
    CHECK(std::abs(r1_penalty(quad, x1, Real(2)) - Real(42)) < Real(1e-12));
}

TEST_CASE("normal_regularizer is small on a smooth sphere and skips flats") {
    AnalyticField field({Shape{Shape::Kind::Sphere, Vec3{}, Real(0.2), {}, Real(0.2)}}, Real(200),
                        ColorSpec{});
    auto view = field.bind({});

    std::vector<Vec3> points;
    CounterRng prng = CounterRng::derive(21, 0, 0);
    for (int i = 0; i < 16; ++i) points.push_back(prng.on_sphere() * Real(0.2));

    CounterRng rng = CounterRng::derive(22, 0, 0);
    int skipped = -1;
    const Real acc = normal_regularizer(*view, points, Real(0.01), rng, &skipped);
    CHECK(skipped == 0);
    CHECK(acc > Real(0));
    // Perturbing by 0.01 on an r=0.2 sphere tilts the radial by <= 0.05 rad.
    CHECK(acc <= Real(16) * Real(0.0501));

    // A point far outside has an underflowed gradient: skipped, not summed.
    points.push_back(Vec3{Real(50), Real(0), Real(0)});
    CounterRng rng2 = CounterRng::derive(22, 0, 0);
    const Real acc2 = normal_regularizer(*view, points, Real(0.01), rng2, &skipped);
    CHECK(skipped == 1);
    CHECK(std::abs(acc2 - acc) < Real(1e-12));
}

TEST_CASE("normal_regularizer_on_tape tracks the plain version") {
    AnalyticField field({Shape{Shape::Kind::Sphere, Vec3{}, Real(0.2), {}, Real(0.2)}}, Real(60),
                        ColorSpec{});
    auto view = field.bind({});

    std::vector<Vec3> points;
    CounterRng prng = CounterRng::derive(23, 0, 0);
    for (int i = 0; i < 8; ++i) points.push_back(prng.on_sphere() * Real(0.2));

    Tape tape;
    const TapeAlphaFn alpha_at = [&view](Tape& t, const Vec3& p) {
        return t.constant(view->alpha(p));
    };
    CounterRng rng_tape = CounterRng::derive(24, 0, 0);
    int skip_tape = -1;
    Tape::Value v = normal_regularizer_on_tape(tape, alpha_at, points, Real(0.01), rng_tape,
                                               &skip_tape);

    CounterRng rng_plain = CounterRng::derive(24, 0, 0);
    int skip_plain = -1;
    const Real plain = normal_regularizer(*view, points, Real(0.01), rng_plain, &skip_plain);

    CHECK(skip_tape == 0);
    CHECK(skip_plain == 0);
    // Different normal estimators (analytic vs h=1e-4 central differences):
    // agreement is to finite-difference accuracy, not machine precision.
    CHECK(std::abs(tape.value_of(v) - plain) < Real(1e-3));
}

TEST_CASE("opacity_regularizer frozen values and clamping") {
    CHECK(std::abs(opacity_regularizer(std::vector<Real>{Real(0.01)}) -
                   Real(-4.615220521841592)) < Real(1e-12));
    CHECK(std::abs(opacity_regularizer(std::vector<Real>{Real(0.5), Real(0.5)}) -
                   Real(-1.3862943611198906)) < Real(1e-12));
    // Rails clamp to [1e-7, 1-1e-7] instead of producing -inf. The upper rail
    // re-rounds through 1-(1-1e-7), so it only matches to ~1e-9.
    CHECK(std::abs(opacity_regularizer(std::vector<Real>{Real(0)}) -
                   Real(-16.118095750958325)) < Real(1e-12));
    CHECK(std::abs(opacity_regularizer(std::vector<Real>{Real(1)}) -
                   Real(-16.118095750958325)) < Real(1e-8));
    // Mean, not sum.
    const Real mixed = opacity_regularizer(std::vector<Real>{Real(0.5), Real(0)});
    CHECK(std::abs(mixed - Real((-1.3862943611198906 - 16.118095750958325) / 2)) < Real(1e-12));
    CHECK(opacity_regularizer({}) == Real(0));

    // The peak sits at alpha = 0.5: every value is <= -2 ln 2.
    for (Real a : {Real(0.1), Real(0.3), Real(0.5), Real(0.8), Real(0.999)})
        CHECK(opacity_regularizer(std::vector<Real>{a}) <= Real(-1.3862943611198905));
}

TEST_CASE("opacity_regularizer_on_tape matches the plain version") {
    const std::vector<Real> raw{Real(0.2), Real(0.77), Real(0.5), Real(0.04)};
    Tape tape;
    std::vector<Tape::Value> alphas;
    for (Real a : raw) alphas.push_back(tape.input(std::vector<Real>{a}));
    Tape::Value v = opacity_regularizer_on_tape(tape, alphas);
    CHECK(std::abs(tape.value_of(v) - opacity_regularizer(raw)) < Real(1e-14));

    // Gradient of the mean at alpha: (1/a - 1/(1-a)) / n.
    tape.backward(v);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const Real expect = (Real(1) / raw[i] - Real(1) / (Real(1) - raw[i])) / Real(raw.size());
        CHECK(std::abs(tape.adjoint_of(alphas[i])[0] - expect) < Real(1e-10));
    }
}

TEST_CASE("total_loss composes the weighted parts") {
    LossWeights w;
    w.lambda_normal = Real(0.01);
    w.lambda_opac_init = Real(0.1);
    w.gamma_opac = Real(0);
    const LossComponents parts{Real(1), Real(2), Real(3)};
    CHECK(std::abs(total_loss(parts, w, 0) - Real(1.32)) < Real(1e-12));

    Tape tape;
    Tape::Value t = total_loss_on_tape(tape, tape.constant(Real(1)), tape.constant(Real(2)),
                                       tape.constant(Real(3)), w, 0);
    CHECK(std::abs(tape.value_of(t) - Real(1.32)) < Real(1e-12));
}

TEST_CASE("reconstruction_loss is channel-mean squared error") {
    ImageBuffer black(3, 2), white(3, 2);
    for (Vec3& p : black.pixels) p = Vec3{};
    for (Vec3& p : white.pixels) p = Vec3{Real(1), Real(1), Real(1)};
    CHECK(std::abs(reconstruction_loss(black, white) - Real(1)) < Real(1e-15));
    CHECK(reconstruction_loss(black, black) == Real(0));

    ImageBuffer off = black;
    off.at(0, 0).y = Real(0.3);  // one channel off by 0.3 over 6 pixels
    CHECK(std::abs(reconstruction_loss(off, black) - Real(0.09) / Real(18)) < Real(1e-15));

    const ImageBuffer wrong(2, 2);
    CHECK_THROWS_AS(reconstruction_loss(black, wrong), ConfigError);
}

TEST_CASE("reconstruction_loss_on_tape matches the plain MSE") {
    Tape tape;
    std::vector<Tape::Value> colors;
    colors.push_back(tape.input3(Vec3{Real(0.1), Real(0.7), Real(0.4)}));
    colors.push_back(tape.input3(Vec3{Real(0.9), Real(0.2), Real(0.6)}));
    const std::vector<Vec3> refs{Vec3{Real(0.2), Real(0.5), Real(0.4)},
                                 Vec3{Real(1.0), Real(0.2), Real(0.1)}};

    Tape::Value v = reconstruction_loss_on_tape(tape, colors, refs);
    const Real expect =
        (Real(0.01) + Real(0.04) + Real(0) + Real(0.01) + Real(0) + Real(0.25)) / Real(6);
    CHECK(std::abs(tape.value_of(v) - expect) < Real(1e-14));

    // d/dc of mean squared error: 2 (c - r) / (n * 3).
    tape.backward(v);
    const Vec3 g = tape.input_gradient3(colors[0]);
    CHECK(std::abs(g.x - Real(2) * Real(-0.1) / Real(6)) < Real(1e-12));
    CHECK(std::abs(g.y - Real(2) * Real(0.2) / Real(6)) < Real(1e-12));
    CHECK(std::abs(g.z) < Real(1e-12));
}
