// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "occufield/metrics.hpp"
#include "occufield/rng.hpp"

using namespace occufield;

namespace {

AnalyticField ramp_sphere() {
    ColorSpec color;
    color.mode = ColorSpec::Mode::LinearRamp;
    color.base = Vec3{Real(0.5), Real(0.5), Real(0.5)};
    color.ramp[0] = Vec3{Real(0.3), Real(0), Real(0)};
    color.ramp[1] = Vec3{Real(0), Real(0.3), Real(0)};
    color.ramp[2] = Vec3{Real(0), Real(0), Real(0.3)};
    return AnalyticField({Shape{Shape::Kind::Sphere, Vec3{}, Real(0.08), {}, Real(0.2)}},
                         Real(200), color);
}

class EmptyView final : public FieldView {
public:
    FieldOutput evaluate(const Vec3&, const Vec3&) const override {
        return {Real(0), Vec3{Real(1), Real(1), Real(1)}};
    }
    Real alpha(const Vec3&) const override { return Real(0); }
    std::optional<Vec3> alpha_gradient(const Vec3&) const override { return std::nullopt; }
};

}  // namespace

TEST_CASE("depth_variance matches the two-spike hand computation") {
    std::vector<Real> weights(36, Real(0));
    std::vector<Real> depths(36, Real(1.0));
    weights[0] = Real(0.5);
    depths[0] = Real(0.9);
    weights[1] = Real(0.5);
    depths[1] = Real(1.1);

    const auto v = depth_variance(weights, depths);
    REQUIRE(v.has_value());
    CHECK(std::abs(*v - Real(0.010285714285714285)) < Real(1e-9));

    // Rescaling the weights changes nothing.
    for (Real& w : weights) w *= Real(7);
    const auto v7 = depth_variance(weights, depths);
    REQUIRE(v7.has_value());
    CHECK(std::abs(*v7 - *v) < Real(1e-15));
}

TEST_CASE("depth_variance degenerate and invalid inputs") {
    // All weight on a single depth: exactly zero spread.
    std::vector<Real> w{Real(0), Real(3), Real(0)};
    std::vector<Real> d{Real(0.9), Real(1.0), Real(1.1)};
    const auto v = depth_variance(w, d);
    REQUIRE(v.has_value());
    CHECK(*v == Real(0));

    // Vanishing total weight: undefined.
    const std::vector<Real> zeros(4, Real(0));
    const std::vector<Real> dep{Real(1), Real(2), Real(3), Real(4)};
    CHECK_FALSE(depth_variance(zeros, dep).has_value());

    CHECK_THROWS_AS(depth_variance(std::vector<Real>{Real(1)}, std::vector<Real>{Real(1)}),
                    ConfigError);
    CHECK_THROWS_AS(depth_variance(std::vector<Real>{Real(1), Real(1)},
                                   std::vector<Real>{Real(1)}),
                    ConfigError);
}

TEST_CASE("weighted_depth follows the transmittance weights") {
    // One opaque slab: the mean depth is that slab's depth.
    const std::vector<Real> sigmas{Real(0), Real(1e9), Real(0)};
    const std::vector<Real> deltas{Real(0.1), Real(0.1), Real(0.1)};
    const std::vector<Real> depths{Real(0.9), Real(1.0), Real(1.1)};
    const auto m = weighted_depth(sigmas, deltas, depths);
    REQUIRE(m.has_value());
    CHECK(std::abs(*m - Real(1.0)) < Real(1e-12));

    // Two equal slabs: the second is shadowed by the first.
    const std::vector<Real> two{Real(std::log(2.0) / 0.1), Real(std::log(2.0) / 0.1), Real(0)};
    const auto m2 = weighted_depth(two, deltas, depths);
    REQUIRE(m2.has_value());
    // weights 1/2 and 1/4: mean = (0.45 + 0.275) / 0.75
    CHECK(std::abs(*m2 - Real((0.5 * 0.9 + 0.25 * 1.0) / 0.75)) < Real(1e-12));

    CHECK_FALSE(weighted_depth(std::vector<Real>(3, Real(0)), deltas, depths).has_value());
    CHECK_THROWS_AS(weighted_depth(std::vector<Real>{Real(1)}, deltas, depths), ConfigError);
    CHECK_THROWS_AS(weighted_depth(std::vector<Real>{Real(-1), Real(0), Real(0)}, deltas, depths),
                    std::invalid_argument);
}

TEST_CASE("psnr formula, caps, and validation") {
    ImageBuffer a(4, 4), b(4, 4);
    for (Vec3& p : a.pixels) p = Vec3{};
    for (Vec3& p : b.pixels) p = Vec3{Real(0.1), Real(0.1), Real(0.1)};
    CHECK(std::abs(psnr(a, b) - Real(20)) < Real(1e-12));  // mse = 0.01

    for (Vec3& p : b.pixels) p = Vec3{Real(1), Real(1), Real(1)};
    CHECK(std::abs(psnr(a, b)) < Real(1e-12));  // mse = 1

    CHECK(psnr(a, a) == Real(99));

    for (Vec3& p : b.pixels) p = Vec3{Real(1e-6), Real(1e-6), Real(1e-6)};
    CHECK(psnr(a, b) == Real(99));  // 120 dB capped at the sentinel

    const ImageBuffer c(3, 4);
    CHECK_THROWS_AS(psnr(a, c), ConfigError);
}

TEST_CASE("concentration_report separates sharp and empty fields") {
    const Camera cam = make_orbit_camera(Vec3{}, Real(1), Real(0), Real(0), Real(12), 9, 9);

    AnalyticField sphere = ramp_sphere();
    auto view = sphere.bind({});
    const ConcentrationReport rep = concentration_report(*view, cam, Real(0.88), Real(1.12), 36);
    REQUIRE(rep.per_ray.size() == 81);
    CHECK(rep.n_points == 36);
    CHECK(rep.excluded_rays == 0);

    // Center ray pierces the sphere: weights pile onto the first interior
    // probes. The corner ray only grazes the logistic shell, so it is less
    // concentrated than the center yet well below the uniform-grid variance.
    const Real center = rep.per_ray[std::size_t(4) * 9 + 4];
    const Real corner = rep.per_ray[0];
    CHECK(center >= 0);
    CHECK(center < Real(1e-3));
    CHECK(corner > Real(5) * center);
    CHECK(corner < Real(0.004933333333333333));
    CHECK(rep.image_mean > 0);

    CHECK_THROWS_AS(concentration_report(*view, cam, Real(0.88), Real(1.12), 1), ConfigError);
}

TEST_CASE("concentration of an all-empty field is the midpoint-grid variance") {
    // Alphas clamp to 1e-7, leaving near-uniform weights on every ray: the
    // per-ray variance is the Bessel-corrected sample variance of 36 midpoints
    // spanning 0.24, i.e. (0.24/36)^2 (36^2-1)/12 * 36/35.
    const Camera cam = make_orbit_camera(Vec3{}, Real(1), Real(0), Real(0), Real(12), 5, 5);
    const EmptyView view;
    const ConcentrationReport rep = concentration_report(view, cam, Real(0.88), Real(1.12), 36);
    REQUIRE(rep.per_ray.size() == 25);
    CHECK(rep.excluded_rays == 0);
    for (const Real v : rep.per_ray) CHECK(std::abs(v - Real(0.004933333333333333)) < Real(1e-6));
    CHECK(std::abs(rep.image_mean - Real(0.004933333333333333)) < Real(1e-6));
}

TEST_CASE("equivalence_report shrinks the gap with the window") {
    AnalyticField sphere = ramp_sphere();

    std::vector<Ray> rays;
    const Camera cam = make_orbit_camera(Vec3{}, Real(1), Real(0), Real(0), Real(6), 7, 7);
    for (int py = 0; py < 7; ++py)
        for (int px = 0; px < 7; ++px)
            rays.push_back(pixel_ray(cam, px, py, Real(0.88), Real(1.12)));

    const std::vector<Real> deltas{Real(0.1), Real(0.03), Real(0.01)};
    const auto rows = equivalence_report(sphere, {}, rays, deltas, 8, 12, 3, Real(0.5), 5);
    REQUIRE(rows.size() == 3);

    const Real k_c = *sphere.color_lipschitz_bound({});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].delta_min == deltas[i]);
        CHECK(std::abs(rows[i].bound - Real(2) * k_c * Real(8) * deltas[i]) < Real(1e-12));
        CHECK_FALSE(rows[i].violated);
        CHECK(rows[i].observed_max_diff <= rows[i].bound);
        CHECK(rows[i].hit_rays > 0);
        CHECK(rows[i].hit_rays == rows[0].hit_rays);
    }
    CHECK(rows[2].observed_max_diff <= rows[0].observed_max_diff);

    // The hash palette carries no Lipschitz certificate.
    ColorSpec palette;
    palette.mode = ColorSpec::Mode::HashPalette;
    AnalyticField uncertified({Shape{Shape::Kind::Sphere, Vec3{}, Real(0.08), {}, Real(0.2)}},
                              Real(200), palette);
    CHECK_THROWS_AS(equivalence_report(uncertified, {}, rays, deltas, 8, 12, 3, Real(0.5), 5),
                    ConfigError);
}
