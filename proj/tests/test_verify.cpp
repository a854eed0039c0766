// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "occufield/verify.hpp"

using namespace occufield;

namespace {

Ray make_ray(const Vec3& origin, const Vec3& direction, Real t_near, Real t_far) {
    Ray r;
    r.origin = origin;
    r.direction = normalized(direction);
    r.t_near = t_near;
    r.t_far = t_far;
    return r;
}

}  // namespace

TEST_CASE("ray_sphere_entry closed forms") {
    // Straight-on hit: eye at z=1 looking down -z at an r=0.1 sphere.
    const Ray ray = make_ray(Vec3{Real(0), Real(0), Real(1)}, Vec3{Real(0), Real(0), Real(-1)},
                             Real(0.5), Real(1.5));
    const auto t = ray_sphere_entry(ray, Vec3{}, Real(0.1));
    REQUIRE(t.has_value());
    CHECK(std::abs(*t - Real(0.9)) < Real(1e-14));

    // Offset hit: lateral offset 0.06 against r=0.1 -> entry at 1 - 0.08.
    const Ray off = make_ray(Vec3{Real(0.06), Real(0), Real(1)}, Vec3{Real(0), Real(0), Real(-1)},
                             Real(0.5), Real(1.5));
    const auto t2 = ray_sphere_entry(off, Vec3{}, Real(0.1));
    REQUIRE(t2.has_value());
    CHECK(std::abs(*t2 - (Real(1) - Real(0.08))) < Real(1e-14));

    // Clean miss.
    const Ray miss = make_ray(Vec3{Real(0.2), Real(0), Real(1)}, Vec3{Real(0), Real(0), Real(-1)},
                              Real(0.5), Real(1.5));
    CHECK_FALSE(ray_sphere_entry(miss, Vec3{}, Real(0.1)).has_value());

    // Entry outside the ray interval is a miss for the caller.
    const Ray late = make_ray(Vec3{Real(0), Real(0), Real(1)}, Vec3{Real(0), Real(0), Real(-1)},
                              Real(0.5), Real(0.85));
    CHECK_FALSE(ray_sphere_entry(late, Vec3{}, Real(0.1)).has_value());

    // Origin inside the sphere: first boundary crossing is the exit.
    const Ray inside = make_ray(Vec3{}, Vec3{Real(0), Real(0), Real(1)}, Real(0), Real(2));
    const auto t3 = ray_sphere_entry(inside, Vec3{}, Real(0.1));
    REQUIRE(t3.has_value());
    CHECK(std::abs(*t3 - Real(0.1)) < Real(1e-14));
}

TEST_CASE("ray_box_entry closed forms") {
    const Vec3 half{Real(0.1), Real(0.2), Real(0.05)};

    const Ray ray = make_ray(Vec3{Real(0), Real(0), Real(1)}, Vec3{Real(0), Real(0), Real(-1)},
                             Real(0.5), Real(1.5));
    const auto t = ray_box_entry(ray, Vec3{}, half);
    REQUIRE(t.has_value());
    CHECK(std::abs(*t - Real(0.95)) < Real(1e-14));

    // A ray that clips past the narrow z-extent misses.
    const Ray miss = make_ray(Vec3{Real(0.3), Real(0), Real(1)}, Vec3{Real(0), Real(0), Real(-1)},
                              Real(0.5), Real(1.5));
    CHECK_FALSE(ray_box_entry(miss, Vec3{}, half).has_value());

    // Diagonal ray entering through the +x face of a unit-ish box.
    const Ray diag = make_ray(Vec3{Real(0.5), Real(0.05), Real(0)},
                              Vec3{Real(-1), Real(0), Real(0)}, Real(0), Real(2));
    const auto t2 = ray_box_entry(diag, Vec3{}, half);
    REQUIRE(t2.has_value());
    CHECK(std::abs(*t2 - Real(0.4)) < Real(1e-14));

    // Interval clipping applies to boxes too.
    const Ray late = make_ray(Vec3{Real(0), Real(0), Real(1)}, Vec3{Real(0), Real(0), Real(-1)},
                              Real(0.5), Real(0.9));
    CHECK_FALSE(ray_box_entry(late, Vec3{}, half).has_value());
}

TEST_CASE("root-finding suite passes at published settings") {
    const RootfindReport rep = run_rootfind_suite(7, 300);
    INFO(rep.detail);
    CHECK(rep.pass);
    CHECK(rep.rays == 300);
    CHECK(rep.hits + rep.misses == rep.rays);
    CHECK(rep.hits > 0);
    CHECK(rep.max_abs_error < Real(1e-3));
    CHECK(rep.ramp_error < Real(1e-12));
}

TEST_CASE("equivalence suite holds its bound on a small grid") {
    const EquivalenceSuiteReport rep = run_equivalence_suite(7, 12);
    INFO(rep.detail);
    CHECK(rep.pass);
    CHECK(rep.monotone);
    REQUIRE(rep.rows.size() == 3);
    for (const EquivalenceRow& row : rep.rows) {
        CHECK_FALSE(row.violated);
        CHECK(row.observed_max_diff <= row.bound);
        CHECK(row.hit_rays > 0);
    }
    // Windows are ordered widest to narrowest with a non-increasing observed gap.
    CHECK(rep.rows[0].delta_min > rep.rows[2].delta_min);
    CHECK(rep.rows[2].observed_max_diff <= rep.rows[0].observed_max_diff);
}

TEST_CASE("gradient suite matches finite differences on a reduced budget") {
    const GradientSuiteReport rep = run_gradient_suite(7, 64);
    INFO(rep.detail, " worst=", rep.worst.quantity, " analytic=", rep.worst.analytic,
         " numeric=", rep.worst.numeric);
    CHECK(rep.pass);
    CHECK(rep.probes >= 64);
    CHECK(rep.max_rel_error < Real(1e-4));
}
