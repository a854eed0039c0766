// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "occufield/field.hpp"
#include "occufield/metrics.hpp"
#include "occufield/sampling.hpp"

namespace occufield {

// Closed-form first intersection of a ray with the shape boundary, restricted
// to [ray.t_near, ray.t_far]; nullopt on a miss.
std::optional<Real> ray_sphere_entry(const Ray& ray, const Vec3& center, Real radius);
std::optional<Real> ray_box_entry(const Ray& ray, const Vec3& center, const Vec3& half_extents);

struct RootfindReport {
    int rays = 0;
    int hits = 0;
    int misses = 0;
    Real max_abs_error = 0;  // |t_s - closed-form entry| over hit rays
    Real ramp_error = 0;     // affine-ramp secant exactness
    bool pass = false;
    std::string detail;  // first failing case, empty when passing
};

// Random rays aimed at random spheres and boxes (logistic occupancy,
// sharpness 200): the located surface depth must sit within tol of the
// closed-form entry depth, and on an affine alpha ramp a single secant step
// must land exactly (1e-12).
RootfindReport run_rootfind_suite(std::uint64_t seed, int n_rays = 1000, int m_bins = 12,
                                  int m_secant = 3, Real tol = Real(1e-3));

struct EquivalenceSuiteReport {
    std::vector<EquivalenceRow> rows;  // widest window first
    int rays = 0;
    bool monotone = true;  // observed max non-increasing as the window shrinks
    bool pass = false;
    std::string detail;
};

// Surface-only vs cumulative rendering of a seed-initialized neural field on
// a pixel grid of rays, checked against the 2·k_c·N·Δ bound per window width.
EquivalenceSuiteReport run_equivalence_suite(std::uint64_t seed, int grid = 32,
                                             std::vector<Real> deltas = {Real(0.1), Real(0.03),
                                                                         Real(0.01)});

struct GradientProbe {
    std::string quantity;
    Real analytic = 0;
    Real numeric = 0;
    Real rel_error = 0;
};

struct GradientSuiteReport {
    int probes = 0;
    Real max_rel_error = 0;
    GradientProbe worst;
    bool pass = false;
    std::string detail;
};

// Central finite differences vs tape gradients for the field outputs and
// every loss term. rel error = |a-n| / max(|a|, |n|, 1e-5); the floor keeps
// true-zero gradients from amplifying differencing noise.
GradientSuiteReport run_gradient_suite(std::uint64_t seed, int min_probes = 500,
                                       Real tol = Real(1e-4));

}  // namespace occufield
