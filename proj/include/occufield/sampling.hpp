// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "occufield/core.hpp"
#include "occufield/rng.hpp"

namespace occufield {

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit norm
    Real t_near = 0;
    Real t_far = 1;

    Vec3 at(Real t) const { return origin + direction * t; }
};

struct Camera {
    Vec3 position;
    Vec3 right, up, forward;  // orthonormal triad
    Real fov_deg = 12;
    int width = 1, height = 1;
};

struct PoseDistribution {
    enum class Kind { Gaussian, Uniform };
    Kind kind = Kind::Gaussian;
    Real sigma_v = Real(0.155);  // std (gaussian) or half-range (uniform), radians
    Real sigma_h = Real(0.3);
    Real radius = Real(1);
    Vec3 look_at;
};

struct ShrinkSchedule {
    Real delta_init;
    Real gamma;
    Real delta_min;
};

inline Real schedule_delta(const ShrinkSchedule& s, std::int64_t n) {
    return std::max(s.delta_init * std::exp(-s.gamma * Real(n)), s.delta_min);
}

// Orbits the look-at point: yaw 0 / pitch 0 places the camera on +z looking
// back along -z with +y up.
inline Camera make_orbit_camera(const Vec3& look_at, Real radius, Real yaw, Real pitch,
                                Real fov_deg, int width, int height) {
    Camera cam;
    cam.position = look_at + Vec3{std::sin(yaw) * std::cos(pitch), std::sin(pitch),
                                  std::cos(yaw) * std::cos(pitch)} *
                                 radius;
    cam.forward = normalized(look_at - cam.position);
    Vec3 r = cross(cam.forward, Vec3{0, 1, 0});
    cam.right = norm(r) < Real(1e-9) ? Vec3{1, 0, 0} : normalized(r);
    cam.up = cross(cam.right, cam.forward);
    cam.fov_deg = fov_deg;
    cam.width = width;
    cam.height = height;
    return cam;
}

template <class Rng>
Camera sample_pose(const PoseDistribution& dist, Rng& rng, Real fov_deg, int width, int height) {
    Real yaw, pitch;
    if (dist.kind == PoseDistribution::Kind::Gaussian) {
        yaw = dist.sigma_h * rng.normal();
        pitch = dist.sigma_v * rng.normal();
    } else {
        yaw = dist.sigma_h * (Real(2) * rng.uniform() - Real(1));
        pitch = dist.sigma_v * (Real(2) * rng.uniform() - Real(1));
    }
    return make_orbit_camera(dist.look_at, dist.radius, yaw, pitch, fov_deg, width, height);
}

// Ray through the center of pixel (px, py); row 0 is the top of the image.
// Both image axes span the same field of view.
inline Ray pixel_ray(const Camera& cam, int px, int py, Real t_near, Real t_far) {
    const Real tan_half = std::tan(cam.fov_deg * Real(kPi / 360.0));
    const Real u = (Real(2) * (Real(px) + Real(0.5)) / Real(cam.width) - Real(1)) * tan_half;
    const Real v = (Real(1) - Real(2) * (Real(py) + Real(0.5)) / Real(cam.height)) * tan_half;
    Ray ray;
    ray.origin = cam.position;
    ray.direction = normalized(cam.forward + cam.right * u + cam.up * v);
    ray.t_near = t_near;
    ray.t_far = t_far;
    return ray;
}

inline std::vector<Ray> generate_rays(const Camera& cam, Real t_near, Real t_far) {
    std::vector<Ray> rays;
    rays.reserve(std::size_t(cam.width) * std::size_t(cam.height));
    for (int py = 0; py < cam.height; ++py)
        for (int px = 0; px < cam.width; ++px) rays.push_back(pixel_ray(cam, px, py, t_near, t_far));
    return rays;
}

// One draw per equal-width bin of [t_near, t_far]; strictly increasing since
// uniform draws live in [0, 1).
template <class Rng>
std::vector<Real> stratified_samples(Real t_near, Real t_far, int n, Rng& rng) {
    std::vector<Real> t(static_cast<std::size_t>(n));
    const Real w = (t_far - t_near) / Real(n);
    for (int i = 0; i < n; ++i) t[std::size_t(i)] = t_near + (Real(i) + rng.uniform()) * w;
    return t;
}

// Stratified over [t_s - delta, t_s + delta]. A window poking outside the
// volume is translated back inside (width preserved); a window wider than the
// volume collapses to the full [t_near, t_far].
template <class Rng>
std::vector<Real> shrink_window_samples(Real t_near, Real t_far, Real t_s, Real delta, int n,
                                        Rng& rng) {
    Real lo = t_s - delta;
    Real hi = t_s + delta;
    if (hi - lo >= t_far - t_near) {
        lo = t_near;
        hi = t_far;
    } else if (lo < t_near) {
        hi += t_near - lo;
        lo = t_near;
    } else if (hi > t_far) {
        lo -= hi - t_far;
        hi = t_far;
    }
    return stratified_samples(lo, hi, n, rng);
}

// Inverse-transform draws from the piecewise-constant density over bins whose
// edges are midpoints between coarse depths (outer edges at the volume
// bounds). All-zero weights fall back to a uniform draw over the volume.
template <class Rng>
std::vector<Real> hierarchical_fine_depths(std::span<const Real> coarse_depths,
                                           std::span<const Real> weights, int n_fine, Real t_near,
                                           Real t_far, Rng& rng) {
    std::vector<Real> fine;
    if (n_fine <= 0) return fine;
    fine.reserve(std::size_t(n_fine));

    const std::size_t nb = coarse_depths.size();
    std::vector<Real> edges(nb + 1);
    edges[0] = t_near;
    for (std::size_t j = 1; j < nb; ++j) edges[j] = (coarse_depths[j - 1] + coarse_depths[j]) / 2;
    edges[nb] = t_far;

    std::vector<Real> cdf(nb + 1, Real(0));
    for (std::size_t j = 0; j < nb; ++j) cdf[j + 1] = cdf[j] + std::max(weights[j], Real(0));
    const Real total = cdf[nb];

    for (int i = 0; i < n_fine; ++i) {
        const Real u = rng.uniform();
        if (total <= Real(0)) {
            fine.push_back(t_near + u * (t_far - t_near));
            continue;
        }
        const Real target = u * total;
        const auto it = std::upper_bound(cdf.begin(), cdf.end() - 1, target);
        const std::size_t j = std::size_t(std::max<std::ptrdiff_t>(it - cdf.begin() - 1, 0));
        const Real span = cdf[j + 1] - cdf[j];
        const Real frac = span > 0 ? (target - cdf[j]) / span : Real(0.5);
        fine.push_back(edges[j] + frac * (edges[j + 1] - edges[j]));
    }
    return fine;
}

// Fine draws merged and sorted with the coarse depths.
template <class Rng>
std::vector<Real> hierarchical_fine_samples(std::span<const Real> coarse_depths,
                                            std::span<const Real> weights, int n_fine, Real t_near,
                                            Real t_far, Rng& rng) {
    std::vector<Real> out(coarse_depths.begin(), coarse_depths.end());
    const std::vector<Real> fine =
        hierarchical_fine_depths(coarse_depths, weights, n_fine, t_near, t_far, rng);
    out.insert(out.end(), fine.begin(), fine.end());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace occufield
