// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "occufield/image.hpp"
#include "occufield/render.hpp"

namespace occufield {

// Weighted depth variance with the N/((N-1)·Σw) prefactor: zero when all
// weight sits on one depth, invariant to rescaling the weights. Returns
// nullopt when Σw ≤ 1e-12 (concentration undefined on that ray).
std::optional<Real> depth_variance(std::span<const Real> weights, std::span<const Real> depths);

// Transmittance-weighted mean depth of a density profile (weights
// normalized); nullopt when every density vanishes.
std::optional<Real> weighted_depth(std::span<const Real> sigmas, std::span<const Real> deltas,
                                   std::span<const Real> depths);

// 10·log10(1/MSE) over RGB channels in [0,1], capped at the 99.0 sentinel
// (identical images would be infinite).
Real psnr(const ImageBuffer& a, const ImageBuffer& b);

struct ConcentrationReport {
    std::vector<Real> per_ray;  // row-major; -1 marks undefined rays
    Real image_mean = 0;        // over defined rays
    int n_points = 0;
    int excluded_rays = 0;
};

// Per-pixel depth variance from n_points equally spaced (midpoint) alpha
// probes of [t_near, t_far] with unnormalized compositing weights.
ConcentrationReport concentration_report(const FieldView& view, const Camera& camera, Real t_near,
                                         Real t_far, int n_points = 36, std::uint64_t seed = 0,
                                         int threads = 0);

struct EquivalenceRow {
    Real delta_min = 0;
    Real observed_max_diff = 0;  // max per-channel |cumulative - surface|
    Real bound = 0;              // 2 · k_c · N · delta_min
    int hit_rays = 0;            // rays with a found surface (others skipped)
    bool violated = false;
};

// Compares normalized cumulative rendering over the shrunk window
// [t_s - Δ, t_s + Δ] against the surface point's color on every hit ray, per
// window half-width. Requires a Lipschitz-certified field.
std::vector<EquivalenceRow> equivalence_report(const Field& field, std::span<const Real> latent,
                                               std::span<const Ray> rays,
                                               std::span<const Real> delta_mins, int n_samples,
                                               int m_bins, int m_secant, Real tau,
                                               std::uint64_t seed);

}  // namespace occufield
