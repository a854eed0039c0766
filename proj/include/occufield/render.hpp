// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "occufield/field.hpp"
#include "occufield/image.hpp"
#include "occufield/rootfind.hpp"
#include "occufield/sampling.hpp"

namespace occufield {

enum class RenderMode { DensityCumulative, AlphaCumulative, SurfaceOnly };
enum class SamplingKind { Stratified, ShrinkWindow, Hierarchical };
// What a cumulative mode does when root-finding misses: paint background
// (inference) or fall back to full-volume stratified samples (training).
enum class MissPolicy { Background, FullVolume };

struct RenderConfig {
    int n_samples = 12;
    int m_bins = 12;
    int m_secant = 3;
    Real tau = Real(0.5);
    RenderMode mode = RenderMode::AlphaCumulative;
    SamplingKind sampling = SamplingKind::Stratified;
    MissPolicy miss_policy = MissPolicy::Background;
    bool normalize_weights = true;  // alpha-mode default; density mode ignores it
    Vec3 background{1, 1, 1};
    Real t_near = Real(0.88), t_far = Real(1.12);
    Real window_delta = Real(0.01);  // half-width for ShrinkWindow sampling
    int n_coarse = 9;                // coarse count for Hierarchical sampling
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = all logical cores; OCCUFIELD_THREADS overrides
};

struct CompositeResult {
    Vec3 color;
    std::vector<Real> weights;
    Real weight_sum = 0;
};

// w_i = alpha_i · Π_{j<i}(1 − alpha_j) after clamping alphas to
// [1e-7, 1 − 1e-7]. With normalize, the last weight is overridden to
// 1 − Σ_{j<N} w_j so the weights sum to one; otherwise the residual
// transmittance is filled with the background color.
CompositeResult composite_alpha(std::span<const Real> alphas, std::span<const Vec3> colors,
                                bool normalize, const Vec3& background);

struct RayRenderResult {
    Vec3 color;
    std::vector<Real> weights;
    std::vector<Real> depths;
    SurfaceHit hit;
    int queries_used = 0;
};

struct DensitySample {
    Real sigma = 0;
    Vec3 color;
};
using DensityFn = std::function<DensitySample(const Vec3& position, const Vec3& direction)>;

// Transmittance-weighted integration of a non-negative density field:
// w_i = exp(−Σ_{j<i} σ_j δ_j)·(1 − exp(−σ_i δ_i)), with the last δ set to
// the mean of the preceding ones. Throws std::invalid_argument on σ < 0.
RayRenderResult render_density_cumulative(const DensityFn& field, const Ray& ray,
                                          std::span<const Real> depths, const Vec3& background);

RayRenderResult render_alpha_cumulative(const FieldView& view, const Ray& ray,
                                        std::span<const Real> depths, bool normalize,
                                        const Vec3& background);

// Root-finds the surface and takes its color alone; misses composite to the
// background. Spends the root-finder's queries plus one color lookup.
RayRenderResult render_surface_only(const FieldView& view, const Ray& ray,
                                    const RenderConfig& cfg);

struct ImageRenderResult {
    ImageBuffer image;
    std::vector<RayRenderResult> rays;  // row-major, one per pixel
    Real mean_queries_per_pixel = 0;
};

// Pixel-parallel render; per-pixel rng streams make the result independent
// of the worker count. Numeric failures are rethrown tagged with the pixel.
ImageRenderResult render_image(const FieldView& view, const Camera& camera,
                               const RenderConfig& cfg);

// Surface normals (unit, pointing toward the camera side) encoded as
// RGB = (n+1)/2; misses and degenerate gradients encode as (0.5, 0.5, 0.5).
ImageBuffer render_normal_map(const FieldView& view, const Camera& camera,
                              const RenderConfig& cfg);

// Effective worker count: OCCUFIELD_THREADS env var beats the requested
// value; 0 or unset falls back to the hardware concurrency.
int resolve_thread_count(int requested);

// Chunked parallel map over [0, count); rethrows the first worker exception.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

// Last inter-sample spacing is undefined by construction; use the mean of
// the others (single sample: the full ray span).
std::vector<Real> sample_deltas(std::span<const Real> depths, Real t_near, Real t_far);

}  // namespace occufield
