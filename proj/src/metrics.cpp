// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "occufield/rng.hpp"
#include "occufield/rootfind.hpp"
#include "occufield/sampling.hpp"

namespace occufield {

std::optional<Real> depth_variance(std::span<const Real> weights, std::span<const Real> depths) {
    const std::size_t n = weights.size();
    if (n < 2 || depths.size() != n)
        throw ConfigError("depth_variance: need matching arrays of at least 2 samples");
    Real w_sum = 0, wt_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        w_sum += weights[i];
        wt_sum += weights[i] * depths[i];
    }
    if (w_sum <= Real(1e-12)) return std::nullopt;
    const Real mean = wt_sum / w_sum;
    Real acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Real d = depths[i] - mean;
        acc += weights[i] * d * d;
    }
    return Real(n) / (Real(n - 1) * w_sum) * acc;
}

std::optional<Real> weighted_depth(std::span<const Real> sigmas, std::span<const Real> deltas,
                                   std::span<const Real> depths) {
    const std::size_t n = sigmas.size();
    if (deltas.size() != n || depths.size() != n)
        throw ConfigError("weighted_depth: array size mismatch");
    Real optical_depth = 0, w_sum = 0, wt_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sigmas[i] >= 0)) throw std::invalid_argument("weighted_depth: negative density");
        const Real w = std::exp(-optical_depth) * (Real(1) - std::exp(-sigmas[i] * deltas[i]));
        optical_depth += sigmas[i] * deltas[i];
        w_sum += w;
        wt_sum += w * depths[i];
    }
    if (w_sum <= Real(0)) return std::nullopt;
    return wt_sum / w_sum;
}

Real psnr(const ImageBuffer& a, const ImageBuffer& b) {
    if (a.width != b.width || a.height != b.height || a.pixels.size() != b.pixels.size())
        throw ConfigError("psnr: image dimension mismatch");
    Real acc = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const Vec3 d = a.pixels[i] - b.pixels[i];
        acc += dot(d, d);
    }
    const Real mse = acc / (Real(a.pixels.size()) * Real(3));
    if (mse <= Real(0)) return Real(99);
    return std::min(Real(99), Real(10) * std::log10(Real(1) / mse));
}

ConcentrationReport concentration_report(const FieldView& view, const Camera& camera, Real t_near,
                                         Real t_far, int n_points, std::uint64_t seed,
                                         int threads) {
    (void)seed;  // probes are deterministic midpoints; kept for interface stability
    if (n_points < 2) throw ConfigError("concentration_report: need at least 2 probe points");
    ConcentrationReport rep;
    rep.n_points = n_points;
    const int total = camera.width * camera.height;
    rep.per_ray.assign(std::size_t(total), Real(-1));

    const Real step = (t_far - t_near) / Real(n_points);
    std::vector<Real> depths(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) depths[std::size_t(i)] = t_near + (Real(i) + Real(0.5)) * step;

    parallel_for(total, resolve_thread_count(threads), [&](int idx) {
        const Ray ray =
            pixel_ray(camera, idx % camera.width, idx / camera.width, t_near, t_far);
        std::vector<Real> weights(depths.size());
        Real transmittance = 1;
        for (std::size_t i = 0; i < depths.size(); ++i) {
            const Real a = clamp(view.alpha(ray.at(depths[i])), Real(1e-7), Real(1) - Real(1e-7));
            weights[i] = a * transmittance;
            transmittance *= Real(1) - a;
        }
        if (auto v = depth_variance(weights, depths)) rep.per_ray[std::size_t(idx)] = *v;
    });

    Real acc = 0;
    int defined = 0;
    for (Real v : rep.per_ray) {
        if (v >= 0) {
            acc += v;
            ++defined;
        } else {
            ++rep.excluded_rays;
        }
    }
    rep.image_mean = defined > 0 ? acc / Real(defined) : Real(0);
    return rep;
}

std::vector<EquivalenceRow> equivalence_report(const Field& field, std::span<const Real> latent,
                                               std::span<const Ray> rays,
                                               std::span<const Real> delta_mins, int n_samples,
                                               int m_bins, int m_secant, Real tau,
                                               std::uint64_t seed) {
    const auto k_c = field.color_lipschitz_bound(latent);
    if (!k_c)
        throw ConfigError("equivalence_report: field has no certified color Lipschitz bound");
    const auto view = field.bind(latent);

    std::vector<EquivalenceRow> rows;
    for (const Real delta : delta_mins) {
        EquivalenceRow row;
        row.delta_min = delta;
        row.bound = Real(2) * *k_c * Real(n_samples) * delta;
        for (std::size_t ri = 0; ri < rays.size(); ++ri) {
            const Ray& ray = rays[ri];
            const SurfaceHit hit = locate_surface(*view, ray, m_bins, m_secant, tau);
            if (!hit.found) continue;  // both renders fall back to background
            ++row.hit_rays;
            // Same per-ray stream at every delta so the sweep is a pure
            // window-width comparison.
            CounterRng rng = CounterRng::derive(seed, rng_stream::kVerify, std::uint64_t(ri));
            const std::vector<Real> depths = shrink_window_samples(
                ray.t_near, ray.t_far, hit.t_s, delta, n_samples, rng);
            const RayRenderResult cumulative =
                render_alpha_cumulative(*view, ray, depths, /*normalize=*/true, Vec3{});
            const Vec3 surface = view->evaluate(ray.at(hit.t_s), ray.direction).color;
            const Vec3 d = cumulative.color - surface;
            const Real diff = std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)});
            row.observed_max_diff = std::max(row.observed_max_diff, diff);
        }
        row.violated = row.observed_max_diff > row.bound + Real(1e-12);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace occufield
