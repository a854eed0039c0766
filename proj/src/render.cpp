// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace occufield {
namespace {

constexpr Real kAlphaFloor = Real(1e-7);
constexpr Real kAlphaCeil = Real(1) - Real(1e-7);

CompositeResult composite_density(std::span<const Real> sigmas, std::span<const Real> deltas,
                                  std::span<const Vec3> colors, const Vec3& background) {
    CompositeResult r;
    r.weights.resize(sigmas.size());
    Real optical_depth = 0;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        const Real transmittance = std::exp(-optical_depth);
        r.weights[i] = transmittance * (Real(1) - std::exp(-sigmas[i] * deltas[i]));
        optical_depth += sigmas[i] * deltas[i];
        r.weight_sum += r.weights[i];
        r.color += colors[i] * r.weights[i];
    }
    r.color += background * (Real(1) - r.weight_sum);
    return r;
}

}  // namespace

std::vector<Real> sample_deltas(std::span<const Real> depths, Real t_near, Real t_far) {
    const std::size_t n = depths.size();
    std::vector<Real> d(n, t_far - t_near);
    if (n < 2) return d;
    Real acc = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        d[i] = depths[i + 1] - depths[i];
        acc += d[i];
    }
    d[n - 1] = acc / Real(n - 1);
    return d;
}

CompositeResult composite_alpha(std::span<const Real> alphas, std::span<const Vec3> colors,
                                bool normalize, const Vec3& background) {
    CompositeResult r;
    const std::size_t n = alphas.size();
    r.weights.resize(n);
    Real transmittance = 1;
    for (std::size_t i = 0; i < n; ++i) {
        const Real a = clamp(alphas[i], kAlphaFloor, kAlphaCeil);
        r.weights[i] = a * transmittance;
        transmittance *= Real(1) - a;
    }
    if (normalize && n > 0) {
        Real partial = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) partial += r.weights[i];
        r.weights[n - 1] = Real(1) - partial;
        r.weight_sum = partial + r.weights[n - 1];
        for (std::size_t i = 0; i < n; ++i) r.color += colors[i] * r.weights[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            r.weight_sum += r.weights[i];
            r.color += colors[i] * r.weights[i];
        }
        r.color += background * (Real(1) - r.weight_sum);
    }
    return r;
}

RayRenderResult render_density_cumulative(const DensityFn& field, const Ray& ray,
                                          std::span<const Real> depths, const Vec3& background) {
    RayRenderResult out;
    out.depths.assign(depths.begin(), depths.end());
    const std::vector<Real> deltas = sample_deltas(depths, ray.t_near, ray.t_far);
    std::vector<Real> sigmas(depths.size());
    std::vector<Vec3> colors(depths.size());
    for (std::size_t i = 0; i < depths.size(); ++i) {
        const DensitySample s = field(ray.at(depths[i]), ray.direction);
        if (!(s.sigma >= 0))
            throw std::invalid_argument("render_density_cumulative: negative density");
        sigmas[i] = s.sigma;
        colors[i] = s.color;
    }
    CompositeResult c = composite_density(sigmas, deltas, colors, background);
    out.color = c.color;
    out.weights = std::move(c.weights);
    out.queries_used = int(depths.size());
    return out;
}

RayRenderResult render_alpha_cumulative(const FieldView& view, const Ray& ray,
                                        std::span<const Real> depths, bool normalize,
                                        const Vec3& background) {
    RayRenderResult out;
    out.depths.assign(depths.begin(), depths.end());
    std::vector<Real> alphas(depths.size());
    std::vector<Vec3> colors(depths.size());
    for (std::size_t i = 0; i < depths.size(); ++i) {
        const FieldOutput f = view.evaluate(ray.at(depths[i]), ray.direction);
        alphas[i] = f.alpha;
        colors[i] = f.color;
    }
    CompositeResult c = composite_alpha(alphas, colors, normalize, background);
    out.color = c.color;
    out.weights = std::move(c.weights);
    out.queries_used = int(depths.size());
    return out;
}

RayRenderResult render_surface_only(const FieldView& view, const Ray& ray,
                                    const RenderConfig& cfg) {
    RayRenderResult out;
    out.hit = locate_surface(view, ray, cfg.m_bins, cfg.m_secant, cfg.tau);
    out.queries_used = out.hit.queries_used;
    if (out.hit.found) {
        out.color = view.evaluate(ray.at(out.hit.t_s), ray.direction).color;
        ++out.queries_used;
    } else {
        out.color = cfg.background;
    }
    return out;
}

namespace {

// Cumulative-mode pixel: pick depths per the sampling kind, evaluate, then
// composite through the alpha or density formulation.
RayRenderResult cumulative_ray(const FieldView& view, const Ray& ray, const RenderConfig& cfg,
                               CounterRng& rng) {
    RayRenderResult out;
    std::vector<Real> depths;
    std::vector<Real> alphas;
    std::vector<Vec3> colors;

    switch (cfg.sampling) {
        case SamplingKind::Stratified:
            depths = stratified_samples(ray.t_near, ray.t_far, cfg.n_samples, rng);
            break;
        case SamplingKind::ShrinkWindow: {
            out.hit = locate_surface(view, ray, cfg.m_bins, cfg.m_secant, cfg.tau);
            out.queries_used += out.hit.queries_used;
            if (out.hit.found) {
                depths = shrink_window_samples(ray.t_near, ray.t_far, out.hit.t_s,
                                               cfg.window_delta, cfg.n_samples, rng);
            } else if (cfg.miss_policy == MissPolicy::Background) {
                out.color = cfg.background;
                return out;
            } else {
                depths = stratified_samples(ray.t_near, ray.t_far, cfg.n_samples, rng);
            }
            break;
        }
        case SamplingKind::Hierarchical: {
            const int n_coarse = std::min(cfg.n_coarse, cfg.n_samples);
            const int n_fine = cfg.n_samples - n_coarse;
            depths = stratified_samples(ray.t_near, ray.t_far, n_coarse, rng);
            alphas.resize(depths.size());
            colors.resize(depths.size());
            for (std::size_t i = 0; i < depths.size(); ++i) {
                const FieldOutput f = view.evaluate(ray.at(depths[i]), ray.direction);
                alphas[i] = f.alpha;
                colors[i] = f.color;
            }
            const CompositeResult coarse =
                composite_alpha(alphas, colors, false, cfg.background);
            const std::vector<Real> fine = hierarchical_fine_depths(
                depths, coarse.weights, n_fine, ray.t_near, ray.t_far, rng);
            for (Real t : fine) {
                const FieldOutput f = view.evaluate(ray.at(t), ray.direction);
                depths.push_back(t);
                alphas.push_back(f.alpha);
                colors.push_back(f.color);
            }
            std::vector<std::size_t> order(depths.size());
            std::iota(order.begin(), order.end(), std::size_t(0));
            std::sort(order.begin(), order.end(),
                      [&depths](std::size_t a, std::size_t b) { return depths[a] < depths[b]; });
            std::vector<Real> d2(depths.size()), a2(depths.size());
            std::vector<Vec3> c2(depths.size());
            for (std::size_t i = 0; i < order.size(); ++i) {
                d2[i] = depths[order[i]];
                a2[i] = alphas[order[i]];
                c2[i] = colors[order[i]];
            }
            depths = std::move(d2);
            alphas = std::move(a2);
            colors = std::move(c2);
            break;
        }
    }

    if (alphas.empty()) {
        alphas.resize(depths.size());
        colors.resize(depths.size());
        for (std::size_t i = 0; i < depths.size(); ++i) {
            const FieldOutput f = view.evaluate(ray.at(depths[i]), ray.direction);
            alphas[i] = f.alpha;
            colors[i] = f.color;
        }
    }
    out.queries_used += int(depths.size());

    CompositeResult c;
    if (cfg.mode == RenderMode::DensityCumulative) {
        const std::vector<Real> deltas = sample_deltas(depths, ray.t_near, ray.t_far);
        std::vector<Real> sigmas(depths.size());
        for (std::size_t i = 0; i < depths.size(); ++i) {
            const Real a = clamp(alphas[i], kAlphaFloor, kAlphaCeil);
            sigmas[i] = -std::log(Real(1) - a) / deltas[i];
        }
        c = composite_density(sigmas, deltas, colors, cfg.background);
    } else {
        c = composite_alpha(alphas, colors, cfg.normalize_weights, cfg.background);
    }
    out.color = c.color;
    out.weights = std::move(c.weights);
    out.depths = std::move(depths);
    return out;
}

}  // namespace

int resolve_thread_count(int requested) {
    if (const char* env = std::getenv("OCCUFIELD_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::atomic<bool> failed{false};
    const int chunk = std::max(1, count / (threads * 8));
    auto worker = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const int begin = next.fetch_add(chunk);
            if (begin >= count) break;
            const int end = std::min(begin + chunk, count);
            try {
                for (int i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

ImageRenderResult render_image(const FieldView& view, const Camera& camera,
                               const RenderConfig& cfg) {
    if (camera.width < 1 || camera.height < 1)
        throw ConfigError("render_image: empty image dimensions");
    ImageRenderResult result;
    result.image = ImageBuffer(camera.width, camera.height);
    result.rays.resize(result.image.pixels.size());

    const int total = camera.width * camera.height;
    parallel_for(total, resolve_thread_count(cfg.threads), [&](int idx) {
        const int px = idx % camera.width;
        const int py = idx / camera.width;
        try {
            const Ray ray = pixel_ray(camera, px, py, cfg.t_near, cfg.t_far);
            CounterRng rng = CounterRng::derive(cfg.seed, rng_stream::kPixel, std::uint64_t(idx));
            RayRenderResult r = cfg.mode == RenderMode::SurfaceOnly
                                    ? render_surface_only(view, ray, cfg)
                                    : cumulative_ray(view, ray, cfg, rng);
            result.image.pixels[std::size_t(idx)] = r.color;
            result.rays[std::size_t(idx)] = std::move(r);
        } catch (const NumericError& e) {
            throw NumericError("pixel (" + std::to_string(px) + ", " + std::to_string(py) +
                               "): " + e.what());
        }
    });

    long long queries = 0;
    for (const RayRenderResult& r : result.rays) queries += r.queries_used;
    result.mean_queries_per_pixel = Real(queries) / Real(total);
    return result;
}

ImageBuffer render_normal_map(const FieldView& view, const Camera& camera,
                              const RenderConfig& cfg) {
    ImageBuffer img(camera.width, camera.height);
    const int total = camera.width * camera.height;
    parallel_for(total, resolve_thread_count(cfg.threads), [&](int idx) {
        const int px = idx % camera.width;
        const int py = idx / camera.width;
        const Ray ray = pixel_ray(camera, px, py, cfg.t_near, cfg.t_far);
        const SurfaceHit hit = locate_surface(view, ray, cfg.m_bins, cfg.m_secant, cfg.tau);
        Vec3 enc{Real(0.5), Real(0.5), Real(0.5)};
        if (hit.found) {
            // ∇alpha points into the object; flip so normals face the camera.
            if (auto g = view.alpha_gradient(ray.at(hit.t_s))) {
                const Vec3 n = normalized(*g) * Real(-1);
                enc = (n + Vec3{1, 1, 1}) * Real(0.5);
            }
        }
        img.pixels[std::size_t(idx)] = enc;
    });
    return img;
}

}  // namespace occufield
