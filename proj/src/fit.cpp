// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/fit.hpp"

#include <cmath>
#include <ostream>

#include <json.hpp>

#include "occufield/loss.hpp"
#include "occufield/metrics.hpp"
#include "occufield/render.hpp"
#include "occufield/rootfind.hpp"

namespace occufield {
namespace {

constexpr Real kMomentum = Real(0.9);
constexpr Real kNormalEps = Real(0.01);
constexpr int kMaxNormalPoints = 8;     // surface points regularized per step
constexpr int kMetricSamples = 36;      // ray samples for checkpoint metrics
constexpr int kDivergenceStreak = 100;  // consecutive bad steps before aborting

struct ReferenceSet {
    std::vector<Camera> cameras;
    std::vector<ImageBuffer> images;  // surface-only target renders
};

// View 0 is the canonical front view used for metrics; the rest follow the
// scene's pose distribution.
ReferenceSet make_references(const SceneConfig& cfg, const FieldView& target, int size) {
    ReferenceSet set;
    RenderConfig rc = cfg.render;
    rc.mode = RenderMode::SurfaceOnly;
    rc.t_near = cfg.t_near;
    rc.t_far = cfg.t_far;
    rc.seed = cfg.seed;
    for (int v = 0; v < cfg.fit.views; ++v) {
        Camera cam;
        if (v == 0) {
            cam = make_orbit_camera(cfg.pose.look_at, cfg.pose.radius, 0, 0, cfg.fov_deg, size,
                                    size);
        } else {
            CounterRng rng = CounterRng::derive(cfg.seed, rng_stream::kPose, std::uint64_t(v));
            cam = sample_pose(cfg.pose, rng, cfg.fov_deg, size, size);
        }
        set.cameras.push_back(cam);
        set.images.push_back(render_image(target, cam, rc).image);
    }
    return set;
}

}  // namespace

std::vector<Real> truncated_latent(int dim, std::uint64_t seed) {
    CounterRng rng = CounterRng::derive(seed, rng_stream::kLatent, 0);
    std::vector<Real> z(static_cast<std::size_t>(dim));
    for (Real& v : z) v = clamp(Real(rng.normal()), Real(-2), Real(2));
    return z;
}

FitResult run_fit(const SceneConfig& cfg, std::ostream* log) {
    if (cfg.field.kind != FieldConfig::Kind::Analytic)
        throw ConfigError("fit: the scene field must be analytic (it is the target)");
    const auto target = make_field(cfg.field, cfg.seed);
    const auto target_view = target->bind({});

    const int full_size = cfg.fit.image_size;
    const int half_size = std::max(2, full_size / 2);
    const ReferenceSet full = make_references(cfg, *target_view, full_size);
    const ReferenceSet half =
        cfg.fit.progressive ? make_references(cfg, *target_view, half_size) : ReferenceSet{};

    FitResult result;
    result.field = std::make_unique<FilmSirenField>(cfg.fit.net);
    result.field->initialize(cfg.seed);
    result.latent = truncated_latent(cfg.fit.net.latent_dim, cfg.seed);
    FilmSirenField& net = *result.field;
    const std::span<const Real> z = result.latent;

    Tape tape(net.parameters());
    SgdMomentum optimizer(cfg.fit.learning_rate, kMomentum);

    const auto effective_delta = [&](int n) {
        return cfg.fit.shrink ? schedule_delta(cfg.schedule, n) : cfg.schedule.delta_init;
    };

    // One training batch: builds the graph on the (cleared) tape, runs the
    // reverse sweep, and returns the objective. Gradients are left on the
    // tape for the caller.
    const auto run_batch = [&](int n, Real delta) -> Real {
        const bool half_stage = cfg.fit.progressive && n < cfg.fit.steps / 2;
        const ReferenceSet& refs = half_stage ? half : full;
        const int size = half_stage ? half_size : full_size;

        const auto view = net.bind(z);
        CounterRng rng = CounterRng::derive(cfg.seed, rng_stream::kFit, std::uint64_t(n));

        tape.clear();
        const Tape::Value conditioning = net.condition_on_tape(tape, z);
        const Tape::Value background = tape.constant3(cfg.render.background);

        std::vector<Tape::Value> colors;
        std::vector<Vec3> references;
        std::vector<Tape::Value> alphas;
        std::vector<Vec3> surface_points;
        colors.reserve(std::size_t(cfg.fit.batch_rays));
        references.reserve(colors.capacity());
        alphas.reserve(colors.capacity() * std::size_t(cfg.render.n_samples));

        for (int b = 0; b < cfg.fit.batch_rays; ++b) {
            const int v = int(rng.next_u64() % std::uint64_t(cfg.fit.views));
            const int px = int(rng.next_u64() % std::uint64_t(size));
            const int py = int(rng.next_u64() % std::uint64_t(size));
            const Ray ray = pixel_ray(refs.cameras[std::size_t(v)], px, py, cfg.t_near, cfg.t_far);

            // Sample placement depends on the current surface estimate but is
            // treated as a constant by the gradient.
            std::vector<Real> depths;
            const SurfaceHit hit = locate_surface(*view, ray, cfg.render.m_bins,
                                                  cfg.render.m_secant, cfg.render.tau);
            if (hit.found) {
                depths = shrink_window_samples(cfg.t_near, cfg.t_far, hit.t_s, delta,
                                               cfg.render.n_samples, rng);
                if (int(surface_points.size()) < kMaxNormalPoints)
                    surface_points.push_back(ray.at(hit.t_s));
            } else {
                depths = stratified_samples(cfg.t_near, cfg.t_far, cfg.render.n_samples, rng);
            }

            Tape::Value transmittance;  // starts implicitly at 1
            Tape::Value color_acc;
            for (Real t : depths) {
                const auto out = net.evaluate_on_tape(tape, conditioning, ray.at(t),
                                                      ray.direction);
                alphas.push_back(out.alpha);
                const Tape::Value w =
                    transmittance.valid() ? tape.mul(transmittance, out.alpha) : out.alpha;
                const Tape::Value contrib = tape.mul(out.color, w);
                color_acc = color_acc.valid() ? tape.add(color_acc, contrib) : contrib;
                const Tape::Value pass = tape.offset(tape.neg(out.alpha), Real(1));
                transmittance =
                    transmittance.valid() ? tape.mul(transmittance, pass) : pass;
            }
            color_acc = tape.add(color_acc, tape.mul(background, transmittance));
            colors.push_back(color_acc);
            references.push_back(refs.images[std::size_t(v)].at(px, py));
        }

        const Tape::Value reconstruction = reconstruction_loss_on_tape(tape, colors, references);
        Tape::Value normal_term = tape.constant(Real(0));
        if (!surface_points.empty() && cfg.loss.lambda_normal > 0) {
            const TapeAlphaFn alpha_fn = [&](Tape& t, const Vec3& p) {
                return net.evaluate_on_tape(t, conditioning, p, Vec3{0, 0, Real(-1)}).alpha;
            };
            CounterRng perturb = CounterRng::derive(cfg.seed, rng_stream::kPerturb,
                                                    std::uint64_t(n));
            normal_term =
                normal_regularizer_on_tape(tape, alpha_fn, surface_points, kNormalEps, perturb);
        }
        const Tape::Value opacity_term = opacity_regularizer_on_tape(tape, alphas);
        const Tape::Value total =
            total_loss_on_tape(tape, reconstruction, normal_term, opacity_term, cfg.loss, n);
        const Real objective = tape.value_of(total);
        tape.backward(total);
        return objective;
    };

    const auto metric_row = [&](int step, Real delta, Real objective) {
        const auto view = net.bind(z);
        RenderConfig rc = cfg.render;
        rc.mode = RenderMode::AlphaCumulative;
        rc.sampling = SamplingKind::Stratified;
        rc.normalize_weights = false;  // residual transmittance shows background
        rc.n_samples = kMetricSamples;
        rc.t_near = cfg.t_near;
        rc.t_far = cfg.t_far;
        rc.seed = cfg.seed;
        const ImageBuffer rendered = render_image(*view, full.cameras[0], rc).image;
        const auto concentration =
            concentration_report(*view, full.cameras[0], cfg.t_near, cfg.t_far, kMetricSamples,
                                 cfg.seed, cfg.render.threads);
        FitCheckpoint row;
        row.step = step;
        row.delta = delta;
        row.objective = objective;
        row.psnr = psnr(rendered, full.images[0]);
        row.sum_ti = concentration.image_mean;
        result.history.push_back(row);
        if (log) {
            nlohmann::ordered_json line{{"step", row.step},
                                        {"delta", row.delta},
                                        {"objective", row.objective},
                                        {"psnr", row.psnr},
                                        {"sum_ti", row.sum_ti}};
            *log << line.dump() << '\n';
        }
    };

    // Step-0 row: the batch graph is evaluated but the update is not applied.
    const Real initial = run_batch(0, effective_delta(0));
    metric_row(0, effective_delta(0), initial);

    int streak = 0;
    for (int n = 0; n < cfg.fit.steps; ++n) {
        const Real delta = effective_delta(n);
        // Step 0 reuses the gradients left on the tape by the row-0 batch.
        const Real objective = n == 0 ? initial : run_batch(n, delta);
        optimizer.step(net.parameters(), tape.param_gradients());

        streak = objective > 10 * initial ? streak + 1 : 0;
        if (streak >= kDivergenceStreak)
            throw DivergenceError("fit: objective stayed above 10x its initial value for " +
                                  std::to_string(kDivergenceStreak) + " consecutive steps (step " +
                                  std::to_string(n) + ")");

        result.steps_run = n + 1;
        if ((n + 1) % cfg.fit.checkpoint_every == 0 || n + 1 == cfg.fit.steps)
            metric_row(n + 1, delta, objective);
    }
    return result;
}

}  // namespace occufield
