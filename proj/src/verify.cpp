// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "occufield/film_siren.hpp"
#include "occufield/fit.hpp"
#include "occufield/loss.hpp"
#include "occufield/rootfind.hpp"

namespace occufield {

std::optional<Real> ray_sphere_entry(const Ray& ray, const Vec3& center, Real radius) {
    const Vec3 oc = ray.origin - center;
    const Real b = dot(oc, ray.direction);
    const Real c0 = dot(oc, oc) - radius * radius;
    const Real disc = b * b - c0;
    if (disc < 0) return std::nullopt;
    Real t = -b - std::sqrt(disc);                  // entry
    if (t < ray.t_near) t = -b + std::sqrt(disc);   // segment starts inside: exit
    if (t < ray.t_near || t > ray.t_far) return std::nullopt;
    return t;
}

std::optional<Real> ray_box_entry(const Ray& ray, const Vec3& center, const Vec3& half_extents) {
    Real t_enter = -kInfinity, t_exit = kInfinity;
    for (int a = 0; a < 3; ++a) {
        const Real o = ray.origin[a] - center[a];
        const Real d = ray.direction[a];
        const Real h = half_extents[a];
        if (std::abs(d) < Real(1e-15)) {
            if (std::abs(o) > h) return std::nullopt;
            continue;
        }
        const Real t1 = (-h - o) / d;
        const Real t2 = (h - o) / d;
        t_enter = std::max(t_enter, std::min(t1, t2));
        t_exit = std::min(t_exit, std::max(t1, t2));
    }
    if (t_enter > t_exit) return std::nullopt;
    Real t = t_enter;
    if (t < ray.t_near) t = t_exit;  // segment starts inside: exit
    if (t < ray.t_near || t > ray.t_far) return std::nullopt;
    return t;
}

namespace {

constexpr Real kVolumeNear = Real(0.88);
constexpr Real kVolumeFar = Real(1.12);

// Index offsets keep the suites' kVerify streams disjoint from each other
// and from the per-ray streams of equivalence_report.
constexpr std::uint64_t kRootfindIndexBase = std::uint64_t(1) << 20;
constexpr std::uint64_t kGradientIndexBase = std::uint64_t(2) << 20;

// Alpha affine in z, crossing tau away from every bin edge so the secant
// step is genuinely exercised.
class RampView final : public FieldView {
public:
    RampView(Real slope, Real z0) : slope_(slope), z0_(z0) {}

    FieldOutput evaluate(const Vec3& p, const Vec3&) const override {
        return {alpha(p), Vec3{Real(0.5), Real(0.5), Real(0.5)}};
    }
    Real alpha(const Vec3& p) const override {
        return clamp(Real(0.5) + slope_ * (p.z - z0_), Real(0), Real(1));
    }
    std::optional<Vec3> alpha_gradient(const Vec3&) const override {
        return Vec3{0, 0, slope_};
    }

private:
    Real slope_, z0_;
};

// |cos| between the ray direction and the surface normal where the ray first
// crosses the shape boundary; small values mean a grazing entry.
Real entry_incidence(const Shape& shape, const Ray& ray, Real t_entry) {
    if (shape.kind == Shape::Kind::Sphere) {
        const Vec3 n = normalized(ray.at(t_entry) - shape.center);
        return std::abs(dot(ray.direction, n));
    }
    // Box: the entry face belongs to the axis whose slab is crossed last.
    int axis = 0;
    Real latest = -kInfinity;
    for (int a = 0; a < 3; ++a) {
        const Real d = ray.direction[a];
        if (std::abs(d) < Real(1e-15)) continue;
        const Real o = ray.origin[a] - shape.center[a];
        const Real h = shape.half_extents[a];
        const Real t_slab = std::min((-h - o) / d, (h - o) / d);
        if (t_slab > latest) {
            latest = t_slab;
            axis = a;
        }
    }
    return std::abs(ray.direction[axis]);
}

}  // namespace

RootfindReport run_rootfind_suite(std::uint64_t seed, int n_rays, int m_bins, int m_secant,
                                  Real tol) {
    RootfindReport rep;
    rep.rays = n_rays;
    const ColorSpec gray{ColorSpec::Mode::Constant, Vec3{Real(0.5), Real(0.5), Real(0.5)}};

    for (int i = 0; i < n_rays; ++i) {
        CounterRng rng =
            CounterRng::derive(seed, rng_stream::kVerify, kRootfindIndexBase + std::uint64_t(i));

        Shape shape;
        shape.center = Vec3{Real(rng.uniform(-0.02, 0.02)), Real(rng.uniform(-0.02, 0.02)),
                            Real(rng.uniform(-0.02, 0.02))};
        Real inner;  // radius of the aim ball kept inside the shape
        if (i % 2 == 0) {
            shape.kind = Shape::Kind::Sphere;
            shape.radius = Real(rng.uniform(0.03, 0.08));
            inner = shape.radius;
        } else {
            shape.kind = Shape::Kind::Box;
            shape.half_extents = Vec3{Real(rng.uniform(0.03, 0.08)), Real(rng.uniform(0.03, 0.08)),
                                      Real(rng.uniform(0.03, 0.08))};
            inner = std::min({shape.half_extents.x, shape.half_extents.y, shape.half_extents.z});
        }

        // Eye on the unit sphere, aimed at a point well inside the shape so
        // the ray always enters front-on enough to bracket the crossing. The
        // window is wider than the canonical volume: a box corner facing the
        // eye can pull the entry depth down to ~0.84. Grazing entries are
        // re-drawn: a slope 1/incidence stretch of the logistic band is more
        // than the fixed secant budget can localize to tolerance.
        Ray ray;
        std::optional<Real> oracle;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const Vec3 eye = rng.on_sphere();
            const Vec3 aim = shape.center + rng.on_sphere() * (inner * Real(0.5) *
                                                               Real(std::cbrt(rng.uniform())));
            ray.origin = eye;
            ray.direction = normalized(aim - eye);
            ray.t_near = Real(0.8);
            ray.t_far = Real(1.2);
            oracle = shape.kind == Shape::Kind::Sphere
                         ? ray_sphere_entry(ray, shape.center, shape.radius)
                         : ray_box_entry(ray, shape.center, shape.half_extents);
            if (!oracle || entry_incidence(shape, ray, *oracle) >= Real(0.35)) break;
        }

        const AnalyticField field({shape}, Real(200), gray);
        const auto view = field.bind({});
        const SurfaceHit hit = locate_surface(*view, ray, m_bins, m_secant, Real(0.5));

        if (!oracle || !hit.found) {
            ++rep.misses;
            if (rep.detail.empty()) {
                std::ostringstream ss;
                ss << "ray " << i << ": oracle " << (oracle ? "hit" : "miss") << ", locate "
                   << (hit.found ? "hit" : "miss");
                rep.detail = ss.str();
            }
            continue;
        }
        ++rep.hits;
        const Real err = std::abs(hit.t_s - *oracle);
        if (err > rep.max_abs_error) rep.max_abs_error = err;
        if (err >= tol && rep.detail.empty()) {
            std::ostringstream ss;
            ss << "ray " << i << ": |t_s - entry| = " << err;
            rep.detail = ss.str();
        }
    }

    // Affine ramp, crossing off the bin grid: one secant step must be exact.
    const RampView ramp(Real(2), Real(1.003));
    Ray axis;
    axis.origin = Vec3{0, 0, 0};
    axis.direction = Vec3{0, 0, 1};
    axis.t_near = kVolumeNear;
    axis.t_far = kVolumeFar;
    const SurfaceHit ramp_hit = locate_surface(ramp, axis, m_bins, /*m_secant=*/1, Real(0.5));
    rep.ramp_error = ramp_hit.found ? std::abs(ramp_hit.t_s - Real(1.003)) : kInfinity;

    rep.pass = rep.misses == 0 && rep.max_abs_error < tol && rep.ramp_error <= Real(1e-12);
    if (!rep.pass && rep.detail.empty()) {
        std::ostringstream ss;
        ss << "max error " << rep.max_abs_error << ", ramp error " << rep.ramp_error;
        rep.detail = ss.str();
    }
    return rep;
}

EquivalenceSuiteReport run_equivalence_suite(std::uint64_t seed, int grid,
                                             std::vector<Real> deltas) {
    EquivalenceSuiteReport rep;
    std::sort(deltas.begin(), deltas.end(), std::greater<Real>());

    FilmSirenConfig cfg;
    FilmSirenField field{cfg};
    field.initialize(seed);
    const std::vector<Real> latent = truncated_latent(field.config().latent_dim, seed);

    const Camera cam = make_orbit_camera(Vec3{}, Real(1), Real(0), Real(0), Real(12), grid, grid);
    const std::vector<Ray> rays = generate_rays(cam, kVolumeNear, kVolumeFar);
    rep.rays = int(rays.size());

    // A random net's occupancy logits share a nearly common offset across this
    // narrow view cone, which can leave every ray entirely above (or below)
    // tau. Re-initialize with the median logit folded into the alpha bias so
    // the field straddles tau and actually presents a surface. Same seed, so
    // every weight is unchanged; only the bias moves.
    {
        const auto view = field.bind(latent);
        std::vector<Real> logits;
        logits.reserve(rays.size());
        for (const Ray& ray : rays) {
            const Vec3 mid = ray.origin + ray.direction * ((ray.t_near + ray.t_far) / Real(2));
            const Real a = clamp(view->alpha(mid), Real(1e-12), Real(1) - Real(1e-12));
            logits.push_back(std::log(a / (Real(1) - a)));
        }
        std::nth_element(logits.begin(), logits.begin() + logits.size() / 2, logits.end());
        cfg.alpha_bias_init = -logits[logits.size() / 2];
        field = FilmSirenField{cfg};
        field.initialize(seed);
    }

    rep.rows = equivalence_report(field, latent, rays, deltas, /*n_samples=*/12, /*m_bins=*/12,
                                  /*m_secant=*/3, /*tau=*/Real(0.5), seed);
    bool ok = true;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const EquivalenceRow& row = rep.rows[i];
        if (row.violated) {
            ok = false;
            if (rep.detail.empty()) {
                std::ostringstream ss;
                ss << "delta " << row.delta_min << ": observed " << row.observed_max_diff
                   << " exceeds bound " << row.bound;
                rep.detail = ss.str();
            }
        }
        if (i > 0 && row.observed_max_diff > rep.rows[i - 1].observed_max_diff + Real(1e-12)) {
            rep.monotone = false;
            if (rep.detail.empty()) {
                std::ostringstream ss;
                ss << "observed max rose from " << rep.rows[i - 1].observed_max_diff << " to "
                   << row.observed_max_diff << " as the window shrank";
                rep.detail = ss.str();
            }
        }
    }
    const bool vacuous = rep.rows.empty() || rep.rows.front().hit_rays == 0;
    if (vacuous && rep.detail.empty()) rep.detail = "no ray hit a surface";
    rep.pass = ok && rep.monotone && !vacuous;
    return rep;
}

namespace {

struct ProbeRecorder {
    GradientSuiteReport& rep;
    Real tol;

    void operator()(const char* quantity, Real analytic, Real numeric) {
        const Real denom = std::max({std::abs(analytic), std::abs(numeric), Real(1e-5)});
        const Real rel = std::abs(analytic - numeric) / denom;
        ++rep.probes;
        if (rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst = {quantity, analytic, numeric, rel};
        }
        if (rel >= tol && rep.detail.empty()) {
            std::ostringstream ss;
            ss << quantity << ": analytic " << analytic << " vs numeric " << numeric << " (rel "
               << rel << ")";
            rep.detail = ss.str();
        }
    }
};

}  // namespace

GradientSuiteReport run_gradient_suite(std::uint64_t seed, int min_probes, Real tol) {
    GradientSuiteReport rep;
    ProbeRecorder record{rep, tol};

    FilmSirenConfig cfg;
    cfg.latent_dim = 4;
    cfg.layers = 2;
    cfg.width = 16;
    FilmSirenField net(cfg);
    net.initialize(seed);
    const std::vector<Real> latent = truncated_latent(cfg.latent_dim, seed);
    const std::span<Real> params = net.parameters();
    const std::size_t n_params = params.size();
    Tape tape(params);

    const Real h_param = Real(1e-5);
    // The sinusoidal backbone's third position-derivatives scale like omega0
    // cubed, so the position step needs to sit well below the param step's
    // truncation point before roundoff takes over near 1e-7.
    const Real h_pos = Real(1e-5);

    // Plain forward passes double as the finite-difference oracle for the
    // field outputs; the loss graphs difference their own tape values.
    const auto plain_alpha = [&](const Vec3& p) {
        const auto m = net.run_mapping_network(latent);
        return net.alpha_at(p, m.frequencies, m.phases);
    };
    const auto plain_color = [&](const Vec3& p, const Vec3& d, int ch) {
        const auto m = net.run_mapping_network(latent);
        return net.evaluate_at(p, d, m.frequencies, m.phases).color[ch];
    };

    const auto fd_param = [&](const std::function<Real()>& f, std::size_t j) {
        const Real saved = params[j];
        params[j] = saved + h_param;
        const Real hi = f();
        params[j] = saved - h_param;
        const Real lo = f();
        params[j] = saved;
        return (hi - lo) / (2 * h_param);
    };

    // Rounds of mixed probes until the quota is met. Each round draws its own
    // stream so the probe set is deterministic.
    for (std::uint64_t round = 0; rep.probes < min_probes; ++round) {
        CounterRng rng = CounterRng::derive(seed, rng_stream::kVerify, kGradientIndexBase + round);
        const Vec3 pos{Real(rng.uniform(-1, 1)), Real(rng.uniform(-1, 1)),
                       Real(rng.uniform(-1, 1))};
        const Vec3 dir = rng.on_sphere();
        const std::size_t j = rng.next_u64() % n_params;
        const int axis = int(rng.next_u64() % 3);
        const int ch = int(rng.next_u64() % 3);

        // Field outputs w.r.t. a parameter.
        tape.clear();
        auto cond = net.condition_on_tape(tape, latent);
        auto out = net.evaluate_on_tape(tape, cond, pos, dir);
        tape.backward(out.alpha);
        record("alpha/param", tape.param_gradients()[j],
               fd_param([&] { return plain_alpha(pos); }, j));

        tape.clear();
        cond = net.condition_on_tape(tape, latent);
        out = net.evaluate_on_tape(tape, cond, pos, dir);
        tape.backward(tape.slice(out.color, ch, 1));
        record("color/param", tape.param_gradients()[j],
               fd_param([&] { return plain_color(pos, dir, ch); }, j));

        // Field outputs w.r.t. the probe position.
        tape.clear();
        cond = net.condition_on_tape(tape, latent);
        out = net.evaluate_on_tape(tape, cond, pos, dir);
        tape.backward(out.alpha);
        {
            Vec3 hi = pos, lo = pos;
            hi[axis] += h_pos;
            lo[axis] -= h_pos;
            record("alpha/position", tape.input_gradient3(out.position)[axis],
                   (plain_alpha(hi) - plain_alpha(lo)) / (2 * h_pos));
        }

        tape.clear();
        cond = net.condition_on_tape(tape, latent);
        out = net.evaluate_on_tape(tape, cond, pos, dir);
        tape.backward(tape.slice(out.color, ch, 1));
        {
            Vec3 hi = pos, lo = pos;
            hi[axis] += h_pos;
            lo[axis] -= h_pos;
            record("color/position", tape.input_gradient3(out.position)[axis],
                   (plain_color(hi, dir, ch) - plain_color(lo, dir, ch)) / (2 * h_pos));
        }

        // Opacity regularizer over a few samples, w.r.t. a parameter.
        const Vec3 p2{Real(rng.uniform(-1, 1)), Real(rng.uniform(-1, 1)),
                      Real(rng.uniform(-1, 1))};
        const auto opacity_value = [&]() {
            tape.clear();
            const auto c = net.condition_on_tape(tape, latent);
            std::vector<Tape::Value> alphas;
            for (const Vec3& p : {pos, p2}) {
                alphas.push_back(net.evaluate_on_tape(tape, c, p, dir).alpha);
                alphas.push_back(
                    net.evaluate_on_tape(tape, c, p + Vec3{Real(0.1), 0, 0}, dir).alpha);
            }
            return opacity_regularizer_on_tape(tape, alphas);
        };
        {
            const Tape::Value v = opacity_value();
            tape.backward(v);
            // Read before the finite-difference side rebuilds the tape.
            const Real analytic = tape.param_gradients()[j];
            record("opacity/param", analytic,
                   fd_param([&] { return tape.value_of(opacity_value()); }, j));
        }

        // Normal regularizer (its own finite-difference normals), w.r.t. a
        // parameter. The perturbation stream is re-derived per evaluation so
        // every finite-difference side sees identical epsilons.
        const Vec3 points[2] = {pos, p2};
        const auto normal_value = [&]() {
            tape.clear();
            const auto c = net.condition_on_tape(tape, latent);
            const TapeAlphaFn fn = [&](Tape& t, const Vec3& p) {
                return net.evaluate_on_tape(t, c, p, dir).alpha;
            };
            CounterRng perturb =
                CounterRng::derive(seed, rng_stream::kPerturb, kGradientIndexBase + round);
            return normal_regularizer_on_tape(tape, fn, points, Real(0.01), perturb);
        };
        {
            const Tape::Value v = normal_value();
            tape.backward(v);
            // The objective's internal position differences amplify roundoff,
            // so central differences cannot resolve near-zero derivatives.
            // Probe a parameter where the gradient carries signal: the
            // strongest of a random candidate set.
            const std::span<const Real> grads = tape.param_gradients();
            std::size_t jn = j;
            for (int c = 0; c < 64; ++c) {
                const std::size_t cand = rng.next_u64() % n_params;
                if (std::abs(grads[cand]) > std::abs(grads[jn])) jn = cand;
            }
            const Real analytic = grads[jn];
            record("normal/param", analytic,
                   fd_param([&] { return tape.value_of(normal_value()); }, jn));
        }

        // Reconstruction + weighted regularizers (the fit objective),
        // w.r.t. a parameter.
        const Vec3 ref{Real(0.2), Real(0.6), Real(0.4)};
        const auto total_value = [&]() {
            tape.clear();
            const auto c = net.condition_on_tape(tape, latent);
            Tape::Value transmittance, color_acc;
            std::vector<Tape::Value> alphas;
            for (Real t : {Real(0.95), Real(1.0), Real(1.05)}) {
                const auto s = net.evaluate_on_tape(tape, c, pos * Real(0.2) + Vec3{0, 0, t}, dir);
                alphas.push_back(s.alpha);
                const Tape::Value w =
                    transmittance.valid() ? tape.mul(transmittance, s.alpha) : s.alpha;
                const Tape::Value contrib = tape.mul(s.color, w);
                color_acc = color_acc.valid() ? tape.add(color_acc, contrib) : contrib;
                const Tape::Value pass = tape.offset(tape.neg(s.alpha), Real(1));
                transmittance = transmittance.valid() ? tape.mul(transmittance, pass) : pass;
            }
            const Tape::Value colors[1] = {color_acc};
            const Vec3 refs[1] = {ref};
            const Tape::Value recon = reconstruction_loss_on_tape(tape, colors, refs);
            const Tape::Value opac = opacity_regularizer_on_tape(tape, alphas);
            return total_loss_on_tape(tape, recon, tape.constant(Real(0)), opac, LossWeights{},
                                      /*step=*/5);
        };
        {
            const Tape::Value v = total_value();
            tape.backward(v);
            const Real analytic = tape.param_gradients()[j];
            record("total/param", analytic,
                   fd_param([&] { return tape.value_of(total_value()); }, j));
        }

        // GAN softplus w.r.t. its score input.
        {
            const Real u = Real(rng.uniform(-5, 5));
            tape.clear();
            const Real us[1] = {u};
            const Tape::Value leaf = tape.input(us);
            tape.backward(gan_softplus(tape, leaf));
            const Real analytic = tape.adjoint_of(leaf)[0];
            const Real numeric =
                (gan_softplus(u + h_param) - gan_softplus(u - h_param)) / (2 * h_param);
            record("gan_softplus/input", analytic, numeric);
        }
    }

    rep.pass = rep.max_rel_error < tol;
    return rep;
}

}  // namespace occufield
