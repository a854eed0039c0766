// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/loss.hpp"

#include <algorithm>
#include <cmath>

namespace occufield {

Real lambda_opacity(const LossWeights& w, std::int64_t step) {
    return std::min(w.lambda_opac_init * std::exp(w.gamma_opac * Real(step)), w.lambda_opac_cap);
}

Real gan_softplus(Real u) {
    // −log(1+exp(−u)) = u − log(1+exp(u)) on the negative tail.
    if (u >= 0) return -std::log1p(std::exp(-u));
    return u - std::log1p(std::exp(u));
}

Tape::Value gan_softplus(Tape& tape, Tape::Value u) {
    // softplus(−u) is itself computed via the stable branch on the tape.
    return tape.neg(tape.softplus(tape.neg(u)));
}

Real gan_objective(std::span<const Real> fake_scores, std::span<const Real> real_scores,
                   std::span<const Real> real_grad_sqnorms, Real lambda_r1) {
    if (real_scores.size() != real_grad_sqnorms.size())
        throw ConfigError("gan_objective: real scores and gradient norms must align");
    Real fake = 0;
    for (Real u : fake_scores) fake += gan_softplus(u);
    if (!fake_scores.empty()) fake /= Real(fake_scores.size());
    Real real = 0;
    for (std::size_t i = 0; i < real_scores.size(); ++i)
        real += gan_softplus(-real_scores[i]) + lambda_r1 * real_grad_sqnorms[i];
    if (!real_scores.empty()) real /= Real(real_scores.size());
    return fake + real;
}

Real r1_penalty(const DiscriminatorFn& discriminator, std::span<const Real> input, Real lambda) {
    Tape tape;
    Tape::Value leaf = tape.input(input);
    Tape::Value score = discriminator(tape, leaf);
    tape.backward(score);
    Real sq = 0;
    for (Real g : tape.adjoint_of(leaf)) sq += g * g;
    return lambda * sq;
}

Real normal_regularizer(const FieldView& view, std::span<const Vec3> surface_points, Real eps_norm,
                        CounterRng& rng, int* skipped) {
    Real acc = 0;
    int skip = 0;
    for (const Vec3& p : surface_points) {
        const Vec3 eps = rng.on_sphere() * eps_norm;
        const auto g0 = view.alpha_gradient(p);
        const auto g1 = view.alpha_gradient(p + eps);
        if (!g0 || !g1) {
            ++skip;
            continue;
        }
        acc += norm(normalized(*g0) - normalized(*g1));
    }
    if (skipped) *skipped = skip;
    return acc;
}

namespace {

// 3-vector from scalar tape values.
Tape::Value pack3(Tape& tape, Tape::Value x, Tape::Value y, Tape::Value z) {
    return tape.concat(tape.concat(x, y), z);
}

// Central-difference spatial gradient of the on-tape alpha functor.
Tape::Value fd_gradient(Tape& tape, const TapeAlphaFn& alpha_at, const Vec3& p, Real h) {
    const Real inv = Real(1) / (2 * h);
    Tape::Value comps[3];
    for (int j = 0; j < 3; ++j) {
        Vec3 hi = p, lo = p;
        hi[j] += h;
        lo[j] -= h;
        comps[j] = tape.scale(tape.sub(alpha_at(tape, hi), alpha_at(tape, lo)), inv);
    }
    return pack3(tape, comps[0], comps[1], comps[2]);
}

Tape::Value unit(Tape& tape, Tape::Value v) {
    // Tiny bias keeps sqrt differentiable when the argument vanishes.
    return tape.div(v, tape.sqrt(tape.offset(tape.dot(v, v), Real(1e-24))));
}

}  // namespace

Tape::Value normal_regularizer_on_tape(Tape& tape, const TapeAlphaFn& alpha_at,
                                       std::span<const Vec3> surface_points, Real eps_norm,
                                       CounterRng& rng, int* skipped) {
    const Real h = Real(1e-4);
    Tape::Value acc = tape.constant(Real(0));
    int skip = 0;
    for (const Vec3& p : surface_points) {
        const Vec3 eps = rng.on_sphere() * eps_norm;
        Tape::Value g0 = fd_gradient(tape, alpha_at, p, h);
        Tape::Value g1 = fd_gradient(tape, alpha_at, p + eps, h);
        // Skip degenerate points up front so the normalization cannot blow up.
        auto g0v = tape.values_of(g0);
        auto g1v = tape.values_of(g1);
        const Real n0 = std::sqrt(g0v[0] * g0v[0] + g0v[1] * g0v[1] + g0v[2] * g0v[2]);
        const Real n1 = std::sqrt(g1v[0] * g1v[0] + g1v[1] * g1v[1] + g1v[2] * g1v[2]);
        if (n0 < Real(1e-9) || n1 < Real(1e-9)) {
            ++skip;
            continue;
        }
        Tape::Value diff = tape.sub(unit(tape, g0), unit(tape, g1));
        acc = tape.add(acc, tape.sqrt(tape.offset(tape.dot(diff, diff), Real(1e-18))));
    }
    if (skipped) *skipped = skip;
    return acc;
}

Real opacity_regularizer(std::span<const Real> alphas) {
    if (alphas.empty()) return 0;
    Real acc = 0;
    for (Real a : alphas) {
        const Real c = clamp(a, Real(1e-7), Real(1) - Real(1e-7));
        acc += std::log(c) + std::log(Real(1) - c);
    }
    return acc / Real(alphas.size());
}

Tape::Value opacity_regularizer_on_tape(Tape& tape, std::span<const Tape::Value> alphas) {
    if (alphas.empty()) return tape.constant(Real(0));
    Tape::Value acc = tape.constant(Real(0));
    for (Tape::Value a : alphas) {
        Tape::Value c = tape.clamp(a, Real(1e-7), Real(1) - Real(1e-7));
        Tape::Value one_minus = tape.clamp(tape.offset(tape.neg(a), Real(1)), Real(1e-7),
                                           Real(1) - Real(1e-7));
        acc = tape.add(acc, tape.add(tape.log(c), tape.log(one_minus)));
    }
    return tape.scale(acc, Real(1) / Real(alphas.size()));
}

Real total_loss(const LossComponents& parts, const LossWeights& weights, std::int64_t step) {
    return parts.origin + weights.lambda_normal * parts.normal +
           lambda_opacity(weights, step) * parts.opacity;
}

Tape::Value total_loss_on_tape(Tape& tape, Tape::Value origin, Tape::Value normal,
                               Tape::Value opacity, const LossWeights& weights,
                               std::int64_t step) {
    return tape.add(origin, tape.add(tape.scale(normal, weights.lambda_normal),
                                     tape.scale(opacity, lambda_opacity(weights, step))));
}

Real reconstruction_loss(const ImageBuffer& rendered, const ImageBuffer& reference) {
    if (rendered.width != reference.width || rendered.height != reference.height)
        throw ConfigError("reconstruction_loss: image dimension mismatch");
    Real acc = 0;
    for (std::size_t i = 0; i < rendered.pixels.size(); ++i) {
        const Vec3 d = rendered.pixels[i] - reference.pixels[i];
        acc += dot(d, d);
    }
    return acc / (Real(rendered.pixels.size()) * Real(3));
}

Tape::Value reconstruction_loss_on_tape(Tape& tape, std::span<const Tape::Value> colors,
                                        std::span<const Vec3> references) {
    if (colors.size() != references.size())
        throw ConfigError("reconstruction_loss_on_tape: batch size mismatch");
    Tape::Value acc = tape.constant(Real(0));
    for (std::size_t i = 0; i < colors.size(); ++i) {
        Tape::Value d = tape.sub(colors[i], tape.constant3(references[i]));
        acc = tape.add(acc, tape.dot(d, d));
    }
    return tape.scale(acc, Real(1) / (Real(std::max<std::size_t>(colors.size(), 1)) * Real(3)));
}

}  // namespace occufield
