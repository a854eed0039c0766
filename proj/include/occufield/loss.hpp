// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "occufield/autodiff.hpp"
#include "occufield/field.hpp"
#include "occufield/image.hpp"
#include "occufield/rng.hpp"

namespace occufield {

struct LossWeights {
    Real lambda_normal = Real(0.002);
    Real lambda_opac_init = Real(0.1);
    Real gamma_opac = Real(4.0e-5);
    Real lambda_opac_cap = Real(10);
    Real lambda_r1 = Real(10);
};

// min(λ_init · exp(n·γ), cap): non-decreasing, capped.
Real lambda_opacity(const LossWeights& w, std::int64_t step);

// f(u) = −log(1 + exp(−u)), evaluated without overflow on either tail.
Real gan_softplus(Real u);
Tape::Value gan_softplus(Tape& tape, Tape::Value u);

// Non-saturating objective: mean f(D(fake)) + mean (f(−D(real)) + λ·‖∇D‖²).
Real gan_objective(std::span<const Real> fake_scores, std::span<const Real> real_scores,
                   std::span<const Real> real_grad_sqnorms, Real lambda_r1);

using DiscriminatorFn = std::function<Tape::Value(Tape& tape, Tape::Value input)>;

// λ·‖∇_I D(I)‖² with the input gradient taken off a dedicated tape.
Real r1_penalty(const DiscriminatorFn& discriminator, std::span<const Real> input, Real lambda);

// Σ over surface points of ‖n(x) − n(x+ε)‖₂ with ε uniform on the
// eps_norm-sphere; degenerate-gradient points are skipped and counted.
Real normal_regularizer(const FieldView& view, std::span<const Vec3> surface_points, Real eps_norm,
                        CounterRng& rng, int* skipped = nullptr);

// Differentiable variant: normals from central differences of the on-tape
// alpha functor (h = 1e-4), so the penalty trains the field parameters.
using TapeAlphaFn = std::function<Tape::Value(Tape& tape, const Vec3& position)>;
Tape::Value normal_regularizer_on_tape(Tape& tape, const TapeAlphaFn& alpha_at,
                                       std::span<const Vec3> surface_points, Real eps_norm,
                                       CounterRng& rng, int* skipped = nullptr);

// Mean of log α + log(1−α) over alphas clamped to [1e-7, 1−1e-7]; peaks at
// α=0.5, so adding it with positive weight to a minimized total drives
// alphas toward {0,1}.
Real opacity_regularizer(std::span<const Real> alphas);
Tape::Value opacity_regularizer_on_tape(Tape& tape, std::span<const Tape::Value> alphas);

struct LossComponents {
    Real origin = 0;
    Real normal = 0;
    Real opacity = 0;
};

Real total_loss(const LossComponents& parts, const LossWeights& weights, std::int64_t step);
Tape::Value total_loss_on_tape(Tape& tape, Tape::Value origin, Tape::Value normal,
                               Tape::Value opacity, const LossWeights& weights,
                               std::int64_t step);

// Photometric MSE over RGB channels.
Real reconstruction_loss(const ImageBuffer& rendered, const ImageBuffer& reference);
Tape::Value reconstruction_loss_on_tape(Tape& tape, std::span<const Tape::Value> colors,
                                        std::span<const Vec3> references);

}  // namespace occufield
