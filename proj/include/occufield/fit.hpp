// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "occufield/config.hpp"
#include "occufield/film_siren.hpp"

namespace occufield {

// One metric row. Rows are emitted at step 0, every checkpoint_every steps,
// and at the final step; "objective" is the training batch objective at that
// state, psnr / sum_ti are measured on the canonical front view.
struct FitCheckpoint {
    int step = 0;
    Real delta = 0;      // sampling window half-width in effect
    Real objective = 0;  // reconstruction + weighted regularizers
    Real psnr = 0;       // cumulative render vs the reference view
    Real sum_ti = 0;     // image-mean weighted depth variance
};

struct FitResult {
    std::unique_ptr<FilmSirenField> field;
    std::vector<Real> latent;  // fixed truncated latent used throughout
    std::vector<FitCheckpoint> history;
    int steps_run = 0;
};

// Standard-normal latent clamped to [-2, 2].
std::vector<Real> truncated_latent(int dim, std::uint64_t seed);

// Fits a fresh FiLM-SIREN learner to surface-only renders of the scene's
// analytic field: photometric MSE plus the normal and opacity regularizers,
// with the sampling window shrinking per step (cfg.fit.shrink = false freezes
// it at delta_init). Optional log gets one JSON line per metric row. Throws
// DivergenceError when the objective exceeds 10x its initial value for 100
// consecutive steps, ConfigError when the scene field is not analytic.
FitResult run_fit(const SceneConfig& cfg, std::ostream* log = nullptr);

}  // namespace occufield
