// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "occufield/field.hpp"
#include "occufield/sampling.hpp"

namespace occufield {

struct SurfaceHit {
    bool found = false;
    Real t_s = 0;      // refined crossing depth
    int bin = -1;      // index k of the bracketing bin
    int queries_used = 0;
};

// Refinement stops early once alpha is within kTolAlpha of tau or the
// bracket is narrower than kTolT.
inline constexpr Real kTolAlpha = Real(1e-3);
inline constexpr Real kTolT = Real(1e-6);

// Scans m_bins+1 evenly spaced edge points of [t_near, t_far] for the first
// free-to-occupied transition alpha(x_k) < tau <= alpha(x_{k+1}), then runs
// m_secant secant iterations (with re-bracketing, falling back to bisection
// on degenerate proposals) inside that bin. queries_used counts every field
// evaluation: m_bins+1 edges plus one per secant iteration actually taken.
SurfaceHit locate_surface(const FieldView& view, const Ray& ray, int m_bins, int m_secant,
                          Real tau);

enum class QueryMode { Cumulative, SurfaceOnly, HierarchicalBaseline };

// Per-pixel query counts quoted for comparability: M+ms+N, M+ms+1, or 2N.
int query_budget(int m_bins, int m_secant, int n_samples, QueryMode mode);

}  // namespace occufield
