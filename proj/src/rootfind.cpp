// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/rootfind.hpp"

#include <cmath>
#include <vector>

namespace occufield {

SurfaceHit locate_surface(const FieldView& view, const Ray& ray, int m_bins, int m_secant,
                          Real tau) {
    if (m_bins < 2) throw ConfigError("locate_surface: need at least 2 bins");
    if (m_secant < 0) throw ConfigError("locate_surface: secant count must be >= 0");
    if (!(tau > 0 && tau < 1)) throw ConfigError("locate_surface: tau must lie in (0,1)");

    SurfaceHit hit;
    const Real width = (ray.t_far - ray.t_near) / Real(m_bins);

    // All m_bins+1 edges are evaluated (batch scan), then the first
    // free-to-occupied pair is selected.
    std::vector<Real> edge_t(std::size_t(m_bins) + 1), edge_a(std::size_t(m_bins) + 1);
    for (int i = 0; i <= m_bins; ++i) {
        edge_t[std::size_t(i)] = i == m_bins ? ray.t_far : ray.t_near + Real(i) * width;
        edge_a[std::size_t(i)] = view.alpha(ray.at(edge_t[std::size_t(i)]));
    }
    hit.queries_used = m_bins + 1;
    int k = -1;
    for (int i = 0; i < m_bins; ++i) {
        if (edge_a[std::size_t(i)] < tau && tau <= edge_a[std::size_t(i) + 1]) {
            k = i;
            break;
        }
    }
    if (k < 0) return hit;  // no crossing along this ray

    Real a = edge_t[std::size_t(k)], b = edge_t[std::size_t(k) + 1];
    Real fa = edge_a[std::size_t(k)] - tau, fb = edge_a[std::size_t(k) + 1] - tau;

    for (int i = 0; i < m_secant; ++i) {
        if (b - a <= kTolT) break;
        if (std::abs(fa) <= kTolAlpha || std::abs(fb) <= kTolAlpha) break;
        Real t;
        const Real den = fb - fa;
        if (std::abs(den) < Real(1e-12)) {
            t = (a + b) / 2;
        } else {
            t = a - fa * (b - a) / den;
            if (!(t > a && t < b)) t = (a + b) / 2;
        }
        const Real f = view.alpha(ray.at(t)) - tau;
        ++hit.queries_used;
        if (f < 0) {
            a = t;
            fa = f;
        } else {
            b = t;
            fb = f;
        }
    }

    const Real den = fb - fa;
    hit.found = true;
    hit.bin = k;
    hit.t_s = std::abs(den) < Real(1e-12) ? (a + b) / 2 : a - fa * (b - a) / den;
    return hit;
}

int query_budget(int m_bins, int m_secant, int n_samples, QueryMode mode) {
    switch (mode) {
        case QueryMode::Cumulative:
            return m_bins + m_secant + n_samples;
        case QueryMode::SurfaceOnly:
            return m_bins + m_secant + 1;
        case QueryMode::HierarchicalBaseline:
            return 2 * n_samples;
    }
    throw ConfigError("query_budget: unknown mode");
}

}  // namespace occufield
