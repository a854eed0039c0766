// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "occufield/core.hpp"

namespace occufield {

struct FieldQuery {
    Vec3 position;
    Vec3 view_direction;  // unit norm
    std::span<const Real> latent;
};

struct FieldOutput {
    Real alpha = 0;  // occupancy probability in [0, 1]
    Vec3 color;      // channels in [0, 1]
};

// Latent-bound evaluation view. Pure and read-only, safe to share across
// rendering workers; must not outlive the field it was bound from.
class FieldView {
public:
    virtual ~FieldView() = default;
    virtual FieldOutput evaluate(const Vec3& position, const Vec3& view_direction) const = 0;
    // Occupancy only; lets root-finding skip color work.
    virtual Real alpha(const Vec3& position) const = 0;
    // ∇x alpha; nullopt when the gradient norm falls below 1e-12 and the
    // caller has to pick a fallback.
    virtual std::optional<Vec3> alpha_gradient(const Vec3& position) const = 0;
};

class Field {
public:
    virtual ~Field() = default;

    virtual int latent_dim() const = 0;

    // Binds a latent code, doing any per-latent precomputation once. Throws
    // ConfigError on a latent dimension mismatch.
    virtual std::unique_ptr<FieldView> bind(std::span<const Real> latent) const = 0;

    FieldOutput evaluate(const FieldQuery& q) const {
        return bind(q.latent)->evaluate(q.position, q.view_direction);
    }

    std::optional<Vec3> alpha_gradient(const Vec3& position, std::span<const Real> latent) const {
        return bind(latent)->alpha_gradient(position);
    }

    // Upper bound on the per-channel Lipschitz constant of color w.r.t.
    // position, when one is certifiable. Feeds the surface-rendering
    // equivalence bound.
    virtual std::optional<Real> color_lipschitz_bound(std::span<const Real> latent) const {
        (void)latent;
        return std::nullopt;
    }
};

// Unit surface normal (normalized ∇x alpha); nullopt on degenerate gradients.
inline std::optional<Vec3> surface_normal(const FieldView& view, const Vec3& position) {
    auto g = view.alpha_gradient(position);
    if (!g) return std::nullopt;
    return normalized(*g);
}

// ---------------------------------------------------------------------------
// Analytic ground-truth fields: alpha(x) = logistic(k * signed_inside_distance)
// so alpha == 0.5 exactly on the shape surface and alpha is (k/4)-Lipschitz.

struct Shape {
    enum class Kind { Sphere, Box, Torus };
    Kind kind = Kind::Sphere;
    Vec3 center;
    Real radius = Real(0.1);      // sphere radius / torus tube radius
    Vec3 half_extents{Real(0.1), Real(0.1), Real(0.1)};  // box
    Real major_radius = Real(0.2);                        // torus ring radius (xz plane)

    // Positive inside, zero on the surface, negative outside.
    Real signed_inside_distance(const Vec3& p) const;
    Vec3 signed_inside_distance_gradient(const Vec3& p) const;
};

struct ColorSpec {
    enum class Mode { Constant, LinearRamp, HashPalette };
    Mode mode = Mode::Constant;
    Vec3 base{Real(0.8), Real(0.35), Real(0.25)};
    // LinearRamp: channel c = clamp(base[c] + dot(ramp[c], x), 0, 1)
    Vec3 ramp[3] = {};
    Real cell_size = Real(0.05);  // HashPalette lattice pitch

    Vec3 color_at(const Vec3& p) const;
    // Per-channel Lipschitz constant; nullopt for the discontinuous palette.
    std::optional<Real> lipschitz() const;
};

class AnalyticField : public Field {
public:
    // One shape, or the union of two.
    AnalyticField(std::vector<Shape> shapes, Real sharpness, ColorSpec color);

    int latent_dim() const override { return 0; }
    std::unique_ptr<FieldView> bind(std::span<const Real> latent) const override;
    std::optional<Real> color_lipschitz_bound(std::span<const Real> latent) const override;

    Real sharpness() const { return sharpness_; }
    const std::vector<Shape>& shapes() const { return shapes_; }
    const ColorSpec& color_spec() const { return color_; }

    // Union = componentwise max of inside distances.
    Real signed_inside_distance(const Vec3& p) const;

    Real alpha_at(const Vec3& p) const { return logistic(sharpness_ * signed_inside_distance(p)); }
    std::optional<Vec3> alpha_gradient_at(const Vec3& p) const;

private:
    std::vector<Shape> shapes_;
    Real sharpness_;
    ColorSpec color_;
};

}  // namespace occufield
