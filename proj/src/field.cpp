// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace occufield {
namespace {

inline Real sgn(Real v) { return v > 0 ? Real(1) : (v < 0 ? Real(-1) : Real(0)); }

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

Real Shape::signed_inside_distance(const Vec3& p) const {
    const Vec3 d = p - center;
    switch (kind) {
        case Kind::Sphere:
            return radius - norm(d);
        case Kind::Box: {
            const Vec3 q{std::abs(d.x) - half_extents.x, std::abs(d.y) - half_extents.y,
                         std::abs(d.z) - half_extents.z};
            const Vec3 m{std::max(q.x, Real(0)), std::max(q.y, Real(0)), std::max(q.z, Real(0))};
            const Real outside = norm(m) + std::min(std::max(q.x, std::max(q.y, q.z)), Real(0));
            return -outside;
        }
        case Kind::Torus: {
            const Real rho = std::sqrt(d.x * d.x + d.z * d.z);
            const Real qx = rho - major_radius;
            return radius - std::sqrt(qx * qx + d.y * d.y);
        }
    }
    return Real(0);
}

Vec3 Shape::signed_inside_distance_gradient(const Vec3& p) const {
    const Vec3 d = p - center;
    switch (kind) {
        case Kind::Sphere: {
            const Real n = norm(d);
            if (n < Real(1e-12)) return Vec3{};
            return d * (Real(-1) / n);
        }
        case Kind::Box: {
            const Vec3 q{std::abs(d.x) - half_extents.x, std::abs(d.y) - half_extents.y,
                         std::abs(d.z) - half_extents.z};
            const Vec3 m{std::max(q.x, Real(0)), std::max(q.y, Real(0)), std::max(q.z, Real(0))};
            const Real len = norm(m);
            if (len > Real(0)) {
                return Vec3{-sgn(d.x) * m.x / len, -sgn(d.y) * m.y / len, -sgn(d.z) * m.z / len};
            }
            // Interior: distance decreases fastest toward the nearest face.
            if (q.x >= q.y && q.x >= q.z) return Vec3{-sgn(d.x), 0, 0};
            if (q.y >= q.z) return Vec3{0, -sgn(d.y), 0};
            return Vec3{0, 0, -sgn(d.z)};
        }
        case Kind::Torus: {
            const Real rho = std::sqrt(d.x * d.x + d.z * d.z);
            const Real qx = rho - major_radius;
            const Real len = std::sqrt(qx * qx + d.y * d.y);
            if (len < Real(1e-12) || rho < Real(1e-12)) return Vec3{};
            const Real s = qx / (len * rho);
            return Vec3{-d.x * s, -d.y / len, -d.z * s};
        }
    }
    return Vec3{};
}

Vec3 ColorSpec::color_at(const Vec3& p) const {
    switch (mode) {
        case Mode::Constant:
            return base;
        case Mode::LinearRamp:
            return Vec3{clamp(base.x + dot(ramp[0], p), Real(0), Real(1)),
                        clamp(base.y + dot(ramp[1], p), Real(0), Real(1)),
                        clamp(base.z + dot(ramp[2], p), Real(0), Real(1))};
        case Mode::HashPalette: {
            const auto cell = [&](Real v) {
                return static_cast<std::int64_t>(std::floor(v / cell_size));
            };
            std::uint64_t h = mix64(static_cast<std::uint64_t>(cell(p.x)));
            h = mix64(h ^ static_cast<std::uint64_t>(cell(p.y)));
            h = mix64(h ^ static_cast<std::uint64_t>(cell(p.z)));
            const Real inv = Real(1.0 / 2097151.0);
            return Vec3{Real(h & 0x1fffff) * inv, Real((h >> 21) & 0x1fffff) * inv,
                        Real((h >> 42) & 0x1fffff) * inv};
        }
    }
    return base;
}

std::optional<Real> ColorSpec::lipschitz() const {
    switch (mode) {
        case Mode::Constant:
            return Real(0);
        case Mode::LinearRamp:
            return std::max({norm(ramp[0]), norm(ramp[1]), norm(ramp[2])});
        case Mode::HashPalette:
            return std::nullopt;  // discontinuous across cell boundaries
    }
    return std::nullopt;
}

namespace {

class AnalyticView : public FieldView {
public:
    explicit AnalyticView(const AnalyticField& f) : field_(f) {}

    FieldOutput evaluate(const Vec3& position, const Vec3&) const override {
        return {field_.alpha_at(position), field_.color_spec().color_at(position)};
    }

    Real alpha(const Vec3& position) const override { return field_.alpha_at(position); }

    std::optional<Vec3> alpha_gradient(const Vec3& position) const override {
        return field_.alpha_gradient_at(position);
    }

private:
    const AnalyticField& field_;
};

}  // namespace

AnalyticField::AnalyticField(std::vector<Shape> shapes, Real sharpness, ColorSpec color)
    : shapes_(std::move(shapes)), sharpness_(sharpness), color_(color) {
    if (shapes_.empty()) throw ConfigError("analytic field needs at least one shape");
    if (!(sharpness_ > 0)) throw ConfigError("analytic field sharpness must be positive");
}

std::unique_ptr<FieldView> AnalyticField::bind(std::span<const Real> latent) const {
    if (!latent.empty()) throw ConfigError("analytic field takes no latent code");
    return std::make_unique<AnalyticView>(*this);
}

std::optional<Real> AnalyticField::color_lipschitz_bound(std::span<const Real>) const {
    return color_.lipschitz();
}

Real AnalyticField::signed_inside_distance(const Vec3& p) const {
    Real best = shapes_[0].signed_inside_distance(p);
    for (std::size_t i = 1; i < shapes_.size(); ++i)
        best = std::max(best, shapes_[i].signed_inside_distance(p));
    return best;
}

std::optional<Vec3> AnalyticField::alpha_gradient_at(const Vec3& p) const {
    std::size_t arg = 0;
    Real best = shapes_[0].signed_inside_distance(p);
    for (std::size_t i = 1; i < shapes_.size(); ++i) {
        const Real d = shapes_[i].signed_inside_distance(p);
        if (d > best) {
            best = d;
            arg = i;
        }
    }
    const Real s = logistic(sharpness_ * best);
    const Vec3 g = shapes_[arg].signed_inside_distance_gradient(p) * (sharpness_ * s * (Real(1) - s));
    if (norm(g) < Real(1e-12)) return std::nullopt;
    return g;
}

}  // namespace occufield
