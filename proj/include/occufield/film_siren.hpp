// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "occufield/autodiff.hpp"
#include "occufield/field.hpp"
#include "occufield/rng.hpp"

namespace occufield {

struct FilmSirenConfig {
    int latent_dim = 16;  // Dz
    int layers = 4;       // L backbone FiLM layers
    int width = 64;       // W units per backbone layer
    Real omega0 = Real(30);
    Real alpha_bias_init = Real(0);
};

// Latent-conditioned sinusoidal field. A mapping MLP (three hidden layers of
// 256 units, LeakyReLU 0.2) turns the latent into per-layer frequency and
// phase vectors; the backbone applies h <- sin(freq ⊙ (W h + b) + phase); an
// alpha head (affine + logistic) reads occupancy off the final features and a
// color head (affine + logistic) additionally consumes the view direction.
class FilmSirenField : public Field {
public:
    explicit FilmSirenField(FilmSirenConfig cfg);

    static std::size_t param_count(const FilmSirenConfig& cfg);

    // Sinusoidal-network weight init: backbone first layer U[-1/fan_in,
    // 1/fan_in], deeper layers U[±√(6/fan_in)/ω0]; mapping layers He-uniform
    // with the output bias seeded so initial frequencies equal ω0.
    void initialize(std::uint64_t seed);

    const FilmSirenConfig& config() const { return cfg_; }
    std::span<Real> parameters() { return params_; }
    std::span<const Real> parameters() const { return params_; }

    int latent_dim() const override { return cfg_.latent_dim; }
    std::unique_ptr<FieldView> bind(std::span<const Real> latent) const override;
    std::optional<Real> color_lipschitz_bound(std::span<const Real> latent) const override;

    struct MappingOutput {
        std::vector<Real> frequencies;  // layer-major, layers * width
        std::vector<Real> phases;       // layer-major, layers * width
    };
    MappingOutput run_mapping_network(std::span<const Real> latent) const;

    // Training-path graph construction. The conditioning value (mapping
    // output, size 2·L·W) is built once per step and shared by every sample.
    Tape::Value condition_on_tape(Tape& tape, std::span<const Real> latent) const;
    struct TapeOutput {
        Tape::Value alpha;     // scalar
        Tape::Value color;     // 3-vector
        Tape::Value position;  // input leaf, for spatial gradients
    };
    TapeOutput evaluate_on_tape(Tape& tape, Tape::Value conditioning, const Vec3& position,
                                const Vec3& view_direction) const;

    // Binary checkpoint: "OFNF" magic, version, Dz, layer count, then the raw
    // little-endian 64-bit parameter block. Round-trips bit-exactly.
    void save(const std::string& path) const;
    static FilmSirenField load(const std::string& path);

    // Plain (tape-free) evaluation used by the bound view.
    Real alpha_at(const Vec3& p, std::span<const Real> freq, std::span<const Real> phase) const;
    FieldOutput evaluate_at(const Vec3& p, const Vec3& d, std::span<const Real> freq,
                            std::span<const Real> phase) const;
    std::optional<Vec3> alpha_gradient_at(const Vec3& p, std::span<const Real> freq,
                                          std::span<const Real> phase) const;

private:
    struct Affine {
        int w_off = 0, b_off = 0, rows = 0, cols = 0;
    };

    void forward_backbone(const Vec3& p, std::span<const Real> freq, std::span<const Real> phase,
                          Real* features) const;

    FilmSirenConfig cfg_;
    std::vector<Affine> mapping_;   // 4 layers, hidden width 256
    std::vector<Affine> backbone_;  // cfg_.layers layers
    Affine alpha_head_;
    Affine color_head_;
    std::vector<Real> params_;
};

}  // namespace occufield
