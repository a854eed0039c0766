// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>

#include "occufield/field.hpp"
#include "occufield/film_siren.hpp"
#include "occufield/loss.hpp"
#include "occufield/render.hpp"
#include "occufield/sampling.hpp"

namespace occufield {

struct FieldConfig {
    enum class Kind { Analytic, Neural };
    Kind kind = Kind::Analytic;
    // analytic
    std::vector<Shape> shapes{Shape{}};
    Real sharpness = Real(200);
    ColorSpec color;
    // neural
    std::string checkpoint;  // empty = fresh seed-initialized network
    FilmSirenConfig net;
};

struct FitConfig {
    int steps = 2000;
    int views = 24;
    Real learning_rate = Real(0.002);
    int batch_rays = 128;
    int image_size = 24;      // reference-view resolution
    int checkpoint_every = 200;
    bool progressive = false;  // quarter/half/full resolution stages
    bool shrink = true;        // false freezes the window at delta_init
    FilmSirenConfig net;       // the learner; the scene field is the target
};

// One JSON document drives every command. A "preset" key expands a named
// hyperparameter row (bfm / celeba / cats) before explicit keys override it;
// unknown keys anywhere are hard errors.
struct SceneConfig {
    FieldConfig field;
    Real t_near = Real(0.88), t_far = Real(1.12);
    Real fov_deg = Real(12);
    int width = 64, height = 64;
    PoseDistribution pose;
    RenderConfig render;
    ShrinkSchedule schedule{Real(0.12), Real(4.0e-5), Real(0.01)};
    LossWeights loss;
    FitConfig fit;
    std::uint64_t seed = 0;
};

SceneConfig load_scene_config(const std::string& path);
SceneConfig parse_scene_config(const std::string& json_text, const std::string& origin);
std::string serialize_scene_config(const SceneConfig& cfg);

std::unique_ptr<Field> make_field(const FieldConfig& cfg, std::uint64_t seed);

}  // namespace occufield
