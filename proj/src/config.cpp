// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace occufield {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

void check_keys(const Json& obj, const char* ctx, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) fail("unknown key \"" + it.key() + "\" in " + ctx);
    }
}

const Json* child(const Json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void get_real(const Json& obj, const char* key, const char* ctx, Real& out) {
    if (const Json* j = child(obj, key)) {
        if (!j->is_number()) fail(std::string(ctx) + "." + key + " must be a number");
        out = j->get<Real>();
    }
}

void get_int(const Json& obj, const char* key, const char* ctx, int& out) {
    if (const Json* j = child(obj, key)) {
        if (!j->is_number_integer()) fail(std::string(ctx) + "." + key + " must be an integer");
        out = j->get<int>();
    }
}

void get_u64(const Json& obj, const char* key, const char* ctx, std::uint64_t& out) {
    if (const Json* j = child(obj, key)) {
        if (!j->is_number_unsigned() && !j->is_number_integer())
            fail(std::string(ctx) + "." + key + " must be a non-negative integer");
        out = j->get<std::uint64_t>();
    }
}

void get_bool(const Json& obj, const char* key, const char* ctx, bool& out) {
    if (const Json* j = child(obj, key)) {
        if (!j->is_boolean()) fail(std::string(ctx) + "." + key + " must be a boolean");
        out = j->get<bool>();
    }
}

void get_string(const Json& obj, const char* key, const char* ctx, std::string& out) {
    if (const Json* j = child(obj, key)) {
        if (!j->is_string()) fail(std::string(ctx) + "." + key + " must be a string");
        out = j->get<std::string>();
    }
}

Vec3 parse_vec3(const Json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
        !j[2].is_number())
        fail(ctx + " must be an array of 3 numbers");
    return {j[0].get<Real>(), j[1].get<Real>(), j[2].get<Real>()};
}

void get_vec3(const Json& obj, const char* key, const char* ctx, Vec3& out) {
    if (const Json* j = child(obj, key)) out = parse_vec3(*j, std::string(ctx) + "." + key);
}

template <class Enum>
struct EnumName {
    const char* name;
    Enum value;
};

template <class Enum, std::size_t N>
void get_enum(const Json& obj, const char* key, const char* ctx, const EnumName<Enum> (&names)[N],
              Enum& out) {
    if (const Json* j = child(obj, key)) {
        if (!j->is_string()) fail(std::string(ctx) + "." + key + " must be a string");
        const std::string s = j->get<std::string>();
        for (const auto& n : names) {
            if (s == n.name) {
                out = n.value;
                return;
            }
        }
        std::string options;
        for (const auto& n : names) options += std::string(options.empty() ? "" : ", ") + n.name;
        fail(std::string(ctx) + "." + key + ": \"" + s + "\" is not one of {" + options + "}");
    }
}

template <class Enum, std::size_t N>
const char* enum_name(Enum v, const EnumName<Enum> (&names)[N]) {
    for (const auto& n : names) {
        if (n.value == v) return n.name;
    }
    return names[0].name;
}

constexpr EnumName<Shape::Kind> kShapeNames[] = {
    {"sphere", Shape::Kind::Sphere}, {"box", Shape::Kind::Box}, {"torus", Shape::Kind::Torus}};
constexpr EnumName<ColorSpec::Mode> kColorNames[] = {{"constant", ColorSpec::Mode::Constant},
                                                     {"linear_ramp", ColorSpec::Mode::LinearRamp},
                                                     {"hash_palette", ColorSpec::Mode::HashPalette}};
constexpr EnumName<PoseDistribution::Kind> kPoseNames[] = {
    {"gaussian", PoseDistribution::Kind::Gaussian}, {"uniform", PoseDistribution::Kind::Uniform}};
constexpr EnumName<FieldConfig::Kind> kFieldNames[] = {{"analytic", FieldConfig::Kind::Analytic},
                                                       {"neural", FieldConfig::Kind::Neural}};
constexpr EnumName<RenderMode> kModeNames[] = {
    {"density_cumulative", RenderMode::DensityCumulative},
    {"alpha_cumulative", RenderMode::AlphaCumulative},
    {"surface_only", RenderMode::SurfaceOnly}};
constexpr EnumName<SamplingKind> kSamplingNames[] = {
    {"stratified", SamplingKind::Stratified},
    {"shrink_window", SamplingKind::ShrinkWindow},
    {"hierarchical", SamplingKind::Hierarchical}};
constexpr EnumName<MissPolicy> kMissNames[] = {{"background", MissPolicy::Background},
                                               {"full_volume", MissPolicy::FullVolume}};

// Dataset-specific hyperparameter rows; delta_init always follows the
// bounds as (t_far − t_near) / 2.
void apply_preset(SceneConfig& cfg, const std::string& name) {
    if (name == "bfm") {
        cfg.t_near = Real(0.88);
        cfg.t_far = Real(1.12);
        cfg.schedule.gamma = Real(4.0e-5);
        cfg.schedule.delta_min = Real(0.01);
        cfg.loss.lambda_normal = Real(0.002);
        cfg.loss.lambda_opac_init = Real(0.1);
        cfg.loss.gamma_opac = Real(4.0e-5);
        cfg.pose.kind = PoseDistribution::Kind::Gaussian;
        cfg.pose.sigma_v = Real(0.155);
        cfg.pose.sigma_h = Real(0.3);
    } else if (name == "celeba") {
        cfg.t_near = Real(0.88);
        cfg.t_far = Real(1.12);
        cfg.schedule.gamma = Real(1.0e-5);
        cfg.schedule.delta_min = Real(0.03);
        cfg.loss.lambda_normal = Real(0.05);
        cfg.loss.lambda_opac_init = Real(0.01);
        cfg.loss.gamma_opac = Real(0.5e-5);
        cfg.pose.kind = PoseDistribution::Kind::Gaussian;
        cfg.pose.sigma_v = Real(0.155);
        cfg.pose.sigma_h = Real(0.3);
    } else if (name == "cats") {
        cfg.t_near = Real(0.8);
        cfg.t_far = Real(1.2);
        cfg.schedule.gamma = Real(2.0e-5);
        cfg.schedule.delta_min = Real(0.1);
        cfg.loss.lambda_normal = Real(0.05);
        cfg.loss.lambda_opac_init = Real(0.02);
        cfg.loss.gamma_opac = Real(1.0e-5);
        cfg.pose.kind = PoseDistribution::Kind::Uniform;
        cfg.pose.sigma_v = Real(0.4);
        cfg.pose.sigma_h = Real(0.5);
    } else {
        fail("unknown preset \"" + name + "\" (expected bfm, celeba, or cats)");
    }
    cfg.fov_deg = Real(12);
}

Shape parse_shape(const Json& j, const std::string& ctx) {
    if (!j.is_object()) fail(ctx + " must be an object");
    check_keys(j, ctx.c_str(), {"kind", "center", "radius", "half_extents", "major_radius"});
    Shape s;
    get_enum(j, "kind", ctx.c_str(), kShapeNames, s.kind);
    get_vec3(j, "center", ctx.c_str(), s.center);
    get_real(j, "radius", ctx.c_str(), s.radius);
    get_vec3(j, "half_extents", ctx.c_str(), s.half_extents);
    get_real(j, "major_radius", ctx.c_str(), s.major_radius);
    if (!(s.radius > 0)) fail(ctx + ".radius must be positive");
    if (s.kind == Shape::Kind::Box &&
        !(s.half_extents.x > 0 && s.half_extents.y > 0 && s.half_extents.z > 0))
        fail(ctx + ".half_extents must be positive");
    if (s.kind == Shape::Kind::Torus && !(s.major_radius > 0))
        fail(ctx + ".major_radius must be positive");
    return s;
}

void parse_field(const Json& j, SceneConfig& cfg) {
    if (!j.is_object()) fail("field must be an object");
    FieldConfig& f = cfg.field;
    get_enum(j, "kind", "field", kFieldNames, f.kind);
    if (f.kind == FieldConfig::Kind::Analytic) {
        check_keys(j, "field", {"kind", "shapes", "sharpness", "color"});
        if (const Json* shapes = child(j, "shapes")) {
            if (!shapes->is_array() || shapes->empty() || shapes->size() > 2)
                fail("field.shapes must hold one shape or a union of two");
            f.shapes.clear();
            for (std::size_t i = 0; i < shapes->size(); ++i)
                f.shapes.push_back(
                    parse_shape((*shapes)[i], "field.shapes[" + std::to_string(i) + "]"));
        }
        get_real(j, "sharpness", "field", f.sharpness);
        if (!(f.sharpness > 0)) fail("field.sharpness must be positive");
        if (const Json* color = child(j, "color")) {
            if (!color->is_object()) fail("field.color must be an object");
            check_keys(*color, "field.color", {"mode", "base", "ramp", "cell_size"});
            get_enum(*color, "mode", "field.color", kColorNames, f.color.mode);
            get_vec3(*color, "base", "field.color", f.color.base);
            if (const Json* ramp = child(*color, "ramp")) {
                if (!ramp->is_array() || ramp->size() != 3)
                    fail("field.color.ramp must be an array of 3 gradient rows");
                for (int c = 0; c < 3; ++c)
                    f.color.ramp[c] =
                        parse_vec3((*ramp)[std::size_t(c)], "field.color.ramp[" + std::to_string(c) + "]");
            }
            get_real(*color, "cell_size", "field.color", f.color.cell_size);
            if (!(f.color.cell_size > 0)) fail("field.color.cell_size must be positive");
        }
    } else {
        check_keys(j, "field",
                   {"kind", "checkpoint", "latent_dim", "layers", "width", "omega0",
                    "alpha_bias_init"});
        get_string(j, "checkpoint", "field", f.checkpoint);
        get_int(j, "latent_dim", "field", f.net.latent_dim);
        get_int(j, "layers", "field", f.net.layers);
        get_int(j, "width", "field", f.net.width);
        get_real(j, "omega0", "field", f.net.omega0);
        get_real(j, "alpha_bias_init", "field", f.net.alpha_bias_init);
        if (f.net.latent_dim < 1) fail("field.latent_dim must be >= 1");
        if (f.net.layers < 1) fail("field.layers must be >= 1");
        if (f.net.width < 1 || f.net.width > 256) fail("field.width must be in [1, 256]");
        if (!(f.net.omega0 > 0)) fail("field.omega0 must be positive");
    }
}

void validate(const SceneConfig& cfg) {
    if (!(cfg.t_near < cfg.t_far)) fail("bounds: t_near must be below t_far");
    if (!(cfg.fov_deg > 0 && cfg.fov_deg < 180)) fail("camera.fov_deg must lie in (0, 180)");
    if (cfg.width < 1 || cfg.height < 1) fail("camera resolution must be at least 1x1");
    if (!(cfg.pose.sigma_v >= 0 && cfg.pose.sigma_h >= 0)) fail("pose spreads must be >= 0");
    if (!(cfg.pose.radius > 0)) fail("pose.radius must be positive");
    if (cfg.render.n_samples < 1) fail("render.n_samples must be >= 1");
    if (cfg.render.m_bins < 2) fail("render.m_bins must be >= 2");
    if (cfg.render.m_secant < 0) fail("render.m_secant must be >= 0");
    if (!(cfg.render.tau > 0 && cfg.render.tau < 1)) fail("render.tau must lie in (0, 1)");
    if (cfg.render.n_coarse < 1) fail("render.n_coarse must be >= 1");
    if (!(cfg.render.window_delta > 0)) fail("render.window_delta must be positive");
    if (!(cfg.schedule.delta_min > 0)) fail("schedule.delta_min must be positive");
    if (!(cfg.schedule.delta_init >= cfg.schedule.delta_min))
        fail("schedule.delta_init must be >= delta_min");
    if (!(cfg.schedule.gamma >= 0)) fail("schedule.gamma must be >= 0");
    if (cfg.loss.lambda_normal < 0 || cfg.loss.lambda_opac_init < 0 || cfg.loss.lambda_r1 < 0)
        fail("loss coefficients must be >= 0");
    if (cfg.fit.steps < 0) fail("fit.steps must be >= 0");
    if (cfg.fit.views < 1) fail("fit.views must be >= 1");
    if (!(cfg.fit.learning_rate > 0)) fail("fit.learning_rate must be positive");
    if (cfg.fit.batch_rays < 1) fail("fit.batch_rays must be >= 1");
    if (cfg.fit.image_size < 2) fail("fit.image_size must be >= 2");
    if (cfg.fit.checkpoint_every < 1) fail("fit.checkpoint_every must be >= 1");
    if (cfg.fit.net.latent_dim < 1) fail("fit.net.latent_dim must be >= 1");
    if (cfg.fit.net.layers < 1) fail("fit.net.layers must be >= 1");
    if (cfg.fit.net.width < 1 || cfg.fit.net.width > 256) fail("fit.net.width must be in [1, 256]");
    if (!(cfg.fit.net.omega0 > 0)) fail("fit.net.omega0 must be positive");
}

}  // namespace

SceneConfig parse_scene_config(const std::string& json_text, const std::string& origin) {
    Json root;
    try {
        root = Json::parse(json_text);
    } catch (const Json::parse_error& e) {
        fail(origin + ": " + e.what());
    }
    if (!root.is_object()) fail(origin + ": top level must be an object");

    SceneConfig cfg;
    std::string preset;
    get_string(root, "preset", "root", preset);
    if (!preset.empty()) apply_preset(cfg, preset);

    check_keys(root, "top level",
               {"preset", "seed", "bounds", "camera", "pose", "field", "render", "schedule",
                "loss", "fit"});
    get_u64(root, "seed", "root", cfg.seed);

    if (const Json* b = child(root, "bounds")) {
        check_keys(*b, "bounds", {"t_near", "t_far"});
        get_real(*b, "t_near", "bounds", cfg.t_near);
        get_real(*b, "t_far", "bounds", cfg.t_far);
    }
    // Default window spans half the (possibly preset/overridden) volume.
    cfg.schedule.delta_init = (cfg.t_far - cfg.t_near) / 2;

    if (const Json* c = child(root, "camera")) {
        check_keys(*c, "camera", {"fov_deg", "width", "height"});
        get_real(*c, "fov_deg", "camera", cfg.fov_deg);
        get_int(*c, "width", "camera", cfg.width);
        get_int(*c, "height", "camera", cfg.height);
    }
    if (const Json* p = child(root, "pose")) {
        check_keys(*p, "pose", {"kind", "sigma_v", "sigma_h", "radius", "look_at"});
        get_enum(*p, "kind", "pose", kPoseNames, cfg.pose.kind);
        get_real(*p, "sigma_v", "pose", cfg.pose.sigma_v);
        get_real(*p, "sigma_h", "pose", cfg.pose.sigma_h);
        get_real(*p, "radius", "pose", cfg.pose.radius);
        get_vec3(*p, "look_at", "pose", cfg.pose.look_at);
    }
    if (const Json* f = child(root, "field")) parse_field(*f, cfg);
    if (const Json* r = child(root, "render")) {
        check_keys(*r, "render",
                   {"n_samples", "m_bins", "m_secant", "tau", "mode", "sampling", "miss_policy",
                    "normalize_weights", "background", "window_delta", "n_coarse"});
        get_int(*r, "n_samples", "render", cfg.render.n_samples);
        get_int(*r, "m_bins", "render", cfg.render.m_bins);
        get_int(*r, "m_secant", "render", cfg.render.m_secant);
        get_real(*r, "tau", "render", cfg.render.tau);
        get_enum(*r, "mode", "render", kModeNames, cfg.render.mode);
        get_enum(*r, "sampling", "render", kSamplingNames, cfg.render.sampling);
        get_enum(*r, "miss_policy", "render", kMissNames, cfg.render.miss_policy);
        get_bool(*r, "normalize_weights", "render", cfg.render.normalize_weights);
        get_vec3(*r, "background", "render", cfg.render.background);
        get_real(*r, "window_delta", "render", cfg.render.window_delta);
        get_int(*r, "n_coarse", "render", cfg.render.n_coarse);
    }
    if (const Json* s = child(root, "schedule")) {
        check_keys(*s, "schedule", {"delta_init", "gamma", "delta_min"});
        get_real(*s, "delta_init", "schedule", cfg.schedule.delta_init);
        get_real(*s, "gamma", "schedule", cfg.schedule.gamma);
        get_real(*s, "delta_min", "schedule", cfg.schedule.delta_min);
    }
    if (const Json* l = child(root, "loss")) {
        check_keys(*l, "loss",
                   {"lambda_normal", "lambda_opac_init", "gamma_opac", "lambda_opac_cap",
                    "lambda_r1"});
        get_real(*l, "lambda_normal", "loss", cfg.loss.lambda_normal);
        get_real(*l, "lambda_opac_init", "loss", cfg.loss.lambda_opac_init);
        get_real(*l, "gamma_opac", "loss", cfg.loss.gamma_opac);
        get_real(*l, "lambda_opac_cap", "loss", cfg.loss.lambda_opac_cap);
        get_real(*l, "lambda_r1", "loss", cfg.loss.lambda_r1);
    }
    if (const Json* f = child(root, "fit")) {
        check_keys(*f, "fit",
                   {"steps", "views", "learning_rate", "batch_rays", "image_size",
                    "checkpoint_every", "progressive", "shrink", "net"});
        get_int(*f, "steps", "fit", cfg.fit.steps);
        get_int(*f, "views", "fit", cfg.fit.views);
        get_real(*f, "learning_rate", "fit", cfg.fit.learning_rate);
        get_int(*f, "batch_rays", "fit", cfg.fit.batch_rays);
        get_int(*f, "image_size", "fit", cfg.fit.image_size);
        get_int(*f, "checkpoint_every", "fit", cfg.fit.checkpoint_every);
        get_bool(*f, "progressive", "fit", cfg.fit.progressive);
        get_bool(*f, "shrink", "fit", cfg.fit.shrink);
        if (const Json* n = child(*f, "net")) {
            check_keys(*n, "fit.net",
                       {"latent_dim", "layers", "width", "omega0", "alpha_bias_init"});
            get_int(*n, "latent_dim", "fit.net", cfg.fit.net.latent_dim);
            get_int(*n, "layers", "fit.net", cfg.fit.net.layers);
            get_int(*n, "width", "fit.net", cfg.fit.net.width);
            get_real(*n, "omega0", "fit.net", cfg.fit.net.omega0);
            get_real(*n, "alpha_bias_init", "fit.net", cfg.fit.net.alpha_bias_init);
        }
    }

    // The render config carries its own copies of shared scene values.
    cfg.render.t_near = cfg.t_near;
    cfg.render.t_far = cfg.t_far;
    cfg.render.seed = cfg.seed;

    validate(cfg);
    return cfg;
}

SceneConfig load_scene_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scene_config(ss.str(), path);
}

std::string serialize_scene_config(const SceneConfig& cfg) {
    Json root;
    root["seed"] = cfg.seed;
    root["bounds"] = {{"t_near", cfg.t_near}, {"t_far", cfg.t_far}};
    root["camera"] = {{"fov_deg", cfg.fov_deg}, {"width", cfg.width}, {"height", cfg.height}};
    root["pose"] = {{"kind", enum_name(cfg.pose.kind, kPoseNames)},
                    {"sigma_v", cfg.pose.sigma_v},
                    {"sigma_h", cfg.pose.sigma_h},
                    {"radius", cfg.pose.radius},
                    {"look_at", {cfg.pose.look_at.x, cfg.pose.look_at.y, cfg.pose.look_at.z}}};
    Json field;
    field["kind"] = enum_name(cfg.field.kind, kFieldNames);
    if (cfg.field.kind == FieldConfig::Kind::Analytic) {
        Json shapes = Json::array();
        for (const Shape& s : cfg.field.shapes) {
            shapes.push_back(
                {{"kind", enum_name(s.kind, kShapeNames)},
                 {"center", {s.center.x, s.center.y, s.center.z}},
                 {"radius", s.radius},
                 {"half_extents", {s.half_extents.x, s.half_extents.y, s.half_extents.z}},
                 {"major_radius", s.major_radius}});
        }
        field["shapes"] = shapes;
        field["sharpness"] = cfg.field.sharpness;
        Json ramp = Json::array();
        for (int c = 0; c < 3; ++c)
            ramp.push_back(
                {cfg.field.color.ramp[c].x, cfg.field.color.ramp[c].y, cfg.field.color.ramp[c].z});
        field["color"] = {
            {"mode", enum_name(cfg.field.color.mode, kColorNames)},
            {"base", {cfg.field.color.base.x, cfg.field.color.base.y, cfg.field.color.base.z}},
            {"ramp", ramp},
            {"cell_size", cfg.field.color.cell_size}};
    } else {
        field["checkpoint"] = cfg.field.checkpoint;
        field["latent_dim"] = cfg.field.net.latent_dim;
        field["layers"] = cfg.field.net.layers;
        field["width"] = cfg.field.net.width;
        field["omega0"] = cfg.field.net.omega0;
        field["alpha_bias_init"] = cfg.field.net.alpha_bias_init;
    }
    root["field"] = field;
    root["render"] = {{"n_samples", cfg.render.n_samples},
                      {"m_bins", cfg.render.m_bins},
                      {"m_secant", cfg.render.m_secant},
                      {"tau", cfg.render.tau},
                      {"mode", enum_name(cfg.render.mode, kModeNames)},
                      {"sampling", enum_name(cfg.render.sampling, kSamplingNames)},
                      {"miss_policy", enum_name(cfg.render.miss_policy, kMissNames)},
                      {"normalize_weights", cfg.render.normalize_weights},
                      {"background",
                       {cfg.render.background.x, cfg.render.background.y, cfg.render.background.z}},
                      {"window_delta", cfg.render.window_delta},
                      {"n_coarse", cfg.render.n_coarse}};
    root["schedule"] = {{"delta_init", cfg.schedule.delta_init},
                        {"gamma", cfg.schedule.gamma},
                        {"delta_min", cfg.schedule.delta_min}};
    root["loss"] = {{"lambda_normal", cfg.loss.lambda_normal},
                    {"lambda_opac_init", cfg.loss.lambda_opac_init},
                    {"gamma_opac", cfg.loss.gamma_opac},
                    {"lambda_opac_cap", cfg.loss.lambda_opac_cap},
                    {"lambda_r1", cfg.loss.lambda_r1}};
    root["fit"] = {{"steps", cfg.fit.steps},
                   {"views", cfg.fit.views},
                   {"learning_rate", cfg.fit.learning_rate},
                   {"batch_rays", cfg.fit.batch_rays},
                   {"image_size", cfg.fit.image_size},
                   {"checkpoint_every", cfg.fit.checkpoint_every},
                   {"progressive", cfg.fit.progressive},
                   {"shrink", cfg.fit.shrink},
                   {"net",
                    {{"latent_dim", cfg.fit.net.latent_dim},
                     {"layers", cfg.fit.net.layers},
                     {"width", cfg.fit.net.width},
                     {"omega0", cfg.fit.net.omega0},
                     {"alpha_bias_init", cfg.fit.net.alpha_bias_init}}}};
    return root.dump(2) + "\n";
}

std::unique_ptr<Field> make_field(const FieldConfig& cfg, std::uint64_t seed) {
    if (cfg.kind == FieldConfig::Kind::Analytic)
        return std::make_unique<AnalyticField>(cfg.shapes, cfg.sharpness, cfg.color);
    if (!cfg.checkpoint.empty())
        return std::make_unique<FilmSirenField>(FilmSirenField::load(cfg.checkpoint));
    auto field = std::make_unique<FilmSirenField>(cfg.net);
    field->initialize(seed);
    return field;
}

}  // namespace occufield
