// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
//
// occufield <render|fit|schedule|budget|extract|verify> — scene rendering,
// the toy shrink-fit experiment, schedule/budget inspection, mesh export and
// the verification suites, all driven by one JSON scene config.
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "occufield/config.hpp"
#include "occufield/extract.hpp"
#include "occufield/fit.hpp"
#include "occufield/metrics.hpp"
#include "occufield/render.hpp"
#include "occufield/verify.hpp"

namespace {

using namespace occufield;
using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericError = 3;
constexpr int kExitDivergence = 4;

RenderMode parse_mode(const std::string& s) {
    if (s == "density_cumulative") return RenderMode::DensityCumulative;
    if (s == "alpha_cumulative") return RenderMode::AlphaCumulative;
    if (s == "surface_only") return RenderMode::SurfaceOnly;
    throw ConfigError("render: unknown mode \"" + s + "\"");
}

const char* mode_name(RenderMode m) {
    switch (m) {
        case RenderMode::DensityCumulative: return "density_cumulative";
        case RenderMode::AlphaCumulative: return "alpha_cumulative";
        case RenderMode::SurfaceOnly: return "surface_only";
    }
    return "alpha_cumulative";
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_image(const std::string& path, const ImageBuffer& img) {
    if (ends_with(path, ".png"))
        write_png(path, img);
    else
        write_ppm(path, img);
}

struct RenderArgs {
    std::string config, out = "render.ppm", mode, diagnostics, reference, normals;
    std::uint64_t latent_seed = 0;
    bool latent_seed_set = false;
    int threads = -1;
};

int cmd_render(const RenderArgs& a) {
    SceneConfig cfg = load_scene_config(a.config);
    if (!a.mode.empty()) cfg.render.mode = parse_mode(a.mode);
    if (a.threads >= 0) cfg.render.threads = a.threads;

    const auto field = make_field(cfg.field, cfg.seed);
    const std::vector<Real> latent =
        truncated_latent(field->latent_dim(), a.latent_seed_set ? a.latent_seed : cfg.seed);
    const auto view = field->bind(latent);
    const Camera cam = make_orbit_camera(cfg.pose.look_at, cfg.pose.radius, 0, 0, cfg.fov_deg,
                                         cfg.width, cfg.height);

    const ImageRenderResult result = render_image(*view, cam, cfg.render);
    write_image(a.out, result.image);
    if (!a.normals.empty()) write_image(a.normals, render_normal_map(*view, cam, cfg.render));

    const auto concentration = concentration_report(*view, cam, cfg.t_near, cfg.t_far,
                                                    /*n_points=*/36, cfg.seed,
                                                    cfg.render.threads);
    Json diag{{"mode", mode_name(cfg.render.mode)},
              {"out", a.out},
              {"mean_queries_per_pixel", result.mean_queries_per_pixel},
              {"sum_ti", concentration.image_mean}};
    if (!a.reference.empty()) diag["psnr"] = psnr(result.image, read_ppm(a.reference));
    if (a.diagnostics.empty()) {
        std::cout << diag.dump() << '\n';
    } else {
        std::ofstream out(a.diagnostics);
        if (!out) throw ConfigError("render: cannot open diagnostics file " + a.diagnostics);
        out << diag.dump() << '\n';
    }
    return kExitOk;
}

struct FitArgs {
    std::string config, log, out = "checkpoint.ofnf";
    int steps = -1, views = -1, threads = -1;
    bool no_shrink = false;
};

int cmd_fit(const FitArgs& a) {
    SceneConfig cfg = load_scene_config(a.config);
    if (a.steps >= 0) cfg.fit.steps = a.steps;
    if (a.views > 0) cfg.fit.views = a.views;
    if (a.threads >= 0) cfg.render.threads = a.threads;
    if (a.no_shrink) cfg.fit.shrink = false;

    std::ofstream log_file;
    std::ostream* log = &std::cout;
    if (!a.log.empty()) {
        log_file.open(a.log);
        if (!log_file) throw ConfigError("fit: cannot open log file " + a.log);
        log = &log_file;
    }

    const FitResult result = run_fit(cfg, log);
    result.field->save(a.out);

    const FitCheckpoint& last = result.history.back();
    Json summary{{"checkpoint", a.out},
                 {"steps", result.steps_run},
                 {"shrink", cfg.fit.shrink},
                 {"final_delta", last.delta},
                 {"final_objective", last.objective},
                 {"final_psnr", last.psnr},
                 {"final_sum_ti", last.sum_ti}};
    std::cout << summary.dump() << '\n';
    return kExitOk;
}

struct ScheduleArgs {
    std::string config, out;
    std::int64_t max_step = 100000;
    std::int64_t stride = 0;  // 0: max/50
};

int cmd_schedule(const ScheduleArgs& a) {
    const SceneConfig cfg = load_scene_config(a.config);
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw ConfigError("schedule: cannot open output file " + a.out);
        os = &file;
    }
    const std::int64_t stride =
        a.stride > 0 ? a.stride : std::max<std::int64_t>(1, a.max_step / 50);
    char line[64];
    *os << "step,delta\n";
    for (std::int64_t n = 0;; n += stride) {
        if (n > a.max_step) n = a.max_step;  // always emit the final row
        std::snprintf(line, sizeof line, "%lld,%.17g\n", static_cast<long long>(n),
                      double(schedule_delta(cfg.schedule, n)));
        *os << line;
        if (n == a.max_step) break;
    }
    return kExitOk;
}

struct BudgetArgs {
    int m_bins = 12, m_secant = 3, n_samples = 12;
};

int cmd_budget(const BudgetArgs& a) {
    std::cout << "cumulative " << query_budget(a.m_bins, a.m_secant, a.n_samples, QueryMode::Cumulative)
              << '\n'
              << "surface_only "
              << query_budget(a.m_bins, a.m_secant, a.n_samples, QueryMode::SurfaceOnly) << '\n'
              << "hierarchical "
              << query_budget(a.m_bins, a.m_secant, a.n_samples, QueryMode::HierarchicalBaseline)
              << '\n';
    return kExitOk;
}

struct ExtractArgs {
    std::string config, out = "mesh.obj";
    int resolution = 64;
    std::uint64_t latent_seed = 0;
    bool latent_seed_set = false;
    int threads = -1;
};

int cmd_extract(const ExtractArgs& a) {
    const SceneConfig cfg = load_scene_config(a.config);
    const auto field = make_field(cfg.field, cfg.seed);
    const std::vector<Real> latent =
        truncated_latent(field->latent_dim(), a.latent_seed_set ? a.latent_seed : cfg.seed);
    const auto view = field->bind(latent);

    // Mesh domain: a cube on the look-at point matching the ray volume depth.
    const Real half = (cfg.t_far - cfg.t_near) / 2;
    const Vec3 lo = cfg.pose.look_at - Vec3{half, half, half};
    const Vec3 hi = cfg.pose.look_at + Vec3{half, half, half};
    const IsoMesh mesh = marching_cubes(*view, lo, hi, a.resolution, cfg.render.tau,
                                        a.threads >= 0 ? a.threads : cfg.render.threads);
    write_obj(a.out, mesh);
    if (mesh.vertices.empty())
        std::cerr << "warning: no iso-surface crossing inside the bounds; wrote an empty mesh\n";

    Json info{{"out", a.out},
              {"resolution", a.resolution},
              {"vertices", mesh.vertices.size()},
              {"triangles", mesh.triangles.size()},
              {"euler_characteristic", euler_characteristic(mesh)}};
    std::cout << info.dump() << '\n';
    return kExitOk;
}

struct VerifyArgs {
    std::string config, suite;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_verify(const VerifyArgs& a) {
    std::uint64_t seed = a.seed;
    if (!a.config.empty() && !a.seed_set) seed = load_scene_config(a.config).seed;

    bool all_pass = true;
    const bool all = a.suite == "all";

    if (all || a.suite == "rootfind") {
        const RootfindReport r = run_rootfind_suite(seed);
        Json line{{"suite", "rootfind"}, {"pass", r.pass},          {"rays", r.rays},
                  {"hits", r.hits},      {"misses", r.misses},      {"max_abs_error", r.max_abs_error},
                  {"ramp_error", r.ramp_error}};
        if (!r.pass) line["detail"] = r.detail;
        std::cout << line.dump() << '\n';
        all_pass = all_pass && r.pass;
    }
    if (all || a.suite == "equivalence") {
        const EquivalenceSuiteReport r = run_equivalence_suite(seed);
        Json rows = Json::array();
        for (const EquivalenceRow& row : r.rows)
            rows.push_back({{"delta", row.delta_min},
                            {"observed_max_diff", row.observed_max_diff},
                            {"bound", row.bound},
                            {"hit_rays", row.hit_rays},
                            {"violated", row.violated}});
        Json line{{"suite", "equivalence"},
                  {"pass", r.pass},
                  {"rays", r.rays},
                  {"monotone", r.monotone},
                  {"rows", rows}};
        if (!r.pass) line["detail"] = r.detail;
        std::cout << line.dump() << '\n';
        all_pass = all_pass && r.pass;
    }
    if (all || a.suite == "gradients") {
        const GradientSuiteReport r = run_gradient_suite(seed);
        Json line{{"suite", "gradients"},
                  {"pass", r.pass},
                  {"probes", r.probes},
                  {"max_rel_error", r.max_rel_error}};
        if (!r.pass) {
            line["detail"] = r.detail;
            line["worst"] = {{"quantity", r.worst.quantity},
                             {"analytic", r.worst.analytic},
                             {"numeric", r.worst.numeric},
                             {"rel_error", r.worst.rel_error}};
        }
        std::cout << line.dump() << '\n';
        all_pass = all_pass && r.pass;
    }
    return all_pass ? kExitOk : kExitVerifyFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generative occupancy field rendering toolkit"};
    app.require_subcommand(1);

    RenderArgs render_args;
    CLI::App* render = app.add_subcommand("render", "render the scene's canonical view");
    render->add_option("--config", render_args.config, "scene config (JSON)")->required();
    render->add_option("--mode", render_args.mode, "rendering mode override")
        ->check(CLI::IsMember({"density_cumulative", "alpha_cumulative", "surface_only"}));
    render->add_option("--out", render_args.out, "image path (.ppm or .png)");
    render->add_option("--normals", render_args.normals, "also write a surface-normal map");
    render->add_option("--diagnostics", render_args.diagnostics, "diagnostics JSON path (default stdout)");
    render->add_option("--reference", render_args.reference, "PPM reference for the PSNR diagnostic");
    auto* ls = render->add_option("--latent-seed", render_args.latent_seed,
                                  "latent draw seed (default: scene seed)");
    render->add_option("--threads", render_args.threads, "worker threads (0 = all cores)");
    render->callback([&] { render_args.latent_seed_set = ls->count() > 0; });

    FitArgs fit_args;
    CLI::App* fit = app.add_subcommand("fit", "fit a neural field to the analytic scene");
    fit->add_option("--config", fit_args.config, "scene config (JSON)")->required();
    fit->add_option("--steps", fit_args.steps, "step count override");
    fit->add_option("--views", fit_args.views, "reference view count override");
    fit->add_flag("--no-shrink", fit_args.no_shrink, "freeze the sampling window at delta_init");
    fit->add_option("--log", fit_args.log, "metric log path (default stdout)");
    fit->add_option("--out", fit_args.out, "checkpoint path");
    fit->add_option("--threads", fit_args.threads, "worker threads for metric renders");

    ScheduleArgs schedule_args;
    CLI::App* schedule = app.add_subcommand("schedule", "tabulate the shrink schedule");
    schedule->add_option("--config", schedule_args.config, "scene config (JSON)")->required();
    schedule->add_option("--max-step", schedule_args.max_step, "last step to tabulate")
        ->check(CLI::NonNegativeNumber);
    schedule->add_option("--stride", schedule_args.stride, "row stride (default max-step/50)")
        ->check(CLI::NonNegativeNumber);
    schedule->add_option("--out", schedule_args.out, "CSV path (default stdout)");

    BudgetArgs budget_args;
    CLI::App* budget = app.add_subcommand("budget", "per-pixel query budgets");
    budget->add_option("--M", budget_args.m_bins, "root-finding bins")->check(CLI::PositiveNumber);
    budget->add_option("--ms", budget_args.m_secant, "secant iterations")
        ->check(CLI::NonNegativeNumber);
    budget->add_option("--N", budget_args.n_samples, "color samples")->check(CLI::PositiveNumber);

    ExtractArgs extract_args;
    CLI::App* extract = app.add_subcommand("extract", "export the iso-surface mesh");
    extract->add_option("--config", extract_args.config, "scene config (JSON)")->required();
    extract->add_option("--resolution", extract_args.resolution, "grid points per axis")
        ->check(CLI::Range(2, 1024));
    extract->add_option("--out", extract_args.out, "OBJ path");
    auto* els = extract->add_option("--latent-seed", extract_args.latent_seed,
                                    "latent draw seed (default: scene seed)");
    extract->add_option("--threads", extract_args.threads, "worker threads");
    extract->callback([&] { extract_args.latent_seed_set = els->count() > 0; });

    VerifyArgs verify_args;
    CLI::App* verify = app.add_subcommand("verify", "run the oracle suites");
    verify->add_option("--suite", verify_args.suite, "suite to run")
        ->required()
        ->check(CLI::IsMember({"equivalence", "rootfind", "gradients", "all"}));
    verify->add_option("--config", verify_args.config, "scene config (seed source)");
    auto* vs = verify->add_option("--seed", verify_args.seed, "suite seed (default 0)");
    verify->callback([&] { verify_args.seed_set = vs->count() > 0; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }

    try {
        if (app.got_subcommand(render)) return cmd_render(render_args);
        if (app.got_subcommand(fit)) return cmd_fit(fit_args);
        if (app.got_subcommand(schedule)) return cmd_schedule(schedule_args);
        if (app.got_subcommand(budget)) return cmd_budget(budget_args);
        if (app.got_subcommand(extract)) return cmd_extract(extract_args);
        if (app.got_subcommand(verify)) return cmd_verify(verify_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumericError;
    }
    return kExitOk;
}
