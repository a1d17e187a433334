// halfsib: command-line front end for the half-sibling regression toolkit.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "halfsib/halfsib.hpp"

namespace fs = std::filesystem;
using namespace halfsib;

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

struct HsrOptions {
    HsrConfig cfg;
    std::string normalization = "combined";

    void bind(CLI::App* app) {
        app->add_option("--n-pixels", cfg.selection.n_pixels, "Target predictor-pixel count")->capture_default_str();
        app->add_option("--min-distance", cfg.selection.min_distance, "Minimum star distance in pixels (Chebyshev)")
            ->capture_default_str();
        app->add_flag("!--any-ccd", cfg.selection.same_ccd, "Allow predictors from other CCDs");
        app->add_option("--ar-past", cfg.ar_past, "Past autoregressive inputs")->capture_default_str();
        app->add_option("--ar-future", cfg.ar_future, "Future autoregressive inputs")->capture_default_str();
        app->add_option("--exclusion-hours", cfg.exclusion_halfwidth_hours, "AR exclusion half-width in hours")
            ->capture_default_str();
        app->add_option("--normalization", normalization, "subtractive | divisive | combined")
            ->check(CLI::IsMember({"subtractive", "divisive", "combined"}))
            ->capture_default_str();
        app->add_option("--folds", cfg.cv_folds, "Cross-validation folds")->capture_default_str();
        app->add_option("--lambdas", cfg.lambda_grid, "Explicit lambda grid (default: 9 log-spaced, scale-relative)");
        app->add_option("--pixel-grid", cfg.pixel_count_grid, "Predictor counts cross-validated jointly with lambda");
        app->add_option("--max-gap", cfg.max_gap_days, "Gap in days that starts a new fitting segment")
            ->capture_default_str();
    }

    HsrConfig resolve() {
        cfg.normalization = parse_normalization(normalization);
        cfg.check();
        return cfg;
    }
};

SceneConfig load_scene(const std::string& path) {
    if (path.empty()) return SceneConfig{};
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scene file '" + path + "'");
    return parse_scene_config(in);
}

void add_study(CLI::App& root, const std::string& name, bool prop4) {
    auto* app = root.add_subcommand(name, prop4 ? "Reconstruction error versus predictor count d"
                                                : "Reconstruction error versus predictor noise scale s");
    auto study = std::make_shared<TrendStudy>(prop4 ? TrendStudy::prop4_default() : TrendStudy::prop3_default());
    auto out = std::make_shared<std::string>();
    auto params = std::make_shared<std::string>();
    app->add_option("--out", *out, "Output table (axis_value,instance,rmse)")->required();
    app->add_option("--params", *params, "Also write per-instance generator parameters here");
    app->add_option(prop4 ? "--d-values" : "--s-values", study->values, "Grid values")->capture_default_str();
    app->add_option("--instances", study->n_instances, "Scenario instances")->capture_default_str();
    app->add_option("--samples", study->n_samples, "Samples per instance")->capture_default_str();
    app->add_option("--seed", study->seed, "Base seed")->capture_default_str();
    app->add_option("--knots", study->n_knots, "Spline knots per feature")->capture_default_str();
    app->add_option("--folds", study->cv_folds, "Cross-validation folds")->capture_default_str();
    app->add_option("--threads", study->threads, "Worker threads (0: all cores)")->capture_default_str();
    app->callback([=] {
        const auto rows = prop4 ? run_prop4_study(*study) : run_prop3_study(*study);
        auto f = open_out(*out);
        write_study_table(f, rows);
        if (!params->empty()) {
            auto p = open_out(*params);
            write_instance_params(p, *study);
        }
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Half-sibling regression: systematics removal, synthetic studies and photometric detrending"};
    app.require_subcommand(1);

    add_study(app, "prop3", false);
    add_study(app, "prop4", true);

    // ccd ---------------------------------------------------------------
    auto* ccd = app.add_subcommand("ccd", "Simulated-CCD pipeline study: CDPP and transit recovery");
    std::string ccd_scene, ccd_out;
    bool ccd_per_star = false;
    unsigned ccd_threads = 0;
    HsrOptions ccd_hsr;
    ccd_hsr.cfg.selection.n_pixels = 64;
    ccd->add_option("--scene", ccd_scene, "Scene key-value file (default: built-in scene)");
    ccd->add_option("--out", ccd_out, "Output directory")->required();
    ccd->add_flag("--per-star", ccd_per_star, "Also write detrend/<star>.csv");
    ccd->add_option("--threads", ccd_threads, "Worker threads (0: all cores)");
    ccd_hsr.bind(ccd);
    ccd->callback([&] {
        const auto scene = load_scene(ccd_scene);
        const auto study = run_ccd_study(scene, ccd_hsr.resolve(), ccd_per_star, ccd_threads);
        const fs::path dir = ccd_out;
        {
            auto f = open_out(dir / "cdpp.csv");
            write_cdpp_table(f, study.cdpp);
        }
        {
            auto f = open_out(dir / "recovery.csv");
            write_recovery_table(f, study.recoveries);
        }
        for (const auto& d : study.detrends) {
            auto f = open_out(dir / "detrend" / (d.star_id + ".csv"));
            write_detrend(f, d);
        }
    });

    // synth -------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Write a simulated CCD as catalog, pixel curves and truth");
    std::string synth_scene, synth_out;
    synth->add_option("--scene", synth_scene, "Scene key-value file (default: built-in scene)");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->callback([&] {
        const auto scene = gen_scene(load_scene(synth_scene));
        const fs::path dir = synth_out;
        fs::create_directories(dir / "pixels");
        write_catalog(dir / "catalog.csv", scene.catalog);
        for (const auto& [id, lc] : scene.pixels) write_lightcurve(dir / "pixels" / (id + ".csv"), lc);
        auto f = open_out(dir / "truth.csv");
        write_truth(f, scene);
    });

    // select ------------------------------------------------------------
    auto* sel = app.add_subcommand("select", "Dry run: list the predictor stars admitted for a target");
    std::string sel_catalog, sel_target, sel_out;
    SelectionPolicy policy;
    sel->add_option("--catalog", sel_catalog, "Catalog CSV")->required();
    sel->add_option("--target", sel_target, "Target star id")->required();
    sel->add_option("--out", sel_out, "Output CSV (default: stdout)");
    sel->add_option("--n-pixels", policy.n_pixels, "Target predictor-pixel count")->capture_default_str();
    sel->add_option("--min-distance", policy.min_distance, "Minimum distance in pixels")->capture_default_str();
    sel->add_flag("!--any-ccd", policy.same_ccd, "Allow predictors from other CCDs");
    sel->add_flag("!--no-magnitude-rank", policy.magnitude_rank, "Admit stars in id order instead");
    sel->callback([&] {
        const auto catalog = read_catalog(sel_catalog);
        const auto s = select_predictor_stars(sel_target, catalog, policy);
        if (sel_out.empty()) {
            write_selection(std::cout, s);
        } else {
            auto f = open_out(sel_out);
            write_selection(f, s);
        }
    });

    // detrend -----------------------------------------------------------
    auto* det = app.add_subcommand("detrend", "Detrend one star from catalog + pixel curves");
    std::string det_catalog, det_pixels, det_target, det_out;
    HsrOptions det_hsr;
    det->add_option("--catalog", det_catalog, "Catalog CSV")->required();
    det->add_option("--pixels", det_pixels, "Directory of <pixel_id>.csv light curves")->required();
    det->add_option("--target", det_target, "Target star id")->required();
    det->add_option("--out", det_out, "Output CSV (time,raw,prediction,residual)")->required();
    det_hsr.bind(det);
    det->callback([&] {
        const auto catalog = read_catalog(det_catalog);
        const auto curves = read_lightcurve_dir(det_pixels);
        const auto d = detrend_star(det_target, catalog, curves, det_hsr.resolve());
        auto f = open_out(det_out);
        write_detrend(f, d);
    });

    // cdpp --------------------------------------------------------------
    auto* cd = app.add_subcommand("cdpp", "CDPP proxy of a relative-flux light curve");
    std::string cd_lc;
    double cd_window = 12.0;
    cd->add_option("--lc", cd_lc, "Light-curve CSV")->required();
    cd->add_option("--window", cd_window, "Window in hours")->capture_default_str();
    cd->callback([&] {
        const auto r = cdpp(read_lightcurve(cd_lc), cd_window);
        std::cout << "window_hours,cdpp_ppm,n_windows\n"
                  << detail::format_double(r.window_hours) << ',' << detail::format_double(r.cdpp_ppm) << ','
                  << r.n_windows << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "halfsib: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
