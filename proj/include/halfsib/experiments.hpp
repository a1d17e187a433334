#pragma once

// Study drivers: reconstruction-error trends over the noise scale s and the
// predictor count d, and the end-to-end simulated-CCD pipeline study.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "halfsib/detail/parallel.hpp"
#include "halfsib/detail/text.hpp"
#include "halfsib/hsr.hpp"
#include "halfsib/lightcurve.hpp"
#include "halfsib/metrics.hpp"
#include "halfsib/ridge.hpp"
#include "halfsib/spline.hpp"
#include "halfsib/synth.hpp"

namespace halfsib {

enum class StudyAxis { s_values, d_values };

struct TrendStudy {
    StudyAxis axis = StudyAxis::s_values;
    std::vector<double> values;
    int n_instances = 20;
    int n_samples = 200;
    std::uint64_t seed = 2015;
    int n_knots = 10;
    int cv_folds = 5;
    std::vector<double> lambda_grid;  // empty: default grid per fit
    unsigned threads = 0;             // 0: hardware concurrency

    static TrendStudy prop3_default() {
        TrendStudy s;
        s.axis = StudyAxis::s_values;
        s.values = {1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.0};
        return s;
    }
    static TrendStudy prop4_default() {
        TrendStudy s;
        s.axis = StudyAxis::d_values;
        s.values = {1, 2, 4, 8, 16, 32, 64};
        return s;
    }
};

struct StudyRow {
    double axis_value = 0.0;
    int instance = 0;
    double rmse = 0.0;
};

namespace detail {

inline LightCurve as_series(const Eigen::VectorXd& y) {
    LightCurve lc;
    lc.times.resize(static_cast<std::size_t>(y.size()));
    std::iota(lc.times.begin(), lc.times.end(), 0.0);
    lc.flux.assign(y.data(), y.data() + y.size());
    lc.valid.assign(lc.times.size(), true);
    return lc;
}

inline HsrConfig spline_hsr_config(const TrendStudy& study) {
    HsrConfig cfg;
    cfg.lambda_grid = study.lambda_grid;
    cfg.cv_folds = study.cv_folds;
    cfg.ar_past = cfg.ar_future = 0;
    cfg.normalization = Normalization::subtractive;
    return cfg;
}

/// Scale of the trend column that should escape the shared penalty.
inline constexpr double free_trend_scale = 100.0;

/// Additive spline design. With a single predictor its trend is left
/// (nearly) unpenalized; with `with_sum`, only the sum's trend is, since d
/// free linear terms would overfit at d close to n.
inline DesignMatrix additive_features(const Eigen::MatrixXd& x, int n_knots, bool with_sum) {
    DesignMatrix out(Eigen::MatrixXd(x.rows(), 0), {});
    const double own_scale = with_sum ? 1.0 : free_trend_scale;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        out = DesignMatrix::hstack(out, spline_features(x.col(j), n_knots, "x" + std::to_string(j + 1), own_scale));
    if (with_sum)
        out = DesignMatrix::hstack(out, spline_features(x.rowwise().sum(), n_knots, "xsum", free_trend_scale));
    return out;
}

inline std::vector<StudyRow> run_study(const TrendStudy& study, bool prop4) {
    if (study.values.empty()) throw std::invalid_argument("trend study: empty grid");
    if (study.n_instances < 1) throw std::invalid_argument("trend study: n_instances must be >= 1");
    const std::size_t nv = study.values.size();
    const std::size_t total = static_cast<std::size_t>(study.n_instances) * nv;
    std::vector<StudyRow> rows(total);
    const HsrConfig cfg = spline_hsr_config(study);

    parallel_for(
        total,
        [&](std::size_t task) {
            const int instance = static_cast<int>(task / nv);
            const double value = study.values[task % nv];
            try {
                ScenarioConfig sc;
                sc.n_samples = study.n_samples;
                sc.seed = derive_seed(study.seed, static_cast<std::uint64_t>(instance));
                ScenarioData data;
                if (prop4) {
                    if (value < 1.0 || value != std::floor(value))
                        throw std::invalid_argument("d must be a positive integer");
                    sc.d = static_cast<int>(value);
                    data = gen_prop4(sc);
                } else {
                    sc.s = value;
                    data = gen_prop3(sc);
                }
                const auto features = additive_features(data.x, study.n_knots, prop4);
                const auto res = estimate_q(as_series(data.y), features, cfg);
                rows[task] = {value, instance, reconstruction_rmse(res.residual, data.q)};
            } catch (const std::exception& e) {
                throw std::runtime_error(std::string(prop4 ? "prop4" : "prop3") + " study failed at instance " +
                                         std::to_string(instance) + ", " + (prop4 ? "d" : "s") + "=" +
                                         format_double(value) + ": " + e.what());
            }
        },
        study.threads);

    std::sort(rows.begin(), rows.end(), [](const StudyRow& a, const StudyRow& b) {
        if (a.axis_value != b.axis_value) return a.axis_value < b.axis_value;
        return a.instance < b.instance;
    });
    return rows;
}

}  // namespace detail

/// Reconstruction error of the spline half-sibling regression as the
/// predictor noise scale s shrinks. Each instance keeps its draws fixed
/// across the grid, so only s changes along an instance.
inline std::vector<StudyRow> run_prop3_study(const TrendStudy& study) {
    if (study.axis != StudyAxis::s_values) throw std::invalid_argument("run_prop3_study: axis must be s_values");
    return detail::run_study(study, false);
}

/// Reconstruction error as the number of predictors d grows. Features are
/// the spline expansions of every X_i and of their sum.
inline std::vector<StudyRow> run_prop4_study(const TrendStudy& study) {
    if (study.axis != StudyAxis::d_values) throw std::invalid_argument("run_prop4_study: axis must be d_values");
    return detail::run_study(study, true);
}

/// Median rmse per grid value, in ascending grid-value order.
inline std::vector<std::pair<double, double>> median_by_value(const std::vector<StudyRow>& rows) {
    std::vector<std::pair<double, double>> out;
    std::vector<double> values;
    for (const auto& r : rows) values.push_back(r.axis_value);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (double v : values) {
        std::vector<double> e;
        for (const auto& r : rows)
            if (r.axis_value == v) e.push_back(r.rmse);
        out.emplace_back(v, detail::median_inplace(e));
    }
    return out;
}

inline void write_study_table(std::ostream& out, const std::vector<StudyRow>& rows) {
    out << "axis_value,instance,rmse\n";
    for (const auto& r : rows)
        out << detail::format_double(r.axis_value) << ',' << r.instance << ',' << detail::format_double(r.rmse) << '\n';
}

/// Per-instance generator parameters, long format:
/// `instance,component,amplitude,slope,shift,noise_sd,noise_mean`.
/// Component "f" carries sigma_Q as noise_sd, "N" only sigma_N, and "g<i>"
/// the i-th predictor's sigmoid and R_i distribution.
inline void write_instance_params(std::ostream& out, const TrendStudy& study) {
    using detail::format_double;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    int d = 1;
    if (study.axis == StudyAxis::d_values)
        for (double v : study.values) d = std::max(d, static_cast<int>(v));
    out << "instance,component,amplitude,slope,shift,noise_sd,noise_mean\n";
    for (int inst = 0; inst < study.n_instances; ++inst) {
        ScenarioConfig sc;
        sc.n_samples = study.n_samples;
        sc.seed = derive_seed(study.seed, static_cast<std::uint64_t>(inst));
        sc.d = d;
        const auto data = study.axis == StudyAxis::d_values ? gen_prop4(sc) : gen_prop3(sc);
        auto row = [&](const std::string& name, const SigmoidFn* fn, double sd, double mean) {
            out << inst << ',' << name << ',' << format_double(fn ? fn->amplitude : nan) << ','
                << format_double(fn ? fn->slope : nan) << ',' << format_double(fn ? fn->shift : nan) << ','
                << format_double(sd) << ',' << format_double(mean) << '\n';
        };
        row("N", nullptr, data.sigma_n, 0.0);
        row("f", &data.f, data.sigma_q, 0.0);
        for (std::size_t j = 0; j < data.g.size(); ++j)
            row("g" + std::to_string(j + 1), &data.g[j], data.sigma_r[j], data.r_mean[j]);
    }
}

// ---------------------------------------------------------------------------
// Simulated CCD study

struct StarRecovery {
    std::string star_id;
    RecoveryReport report;
};

struct CcdStudy {
    std::vector<StarCdpp> cdpp;  // one row per star, catalog order
    std::vector<StarRecovery> recoveries;
    std::vector<StarDetrend> detrends;  // kept only when requested
};

/// Raw SAP flux as relative deviation from its median.
inline LightCurve relative_flux(const LightCurve& raw) {
    std::vector<double> v;
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (raw.valid[i]) v.push_back(raw.flux[i]);
    const double med = detail::median_inplace(v);
    LightCurve out = raw;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out.valid[i]) out.flux[i] = raw.flux[i] / med - 1.0;
    return out;
}

/// Generates the scene, detrends every star, and reports raw versus
/// detrended 12 h CDPP plus depth recovery on stars with injected transits.
inline CcdStudy run_ccd_study(const SceneConfig& scene_cfg, const HsrConfig& cfg, bool keep_detrends = false,
                              unsigned threads = 0) {
    cfg.check();
    const Scene scene = gen_scene(scene_cfg);
    const auto& stars = scene.catalog.entries;
    std::vector<StarDetrend> detrends(stars.size());
    detail::parallel_for(
        stars.size(),
        [&](std::size_t i) {
            try {
                detrends[i] = detrend_star(stars[i].star_id, scene.catalog, scene.pixels, cfg);
            } catch (const std::exception& e) {
                throw std::runtime_error("ccd study failed for star " + stars[i].star_id + ": " + e.what());
            }
        },
        threads);

    CcdStudy out;
    for (std::size_t i = 0; i < stars.size(); ++i) {
        const auto& d = detrends[i];
        const auto& id = stars[i].star_id;
        out.cdpp.push_back({id, cdpp(relative_flux(d.raw)).cdpp_ppm, cdpp(d.residual).cdpp_ppm});
        const auto& truth = scene.truth.at(id);
        if (truth.depth > 0.0) out.recoveries.push_back({id, recover_depth(d.residual, truth.in_transit, truth.depth)});
    }
    if (keep_detrends) out.detrends = std::move(detrends);
    return out;
}

inline void write_recovery_table(std::ostream& out, const std::vector<StarRecovery>& rows) {
    out << "star_id,injected_depth,recovered_depth,depth_error,snr\n";
    for (const auto& r : rows)
        out << r.star_id << ',' << detail::format_double(r.report.injected_depth) << ','
            << detail::format_double(r.report.recovered_depth) << ',' << detail::format_double(r.report.depth_error)
            << ',' << detail::format_double(r.report.snr) << '\n';
}

}  // namespace halfsib
