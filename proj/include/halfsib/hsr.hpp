#pragma once

// Half-sibling regression: estimate the latent signal of a target series as
// what remains after regressing it on co-observed series that share only the
// instrument's systematics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "halfsib/detail/text.hpp"
#include "halfsib/lightcurve.hpp"
#include "halfsib/ridge.hpp"
#include "halfsib/select.hpp"

namespace halfsib {

enum class Normalization {
    subtractive,  // y - p
    divisive,     // y / p - 1
    combined,     // (y - p) / p
};

inline std::string to_string(Normalization n) {
    switch (n) {
        case Normalization::subtractive: return "subtractive";
        case Normalization::divisive: return "divisive";
        case Normalization::combined: return "combined";
    }
    return "?";
}

inline Normalization parse_normalization(const std::string& s) {
    if (s == "subtractive") return Normalization::subtractive;
    if (s == "divisive") return Normalization::divisive;
    if (s == "combined") return Normalization::combined;
    throw std::invalid_argument("unknown normalization '" + s + "'");
}

/// Defaults follow the photometric setup: three past and three future
/// autoregressive inputs outside a +-9 h window, combined normalization.
struct HsrConfig {
    std::vector<double> lambda_grid;  // empty: default_lambda_grid() of each fit
    int cv_folds = 5;
    int ar_past = 3;
    int ar_future = 3;
    double exclusion_halfwidth_hours = 9.0;
    Normalization normalization = Normalization::combined;

    SelectionPolicy selection;
    /// Candidate predictor-pixel counts cross-validated jointly with lambda.
    /// Empty: use every pixel admitted by `selection`.
    std::vector<int> pixel_count_grid;
    /// Cadence gaps longer than this (days) start a new fitting segment.
    double max_gap_days = 0.5;

    void check() const {
        if (cv_folds < 2) throw std::invalid_argument("hsr config: cv_folds must be >= 2");
        if (ar_past < 0 || ar_future < 0) throw std::invalid_argument("hsr config: AR counts must be >= 0");
        if (!(exclusion_halfwidth_hours >= 0.0))
            throw std::invalid_argument("hsr config: exclusion_halfwidth_hours must be >= 0");
        if (!(max_gap_days > 0.0)) throw std::invalid_argument("hsr config: max_gap_days must be > 0");
        for (double l : lambda_grid)
            if (!(l >= 0.0)) throw std::invalid_argument("hsr config: lambda grid values must be >= 0");
        for (int c : pixel_count_grid)
            if (c < 1) throw std::invalid_argument("hsr config: pixel counts must be >= 1");
        selection.check();
    }
};

/// Output for one target series over one segment. `prediction` is the
/// regression estimate of the systematics, `residual` the normalized
/// estimate of the latent signal. Entries where `valid` is false are NaN.
struct DetrendResult {
    std::string pixel_id;
    CadenceSegment segment;
    std::vector<double> times;
    Eigen::VectorXd raw;
    Eigen::VectorXd prediction;
    Eigen::VectorXd residual;
    std::vector<bool> valid;
    RidgeModel model;
    CvReport cv;
};

/// Residual of regressing `y` on `x` at the cross-validated lambda.
///
/// Rows of `x` align with the cadences of `y`. Only cadences that are valid
/// in `y` and, when given, set in `row_mask` take part in fitting and carry
/// an output. Under divisive or combined normalization a prediction of
/// exactly zero is an error; predictions with |p| <= 1e-12 * median|p| are
/// masked instead.
inline DetrendResult estimate_q(const LightCurve& y, const DesignMatrix& x, const HsrConfig& cfg,
                                const std::vector<bool>* row_mask = nullptr) {
    cfg.check();
    y.check();
    x.check();
    const auto n = static_cast<Eigen::Index>(y.size());
    if (x.rows() != n)
        throw std::invalid_argument("estimate_q: design matrix has " + std::to_string(x.rows()) + " rows, curve has " +
                                    std::to_string(n) + " cadences");
    if (row_mask && row_mask->size() != y.size()) throw std::invalid_argument("estimate_q: row mask length mismatch");

    std::vector<bool> use(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) use[i] = y.valid[i] && (!row_mask || (*row_mask)[i]);

    const DesignMatrix x_fit = x.select_rows(use);
    Eigen::VectorXd y_fit(x_fit.rows());
    for (std::size_t i = 0, r = 0; i < y.size(); ++i)
        if (use[i]) y_fit[static_cast<Eigen::Index>(r++)] = y.flux[i];

    DetrendResult out;
    out.pixel_id = y.star_id;
    out.segment = {0, y.size()};
    out.times = y.times;
    out.raw = Eigen::Map<const Eigen::VectorXd>(y.flux.data(), n);

    const auto grid = cfg.lambda_grid.empty() ? default_lambda_grid(x_fit) : cfg.lambda_grid;
    out.cv = cross_validate(x_fit, y_fit, grid, cfg.cv_folds);
    out.model = fit_ridge(x_fit, y_fit, out.cv.best_lambda);

    const Eigen::VectorXd p = predict(out.model, x);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    out.prediction = Eigen::VectorXd::Constant(n, nan);
    out.residual = Eigen::VectorXd::Constant(n, nan);
    out.valid = use;

    if (cfg.normalization != Normalization::subtractive) {
        std::vector<std::size_t> zeros;
        std::vector<double> mags;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (!use[i]) continue;
            const double v = p[static_cast<Eigen::Index>(i)];
            if (v == 0.0) zeros.push_back(i);
            mags.push_back(std::abs(v));
        }
        if (!zeros.empty()) {
            std::ostringstream msg;
            msg << "estimate_q: zero prediction under " << to_string(cfg.normalization) << " normalization at cadence";
            for (std::size_t k = 0; k < zeros.size() && k < 20; ++k) msg << (k ? ", " : " ") << zeros[k];
            if (zeros.size() > 20) msg << " (+" << zeros.size() - 20 << " more)";
            throw std::domain_error(msg.str());
        }
        std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2), mags.end());
        const double floor = mags.empty() ? 0.0 : 1e-12 * mags[mags.size() / 2];
        for (std::size_t i = 0; i < y.size(); ++i)
            if (use[i] && std::abs(p[static_cast<Eigen::Index>(i)]) <= floor) out.valid[i] = false;
    }

    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (row_mask && !(*row_mask)[i]) continue;
        out.prediction[k] = p[k];
        if (!out.valid[i]) continue;
        const double yi = y.flux[i];
        switch (cfg.normalization) {
            case Normalization::subtractive: out.residual[k] = yi - p[k]; break;
            case Normalization::divisive: out.residual[k] = yi / p[k] - 1.0; break;
            case Normalization::combined: out.residual[k] = (yi - p[k]) / p[k]; break;
        }
    }
    return out;
}

/// Autoregressive inputs built from the target's own flux.
struct ArColumns {
    DesignMatrix matrix;           // 0 where a row has no complete set of neighbors
    std::vector<bool> row_valid;   // false at curve edges
    Eigen::MatrixXi sources;       // cadence index behind each entry, -1 if none
};

/// For each cadence t: the `ar_past` nearest valid cadences with time
/// <= t - halfwidth and the `ar_future` nearest with time >= t + halfwidth.
/// The cadence itself is never used, so halfwidth 0 yields the immediate
/// neighbors. Columns are ordered nearest first.
inline ArColumns build_ar_columns(const LightCurve& y, int ar_past, int ar_future, double exclusion_halfwidth_hours) {
    if (ar_past < 0 || ar_future < 0) throw std::invalid_argument("build_ar_columns: counts must be >= 0");
    if (!(exclusion_halfwidth_hours >= 0.0))
        throw std::invalid_argument("build_ar_columns: exclusion halfwidth must be >= 0");
    y.check();

    const auto n = static_cast<Eigen::Index>(y.size());
    const Eigen::Index cols = ar_past + ar_future;
    const double h = exclusion_halfwidth_hours / 24.0;

    ArColumns ar;
    std::vector<std::string> ids;
    for (int k = 1; k <= ar_past; ++k) ids.push_back("ar_past_" + std::to_string(k));
    for (int k = 1; k <= ar_future; ++k) ids.push_back("ar_future_" + std::to_string(k));
    ar.matrix = DesignMatrix(Eigen::MatrixXd::Zero(n, cols), std::move(ids));
    ar.sources = Eigen::MatrixXi::Constant(n, cols, -1);
    ar.row_valid.assign(y.size(), true);

    const auto& t = y.times;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        // past: last index with time <= t_i - h, and strictly before i
        auto past_end = std::upper_bound(t.begin(), t.end(), t[iu] - h);
        auto j = std::min<std::ptrdiff_t>(past_end - t.begin(), i) - 1;
        int found = 0;
        for (; j >= 0 && found < ar_past; --j) {
            if (!y.valid[static_cast<std::size_t>(j)]) continue;
            ar.matrix.values(i, found) = y.flux[static_cast<std::size_t>(j)];
            ar.sources(i, found) = static_cast<int>(j);
            ++found;
        }
        bool ok = found == ar_past;

        auto fut_begin = std::lower_bound(t.begin(), t.end(), t[iu] + h);
        auto k = std::max<std::ptrdiff_t>(fut_begin - t.begin(), i + 1);
        found = 0;
        for (; k < n && found < ar_future; ++k) {
            if (!y.valid[static_cast<std::size_t>(k)]) continue;
            ar.matrix.values(i, ar_past + found) = y.flux[static_cast<std::size_t>(k)];
            ar.sources(i, ar_past + found) = static_cast<int>(k);
            ++found;
        }
        ok = ok && found == ar_future;

        if (!ok) {
            ar.row_valid[iu] = false;
            ar.matrix.values.row(i).setZero();
        }
    }
    return ar;
}

/// Per-star output: one DetrendResult per (member pixel, segment) plus the
/// star-level series. `residual` is the unweighted mean of the member-pixel
/// residuals valid at each cadence; `raw` and `prediction` are pixel sums.
struct StarDetrend {
    std::string star_id;
    std::vector<std::string> predictor_pixels;
    std::vector<DetrendResult> pixels;
    LightCurve raw;
    std::vector<double> prediction;
    LightCurve residual;
};

namespace detail {

inline const LightCurve& require_curve(const LightCurveStore& curves, const std::string& id,
                                       const std::vector<double>& times) {
    const auto it = curves.find(id);
    if (it == curves.end()) throw std::invalid_argument("detrend_star: no light curve for pixel '" + id + "'");
    if (it->second.times != times)
        throw std::invalid_argument("detrend_star: pixel '" + id + "' is not on the target's cadence grid");
    return it->second;
}

}  // namespace detail

/// Detrends every member pixel of `target` against the predictor pool chosen
/// by `cfg.selection`, segment by segment. Segments with fewer usable rows
/// than CV folds are left invalid.
inline StarDetrend detrend_star(const std::string& target, const StarCatalog& catalog, const LightCurveStore& curves,
                                const HsrConfig& cfg) {
    cfg.check();
    const StarEntry* star = catalog.find(target);
    if (!star) throw std::invalid_argument("detrend_star: target '" + target + "' not in catalog");
    if (star->pixel_ids.empty()) throw std::invalid_argument("detrend_star: target '" + target + "' has no pixels");

    const Selection sel = select_predictor_stars(target, catalog, cfg.selection);

    const auto first = curves.find(star->pixel_ids.front());
    if (first == curves.end())
        throw std::invalid_argument("detrend_star: no light curve for pixel '" + star->pixel_ids.front() + "'");
    const std::vector<double>& times = first->second.times;
    const std::size_t n = times.size();

    std::vector<const LightCurve*> members;
    for (const auto& id : star->pixel_ids) members.push_back(&detail::require_curve(curves, id, times));

    // Predictor block over the whole curve; a row is usable when every predictor is valid.
    const auto m = static_cast<Eigen::Index>(sel.pixel_ids.size());
    Eigen::MatrixXd pred(static_cast<Eigen::Index>(n), m);
    std::vector<bool> pred_ok(n, true);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& lc = detail::require_curve(curves, sel.pixel_ids[static_cast<std::size_t>(j)], times);
        for (std::size_t i = 0; i < n; ++i) {
            if (lc.valid[i]) {
                pred(static_cast<Eigen::Index>(i), j) = lc.flux[i];
            } else {
                pred(static_cast<Eigen::Index>(i), j) = 0.0;
                pred_ok[i] = false;
            }
        }
    }

    // Column prefixes for the joint pixel-count search, cut at star boundaries.
    std::vector<Eigen::Index> prefixes;
    if (cfg.pixel_count_grid.empty()) {
        prefixes.push_back(m);
    } else {
        for (int c : cfg.pixel_count_grid) {
            const auto it = std::lower_bound(sel.star_boundaries.begin(), sel.star_boundaries.end(),
                                             static_cast<std::size_t>(c));
            const auto cut = it == sel.star_boundaries.end() ? m : static_cast<Eigen::Index>(*it);
            if (std::find(prefixes.begin(), prefixes.end(), cut) == prefixes.end()) prefixes.push_back(cut);
        }
    }

    StarDetrend out;
    out.star_id = target;
    out.predictor_pixels = sel.pixel_ids;

    const auto segments = segment_by_gap(*members.front(), cfg.max_gap_days);
    for (std::size_t pi = 0; pi < members.size(); ++pi) {
        for (const auto& seg : segments) {
            LightCurve piece = members[pi]->slice(seg.start_index, seg.end_index);
            piece.star_id = star->pixel_ids[pi];
            const auto ar = build_ar_columns(piece, cfg.ar_past, cfg.ar_future, cfg.exclusion_halfwidth_hours);
            std::vector<bool> mask(piece.size());
            std::size_t usable = 0;
            for (std::size_t i = 0; i < piece.size(); ++i) {
                mask[i] = ar.row_valid[i] && pred_ok[seg.start_index + i];
                usable += (mask[i] && piece.valid[i]) ? 1 : 0;
            }
            if (usable < static_cast<std::size_t>(std::max(cfg.cv_folds, 2))) continue;

            const auto rows = static_cast<Eigen::Index>(seg.length());
            const auto start = static_cast<Eigen::Index>(seg.start_index);
            DetrendResult best;
            double best_err = std::numeric_limits<double>::infinity();
            for (const Eigen::Index cut : prefixes) {
                DesignMatrix px(pred.block(start, 0, rows, cut),
                                std::vector<std::string>(sel.pixel_ids.begin(), sel.pixel_ids.begin() + cut));
                auto res = estimate_q(piece, DesignMatrix::hstack(px, ar.matrix), cfg, &mask);
                double err = std::numeric_limits<double>::infinity();
                for (const auto& g : res.cv.grid)
                    if (g.lambda == res.cv.best_lambda) err = g.mean_error;
                if (err < best_err || prefixes.size() == 1) {
                    best_err = err;
                    best = std::move(res);
                }
            }
            best.segment = seg;
            out.pixels.push_back(std::move(best));
        }
    }

    // Star-level aggregation.
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    out.raw.star_id = target;
    out.raw.times = times;
    out.raw.flux.assign(n, 0.0);
    out.raw.valid.assign(n, true);
    for (const auto* lc : members)
        for (std::size_t i = 0; i < n; ++i) {
            if (lc->valid[i]) out.raw.flux[i] += lc->flux[i];
            else out.raw.valid[i] = false;
        }
    for (std::size_t i = 0; i < n; ++i)
        if (!out.raw.valid[i]) out.raw.flux[i] = nan;

    out.prediction.assign(n, 0.0);
    std::vector<int> pred_count(n, 0);
    std::vector<double> sum(n, 0.0);
    std::vector<int> count(n, 0);
    for (const auto& r : out.pixels) {
        for (std::size_t i = 0; i < r.segment.length(); ++i) {
            const std::size_t g = r.segment.start_index + i;
            const auto k = static_cast<Eigen::Index>(i);
            if (std::isfinite(r.prediction[k])) {
                out.prediction[g] += r.prediction[k];
                ++pred_count[g];
            }
            if (r.valid[i]) {
                sum[g] += r.residual[k];
                ++count[g];
            }
        }
    }
    out.residual.star_id = target;
    out.residual.times = times;
    out.residual.flux.assign(n, nan);
    out.residual.valid.assign(n, false);
    const int n_members = static_cast<int>(members.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (pred_count[i] != n_members) out.prediction[i] = nan;
        if (count[i] > 0) {
            out.residual.flux[i] = sum[i] / count[i];
            out.residual.valid[i] = true;
        }
    }
    return out;
}

/// `time,raw,prediction,residual` for one target.
inline void write_detrend(std::ostream& out, const StarDetrend& d) {
    out << "time,raw,prediction,residual\n";
    for (std::size_t i = 0; i < d.raw.size(); ++i)
        out << detail::format_double(d.raw.times[i]) << ',' << detail::format_double(d.raw.flux[i]) << ','
            << detail::format_double(d.prediction[i]) << ','
            << detail::format_double(d.residual.valid[i] ? d.residual.flux[i]
                                                          : std::numeric_limits<double>::quiet_NaN())
            << '\n';
}

}  // namespace halfsib
