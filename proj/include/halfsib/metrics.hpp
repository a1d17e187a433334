#pragma once

// Evaluation statistics: reconstruction error, a CDPP proxy, and transit
// depth recovery.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "halfsib/detail/text.hpp"
#include "halfsib/lightcurve.hpp"

namespace halfsib {

struct CdppReport {
    double window_hours = 12.0;
    double cdpp_ppm = 0.0;
    std::size_t n_windows = 0;
};

struct RecoveryReport {
    double injected_depth = std::numeric_limits<double>::quiet_NaN();
    double recovered_depth = 0.0;
    double depth_error = std::numeric_limits<double>::quiet_NaN();  // |recovered - injected| / injected
    double snr = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double median_inplace(std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double hi = *mid;
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

inline double median_cadence(const std::vector<double>& times) {
    std::vector<double> dt;
    dt.reserve(times.size());
    for (std::size_t i = 1; i < times.size(); ++i) dt.push_back(times[i] - times[i - 1]);
    return median_inplace(dt);
}

}  // namespace detail

/// RMS difference after removing the sample mean of `q_hat`; `q_true` is
/// expected to be centered already. Offsets in `q_hat` are ignored.
inline double reconstruction_rmse(const Eigen::Ref<const Eigen::VectorXd>& q_hat,
                                  const Eigen::Ref<const Eigen::VectorXd>& q_true) {
    if (q_hat.size() != q_true.size())
        throw std::invalid_argument("reconstruction_rmse: length mismatch (" + std::to_string(q_hat.size()) + " vs " +
                                    std::to_string(q_true.size()) + ")");
    if (q_hat.size() == 0) throw std::invalid_argument("reconstruction_rmse: empty input");
    const Eigen::ArrayXd diff = (q_hat.array() - q_hat.mean()) - q_true.array();
    return std::sqrt(diff.square().mean());
}

/// CDPP proxy in ppm.
///
/// Window means are taken over every position of a sliding window of
/// round(window / median cadence) samples inside each maximal run of valid,
/// evenly spaced cadences (a time step above 1.5 median cadences breaks a run).
/// The result is 1.4826 * MAD(window means) * 1e6, a robust estimate of the
/// scatter a transit of that duration would see. This is a stand-in for the
/// wavelet-based mission statistic and is meant for ranking, not for absolute
/// comparison with archive values.
inline CdppReport cdpp(const LightCurve& residual, double window_hours = 12.0) {
    if (!(window_hours > 0.0)) throw std::invalid_argument("cdpp: window_hours must be > 0");
    residual.check();
    if (residual.size() < 2) throw std::invalid_argument("cdpp: fewer than 2 complete windows");

    const double cadence = detail::median_cadence(residual.times);
    const auto width = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(window_hours / 24.0 / cadence)));
    const double max_step = 1.5 * cadence;

    std::vector<double> means;
    std::size_t i = 0;
    const std::size_t n = residual.size();
    while (i < n) {
        if (!residual.valid[i]) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < n && residual.valid[j] && residual.times[j] - residual.times[j - 1] <= max_step) ++j;
        for (std::size_t s = i; s + width <= j; ++s) {
            double sum = 0.0;
            for (std::size_t t = s; t < s + width; ++t) sum += residual.flux[t];
            means.push_back(sum / static_cast<double>(width));
        }
        i = j;
    }
    if (means.size() < 2)
        throw std::invalid_argument("cdpp: fewer than 2 complete " + detail::format_double(window_hours) + " h windows");

    CdppReport report;
    report.window_hours = window_hours;
    report.n_windows = means.size();
    auto work = means;
    const double med = detail::median_inplace(work);
    for (std::size_t k = 0; k < means.size(); ++k) work[k] = std::abs(means[k] - med);
    report.cdpp_ppm = 1.4826 * detail::median_inplace(work) * 1e6;
    return report;
}

/// Depth as mean(out of transit) - mean(in transit) over valid cadences.
/// The signal-to-noise ratio uses the 12 h CDPP of the residual; it is NaN
/// when that statistic cannot be formed.
inline RecoveryReport recover_depth(const LightCurve& residual, const std::vector<bool>& transit_mask,
                                    double injected_depth = std::numeric_limits<double>::quiet_NaN()) {
    if (transit_mask.size() != residual.size()) throw std::invalid_argument("recover_depth: mask length mismatch");
    double sum_in = 0.0, sum_out = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t i = 0; i < residual.size(); ++i) {
        if (!residual.valid[i]) continue;
        if (transit_mask[i]) {
            sum_in += residual.flux[i];
            ++n_in;
        } else {
            sum_out += residual.flux[i];
            ++n_out;
        }
    }
    if (n_in == 0) throw std::invalid_argument("recover_depth: no valid in-transit cadences");
    if (n_out == 0) throw std::invalid_argument("recover_depth: no valid out-of-transit cadences");

    RecoveryReport r;
    r.injected_depth = injected_depth;
    r.recovered_depth = sum_out / static_cast<double>(n_out) - sum_in / static_cast<double>(n_in);
    if (std::isfinite(injected_depth) && injected_depth != 0.0)
        r.depth_error = std::abs(r.recovered_depth - injected_depth) / injected_depth;
    try {
        const double noise = cdpp(residual, 12.0).cdpp_ppm * 1e-6;
        r.snr = r.recovered_depth / noise;
    } catch (const std::invalid_argument&) {
        r.snr = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

struct StarCdpp {
    std::string star_id;
    double cdpp_raw = 0.0;
    double cdpp_detrended = 0.0;
};

inline void write_cdpp_table(std::ostream& out, const std::vector<StarCdpp>& rows) {
    out << "star_id,cdpp_raw,cdpp_detrended\n";
    for (const auto& r : rows)
        out << r.star_id << ',' << detail::format_double(r.cdpp_raw) << ',' << detail::format_double(r.cdpp_detrended)
            << '\n';
}

}  // namespace halfsib
