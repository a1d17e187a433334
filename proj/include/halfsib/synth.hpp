#pragma once

// Synthetic data: additive-noise scenarios for the identifiability studies
// and a multi-star CCD with shared systematics and injectable transits.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "halfsib/detail/text.hpp"
#include "halfsib/lightcurve.hpp"

namespace halfsib {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; derives independent child seeds from (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// x -> amplitude / (1 + exp(-slope (x - shift)))
struct SigmoidFn {
    double amplitude = 1.0;
    double slope = 1.0;
    double shift = 0.0;

    [[nodiscard]] double operator()(double x) const { return amplitude / (1.0 + std::exp(-slope * (x - shift))); }

    /// amplitude in [0.5, 2], slope in [1, 3], shift in [-1, 1]; strictly increasing.
    static SigmoidFn random(Rng& rng) {
        std::uniform_real_distribution<double> a(0.5, 2.0), b(1.0, 3.0), c(-1.0, 1.0);
        SigmoidFn f;
        f.amplitude = a(rng);
        f.slope = b(rng);
        f.shift = c(rng);
        return f;
    }
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] double draw(Rng& rng) const {
        return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
    }
};

/// Y = Q + f(N),  X_i = g_i(N) + s R_i  with N, Q, R_i independent Gaussians.
struct ScenarioConfig {
    int n_samples = 200;
    int d = 1;
    double s = 1.0;
    Interval sigma_n{0.5, 1.0};
    Interval sigma_q{0.05, 1.0};
    Interval sigma_r{0.05, 1.0};
    Interval r_mean{-1.0, 1.0};
    std::uint64_t seed = 0;

    void check() const {
        if (n_samples < 1) throw std::invalid_argument("scenario: n_samples must be >= 1");
        if (d < 1) throw std::invalid_argument("scenario: d must be >= 1");
        if (!(s >= 0.0)) throw std::invalid_argument("scenario: s must be >= 0");
    }
};

struct ScenarioData {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;  // n_samples x d
    Eigen::VectorXd q;  // sample mean removed
    Eigen::VectorXd n;
    SigmoidFn f;
    std::vector<SigmoidFn> g;
    double sigma_n = 0.0;
    double sigma_q = 0.0;
    std::vector<double> sigma_r;
    std::vector<double> r_mean;
};

namespace detail {

/// Draw order is fixed (f, sigmas, N, Q, then each predictor in turn), so a
/// scenario with d predictors is a column prefix of one with more, and s only
/// rescales the same R draws.
inline ScenarioData gen_additive(int n_samples, int d, double s, const ScenarioConfig& cfg) {
    Rng rng(cfg.seed);
    ScenarioData out;
    const Eigen::Index n = n_samples;
    out.f = SigmoidFn::random(rng);
    out.sigma_n = cfg.sigma_n.draw(rng);
    out.sigma_q = cfg.sigma_q.draw(rng);

    out.n.resize(n);
    {
        std::normal_distribution<double> dist(0.0, out.sigma_n);
        for (Eigen::Index i = 0; i < n; ++i) out.n[i] = dist(rng);
    }
    out.q.resize(n);
    {
        std::normal_distribution<double> dist(0.0, out.sigma_q);
        for (Eigen::Index i = 0; i < n; ++i) out.q[i] = dist(rng);
    }
    out.q.array() -= out.q.mean();

    out.x.resize(n, d);
    for (int j = 0; j < d; ++j) {
        const auto g = SigmoidFn::random(rng);
        const double sr = cfg.sigma_r.draw(rng);
        const double mr = cfg.r_mean.draw(rng);
        out.g.push_back(g);
        out.sigma_r.push_back(sr);
        out.r_mean.push_back(mr);
        std::normal_distribution<double> dist(mr, sr);
        for (Eigen::Index i = 0; i < n; ++i) out.x(i, j) = g(out.n[i]) + s * dist(rng);
    }

    out.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) out.y[i] = out.q[i] + out.f(out.n[i]);
    return out;
}

}  // namespace detail

/// Single predictor X = g(N) + s R; `cfg.d` is ignored.
inline ScenarioData gen_prop3(const ScenarioConfig& cfg) {
    cfg.check();
    return detail::gen_additive(cfg.n_samples, 1, cfg.s, cfg);
}

/// d predictors X_i = g_i(N) + R_i; `cfg.s` is ignored (fixed at 1).
inline ScenarioData gen_prop4(const ScenarioConfig& cfg) {
    cfg.check();
    return detail::gen_additive(cfg.n_samples, cfg.d, 1.0, cfg);
}

// ---------------------------------------------------------------------------
// Transits

/// Periodic box: in transit when the time is within duration/2 of a
/// mid-transit epoch + k * period.
inline std::vector<bool> transit_mask(const std::vector<double>& times, double period_days, double epoch_days,
                                      double duration_hours) {
    if (!(period_days > 0.0)) throw std::invalid_argument("transit: period must be > 0");
    if (!(duration_hours >= 0.0) || !(duration_hours / 24.0 < period_days))
        throw std::invalid_argument("transit: duration must be in [0, period)");
    const double half = 0.5 * duration_hours / 24.0;
    std::vector<bool> mask(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double rel = times[i] - epoch_days;
        const double phase = rel - period_days * std::round(rel / period_days);
        mask[i] = std::abs(phase) < half;
    }
    return mask;
}

struct InjectedCurve {
    LightCurve curve;
    std::vector<bool> mask;
};

/// Multiplies in-transit flux by (1 - depth); other cadences are untouched.
inline InjectedCurve inject_transit(const LightCurve& lc, double period_days, double epoch_days, double duration_hours,
                                    double depth) {
    if (!(depth >= 0.0 && depth < 1.0)) throw std::invalid_argument("inject_transit: depth must be in [0, 1)");
    InjectedCurve out{lc, transit_mask(lc.times, period_days, epoch_days, duration_hours)};
    if (depth == 0.0) return out;
    for (std::size_t i = 0; i < lc.size(); ++i)
        if (out.mask[i]) out.curve.flux[i] = lc.flux[i] * (1.0 - depth);
    return out;
}

// ---------------------------------------------------------------------------
// Simulated CCD

struct TransitSpec {
    std::string star_id;
    double period_days = 10.0;
    double epoch_days = 1.0;
    double duration_hours = 10.0;
    double depth = 1e-3;
};

/// Stars share k latent systematics through per-pixel multiplicative loadings
///   flux = baseline * (1 + transit) * (1 + sum_k a_pk N_k(t)) + baseline * noise_sigma * e.
/// Loadings scatter around a per-CCD mean direction, so stars on one CCD see
/// similar trends. Pointing jitter is represented by these latents.
struct SceneConfig {
    int n_stars = 50;
    int pixels_per_star = 4;
    int n_ccds = 1;
    int systematics_dim = 3;
    double systematics_amplitude = 1e-2;  // loading scale
    double loading_spread = 0.3;          // relative per-pixel scatter of loadings
    double noise_sigma = 1e-4;            // relative white noise per pixel
    double cadence_hours = 0.5;
    int n_segments = 2;
    double segment_days = 27.0;
    double gap_days = 1.0;
    double ccd_size = 1024.0;
    std::vector<TransitSpec> transits;
    std::uint64_t seed = 1;

    void check() const {
        if (n_stars < 1 || pixels_per_star < 1 || n_ccds < 1 || systematics_dim < 0 || n_segments < 1)
            throw std::invalid_argument("scene: counts must be positive");
        if (!(systematics_amplitude >= 0.0) || !(noise_sigma >= 0.0) || !(loading_spread >= 0.0))
            throw std::invalid_argument("scene: amplitudes must be >= 0");
        if (!(cadence_hours > 0.0) || !(segment_days > 0.0) || !(gap_days >= 0.0) || !(ccd_size > 0.0))
            throw std::invalid_argument("scene: time and size parameters must be positive");
        for (const auto& t : transits) {
            if (!(t.depth > 0.0 && t.depth < 1.0))
                throw std::invalid_argument("scene: transit depth must be in (0, 1) for star '" + t.star_id + "'");
            if (!(t.period_days > 0.0) || !(t.duration_hours > 0.0) || !(t.duration_hours / 24.0 < t.period_days))
                throw std::invalid_argument("scene: transit duration must be positive and shorter than the period");
        }
    }

    [[nodiscard]] static std::string star_name(int s) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "S%03d", s);
        return buf;
    }
    [[nodiscard]] static std::string pixel_name(int s, int p) { return star_name(s) + "_p" + std::to_string(p); }
};

struct StarTruth {
    std::vector<bool> in_transit;
    std::vector<double> q_true;  // relative transit signal: -depth in transit, 0 elsewhere
    double depth = 0.0;
};

struct Scene {
    StarCatalog catalog;
    LightCurveStore pixels;
    std::map<std::string, StarTruth> truth;
    std::vector<double> times;
    Eigen::MatrixXd latents;  // cadences x systematics_dim
};

namespace detail {

inline std::vector<double> scene_times(const SceneConfig& cfg) {
    std::vector<double> t;
    const double dt = cfg.cadence_hours / 24.0;
    const auto per_segment = static_cast<long>(std::floor(cfg.segment_days / dt));
    for (int s = 0; s < cfg.n_segments; ++s) {
        const double t0 = s * (cfg.segment_days + cfg.gap_days);
        for (long i = 0; i < per_segment; ++i) t.push_back(t0 + static_cast<double>(i) * dt);
    }
    return t;
}

/// Unit-variance mixture of a scaled random walk and a few slow sinusoids.
inline Eigen::VectorXd latent_process(const std::vector<double>& times, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(times.size());
    Eigen::VectorXd v(n);
    std::normal_distribution<double> step(0.0, 1.0);
    double walk = 0.0;
    std::uniform_real_distribution<double> period(2.0, 20.0), phase(0.0, 2.0 * std::numbers::pi), amp(0.3, 1.0);
    const double p1 = period(rng), p2 = period(rng), ph1 = phase(rng), ph2 = phase(rng), a1 = amp(rng), a2 = amp(rng);
    for (Eigen::Index i = 0; i < n; ++i) {
        walk += step(rng);
        v[i] = walk;
    }
    if (n > 1) {
        v.array() -= v.mean();
        const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(n));
        if (sd > 0.0) v /= sd;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = times[static_cast<std::size_t>(i)];
        v[i] += a1 * std::sin(2.0 * std::numbers::pi * t / p1 + ph1) + a2 * std::sin(2.0 * std::numbers::pi * t / p2 + ph2);
    }
    if (n > 1) {
        v.array() -= v.mean();
        const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(n));
        if (sd > 0.0) v /= sd;
    }
    return v;
}

}  // namespace detail

/// Builds catalog, pixel curves and ground truth. Every star draws from its
/// own derived seed, so the scene is independent of generation order.
inline Scene gen_scene(const SceneConfig& cfg) {
    cfg.check();
    Scene scene;
    scene.times = detail::scene_times(cfg);
    const std::size_t n = scene.times.size();
    const int k = cfg.systematics_dim;

    scene.latents.resize(static_cast<Eigen::Index>(n), k);
    {
        Rng rng(derive_seed(cfg.seed, 0));
        for (int j = 0; j < k; ++j) scene.latents.col(j) = detail::latent_process(scene.times, rng);
    }
    std::vector<std::vector<double>> ccd_direction(static_cast<std::size_t>(cfg.n_ccds));
    {
        Rng rng(derive_seed(cfg.seed, 1));
        std::uniform_real_distribution<double> mag(0.5, 1.0);
        std::bernoulli_distribution sign(0.5);
        for (auto& dir : ccd_direction)
            for (int j = 0; j < k; ++j) dir.push_back((sign(rng) ? 1.0 : -1.0) * mag(rng));
    }

    std::map<std::string, const TransitSpec*> transit_of;
    for (const auto& t : cfg.transits) transit_of[t.star_id] = &t;

    for (int s = 0; s < cfg.n_stars; ++s) {
        Rng rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(s)));
        StarEntry e;
        e.star_id = SceneConfig::star_name(s);
        e.ccd_id = s % cfg.n_ccds;
        e.row = std::uniform_real_distribution<double>(0.0, cfg.ccd_size)(rng);
        e.col = std::uniform_real_distribution<double>(0.0, cfg.ccd_size)(rng);
        e.magnitude = std::uniform_real_distribution<double>(10.0, 15.0)(rng);
        const double star_flux = 1e5 * std::pow(10.0, -0.4 * (e.magnitude - 10.0));

        StarTruth truth;
        truth.in_transit.assign(n, false);
        truth.q_true.assign(n, 0.0);
        if (const auto it = transit_of.find(e.star_id); it != transit_of.end()) {
            const auto& t = *it->second;
            truth.in_transit = transit_mask(scene.times, t.period_days, t.epoch_days, t.duration_hours);
            truth.depth = t.depth;
            for (std::size_t i = 0; i < n; ++i)
                if (truth.in_transit[i]) truth.q_true[i] = -t.depth;
        }

        std::vector<double> weights;
        double wsum = 0.0;
        for (int p = 0; p < cfg.pixels_per_star; ++p) {
            weights.push_back(std::uniform_real_distribution<double>(0.75, 1.25)(rng));
            wsum += weights.back();
        }
        const auto& dir = ccd_direction[static_cast<std::size_t>(e.ccd_id)];
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int p = 0; p < cfg.pixels_per_star; ++p) {
            const double base = star_flux * weights[static_cast<std::size_t>(p)] / wsum;
            std::vector<double> loading(static_cast<std::size_t>(k));
            for (int j = 0; j < k; ++j)
                loading[static_cast<std::size_t>(j)] =
                    cfg.systematics_amplitude * (dir[static_cast<std::size_t>(j)] + cfg.loading_spread * gauss(rng));

            LightCurve lc;
            lc.star_id = SceneConfig::pixel_name(s, p);
            lc.times = scene.times;
            lc.flux.resize(n);
            lc.valid.assign(n, true);
            for (std::size_t i = 0; i < n; ++i) {
                double sys = 1.0;
                for (int j = 0; j < k; ++j)
                    sys += loading[static_cast<std::size_t>(j)] * scene.latents(static_cast<Eigen::Index>(i), j);
                const double noise = cfg.noise_sigma > 0.0 ? base * cfg.noise_sigma * gauss(rng) : 0.0;
                lc.flux[i] = base * (1.0 + truth.q_true[i]) * sys + noise;
            }
            e.pixel_ids.push_back(lc.star_id);
            scene.pixels.emplace(lc.star_id, std::move(lc));
        }
        scene.truth.emplace(e.star_id, std::move(truth));
        scene.catalog.entries.push_back(std::move(e));
    }
    return scene;
}

/// `star_id,time,in_transit,q_true`
inline void write_truth(std::ostream& out, const Scene& scene) {
    out << "star_id,time,in_transit,q_true\n";
    for (const auto& e : scene.catalog.entries) {
        const auto& t = scene.truth.at(e.star_id);
        for (std::size_t i = 0; i < scene.times.size(); ++i)
            out << e.star_id << ',' << detail::format_double(scene.times[i]) << ',' << (t.in_transit[i] ? 1 : 0) << ','
                << detail::format_double(t.q_true[i]) << '\n';
    }
}

}  // namespace halfsib
