#pragma once

// Key-value text format for SceneConfig:
//
//   # comment
//   n_stars = 50
//   systematics_amplitude = 0.01
//   transit = S003, 7.3, 2.1, 10, 0.001   # star_id, period d, epoch d, duration h, depth
//
// Unknown keys are errors. `transit` may repeat.

#include <istream>
#include <ostream>
#include <string>

#include "halfsib/detail/text.hpp"
#include "halfsib/lightcurve.hpp"
#include "halfsib/synth.hpp"

namespace halfsib {

inline SceneConfig parse_scene_config(std::istream& in) {
    SceneConfig cfg;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto where = " at line " + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'key = value'" + where);
        const auto key = std::string(detail::trim(line.substr(0, eq)));
        const auto value = detail::trim(line.substr(eq + 1));

        auto num = [&]() {
            const auto v = detail::parse_double(value);
            if (!v) throw ParseError("bad number for '" + key + "'" + where);
            return *v;
        };
        auto integer = [&]() {
            const auto v = detail::parse_int(value);
            if (!v) throw ParseError("bad integer for '" + key + "'" + where);
            return *v;
        };

        if (key == "n_stars") cfg.n_stars = static_cast<int>(integer());
        else if (key == "pixels_per_star") cfg.pixels_per_star = static_cast<int>(integer());
        else if (key == "n_ccds") cfg.n_ccds = static_cast<int>(integer());
        else if (key == "systematics_dim") cfg.systematics_dim = static_cast<int>(integer());
        else if (key == "systematics_amplitude") cfg.systematics_amplitude = num();
        else if (key == "loading_spread") cfg.loading_spread = num();
        else if (key == "noise_sigma") cfg.noise_sigma = num();
        else if (key == "cadence_hours") cfg.cadence_hours = num();
        else if (key == "n_segments") cfg.n_segments = static_cast<int>(integer());
        else if (key == "segment_days") cfg.segment_days = num();
        else if (key == "gap_days") cfg.gap_days = num();
        else if (key == "ccd_size") cfg.ccd_size = num();
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(integer());
        else if (key == "transit") {
            const auto parts = detail::split(value, ',');
            if (parts.size() != 5) throw ParseError("transit needs star_id,period,epoch,duration_h,depth" + where);
            TransitSpec t;
            t.star_id = std::string(parts[0]);
            const auto p = detail::parse_double(parts[1]), e = detail::parse_double(parts[2]),
                       d = detail::parse_double(parts[3]), depth = detail::parse_double(parts[4]);
            if (!p || !e || !d || !depth) throw ParseError("bad transit number" + where);
            t.period_days = *p;
            t.epoch_days = *e;
            t.duration_hours = *d;
            t.depth = *depth;
            cfg.transits.push_back(std::move(t));
        } else {
            throw ParseError("unknown key '" + key + "'" + where);
        }
    }
    cfg.check();
    return cfg;
}

inline void write_scene_config(std::ostream& out, const SceneConfig& cfg) {
    using detail::format_double;
    out << "n_stars = " << cfg.n_stars << '\n'
        << "pixels_per_star = " << cfg.pixels_per_star << '\n'
        << "n_ccds = " << cfg.n_ccds << '\n'
        << "systematics_dim = " << cfg.systematics_dim << '\n'
        << "systematics_amplitude = " << format_double(cfg.systematics_amplitude) << '\n'
        << "loading_spread = " << format_double(cfg.loading_spread) << '\n'
        << "noise_sigma = " << format_double(cfg.noise_sigma) << '\n'
        << "cadence_hours = " << format_double(cfg.cadence_hours) << '\n'
        << "n_segments = " << cfg.n_segments << '\n'
        << "segment_days = " << format_double(cfg.segment_days) << '\n'
        << "gap_days = " << format_double(cfg.gap_days) << '\n'
        << "ccd_size = " << format_double(cfg.ccd_size) << '\n'
        << "seed = " << cfg.seed << '\n';
    for (const auto& t : cfg.transits)
        out << "transit = " << t.star_id << ", " << format_double(t.period_days) << ", " << format_double(t.epoch_days)
            << ", " << format_double(t.duration_hours) << ", " << format_double(t.depth) << '\n';
}

}  // namespace halfsib
