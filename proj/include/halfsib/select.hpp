#pragma once

// Predictor-pool construction: pick pixels of other stars that share the
// target's systematics but cannot see its light.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "halfsib/detail/text.hpp"
#include "halfsib/lightcurve.hpp"

namespace halfsib {

struct SelectionPolicy {
    int n_pixels = 4000;
    double min_distance = 20.0;  // pixels, Chebyshev
    bool same_ccd = true;
    bool magnitude_rank = true;  // false: admit in star_id order

    void check() const {
        if (n_pixels < 1) throw std::invalid_argument("selection policy: n_pixels must be >= 1");
        if (!(min_distance >= 0.0)) throw std::invalid_argument("selection policy: min_distance must be >= 0");
    }
};

/// Thrown when no predictor survives the policy; the message names the
/// constraint that removed the last candidates.
class EmptyPoolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdmittedStar {
    const StarEntry* star = nullptr;
    double delta_magnitude = 0.0;
    double distance = 0.0;
};

struct Selection {
    std::vector<std::string> pixel_ids;  // in admission order
    std::vector<AdmittedStar> stars;
    /// End offset into `pixel_ids` after each admitted star.
    std::vector<std::size_t> star_boundaries;
};

inline double chebyshev_distance(const StarEntry& a, const StarEntry& b) {
    return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

/// Admits whole stars, nearest in magnitude first (ties by star_id), until at
/// least `n_pixels` pixels are collected. The last star is kept whole, so the
/// count may overshoot.
inline Selection select_predictor_stars(const std::string& target, const StarCatalog& catalog,
                                        const SelectionPolicy& policy) {
    policy.check();
    const StarEntry* t = catalog.find(target);
    if (!t) throw std::invalid_argument("select_predictors: target '" + target + "' not in catalog");

    std::vector<AdmittedStar> pool;
    for (const auto& e : catalog.entries)
        if (e.star_id != t->star_id) pool.push_back({&e, std::abs(e.magnitude - t->magnitude), chebyshev_distance(e, *t)});
    if (pool.empty()) throw EmptyPoolError("empty predictor pool: no other stars");

    if (policy.same_ccd) {
        std::erase_if(pool, [&](const AdmittedStar& a) { return a.star->ccd_id != t->ccd_id; });
        if (pool.empty()) throw EmptyPoolError("empty predictor pool: ccd constraint");
    }
    std::erase_if(pool, [&](const AdmittedStar& a) { return a.distance < policy.min_distance; });
    if (pool.empty()) throw EmptyPoolError("empty predictor pool: distance constraint");
    std::erase_if(pool, [](const AdmittedStar& a) { return a.star->pixel_ids.empty(); });
    if (pool.empty()) throw EmptyPoolError("empty predictor pool: candidate stars have no pixels");

    std::sort(pool.begin(), pool.end(), [&](const AdmittedStar& a, const AdmittedStar& b) {
        if (policy.magnitude_rank && a.delta_magnitude != b.delta_magnitude) return a.delta_magnitude < b.delta_magnitude;
        return a.star->star_id < b.star->star_id;
    });

    Selection sel;
    for (const auto& a : pool) {
        if (static_cast<int>(sel.pixel_ids.size()) >= policy.n_pixels) break;
        sel.stars.push_back(a);
        sel.pixel_ids.insert(sel.pixel_ids.end(), a.star->pixel_ids.begin(), a.star->pixel_ids.end());
        sel.star_boundaries.push_back(sel.pixel_ids.size());
    }
    return sel;
}

inline std::vector<std::string> select_predictors(const std::string& target, const StarCatalog& catalog,
                                                  const SelectionPolicy& policy) {
    return select_predictor_stars(target, catalog, policy).pixel_ids;
}

/// Dry-run listing of the admitted stars.
inline void write_selection(std::ostream& out, const Selection& sel) {
    out << "star_id,ccd_id,row,col,magnitude,delta_magnitude,distance,n_pixels\n";
    for (const auto& a : sel.stars)
        out << a.star->star_id << ',' << a.star->ccd_id << ',' << detail::format_double(a.star->row) << ','
            << detail::format_double(a.star->col) << ',' << detail::format_double(a.star->magnitude) << ','
            << detail::format_double(a.delta_magnitude) << ',' << detail::format_double(a.distance) << ','
            << a.star->pixel_ids.size() << '\n';
}

}  // namespace halfsib
