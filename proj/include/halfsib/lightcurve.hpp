#pragma once

// Time-indexed flux series, star catalogs and their CSV exchange formats.
//
// Light-curve CSV:  time,flux,valid      (valid is 0 or 1)
// Catalog CSV:      star_id,ccd_id,row,col,magnitude,pixel_ids   (pixel_ids ';'-separated)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "halfsib/detail/text.hpp"

namespace halfsib {

/// Raised for malformed input files; the message names the offending line.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One flux series. Times are in days and strictly increasing; cadences with
/// `valid == false` carry no usable flux.
struct LightCurve {
    std::string star_id;
    std::vector<double> times;
    std::vector<double> flux;
    std::vector<bool> valid;

    [[nodiscard]] std::size_t size() const { return times.size(); }
    [[nodiscard]] bool empty() const { return times.empty(); }

    [[nodiscard]] std::size_t valid_count() const {
        return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
    }

    /// Throws std::invalid_argument when an invariant is broken.
    void check() const {
        if (flux.size() != times.size() || valid.size() != times.size())
            throw std::invalid_argument("light curve '" + star_id + "': times/flux/valid lengths differ");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw std::invalid_argument("light curve '" + star_id + "': times not strictly increasing at index " +
                                            std::to_string(i));
        for (std::size_t i = 0; i < times.size(); ++i)
            if (valid[i] && !std::isfinite(flux[i]))
                throw std::invalid_argument("light curve '" + star_id + "': non-finite flux flagged valid at index " +
                                            std::to_string(i));
    }

    /// Copy of the half-open index range [start, end).
    [[nodiscard]] LightCurve slice(std::size_t start, std::size_t end) const {
        LightCurve out;
        out.star_id = star_id;
        out.times.assign(times.begin() + static_cast<std::ptrdiff_t>(start), times.begin() + static_cast<std::ptrdiff_t>(end));
        out.flux.assign(flux.begin() + static_cast<std::ptrdiff_t>(start), flux.begin() + static_cast<std::ptrdiff_t>(end));
        out.valid.assign(valid.begin() + static_cast<std::ptrdiff_t>(start), valid.begin() + static_cast<std::ptrdiff_t>(end));
        return out;
    }
};

/// Contiguous block [start_index, end_index) of cadences fitted together.
struct CadenceSegment {
    std::size_t start_index = 0;
    std::size_t end_index = 0;

    [[nodiscard]] std::size_t length() const { return end_index - start_index; }
    friend bool operator==(const CadenceSegment&, const CadenceSegment&) = default;
};

struct StarEntry {
    std::string star_id;
    int ccd_id = 0;
    double row = 0.0;
    double col = 0.0;
    double magnitude = 0.0;
    std::vector<std::string> pixel_ids;
};

struct StarCatalog {
    std::vector<StarEntry> entries;

    [[nodiscard]] const StarEntry* find(const std::string& star_id) const {
        for (const auto& e : entries)
            if (e.star_id == star_id) return &e;
        return nullptr;
    }

    void check() const {
        std::unordered_set<std::string> seen;
        for (const auto& e : entries) {
            if (!seen.insert(e.star_id).second) throw std::invalid_argument("catalog: duplicate star_id '" + e.star_id + "'");
            if (!(e.row >= 0.0) || !(e.col >= 0.0))
                throw std::invalid_argument("catalog: negative position for star '" + e.star_id + "'");
            if (!std::isfinite(e.magnitude))
                throw std::invalid_argument("catalog: non-finite magnitude for star '" + e.star_id + "'");
        }
    }
};

/// Pixel- or star-level curves keyed by identifier.
using LightCurveStore = std::map<std::string, LightCurve>;

// ---------------------------------------------------------------------------
// Light-curve CSV

/// Line numbers in error messages count data rows (1-based, header excluded).
inline LightCurve parse_lightcurve(std::istream& in, std::string star_id = {}) {
    LightCurve lc;
    lc.star_id = std::move(star_id);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header 'time,flux,valid'");
    {
        const auto cols = detail::split(line, ',');
        if (cols.size() != 3 || cols[0] != "time" || cols[1] != "flux" || cols[2] != "valid")
            throw ParseError("bad header '" + std::string(detail::trim(line)) + "', expected 'time,flux,valid'");
    }
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto where = " at line " + std::to_string(row);
        const auto cols = detail::split(line, ',');
        if (cols.size() != 3) throw ParseError("expected 3 fields" + where);
        const auto t = detail::parse_double(cols[0]);
        const auto f = detail::parse_double(cols[1]);
        const auto v = detail::parse_int(cols[2]);
        if (!t || !std::isfinite(*t)) throw ParseError("malformed time" + where);
        if (!f) throw ParseError("malformed flux" + where);
        if (!v || (*v != 0 && *v != 1)) throw ParseError("malformed valid flag" + where);
        if (!lc.times.empty() && !(*t > lc.times.back())) throw ParseError("non-monotone time" + where);
        lc.times.push_back(*t);
        lc.flux.push_back(*f);
        lc.valid.push_back(*v == 1 && std::isfinite(*f));
    }
    return lc;
}

inline LightCurve read_lightcurve(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open light curve file '" + path.string() + "'");
    try {
        return parse_lightcurve(in, path.stem().string());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

inline void write_lightcurve(std::ostream& out, const LightCurve& lc) {
    out << "time,flux,valid\n";
    for (std::size_t i = 0; i < lc.size(); ++i)
        out << detail::format_double(lc.times[i]) << ',' << detail::format_double(lc.flux[i]) << ','
            << (lc.valid[i] ? 1 : 0) << '\n';
}

inline void write_lightcurve(const std::filesystem::path& path, const LightCurve& lc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    write_lightcurve(out, lc);
}

/// Loads every `<id>.csv` in a directory, keyed by file stem.
inline LightCurveStore read_lightcurve_dir(const std::filesystem::path& dir) {
    LightCurveStore store;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        auto lc = read_lightcurve(entry.path());
        store.emplace(lc.star_id, std::move(lc));
    }
    return store;
}

// ---------------------------------------------------------------------------
// Catalog CSV

inline StarCatalog parse_catalog(std::istream& in) {
    StarCatalog cat;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing catalog header");
    {
        const auto cols = detail::split(line, ',');
        const std::vector<std::string_view> expect{"star_id", "ccd_id", "row", "col", "magnitude", "pixel_ids"};
        if (cols != expect)
            throw ParseError("bad catalog header, expected 'star_id,ccd_id,row,col,magnitude,pixel_ids'");
    }
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto where = " at line " + std::to_string(row);
        const auto cols = detail::split(line, ',');
        if (cols.size() != 6) throw ParseError("expected 6 fields" + where);
        StarEntry e;
        e.star_id = std::string(cols[0]);
        if (e.star_id.empty()) throw ParseError("empty star_id" + where);
        const auto ccd = detail::parse_int(cols[1]);
        const auto r = detail::parse_double(cols[2]);
        const auto c = detail::parse_double(cols[3]);
        const auto m = detail::parse_double(cols[4]);
        if (!ccd || !r || !c || !m) throw ParseError("malformed numeric field" + where);
        e.ccd_id = static_cast<int>(*ccd);
        e.row = *r;
        e.col = *c;
        e.magnitude = *m;
        if (!cols[5].empty())
            for (auto p : detail::split(cols[5], ';'))
                if (!p.empty()) e.pixel_ids.emplace_back(p);
        cat.entries.push_back(std::move(e));
    }
    try {
        cat.check();
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    return cat;
}

inline StarCatalog read_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open catalog file '" + path.string() + "'");
    return parse_catalog(in);
}

inline void write_catalog(std::ostream& out, const StarCatalog& cat) {
    out << "star_id,ccd_id,row,col,magnitude,pixel_ids\n";
    for (const auto& e : cat.entries) {
        out << e.star_id << ',' << e.ccd_id << ',' << detail::format_double(e.row) << ','
            << detail::format_double(e.col) << ',' << detail::format_double(e.magnitude) << ',';
        for (std::size_t i = 0; i < e.pixel_ids.size(); ++i) out << (i ? ";" : "") << e.pixel_ids[i];
        out << '\n';
    }
}

inline void write_catalog(const std::filesystem::path& path, const StarCatalog& cat) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    write_catalog(out, cat);
}

// ---------------------------------------------------------------------------

/// Splits the curve wherever consecutive cadences are more than `max_gap` days
/// apart. Segments are ordered, disjoint, maximal and cover every index.
inline std::vector<CadenceSegment> segment_by_gap(const LightCurve& lc, double max_gap) {
    if (!(max_gap > 0.0)) throw std::invalid_argument("segment_by_gap: max_gap must be > 0");
    std::vector<CadenceSegment> segments;
    if (lc.empty()) return segments;
    std::size_t start = 0;
    for (std::size_t i = 1; i < lc.size(); ++i) {
        if (lc.times[i] - lc.times[i - 1] > max_gap) {
            segments.push_back({start, i});
            start = i;
        }
    }
    segments.push_back({start, lc.size()});
    return segments;
}

}  // namespace halfsib
