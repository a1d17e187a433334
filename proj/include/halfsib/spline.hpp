#pragma once

// Cubic B-spline feature expansion with knots at empirical quantiles; turns
// the linear ridge solver into a penalized additive spline regressor.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "halfsib/ridge.hpp"

namespace halfsib {

/// Knot vector with the boundary knots repeated (degree + 1) times.
struct SplineBasis {
    std::vector<double> knots;
    int degree = 3;

    /// Number of basis functions.
    [[nodiscard]] int size() const { return static_cast<int>(knots.size()) - degree - 1; }

    /// `n_knots` distinct knots at equally spaced quantiles of `x`,
    /// including the minimum and maximum. Repeated quantiles are merged.
    static SplineBasis from_quantiles(const Eigen::Ref<const Eigen::VectorXd>& x, int n_knots = 10, int degree = 3) {
        if (n_knots < 2) throw std::invalid_argument("spline basis: need at least 2 knots");
        if (x.size() == 0) throw std::invalid_argument("spline basis: empty input");
        std::vector<double> sorted(x.data(), x.data() + x.size());
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> inner;
        for (int k = 0; k < n_knots; ++k) {
            const double pos = static_cast<double>(k) / (n_knots - 1) * static_cast<double>(sorted.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, sorted.size() - 1);
            const double q = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
            if (inner.empty() || q > inner.back()) inner.push_back(q);
        }
        SplineBasis b;
        b.degree = degree;
        if (inner.size() < 2) return b;  // constant input: no basis
        for (int r = 0; r < degree; ++r) b.knots.push_back(inner.front());
        b.knots.insert(b.knots.end(), inner.begin(), inner.end());
        for (int r = 0; r < degree; ++r) b.knots.push_back(inner.back());
        return b;
    }

    /// Basis values at `v` (Cox-de Boor). Inputs outside the knot span are
    /// clamped to it.
    [[nodiscard]] Eigen::VectorXd evaluate(double v) const {
        const int m = size();
        Eigen::VectorXd out = Eigen::VectorXd::Zero(std::max(m, 0));
        if (m <= 0) return out;
        const double lo = knots.front(), hi = knots.back();
        v = std::clamp(v, lo, hi);

        // span index s with knots[s] <= v < knots[s+1], last non-empty span at the right end
        auto it = std::upper_bound(knots.begin(), knots.end(), v);
        auto s = static_cast<int>(it - knots.begin()) - 1;
        s = std::min(s, m - 1);
        while (s > degree && knots[static_cast<std::size_t>(s)] == knots[static_cast<std::size_t>(s + 1)]) --s;

        std::vector<double> nvals(static_cast<std::size_t>(degree + 1), 0.0);
        nvals[0] = 1.0;
        std::vector<double> left(static_cast<std::size_t>(degree + 1)), right(static_cast<std::size_t>(degree + 1));
        for (int j = 1; j <= degree; ++j) {
            left[static_cast<std::size_t>(j)] = v - knots[static_cast<std::size_t>(s + 1 - j)];
            right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(s + j)] - v;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
                const double temp = denom != 0.0 ? nvals[static_cast<std::size_t>(r)] / denom : 0.0;
                nvals[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
                saved = left[static_cast<std::size_t>(j - r)] * temp;
            }
            nvals[static_cast<std::size_t>(j)] = saved;
        }
        for (int r = 0; r <= degree; ++r) {
            const int idx = s - degree + r;
            if (idx >= 0 && idx < m) out[idx] = nvals[static_cast<std::size_t>(r)];
        }
        return out;
    }
};

/// Penalized spline expansion of one feature column.
///
/// The B-spline coefficients carry a second-order difference penalty
/// (a P-spline). It is folded into the design so the plain ridge solver
/// applies: with D the difference operator, the columns B D^T (D D^T)^-1
/// have an identity penalty equal to |D beta|^2. The penalty's null space
/// (constant and linear trend in the coefficients) is the intercept plus one
/// trend column B idx, multiplied by `trend_scale`; a large scale leaves the
/// trend effectively unpenalized.
inline DesignMatrix spline_features(const Eigen::Ref<const Eigen::VectorXd>& x, int n_knots, const std::string& name,
                                    double trend_scale = 1.0) {
    const auto basis = SplineBasis::from_quantiles(x, n_knots);
    const int m = basis.size();
    if (m < 3) return {Eigen::MatrixXd(x.size(), 0), {}};

    Eigen::MatrixXd b(x.size(), m);
    for (Eigen::Index i = 0; i < x.size(); ++i) b.row(i) = basis.evaluate(x[i]).transpose();
    Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(m - 2, m);
    for (int i = 0; i < m - 2; ++i) {
        diff(i, i) = 1.0;
        diff(i, i + 1) = -2.0;
        diff(i, i + 2) = 1.0;
    }
    const Eigen::MatrixXd dd = diff * diff.transpose();
    const Eigen::MatrixXd lift = diff.transpose() * dd.llt().solve(Eigen::MatrixXd::Identity(m - 2, m - 2));
    Eigen::VectorXd trend(m);
    for (int j = 0; j < m; ++j) trend[j] = j - 0.5 * (m - 1);

    Eigen::MatrixXd v(x.size(), m - 1);
    v.leftCols(m - 2) = b * lift;
    v.col(m - 2) = trend_scale * (b * trend);
    std::vector<std::string> ids;
    for (int j = 0; j < m - 2; ++j) ids.push_back(name + "_s" + std::to_string(j));
    ids.push_back(name + "_trend");
    return {std::move(v), std::move(ids)};
}

}  // namespace halfsib
