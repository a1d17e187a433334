#pragma once

// L2-regularized least squares with an unpenalized intercept, plus
// contiguous-block k-fold cross-validation over a lambda grid.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "halfsib/detail/text.hpp"

namespace halfsib {

/// Predictor block: one row per cadence, one column per predictor.
struct DesignMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> column_ids;

    DesignMatrix() = default;
    explicit DesignMatrix(Eigen::MatrixXd v) : DesignMatrix(std::move(v), {}) {}
    DesignMatrix(Eigen::MatrixXd v, std::vector<std::string> ids) : values(std::move(v)), column_ids(std::move(ids)) {
        if (column_ids.empty())
            for (Eigen::Index j = 0; j < values.cols(); ++j) column_ids.push_back("c" + std::to_string(j));
    }

    [[nodiscard]] Eigen::Index rows() const { return values.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return values.cols(); }

    void check() const {
        if (static_cast<Eigen::Index>(column_ids.size()) != values.cols())
            throw std::invalid_argument("design matrix: column_ids length differs from column count");
        if (!values.allFinite()) throw std::invalid_argument("design matrix: non-finite entry");
    }

    /// Keeps rows where `mask` is true.
    [[nodiscard]] DesignMatrix select_rows(const std::vector<bool>& mask) const {
        if (static_cast<Eigen::Index>(mask.size()) != rows())
            throw std::invalid_argument("design matrix: row mask length mismatch");
        const auto kept = static_cast<Eigen::Index>(std::count(mask.begin(), mask.end(), true));
        Eigen::MatrixXd out(kept, cols());
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < rows(); ++i)
            if (mask[static_cast<std::size_t>(i)]) out.row(r++) = values.row(i);
        return {std::move(out), column_ids};
    }

    /// Side-by-side concatenation.
    [[nodiscard]] static DesignMatrix hstack(const DesignMatrix& a, const DesignMatrix& b) {
        if (a.rows() != b.rows() && a.cols() > 0 && b.cols() > 0)
            throw std::invalid_argument("design matrix: hstack row mismatch");
        const Eigen::Index n = a.cols() > 0 ? a.rows() : b.rows();
        Eigen::MatrixXd v(n, a.cols() + b.cols());
        if (a.cols() > 0) v.leftCols(a.cols()) = a.values;
        if (b.cols() > 0) v.rightCols(b.cols()) = b.values;
        auto ids = a.column_ids;
        ids.insert(ids.end(), b.column_ids.begin(), b.column_ids.end());
        return {std::move(v), std::move(ids)};
    }
};

struct RidgeModel {
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    double lambda = 0.0;
    std::vector<std::string> column_ids;
};

struct CvPoint {
    double lambda = 0.0;
    double mean_error = 0.0;
};

struct CvReport {
    std::vector<CvPoint> grid;
    double best_lambda = 0.0;
    int fold_count = 0;
};

namespace detail {

struct Centered {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    Eigen::RowVectorXd x_mean;
    double y_mean = 0.0;
};

inline Centered center(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
    Centered c;
    c.x_mean = x.colwise().mean();
    c.y_mean = y.mean();
    c.x = x.rowwise() - c.x_mean;
    c.y = y.array() - c.y_mean;
    return c;
}

/// Coefficients of the centered problem.
inline Eigen::VectorXd solve_centered(const Eigen::MatrixXd& xc, const Eigen::VectorXd& yc, double lambda) {
    const Eigen::Index n = xc.rows();
    const Eigen::Index p = xc.cols();
    if (p == 0) return Eigen::VectorXd(0);
    if (lambda == 0.0) return xc.completeOrthogonalDecomposition().solve(yc);

    if (p <= n) {
        Eigen::MatrixXd a = xc.transpose() * xc;
        a.diagonal().array() += lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() == Eigen::Success) return llt.solve(xc.transpose() * yc);
    } else {
        Eigen::MatrixXd k = xc * xc.transpose();
        k.diagonal().array() += lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() == Eigen::Success) return xc.transpose() * llt.solve(yc);
    }
    // Numerically indefinite: solve the augmented least-squares form instead.
    Eigen::MatrixXd aug(n + p, p);
    aug.topRows(n) = xc;
    aug.bottomRows(p) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
    rhs.head(n) = yc;
    return aug.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace detail

/// Minimizes sum_i (y_i - x_i.w - b)^2 + lambda |w|^2 with b unpenalized.
///
/// Columns are centered and the intercept recovered from the means. For
/// lambda > 0 the Cholesky factorization runs on whichever of the primal
/// (p x p) or dual (n x n) Gram matrices is smaller. At lambda == 0 the
/// minimum-norm least-squares solution is returned, so collinear columns do
/// not raise.
inline RidgeModel fit_ridge(const DesignMatrix& x, const Eigen::VectorXd& y, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("fit_ridge: lambda must be finite and >= 0");
    if (x.rows() < 1) throw std::invalid_argument("fit_ridge: need at least one row");
    if (y.size() != x.rows()) throw std::invalid_argument("fit_ridge: y length differs from row count");
    if (!y.allFinite()) throw std::invalid_argument("fit_ridge: non-finite target value");
    x.check();

    const auto c = detail::center(x.values, y);
    RidgeModel m;
    m.coefficients = detail::solve_centered(c.x, c.y, lambda);
    m.intercept = c.y_mean - (x.cols() > 0 ? c.x_mean.dot(m.coefficients) : 0.0);
    m.lambda = lambda;
    m.column_ids = x.column_ids;
    if (!m.coefficients.allFinite() || !std::isfinite(m.intercept))
        throw std::runtime_error("fit_ridge: solution is not finite; increase lambda");
    return m;
}

inline Eigen::VectorXd predict(const RidgeModel& model, const DesignMatrix& x) {
    if (x.cols() != model.coefficients.size())
        throw std::invalid_argument("predict: design matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                                    std::to_string(model.coefficients.size()));
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), model.intercept);
    if (x.cols() > 0) out.noalias() += x.values * model.coefficients;
    return out;
}

/// Sum of squared residuals plus lambda |w|^2.
inline double penalized_objective(const DesignMatrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                  double intercept, double lambda) {
    Eigen::VectorXd r = y.array() - intercept;
    if (x.cols() > 0) r.noalias() -= x.values * w;
    return r.squaredNorm() + lambda * w.squaredNorm();
}

/// Nine log-spaced values from 1e-4 to 1e4, scaled by trace(Xc^T Xc) / p.
inline std::vector<double> default_lambda_grid(const DesignMatrix& x) {
    double scale = 1.0;
    if (x.cols() > 0 && x.rows() > 0) {
        const Eigen::MatrixXd xc = x.values.rowwise() - x.values.colwise().mean();
        const double t = xc.squaredNorm() / static_cast<double>(x.cols());
        if (t > 0.0 && std::isfinite(t)) scale = t;
    }
    std::vector<double> grid;
    for (int e = -4; e <= 4; ++e) grid.push_back(scale * std::pow(10.0, e));
    return grid;
}

/// k-fold cross-validation over `lambdas`. Folds are contiguous blocks of
/// rows (time order is preserved, nothing is shuffled), so the result does
/// not depend on `seed`; the argument is kept so callers can thread one seed
/// through every stochastic stage. Ties in mean error go to the larger lambda.
inline CvReport cross_validate(const DesignMatrix& x, const Eigen::VectorXd& y, const std::vector<double>& lambdas, int k,
                               [[maybe_unused]] std::uint64_t seed = 0) {
    if (k < 2) throw std::invalid_argument("cross_validate: need at least 2 folds");
    if (lambdas.empty()) throw std::invalid_argument("cross_validate: empty lambda grid");
    if (x.rows() < k)
        throw std::invalid_argument("cross_validate: " + std::to_string(x.rows()) + " rows is fewer than " +
                                    std::to_string(k) + " folds");
    if (y.size() != x.rows()) throw std::invalid_argument("cross_validate: y length differs from row count");
    for (double l : lambdas)
        if (!(l >= 0.0) || !std::isfinite(l)) throw std::invalid_argument("cross_validate: lambda must be finite and >= 0");
    x.check();

    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    std::vector<double> sse(lambdas.size(), 0.0);

    for (int f = 0; f < k; ++f) {
        const Eigen::Index lo = n * f / k;
        const Eigen::Index hi = n * (f + 1) / k;
        const Eigen::Index n_test = hi - lo;
        const Eigen::Index n_train = n - n_test;
        if (n_test == 0) continue;

        Eigen::MatrixXd xtr(n_train, p);
        Eigen::VectorXd ytr(n_train);
        xtr.topRows(lo) = x.values.topRows(lo);
        xtr.bottomRows(n - hi) = x.values.bottomRows(n - hi);
        ytr.head(lo) = y.head(lo);
        ytr.tail(n - hi) = y.tail(n - hi);
        const auto c = detail::center(xtr, ytr);
        const Eigen::MatrixXd xte = x.values.middleRows(lo, n_test).rowwise() - c.x_mean;
        const Eigen::VectorXd yte = y.segment(lo, n_test).array() - c.y_mean;

        if (p == 0) {
            for (auto& s : sse) s += yte.squaredNorm();
            continue;
        }

        // One eigendecomposition of the smaller Gram matrix serves every lambda.
        const bool primal = p <= n_train;
        const Eigen::MatrixXd gram = primal ? Eigen::MatrixXd(c.x.transpose() * c.x) : Eigen::MatrixXd(c.x * c.x.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
        const double tol = ev.size() > 0 ? ev.maxCoeff() * static_cast<double>(gram.rows()) *
                                               std::numeric_limits<double>::epsilon()
                                         : 0.0;
        const Eigen::MatrixXd& basis = eig.eigenvectors();
        // primal: w = V (L + lambda)^-1 V^T Xc^T y ; dual: w = Xc^T U (L + lambda)^-1 U^T y
        const Eigen::VectorXd proj = primal ? Eigen::VectorXd(basis.transpose() * (c.x.transpose() * c.y))
                                            : Eigen::VectorXd(basis.transpose() * c.y);
        const Eigen::MatrixXd test_map = primal ? Eigen::MatrixXd(xte * basis)
                                                : Eigen::MatrixXd(xte * (c.x.transpose() * basis));

        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            Eigen::VectorXd scaled(ev.size());
            for (Eigen::Index j = 0; j < ev.size(); ++j) {
                const double denom = ev[j] + lambdas[li];
                scaled[j] = (lambdas[li] == 0.0 && ev[j] <= tol) ? 0.0 : proj[j] / denom;
            }
            sse[li] += (yte - test_map * scaled).squaredNorm();
        }
    }

    CvReport report;
    report.fold_count = k;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
        const double err = sse[li] / static_cast<double>(n);
        report.grid.push_back({lambdas[li], err});
        if (err < best || (err == best && lambdas[li] > report.best_lambda)) {
            best = err;
            report.best_lambda = lambdas[li];
        }
    }
    return report;
}

inline void write_cv_report(std::ostream& out, const CvReport& report) {
    out << "lambda,mean_error\n";
    for (const auto& g : report.grid)
        out << detail::format_double(g.lambda) << ',' << detail::format_double(g.mean_error) << '\n';
}

}  // namespace halfsib
