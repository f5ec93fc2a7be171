#pragma once

// Small numerical building blocks shared across modules: natural cubic
// spline, bracketed root refinement, Levenberg-Marquardt with a numeric
// Jacobian, and a peak/FWHM measurement helper.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pairforge/errors.hpp"

namespace pairforge {

class CubicSpline {
  public:
    CubicSpline() = default;

    // xs strictly increasing.
    CubicSpline(std::vector<double> xs, std::vector<double> ys)
        : x_(std::move(xs)), y_(std::move(ys)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw SolveError("spline needs at least two samples");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw SolveError("spline abscissae must be strictly increasing");
        m_.assign(n, 0.0);
        if (n == 2) return;
        // Solve the natural-spline tridiagonal system for second derivatives.
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1];
            const double h1 = x_[i + 1] - x_[i];
            a[i] = h0 / 6.0;
            b[i] = (h0 + h1) / 3.0;
            c[i] = h1 / 6.0;
            d[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
        }
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
            if (i == 1) break;
        }
    }

    double min_x() const { return x_.front(); }
    double max_x() const { return x_.back(); }

    double operator()(double x) const {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double u = 1.0 - t;
        return u * y_[i] + t * y_[i + 1] +
               h * h / 6.0 *
                   ((u * u * u - u) * m_[i] + (t * t * t - t) * m_[i + 1]);
    }

    double derivative(double x) const {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double u = 1.0 - t;
        return (y_[i + 1] - y_[i]) / h +
               h / 6.0 *
                   ((3.0 * t * t - 1.0) * m_[i + 1] - (3.0 * u * u - 1.0) * m_[i]);
    }

  private:
    std::size_t segment(double x) const {
        if (x < x_.front() || x > x_.back())
            throw RangeError("spline query outside sampled range");
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - x_.begin());
        if (i > 0) --i;
        if (i + 1 >= x_.size()) i = x_.size() - 2;
        return i;
    }

    std::vector<double> x_, y_, m_;
};

// Secant refinement of a bracketed sign change, with bisection fallback.
inline double refine_bracketed_root(const std::function<double(double)>& f,
                                    double lo, double hi, double x_tol,
                                    int max_iter = 80) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (flo * fhi > 0.0) throw SolveError("root refinement without sign change");
    for (int it = 0; it < max_iter; ++it) {
        double mid = hi - fhi * (hi - lo) / (fhi - flo);  // secant step
        if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0 || hi - lo < x_tol) return mid;
        if (flo * fm < 0.0) {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

struct LmResult {
    std::vector<double> params;
    double rms = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Levenberg-Marquardt on residuals(p) with forward-difference Jacobian.
// Dense normal equations; fine for the handful of parameters used here.
inline LmResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    std::vector<double> p, int max_iter = 200, double f_tol = 1e-12) {
    const std::size_t np = p.size();
    auto sum_sq = [](const std::vector<double>& r) {
        double s = 0.0;
        for (double v : r) s += v * v;
        return s;
    };
    std::vector<double> r = residuals(p);
    const std::size_t nr = r.size();
    double cost = sum_sq(r);
    double lambda = 1e-3;
    LmResult out;
    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it + 1;
        // Jacobian by forward differences.
        std::vector<std::vector<double>> J(np, std::vector<double>(nr));
        for (std::size_t j = 0; j < np; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(p[j]));
            std::vector<double> pj = p;
            pj[j] += h;
            const std::vector<double> rj = residuals(pj);
            for (std::size_t i = 0; i < nr; ++i) J[j][i] = (rj[i] - r[i]) / h;
        }
        // Normal equations (JtJ + lambda diag) dp = -Jt r.
        std::vector<std::vector<double>> A(np, std::vector<double>(np, 0.0));
        std::vector<double> g(np, 0.0);
        for (std::size_t a = 0; a < np; ++a) {
            for (std::size_t b = a; b < np; ++b) {
                double s = 0.0;
                for (std::size_t i = 0; i < nr; ++i) s += J[a][i] * J[b][i];
                A[a][b] = A[b][a] = s;
            }
            double s = 0.0;
            for (std::size_t i = 0; i < nr; ++i) s += J[a][i] * r[i];
            g[a] = s;
        }
        bool improved = false;
        for (int attempt = 0; attempt < 12 && !improved; ++attempt) {
            std::vector<std::vector<double>> M = A;
            for (std::size_t a = 0; a < np; ++a)
                M[a][a] += lambda * std::max(A[a][a], 1e-12);
            // Gaussian elimination with partial pivoting.
            std::vector<double> rhs(np);
            for (std::size_t a = 0; a < np; ++a) rhs[a] = -g[a];
            bool singular = false;
            for (std::size_t col = 0; col < np; ++col) {
                std::size_t piv = col;
                for (std::size_t row = col + 1; row < np; ++row)
                    if (std::abs(M[row][col]) > std::abs(M[piv][col])) piv = row;
                if (std::abs(M[piv][col]) < 1e-300) {
                    singular = true;
                    break;
                }
                std::swap(M[piv], M[col]);
                std::swap(rhs[piv], rhs[col]);
                for (std::size_t row = col + 1; row < np; ++row) {
                    const double w = M[row][col] / M[col][col];
                    for (std::size_t k = col; k < np; ++k) M[row][k] -= w * M[col][k];
                    rhs[row] -= w * rhs[col];
                }
            }
            if (singular) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> dp(np);
            for (std::size_t col = np; col-- > 0;) {
                double s = rhs[col];
                for (std::size_t k = col + 1; k < np; ++k) s -= M[col][k] * dp[k];
                dp[col] = s / M[col][col];
            }
            std::vector<double> pt = p;
            for (std::size_t a = 0; a < np; ++a) pt[a] += dp[a];
            const std::vector<double> rt = residuals(pt);
            const double ct = sum_sq(rt);
            if (ct < cost) {
                const double rel = (cost - ct) / std::max(cost, 1e-300);
                p = pt;
                r = rt;
                cost = ct;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (rel < f_tol) {
                    out.params = p;
                    out.rms = std::sqrt(cost / static_cast<double>(nr));
                    out.converged = true;
                    return out;
                }
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
    }
    out.params = p;
    out.rms = std::sqrt(cost / static_cast<double>(std::max<std::size_t>(nr, 1)));
    out.converged = true;
    return out;
}

struct PeakMeasurement {
    double center_x = 0.0;
    double height = 0.0;
    double fwhm = 0.0;
    double baseline = 0.0;
};

// Peak position, height and FWHM of a sampled curve, with linear
// interpolation of the half-maximum crossings. Baseline = min sample.
inline PeakMeasurement measure_peak(const std::vector<double>& xs,
                                    const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 3)
        throw SolveError("measure_peak needs at least three samples");
    std::size_t ipk = 0;
    double base = ys[0];
    for (std::size_t i = 0; i < ys.size(); ++i) {
        if (ys[i] > ys[ipk]) ipk = i;
        base = std::min(base, ys[i]);
    }
    PeakMeasurement m;
    m.baseline = base;
    m.height = ys[ipk] - base;
    m.center_x = xs[ipk];
    if (m.height <= 0.0) return m;
    const double half = base + 0.5 * m.height;
    double left = xs.front(), right = xs.back();
    for (std::size_t i = ipk; i-- > 0;) {
        if (ys[i] <= half) {
            left = xs[i] + (xs[i + 1] - xs[i]) * (half - ys[i]) / (ys[i + 1] - ys[i]);
            break;
        }
    }
    for (std::size_t i = ipk + 1; i < ys.size(); ++i) {
        if (ys[i] <= half) {
            right = xs[i - 1] +
                    (xs[i] - xs[i - 1]) * (ys[i - 1] - half) / (ys[i - 1] - ys[i]);
            break;
        }
    }
    m.fwhm = right - left;
    return m;
}

}  // namespace pairforge
