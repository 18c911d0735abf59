#pragma once

// Small numerical kernels shared across the library: standard normal
// cdf/quantile, the Kolmogorov distribution tail, fixed-size linear solves,
// polynomial least squares and bisection.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace bvr {

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Acklam's rational approximation refined with one Halley step against erfc.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::domain_error("normal_quantile: p must lie in [0,1]");
    }
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement; skipped in the far tails where exp(x^2/2) overflows
    // and the rational approximation is already accurate.
    if (std::fabs(x) < 8.0) {
        double e = normal_cdf(x) - p;
        double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
        x = x - u / (1.0 + x * u / 2.0);
    }
    return x;
}

// Survival function of the Kolmogorov distribution, Q(t) = P(K > t).
// Series 2*sum (-1)^{k-1} exp(-2 k^2 t^2) for large t, Jacobi theta form
// for small t.
inline double kolmogorov_sf(double t) {
    if (t <= 0.0) return 1.0;
    if (t < 1e-3) return 1.0;
    if (t < 1.18) {
        const double v = M_PI * M_PI / (8.0 * t * t);
        double sum = 0.0;
        for (int k = 1; k <= 20; k += 2)  // odd k
            sum += std::exp(-v * k * k);
        return 1.0 - std::sqrt(2.0 * M_PI) / t * sum;
    }
    double sum = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * t * t);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::max(0.0, 2.0 * sum);
}

using Vec3 = std::array<double, 3>;

struct Mat3 {
    std::array<double, 9> a{};
    double& operator()(std::size_t i, std::size_t j) { return a[3 * i + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[3 * i + j]; }
};

inline Mat3 operator*(const Mat3& m, double c) {
    Mat3 r = m;
    for (auto& v : r.a) v *= c;
    return r;
}

inline Vec3 mat3_vec(const Mat3& m, const Vec3& v) {
    Vec3 r{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) r[i] += m(i, j) * v[j];
    return r;
}

inline double dot3(const Vec3& u, const Vec3& v) {
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
}

// Gaussian elimination with partial pivoting, fixed small dimension.
template <std::size_t N>
bool solve_linear(std::array<std::array<double, N>, N> A, std::array<double, N>& b) {
    for (std::size_t col = 0; col < N; ++col) {
        std::size_t piv = col;
        double best = std::fabs(A[col][col]);
        for (std::size_t i = col + 1; i < N; ++i) {
            double v = std::fabs(A[i][col]);
            if (v > best) { best = v; piv = i; }
        }
        if (best == 0.0) return false;
        if (piv != col) { std::swap(A[piv], A[col]); std::swap(b[piv], b[col]); }
        for (std::size_t i = col + 1; i < N; ++i) {
            double f = A[i][col] / A[col][col];
            if (f == 0.0) continue;
            for (std::size_t j = col; j < N; ++j) A[i][j] -= f * A[col][j];
            b[i] -= f * b[col];
        }
    }
    for (std::size_t i = N; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < N; ++j) s -= A[i][j] * b[j];
        b[i] = s / A[i][i];
    }
    return true;
}

// Inverse of a symmetric positive definite 3x3 matrix via Cholesky.
// Throws std::runtime_error when the matrix is not positive definite.
inline Mat3 spd_inverse3(const Mat3& m, double* min_pivot = nullptr) {
    std::array<double, 9> L{};
    double minp = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L[3 * i + k] * L[3 * j + k];
            if (i == j) {
                if (s <= 0.0) throw std::runtime_error("spd_inverse3: matrix not positive definite");
                L[3 * i + i] = std::sqrt(s);
                minp = std::min(minp, s);
            } else {
                L[3 * i + j] = s / L[3 * j + j];
            }
        }
    }
    if (min_pivot) *min_pivot = minp;
    // invert by solving with unit vectors
    Mat3 inv;
    for (std::size_t col = 0; col < 3; ++col) {
        std::array<double, 3> e{};
        e[col] = 1.0;
        // forward
        for (std::size_t i = 0; i < 3; ++i) {
            double s = e[i];
            for (std::size_t k = 0; k < i; ++k) s -= L[3 * i + k] * e[k];
            e[i] = s / L[3 * i + i];
        }
        // backward (L^T)
        for (std::size_t i = 3; i-- > 0;) {
            double s = e[i];
            for (std::size_t k = i + 1; k < 3; ++k) s -= L[3 * k + i] * e[k];
            e[i] = s / L[3 * i + i];
        }
        for (std::size_t i = 0; i < 3; ++i) inv(i, col) = e[i];
    }
    return inv;
}

// Least-squares polynomial fit, coefficients in increasing-degree order.
inline std::vector<double> polyfit(std::span<const double> xs, std::span<const double> ys,
                                   int degree) {
    if (degree < 1 || degree > 3) throw std::invalid_argument("polyfit: degree must be 1..3");
    if (xs.size() != ys.size() || xs.size() < static_cast<std::size_t>(degree) + 1)
        throw std::invalid_argument("polyfit: need more points than coefficients");
    const std::size_t m = static_cast<std::size_t>(degree) + 1;
    std::array<std::array<double, 4>, 4> A{};
    std::array<double, 4> b{};
    for (std::size_t k = 0; k < xs.size(); ++k) {
        std::array<double, 4> pw{1.0, 0.0, 0.0, 0.0};
        for (std::size_t i = 1; i < m; ++i) pw[i] = pw[i - 1] * xs[k];
        for (std::size_t i = 0; i < m; ++i) {
            b[i] += pw[i] * ys[k];
            for (std::size_t j = 0; j < m; ++j) A[i][j] += pw[i] * pw[j];
        }
    }
    for (std::size_t i = m; i < 4; ++i) A[i][i] = 1.0;  // pad for fixed-size solve
    if (!solve_linear<4>(A, b)) throw std::runtime_error("polyfit: singular normal equations");
    return std::vector<double>(b.begin(), b.begin() + m);
}

inline double polyval(std::span<const double> coef, double x) {
    double r = 0.0;
    for (std::size_t i = coef.size(); i-- > 0;) r = r * x + coef[i];
    return r;
}

// Bisection for f(x)=0 on [lo,hi]; requires a sign change.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double tol = 1e-6, int max_iter = 200) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::runtime_error("bisect: no sign change in bracket");
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) { lo = mid; flo = fm; }
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace bvr
