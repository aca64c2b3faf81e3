// Deterministic scalar special functions: standard-normal CDF/quantile,
// Student-t CDF via the regularized incomplete beta function, and the
// Gaussian smoothing kernel. These back all standardization and density work.

#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sens {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
inline constexpr double inv_sqrt_2 = 0.7071067811865475244008444;

inline double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * inv_sqrt_2);
}

inline double std_normal_pdf(double x) {
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// Quantile via Acklam's rational approximation followed by one Halley step
// against std_normal_cdf. Only the p <= 1/2 branch is evaluated directly;
// larger p reflect through 1 - p (exact for p >= 1/2), which keeps the lower
// tail free of cancellation and makes the p <-> 1-p symmetry bit-exact.
inline double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("std_normal_quantile: p must lie in (0,1)");
    }
    if (p > 0.5) return -std_normal_quantile(1.0 - p);

    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }

    // One Halley refinement; skipped where the density underflows (|x| > ~38),
    // where the raw approximation is already adequate.
    const double pdf = std_normal_pdf(x);
    if (pdf > 0.0) {
        const double err = std_normal_cdf(x) - p;
        const double u = err / pdf;
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_cont_fraction(double a, double b, double x) {
    constexpr int max_iter = 500;
    constexpr double eps = 3.0e-16;
    constexpr double fp_min = 1.0e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fp_min) d = fp_min;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fp_min) d = fp_min;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fp_min) c = fp_min;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fp_min) d = fp_min;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fp_min) c = fp_min;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw std::runtime_error("beta_cont_fraction: no convergence");
}

inline double reg_inc_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) {
        throw std::domain_error("reg_inc_beta: x outside [0,1]");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(log_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * beta_cont_fraction(a, b, x) / a;
    }
    return 1.0 - bt * beta_cont_fraction(b, a, 1.0 - x) / b;
}

} // namespace detail

inline double student_t_cdf(double x, int dof) {
    if (dof < 1) throw std::domain_error("student_t_cdf: dof must be >= 1");
    if (x == 0.0) return 0.5;
    const double v = static_cast<double>(dof);
    const double tail = 0.5 * detail::reg_inc_beta(0.5 * v, 0.5, v / (v + x * x));
    return x > 0.0 ? 1.0 - tail : tail;
}

inline double gaussian_kernel(double u) {
    return inv_sqrt_2pi * std::exp(-0.5 * u * u);
}

// Phi^{-1}(G_{t,dof}(t_stat)), odd in t_stat bit-for-bit and saturating where
// the CDF rounds to 1; downstream only needs ordering, never the extreme tail.
inline double t_to_z(double t_stat, int dof) {
    if (t_stat == 0.0) return 0.0;
    const double mag = std::fabs(t_stat);
    double p = student_t_cdf(mag, dof);
    const double p_max = std::nextafter(1.0, 0.0);
    if (p > p_max) p = p_max;
    const double z = std_normal_quantile(p);
    return t_stat < 0.0 ? -z : z;
}

} // namespace sens
