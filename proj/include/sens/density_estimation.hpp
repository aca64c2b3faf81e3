// Density machinery for the conformal scores: the swap-invariant pooled
// kernel mixture, the filtering transform and its zero-symmetric kernel null,
// the characteristic-function (Jin-Cai) parametric null, and the optional
// filtering bias correction.
//
// Kernel fits canonicalize their centers by sorting, so evaluations are
// bit-identical under any swap of (T_i, T0_i) pairs or permutation of units.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sample_construction.hpp"
#include "special_math.hpp"

namespace sens {

struct FilteredSample {
    std::vector<double> values; // per unit: the smaller-magnitude member of (t, t0)
};

// Keep T_i when |T_i| <= |T0_i| (ties keep T_i), else T0_i.
inline FilteredSample filter_pairs(const std::vector<CalibratedPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("filter_pairs: empty input");
    FilteredSample out;
    out.values.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.values.push_back(std::fabs(p.t) <= std::fabs(p.t0) ? p.t : p.t0);
    }
    return out;
}

namespace detail {

// Type-7 quantile (linear interpolation) on an ascending-sorted vector.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

} // namespace detail

// Rule-of-thumb bandwidth h = 0.9 min(sd, IQR/1.34) n^{-1/5}. Computed on the
// sorted sample, so any permutation of the input yields the same bits.
inline double silverman_bandwidth(std::vector<double> sample) {
    const std::size_t n = sample.size();
    if (n < 2) throw std::invalid_argument("silverman_bandwidth: need at least 2 points");
    std::sort(sample.begin(), sample.end());

    double mean = 0.0;
    for (double x : sample) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : sample) {
        const double d = x - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
        throw DegenerateScaleError("silverman_bandwidth: zero spread");
    }
    const double iqr = detail::quantile_sorted(sample, 0.75) -
                       detail::quantile_sorted(sample, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = sd; // sd > 0 but degenerate IQR
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

// Gaussian kernel density with exact O(#centers) summation per query point.
// When reflect_through_zero is set, each center contributes K(t - c) + K(t + c)
// as one bracket, which makes f(t) = f(-t) hold bit-for-bit.
struct KernelDensity {
    std::vector<double> centers; // ascending; absolute values when reflected
    double bandwidth = 1.0;
    bool reflect_through_zero = false;

    double operator()(double t) const {
        const double inv_h = 1.0 / bandwidth;
        double sum = 0.0;
        if (reflect_through_zero) {
            for (double c : centers) {
                sum += gaussian_kernel((t - c) * inv_h) + gaussian_kernel((t + c) * inv_h);
            }
            return sum * inv_h / (2.0 * static_cast<double>(centers.size()));
        }
        for (double c : centers) sum += gaussian_kernel((t - c) * inv_h);
        return sum * inv_h / static_cast<double>(centers.size());
    }
};

// \hat f_mix: kernel fit on the pooled test + calibration statistics.
inline KernelDensity estimate_f_mix(const std::vector<CalibratedPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("estimate_f_mix: empty input");
    std::vector<double> pooled;
    pooled.reserve(2 * pairs.size());
    for (const auto& p : pairs) {
        pooled.push_back(p.t);
        pooled.push_back(p.t0);
    }
    KernelDensity density;
    density.bandwidth = silverman_bandwidth(pooled);
    std::sort(pooled.begin(), pooled.end());
    density.centers = std::move(pooled);
    density.reflect_through_zero = false;
    return density;
}

// Zero-symmetric kernel null on the filtered sample, with the bandwidth
// selected from the 2m-point reflected sample.
inline KernelDensity estimate_f0_kernel(const FilteredSample& filtered) {
    const std::size_t m = filtered.values.size();
    if (m < 1) throw std::invalid_argument("estimate_f0_kernel: empty input");
    std::vector<double> reflected;
    reflected.reserve(2 * m);
    for (double x : filtered.values) {
        reflected.push_back(x);
        reflected.push_back(-x);
    }
    KernelDensity density;
    density.bandwidth = silverman_bandwidth(reflected);
    density.centers.reserve(m);
    for (double x : filtered.values) density.centers.push_back(std::fabs(x));
    std::sort(density.centers.begin(), density.centers.end());
    density.reflect_through_zero = true;
    return density;
}

// --- Characteristic-function (Jin-Cai) null estimator -----------------------

struct CharFnValue {
    double re = 0.0, im = 0.0;   // phi(t)
    double dre = 0.0, dim = 0.0; // phi'(t)

    double abs() const { return std::hypot(re, im); }
};

inline CharFnValue empirical_char_fn(const std::vector<double>& sample, double t) {
    CharFnValue f;
    for (double x : sample) {
        const double c = std::cos(t * x);
        const double s = std::sin(t * x);
        f.re += c;
        f.im += s;
        f.dre -= x * s;
        f.dim += x * c;
    }
    const double inv_n = 1.0 / static_cast<double>(sample.size());
    f.re *= inv_n;
    f.im *= inv_n;
    f.dre *= inv_n;
    f.dim *= inv_n;
    return f;
}

// Location/scale read off a characteristic function and its derivative at t:
//   sigma0^2 = -(d|f|/dt) / (t |f|),   mu0 = [Re f Im f' - Re f' Im f] / |f|^2.
inline std::pair<double, double> char_fn_location_scale(const CharFnValue& f, double t) {
    const double mag = f.abs();
    if (!(mag > 0.0) || !(t > 0.0)) {
        throw std::domain_error("char_fn_location_scale: need t > 0 and |phi(t)| > 0");
    }
    const double dmag = (f.re * f.dre + f.im * f.dim) / mag;
    const double sigma_sq = -dmag / (t * mag);
    const double mu = (f.re * f.dim - f.dre * f.im) / (mag * mag);
    return {mu, sigma_sq};
}

// Smallest t in (0, t_max] with abs_phi(t) <= target: first grid crossing
// refined by bisection. Returns NaN when no crossing exists on the grid.
inline double find_abs_crossing(const std::function<double(double)>& abs_phi,
                                double t_max, double target,
                                int grid_points = 2000, int bisect_iters = 60) {
    if (!(t_max > 0.0)) throw std::invalid_argument("find_abs_crossing: t_max must be > 0");
    double prev_t = 0.0;
    for (int k = 1; k < grid_points; ++k) {
        const double t = t_max * static_cast<double>(k) / (grid_points - 1);
        if (abs_phi(t) <= target) {
            double lo = prev_t, hi = t;
            for (int it = 0; it < bisect_iters; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (abs_phi(mid) <= target) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
        prev_t = t;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

struct JinCaiNull {
    double mu0 = 0.0;
    double sigma0 = 1.0;
    double gamma = 0.1;
    double t_hat = 0.0;
    bool root_found = true; // false: |phi| never reached the target, t_hat = log(n) fallback

    double operator()(double x) const { return std_normal_pdf((x - mu0) / sigma0) / sigma0; }
};

inline JinCaiNull jin_cai_fit(std::vector<double> pooled, double gamma) {
    const std::size_t n = pooled.size();
    if (n < 10) throw std::invalid_argument("jin_cai_fit: need at least 10 values");
    if (!(gamma > 0.0 && gamma < 0.5)) {
        throw std::invalid_argument("jin_cai_fit: gamma must lie in (0, 1/2)");
    }
    std::sort(pooled.begin(), pooled.end()); // canonical order: permutation/swap invariant bits
    const double t_max = std::log(static_cast<double>(n));
    const double target = std::pow(static_cast<double>(n), -gamma);
    const auto abs_phi = [&pooled](double t) { return empirical_char_fn(pooled, t).abs(); };

    JinCaiNull null;
    null.gamma = gamma;
    double t_hat = find_abs_crossing(abs_phi, t_max, target);
    null.root_found = !std::isnan(t_hat);
    if (!null.root_found) t_hat = t_max; // inf convention over an empty set
    null.t_hat = t_hat;

    const auto [mu, sigma_sq] = char_fn_location_scale(empirical_char_fn(pooled, t_hat), t_hat);
    null.mu0 = mu;
    // Non-Gaussian or tiny samples can push the scale reading negative.
    null.sigma0 = std::sqrt(std::max(sigma_sq, 1e-12));
    return null;
}

// --- Filtering bias correction (optional pipeline stage) --------------------

// f0(x) = f_filter(x) / (2 sqrt(1 - 2 int_0^{|x|} f_filter)), with the integral
// accumulated by cumulative trapezoid on a fixed grid over [0, x_max].
class BiasCorrectedDensity {
public:
    BiasCorrectedDensity(std::function<double(double)> f_filter, double x_max,
                         std::size_t grid_points = 4001)
        : f_(std::move(f_filter)), x_max_(x_max) {
        if (!(x_max > 0.0) || grid_points < 2) {
            throw std::invalid_argument("BiasCorrectedDensity: bad grid");
        }
        step_ = x_max / static_cast<double>(grid_points - 1);
        cumulative_.resize(grid_points, 0.0);
        double prev = f_(0.0);
        for (std::size_t k = 1; k < grid_points; ++k) {
            const double x = step_ * static_cast<double>(k);
            const double cur = f_(x);
            cumulative_[k] = cumulative_[k - 1] + 0.5 * step_ * (prev + cur);
            prev = cur;
        }
    }

    double operator()(double x) const {
        const double a = std::fabs(x);
        const double radicand = 1.0 - 2.0 * integral_to(a);
        if (!(radicand > 0.0)) {
            throw std::domain_error("bias correction singular: radicand <= 0");
        }
        return f_(a) / (2.0 * std::sqrt(radicand));
    }

private:
    double integral_to(double a) const {
        if (a >= x_max_) return cumulative_.back();
        const double h = a / step_;
        const std::size_t lo = static_cast<std::size_t>(h);
        if (lo + 1 >= cumulative_.size()) return cumulative_.back();
        const double frac = h - static_cast<double>(lo);
        return cumulative_[lo] + frac * (cumulative_[lo + 1] - cumulative_[lo]);
    }

    std::function<double(double)> f_;
    double x_max_;
    double step_;
    std::vector<double> cumulative_;
};

inline BiasCorrectedDensity bias_correct_f0(const KernelDensity& f0,
                                            std::size_t grid_points = 4001) {
    if (!f0.reflect_through_zero) {
        throw std::invalid_argument("bias_correct_f0: expects the zero-symmetric kernel null");
    }
    const double reach = f0.centers.empty() ? 1.0 : f0.centers.back();
    const double x_max = reach + 10.0 * f0.bandwidth;
    return BiasCorrectedDensity([f0](double x) { return f0(x); }, x_max, grid_points);
}

// --- Fitted model bundle -----------------------------------------------------

enum class NullEstimator { kernel, jin_cai };

struct DensityOptions {
    NullEstimator null_estimator = NullEstimator::kernel;
    double jc_gamma = 0.1;
    bool bias_correct = false; // kernel path only; disabled by default
    std::size_t bc_grid_points = 4001;
};

struct DensityModel {
    KernelDensity f_mix;
    NullEstimator kind = NullEstimator::kernel;
    KernelDensity f0_kernel;
    JinCaiNull f0_jc;
    std::optional<BiasCorrectedDensity> bias;

    double mix(double t) const { return f_mix(t); }

    double null_density(double t) const {
        if (bias) return (*bias)(t);
        return kind == NullEstimator::kernel ? f0_kernel(t) : f0_jc(t);
    }
};

inline DensityModel fit_density_model(const std::vector<CalibratedPair>& pairs,
                                      const DensityOptions& options) {
    DensityModel model;
    model.f_mix = estimate_f_mix(pairs);
    model.kind = options.null_estimator;
    if (options.null_estimator == NullEstimator::kernel) {
        model.f0_kernel = estimate_f0_kernel(filter_pairs(pairs));
        if (options.bias_correct) {
            model.bias.emplace(bias_correct_f0(model.f0_kernel, options.bc_grid_points));
        }
    } else {
        if (options.bias_correct) {
            throw std::invalid_argument(
                "fit_density_model: bias correction applies to the kernel null only");
        }
        std::vector<double> pooled;
        pooled.reserve(2 * pairs.size());
        for (const auto& p : pairs) {
            pooled.push_back(p.t);
            pooled.push_back(p.t0);
        }
        model.f0_jc = jin_cai_fit(pooled, options.jc_gamma);
    }
    return model;
}

} // namespace sens
