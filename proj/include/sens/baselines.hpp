// Comparator procedures: the BH step-up, z-values from full-sample t
// statistics, p-values under a Gaussian null (theoretical or estimated),
// sign-flipping BH, and the vanilla BC method on full-sample t statistics.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "fdr_control.hpp"
#include "rng.hpp"
#include "sample_construction.hpp"
#include "special_math.hpp"

namespace sens {

// Classical BH step-up over two-sided p-values.
inline std::vector<std::size_t> bh_procedure(const std::vector<double>& p_values, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("bh_procedure: alpha must lie in (0,1]");
    }
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&p_values](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    std::size_t k = 0; // largest k with p_(k) <= k alpha / m
    for (std::size_t i = m; i > 0; --i) {
        if (p_values[order[i - 1]] * static_cast<double>(m) <=
            static_cast<double>(i) * alpha) {
            k = i;
            break;
        }
    }
    std::vector<std::size_t> rejected(order.begin(),
                                      order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(rejected.begin(), rejected.end());
    return rejected;
}

namespace detail {

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

inline MeanSd mean_sd(const std::vector<double>& values) {
    MeanSd out;
    const std::size_t n = values.size();
    for (double x : values) out.mean += x;
    out.mean /= static_cast<double>(n);
    if (n > 1) {
        double ss = 0.0;
        for (double x : values) {
            const double d = x - out.mean;
            ss += d * d;
        }
        out.sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return out;
}

} // namespace detail

// One-sample t on all n_i observations, mapped through G_{t,n-1} then Phi^{-1}.
inline std::vector<double> z_values_full_sample(const std::vector<UnitObservations>& units) {
    std::vector<double> z;
    z.reserve(units.size());
    for (const auto& unit : units) {
        const std::size_t n = unit.values.size();
        if (n < 2) throw std::invalid_argument("z_values_full_sample: need n >= 2");
        const auto stats = detail::mean_sd(unit.values);
        if (!(stats.sd > 0.0)) {
            throw DegenerateScaleError("z_values_full_sample: zero scale in unit " + unit.unit_id);
        }
        const double t_stat = stats.mean * std::sqrt(static_cast<double>(n)) / stats.sd;
        z.push_back(t_to_z(t_stat, static_cast<int>(n) - 1));
    }
    return z;
}

// Two-sample analogue with the pooled t statistic and dof n_x + n_y - 2.
inline std::vector<double> z_values_full_sample(const std::vector<TwoSampleUnit>& units) {
    std::vector<double> z;
    z.reserve(units.size());
    for (const auto& unit : units) {
        const std::size_t nx = unit.x_values.size();
        const std::size_t ny = unit.y_values.size();
        if (nx < 2 || ny < 2) {
            throw std::invalid_argument("z_values_full_sample: need n >= 2 per group");
        }
        const auto sx = detail::mean_sd(unit.x_values);
        const auto sy = detail::mean_sd(unit.y_values);
        const double pooled_var =
            ((nx - 1) * sx.sd * sx.sd + (ny - 1) * sy.sd * sy.sd) /
            static_cast<double>(nx + ny - 2);
        const double scale = std::sqrt(pooled_var * (1.0 / static_cast<double>(nx) +
                                                     1.0 / static_cast<double>(ny)));
        if (!(scale > 0.0)) {
            throw DegenerateScaleError("z_values_full_sample: zero scale in unit " + unit.unit_id);
        }
        const double t_stat = (sx.mean - sy.mean) / scale;
        z.push_back(t_to_z(t_stat, static_cast<int>(nx + ny) - 2));
    }
    return z;
}

// Two-sided p-values under the null N(mu0, sigma0^2).
inline std::vector<double> p_from_null(const std::vector<double>& z, double mu0, double sigma0) {
    if (!(sigma0 > 0.0)) throw std::invalid_argument("p_from_null: sigma0 must be > 0");
    std::vector<double> p;
    p.reserve(z.size());
    for (double value : z) {
        p.push_back(2.0 * (1.0 - std_normal_cdf(std::fabs(value - mu0) / sigma0)));
    }
    return p;
}

// Smoothed sign-flipping p-value: (1 + #{flip stats >= observed}) / (B + 1).
inline double sign_flip_p(const std::vector<double>& flipped_abs_stats, double observed_abs_stat) {
    std::size_t count = 0;
    for (double s : flipped_abs_stats) {
        if (s >= observed_abs_stat) ++count;
    }
    return (1.0 + static_cast<double>(count)) /
           (static_cast<double>(flipped_abs_stats.size()) + 1.0);
}

namespace detail {

// |t| of a sample; defined via limits when the scale collapses under a flip.
inline double abs_t_statistic(const std::vector<double>& values) {
    const auto stats = mean_sd(values);
    if (stats.sd > 0.0) {
        return std::fabs(stats.mean) * std::sqrt(static_cast<double>(values.size())) / stats.sd;
    }
    return stats.mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

} // namespace detail

// Sign-flipping p-values. The z transform Phi^{-1}(G_{t,n-1}(.)) is strictly
// increasing and odd, so comparing |z| between flips within a unit is the
// comparison of the underlying |t| statistics; the flipped-vs-observed counts
// are computed on |t| directly. Fresh independent sign vectors per flip.
inline std::vector<double> sf_bh_p_values(const std::vector<UnitObservations>& units, int n_flips,
                                          const Rng& root) {
    if (n_flips < 1) throw std::invalid_argument("sf_bh_p_values: need B >= 1");
    std::vector<double> p;
    p.reserve(units.size());
    std::vector<double> flipped;
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto& values = units[i].values;
        if (values.size() < 2) throw std::invalid_argument("sf_bh_p_values: need n >= 2");
        const double observed = detail::abs_t_statistic(values);
        Rng rng = root.substream(i);
        flipped.resize(values.size());
        std::size_t count = 0;
        for (int b = 0; b < n_flips; ++b) {
            for (std::size_t j = 0; j < values.size(); ++j) {
                flipped[j] = (rng.next_u64() & 1u) ? values[j] : -values[j];
            }
            if (detail::abs_t_statistic(flipped) >= observed) ++count;
        }
        p.push_back((1.0 + static_cast<double>(count)) / (static_cast<double>(n_flips) + 1.0));
    }
    return p;
}

inline std::vector<std::size_t> sf_bh(const std::vector<UnitObservations>& units, int n_flips,
                                      double alpha, const Rng& root) {
    return bh_procedure(sf_bh_p_values(units, n_flips, root), alpha);
}

// Vanilla BC on the full-sample t statistics used directly as mirror
// statistics; right tail only, per the one-directional mirror.
inline std::vector<std::size_t> st_bc(const std::vector<UnitObservations>& units, double alpha) {
    std::vector<double> t_stats;
    t_stats.reserve(units.size());
    for (const auto& unit : units) {
        const std::size_t n = unit.values.size();
        if (n < 2) throw std::invalid_argument("st_bc: need n >= 2");
        const auto stats = detail::mean_sd(unit.values);
        if (!(stats.sd > 0.0)) {
            throw DegenerateScaleError("st_bc: zero scale in unit " + unit.unit_id);
        }
        t_stats.push_back(stats.mean * std::sqrt(static_cast<double>(n)) / stats.sd);
    }
    const double tau = bc_threshold(t_stats, alpha);
    std::vector<std::size_t> rejected;
    if (!std::isinf(tau)) {
        for (std::size_t i = 0; i < t_stats.size(); ++i) {
            if (t_stats[i] >= tau) rejected.push_back(i);
        }
    }
    return rejected;
}

} // namespace sens
