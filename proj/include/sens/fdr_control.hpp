// Mirror-threshold selection, generalized e-values and the e-BH step-up,
// the end-to-end SENS run, derandomized aggregation across splits, and
// conformal p-values for the conformal-BH baseline.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rng.hpp"
#include "sample_construction.hpp"
#include "scoring.hpp"

namespace sens {

// tau = inf{ lambda in {|G_i|} : (1 + #{G <= -lambda}) / #{G >= lambda} <= alpha },
// +infinity when no candidate qualifies. A zero denominator counts as +infinity,
// so such candidates never qualify. Candidates are the distinct nonzero |G_i|.
inline double bc_threshold(const std::vector<double>& g_stats, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("bc_threshold: alpha must lie in (0,1]");
    }
    std::vector<double> positives; // values of G > 0
    std::vector<double> neg_abs;   // |G| of G < 0
    std::vector<double> candidates;
    for (double g : g_stats) {
        if (g > 0.0) {
            positives.push_back(g);
            candidates.push_back(g);
        } else if (g < 0.0) {
            neg_abs.push_back(-g);
            candidates.push_back(-g);
        }
    }
    std::sort(positives.begin(), positives.end());
    std::sort(neg_abs.begin(), neg_abs.end());
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    for (double lambda : candidates) {
        const auto n_reject = static_cast<double>(
            positives.end() - std::lower_bound(positives.begin(), positives.end(), lambda));
        if (n_reject == 0.0) continue; // ratio +infinity
        const auto n_mirror = static_cast<double>(
            neg_abs.end() - std::lower_bound(neg_abs.begin(), neg_abs.end(), lambda));
        if (1.0 + n_mirror <= alpha * n_reject) return lambda;
    }
    return std::numeric_limits<double>::infinity();
}

// e_i = m 1{G_i >= tau} / (1 + #{G_j <= -tau}); all zero when tau = +infinity.
inline std::vector<double> e_values(const std::vector<double>& g_stats, double tau) {
    const std::size_t m = g_stats.size();
    std::vector<double> e(m, 0.0);
    if (std::isinf(tau)) return e;
    std::size_t n_mirror = 0;
    for (double g : g_stats) {
        if (g <= -tau) ++n_mirror;
    }
    const double value = static_cast<double>(m) / (1.0 + static_cast<double>(n_mirror));
    for (std::size_t i = 0; i < m; ++i) {
        if (g_stats[i] >= tau) e[i] = value;
    }
    return e;
}

// e-BH step-up: k = max{ i : i e_(i) / m >= 1/alpha }, reject {i : e_i >= e_(k)}.
inline std::vector<std::size_t> e_bh(const std::vector<double>& e, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("e_bh: alpha must lie in (0,1]");
    }
    for (double v : e) {
        if (!(v >= 0.0)) throw std::invalid_argument("e_bh: e-values must be nonnegative");
    }
    const std::size_t m = e.size();
    std::vector<double> sorted = e;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    // e-values arrive correctly rounded (e.g. m/(1+D)), so at an exact rational
    // tie the reconstructed product can sit a couple of ulps under m; the
    // 4-ulp relative slack resolves those ties upward and nothing else.
    const double tie_guard =
        static_cast<double>(m) * (1.0 - 4.0 * std::numeric_limits<double>::epsilon());
    double threshold = 0.0;
    for (std::size_t i = m; i > 0; --i) {
        if (static_cast<double>(i) * sorted[i - 1] * alpha >= tie_guard) {
            threshold = sorted[i - 1];
            break;
        }
    }
    std::vector<std::size_t> rejected;
    if (threshold <= 0.0) return rejected; // zero e-values are never rejected
    for (std::size_t i = 0; i < m; ++i) {
        if (e[i] >= threshold) rejected.push_back(i);
    }
    return rejected;
}

// Rank-based conformal p-values against a calibration score set
// (scores small under the alternative).
inline std::vector<double> conformal_p_values(const std::vector<double>& test_scores,
                                              const std::vector<double>& calib_scores) {
    if (calib_scores.empty()) {
        throw std::invalid_argument("conformal_p_values: empty calibration set");
    }
    std::vector<double> sorted = calib_scores;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> p;
    p.reserve(test_scores.size());
    const double denom = 1.0 + static_cast<double>(sorted.size());
    for (double s : test_scores) {
        const auto below = static_cast<double>(
            std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin());
        p.push_back((1.0 + below) / denom);
    }
    return p;
}

struct SensConfig {
    double alpha = 0.05;
    DensityOptions density;
    AntisymVariant antisym = AntisymVariant::paper;
};

struct MirrorResult {
    std::vector<double> u, u0, g, e;
    double tau = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> rejected; // indices into the pair vector
    std::size_t degenerate_count = 0;
};

// Full SENS pass over constructed pairs: density fit, scores, mirror
// statistics, threshold, rejections, e-values.
inline MirrorResult sens_run(const std::vector<CalibratedPair>& pairs, const SensConfig& cfg) {
    const DensityModel model = fit_density_model(pairs, cfg.density);
    const ScoreSet scores = score(model, pairs);

    MirrorResult result;
    result.u = scores.u;
    result.u0 = scores.u0;
    result.g.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].degenerate) {
            result.g[i] = 0.0; // ties at zero sit on neither side of the mirror
            ++result.degenerate_count;
        } else {
            result.g[i] = mirror_statistic(scores.u[i], scores.u0[i], cfg.antisym);
        }
    }
    result.tau = bc_threshold(result.g, cfg.alpha);
    result.e = e_values(result.g, result.tau);
    if (!std::isinf(result.tau)) {
        for (std::size_t i = 0; i < result.g.size(); ++i) {
            if (result.g[i] >= result.tau) result.rejected.push_back(i);
        }
    }
    return result;
}

struct DerandConfig {
    int n_runs = 10;
    double per_run_alpha_frac = 0.5;        // alpha_k = frac * alpha
    std::vector<double> per_run_alpha = {}; // optional explicit weights, size n_runs
};

struct DerandResult {
    std::vector<double> e_bar;
    std::vector<std::size_t> rejected;
    std::size_t runs = 0;
};

// Per-unit mean of e-values across runs (rows = runs). Each unit's values are
// sorted before summing, so the result is invariant to run order.
inline std::vector<double> average_e_values(const std::vector<std::vector<double>>& per_run_e) {
    if (per_run_e.empty()) throw std::invalid_argument("average_e_values: no runs");
    const std::size_t m = per_run_e.front().size();
    for (const auto& row : per_run_e) {
        if (row.size() != m) throw std::invalid_argument("average_e_values: ragged input");
    }
    const std::size_t n_runs = per_run_e.size();
    std::vector<double> e_bar(m, 0.0);
    std::vector<double> column(n_runs);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < n_runs; ++k) column[k] = per_run_e[k][i];
        std::sort(column.begin(), column.end());
        double sum = 0.0;
        for (double v : column) sum += v;
        e_bar[i] = sum / static_cast<double>(n_runs);
    }
    return e_bar;
}

// Derandomized SENS: run the algorithm N times on fresh splits at level
// alpha_k, average the per-run e-values, then apply e-BH at the target level.
// Per-unit averages sum the sorted run values, so the output does not depend
// on run order.
template <typename UnitVector>
DerandResult derandomized_sens(const UnitVector& units, const SensConfig& cfg,
                               const DerandConfig& derand, const Rng& root) {
    if (derand.n_runs < 1) throw std::invalid_argument("derandomized_sens: need N >= 1");
    if (!derand.per_run_alpha.empty() &&
        derand.per_run_alpha.size() != static_cast<std::size_t>(derand.n_runs)) {
        throw std::invalid_argument("derandomized_sens: per-run alpha list size mismatch");
    }
    const int n_runs = derand.n_runs;
    std::vector<std::vector<double>> run_e;
    run_e.reserve(static_cast<std::size_t>(n_runs));

    for (int k = 0; k < n_runs; ++k) {
        const Rng split_rng = root.substream(0xd5u, static_cast<std::uint64_t>(k));
        const PairBatch batch = build_pairs(units, split_rng);
        SensConfig run_cfg = cfg;
        run_cfg.alpha = derand.per_run_alpha.empty()
                            ? cfg.alpha * derand.per_run_alpha_frac
                            : derand.per_run_alpha[static_cast<std::size_t>(k)];
        run_e.push_back(sens_run(batch.pairs, run_cfg).e);
    }

    DerandResult result;
    result.runs = static_cast<std::size_t>(n_runs);
    result.e_bar = average_e_values(run_e);
    result.rejected = e_bh(result.e_bar, cfg.alpha);
    return result;
}

} // namespace sens
