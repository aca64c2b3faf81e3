// Construction of pairwise-exchangeable test/calibration statistics from raw
// repeated measurements: random unit splitting, plus/minus summaries,
// t-to-normal standardization, the small-n recipes, the deliberately broken
// full-sample-scale variant kept for negative tests, and paired-data
// preprocessing for real datasets.

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"
#include "special_math.hpp"

namespace sens {

struct UnitObservations {
    std::string unit_id;
    std::vector<double> values;
};

struct TwoSampleUnit {
    std::string unit_id;
    std::vector<double> x_values;
    std::vector<double> y_values;
};

struct SplitIndices {
    std::vector<std::size_t> half1; // size ceil(n/2)
    std::vector<std::size_t> half2;
};

struct SplitSummary {
    double v = 0.0;
    double v0 = 0.0;
    double s = 0.0;
    int dof = 0;
};

struct CalibratedPair {
    std::string unit_id;
    double t = 0.0;
    double t0 = 0.0;
    bool degenerate = false;
};

// Raised when a scale estimate collapses to zero (constant observations).
struct DegenerateScaleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Uniformly random partition into halves of sizes (ceil(n/2), floor(n/2)),
// via a Fisher-Yates shuffle of the index vector.
inline SplitIndices split_unit(std::size_t n, Rng& rng) {
    if (n < 2) throw std::invalid_argument("split_unit: need at least 2 observations");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t j = n - 1; j > 0; --j) {
        const std::size_t k = static_cast<std::size_t>(rng.next_below(j + 1));
        std::swap(idx[j], idx[k]);
    }
    const std::size_t n1 = (n + 1) / 2;
    SplitIndices split;
    split.half1.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n1));
    split.half2.assign(idx.begin() + static_cast<std::ptrdiff_t>(n1), idx.end());
    std::sort(split.half1.begin(), split.half1.end());
    std::sort(split.half2.begin(), split.half2.end());
    return split;
}

namespace detail {

struct HalfStats {
    double mean = 0.0;
    double var = 0.0; // sample variance, n-1 denominator; 0 when the half is a singleton
};

inline HalfStats half_stats(const std::vector<double>& values,
                            const std::vector<std::size_t>& idx) {
    HalfStats out;
    double sum = 0.0;
    for (std::size_t j : idx) sum += values.at(j);
    out.mean = sum / static_cast<double>(idx.size());
    if (idx.size() > 1) {
        double ss = 0.0;
        for (std::size_t j : idx) {
            const double d = values[j] - out.mean;
            ss += d * d;
        }
        out.var = ss / static_cast<double>(idx.size() - 1);
    }
    return out;
}

} // namespace detail

inline SplitSummary summarize_one_sample(const UnitObservations& obs,
                                         const SplitIndices& split) {
    const std::size_t n1 = split.half1.size();
    const std::size_t n2 = split.half2.size();
    if (n1 < 2 || n2 < 2) {
        throw std::invalid_argument("summarize_one_sample: both halves need >= 2 observations");
    }
    const auto h1 = detail::half_stats(obs.values, split.half1);
    const auto h2 = detail::half_stats(obs.values, split.half2);
    const double n = static_cast<double>(n1 + n2);

    SplitSummary out;
    out.v = h1.mean + h2.mean;
    out.v0 = h1.mean - h2.mean;
    const double pooled =
        ((n1 - 1) * h1.var + (n2 - 1) * h2.var) / (n - 2.0);
    out.s = std::sqrt(n / (static_cast<double>(n1) * static_cast<double>(n2)) * pooled);
    out.dof = static_cast<int>(n1 + n2) - 2;
    if (out.s <= 0.0) {
        throw DegenerateScaleError("summarize_one_sample: zero scale (constant halves)");
    }
    return out;
}

inline CalibratedPair standardize_one_sample(const SplitSummary& summary,
                                             std::string unit_id = {}) {
    if (summary.dof < 1) throw std::invalid_argument("standardize: dof must be >= 1");
    if (!(summary.s > 0.0)) {
        throw DegenerateScaleError("standardize: zero scale");
    }
    CalibratedPair pair;
    pair.unit_id = std::move(unit_id);
    pair.t = t_to_z(summary.v / summary.s, summary.dof);
    pair.t0 = t_to_z(summary.v0 / summary.s, summary.dof);
    return pair;
}

// n = 2: (X1 + X2)/sqrt(2) and (X1 - X2)/sqrt(2), no CDF transform.
// n = 3: the scale is the sample sd of the 2-element half, dof = 1.
inline CalibratedPair construct_small_n(const UnitObservations& obs,
                                        const SplitIndices& split) {
    const std::size_t n = split.half1.size() + split.half2.size();
    CalibratedPair pair;
    pair.unit_id = obs.unit_id;
    if (n == 2) {
        const double x1 = obs.values.at(split.half1.at(0));
        const double x2 = obs.values.at(split.half2.at(0));
        const double root2 = std::sqrt(2.0);
        pair.t = (x1 + x2) / root2;
        pair.t0 = (x1 - x2) / root2;
        return pair;
    }
    if (n == 3) {
        if (split.half1.size() != 2 || split.half2.size() != 1) {
            throw std::invalid_argument("construct_small_n: n=3 expects halves of sizes (2,1)");
        }
        const auto h1 = detail::half_stats(obs.values, split.half1);
        const auto h2 = detail::half_stats(obs.values, split.half2);
        const double s = std::sqrt(h1.var);
        if (!(s > 0.0)) {
            throw DegenerateScaleError("construct_small_n: zero scale in the 2-element half");
        }
        SplitSummary summary;
        summary.v = h1.mean + h2.mean;
        summary.v0 = h1.mean - h2.mean;
        summary.s = s;
        summary.dof = 1; // the scale estimator has a single degree of freedom
        return standardize_one_sample(summary, obs.unit_id);
    }
    throw std::invalid_argument("construct_small_n: only n in {2,3} supported");
}

inline SplitSummary summarize_two_sample(const TwoSampleUnit& unit,
                                         const SplitIndices& x_split,
                                         const SplitIndices& y_split) {
    const std::size_t nx1 = x_split.half1.size(), nx2 = x_split.half2.size();
    const std::size_t ny1 = y_split.half1.size(), ny2 = y_split.half2.size();
    if (nx1 < 2 || nx2 < 2 || ny1 < 2 || ny2 < 2) {
        throw std::invalid_argument("summarize_two_sample: all four halves need >= 2 observations");
    }
    const auto hx1 = detail::half_stats(unit.x_values, x_split.half1);
    const auto hx2 = detail::half_stats(unit.x_values, x_split.half2);
    const auto hy1 = detail::half_stats(unit.y_values, y_split.half1);
    const auto hy2 = detail::half_stats(unit.y_values, y_split.half2);

    const double nx = static_cast<double>(nx1 + nx2);
    const double ny = static_cast<double>(ny1 + ny2);
    const double sx2 = ((nx1 - 1) * hx1.var + (nx2 - 1) * hx2.var) / (nx - 2.0);
    const double sy2 = ((ny1 - 1) * hy1.var + (ny2 - 1) * hy2.var) / (ny - 2.0);

    SplitSummary out;
    const double d1 = hx1.mean - hy1.mean;
    const double d2 = hx2.mean - hy2.mean;
    out.v = d1 + d2;
    out.v0 = d1 - d2;
    out.s = std::sqrt(nx / (static_cast<double>(nx1) * static_cast<double>(nx2)) * sx2 +
                      ny / (static_cast<double>(ny1) * static_cast<double>(ny2)) * sy2);
    out.dof = static_cast<int>(nx + ny) - 4;
    if (out.s <= 0.0) {
        throw DegenerateScaleError("summarize_two_sample: zero scale");
    }
    return out;
}

inline CalibratedPair standardize_two_sample(const SplitSummary& summary,
                                             std::string unit_id = {}) {
    return standardize_one_sample(summary, std::move(unit_id));
}

// Deliberately wrong variant replacing the split-pooled scale with the
// full-sample standard deviation; breaks pairwise exchangeability
// and exists only as a negative control.
inline CalibratedPair standardize_naive(const UnitObservations& obs,
                                        const SplitIndices& split) {
    const std::size_t n1 = split.half1.size();
    const std::size_t n2 = split.half2.size();
    const std::size_t n = n1 + n2;
    if (n < 4) throw std::invalid_argument("standardize_naive: need n >= 4");

    double mean = 0.0;
    for (double x : obs.values) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : obs.values) {
        const double d = x - mean;
        ss += d * d;
    }
    const double full_sd = std::sqrt(ss / static_cast<double>(n - 1));

    const auto h1 = detail::half_stats(obs.values, split.half1);
    const auto h2 = detail::half_stats(obs.values, split.half2);
    SplitSummary summary;
    summary.v = h1.mean + h2.mean;
    summary.v0 = h1.mean - h2.mean;
    summary.s = full_sd * std::sqrt(static_cast<double>(n) /
                                    (static_cast<double>(n1) * static_cast<double>(n2)));
    summary.dof = static_cast<int>(n) - 2;
    if (!(summary.s > 0.0)) {
        throw DegenerateScaleError("standardize_naive: zero scale");
    }
    return standardize_one_sample(summary, obs.unit_id);
}

// Real-data preprocessing for paired designs: per-unit differences minus the
// median (lower median for even counts) of the per-unit mean differences.
inline std::vector<UnitObservations> preprocess_paired(
    const std::vector<std::vector<double>>& before,
    const std::vector<std::vector<double>>& after,
    const std::vector<std::string>& unit_ids = {}) {
    if (before.size() != after.size()) {
        throw std::invalid_argument("preprocess_paired: unit count mismatch");
    }
    if (!unit_ids.empty() && unit_ids.size() != before.size()) {
        throw std::invalid_argument("preprocess_paired: unit id count mismatch");
    }
    const std::size_t m = before.size();
    std::vector<std::vector<double>> diffs(m);
    std::vector<double> means(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (before[i].size() != after[i].size()) {
            throw std::invalid_argument("preprocess_paired: shape mismatch in unit " +
                                        std::to_string(i + 1));
        }
        if (before[i].empty()) {
            throw std::invalid_argument("preprocess_paired: empty unit " + std::to_string(i + 1));
        }
        diffs[i].resize(before[i].size());
        double sum = 0.0;
        for (std::size_t j = 0; j < before[i].size(); ++j) {
            diffs[i][j] = after[i][j] - before[i][j];
            sum += diffs[i][j];
        }
        means[i] = sum / static_cast<double>(before[i].size());
    }

    std::vector<double> sorted = means;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[(sorted.size() - 1) / 2]; // lower median for even counts

    std::vector<UnitObservations> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        out[i].unit_id = unit_ids.empty() ? std::to_string(i + 1) : unit_ids[i];
        out[i].values = std::move(diffs[i]);
        for (double& x : out[i].values) x -= median;
    }
    return out;
}

struct PairBatch {
    std::vector<CalibratedPair> pairs;
    std::size_t degenerate_count = 0;
};

// Batch construction with per-unit substreams. Units with 2 <= n < 4 route to
// the small-n recipes; degenerate-scale units are flagged with t = t0 = 0
// rather than aborting the batch.
inline PairBatch build_pairs(const std::vector<UnitObservations>& units, const Rng& root) {
    PairBatch out;
    out.pairs.reserve(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto& unit = units[i];
        Rng sub = root.substream(i);
        const SplitIndices split = split_unit(unit.values.size(), sub);
        CalibratedPair pair;
        try {
            if (unit.values.size() >= 4) {
                pair = standardize_one_sample(summarize_one_sample(unit, split), unit.unit_id);
            } else {
                pair = construct_small_n(unit, split);
            }
        } catch (const DegenerateScaleError&) {
            pair = CalibratedPair{unit.unit_id, 0.0, 0.0, true};
            ++out.degenerate_count;
        }
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

inline PairBatch build_pairs(const std::vector<TwoSampleUnit>& units, const Rng& root) {
    PairBatch out;
    out.pairs.reserve(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto& unit = units[i];
        if (unit.x_values.size() < 4 || unit.y_values.size() < 4) {
            throw std::invalid_argument(
                "build_pairs: two-sample units need at least 4 observations per group (unit " +
                unit.unit_id + ")");
        }
        Rng sub_x = root.substream(i, 0);
        Rng sub_y = root.substream(i, 1);
        const SplitIndices x_split = split_unit(unit.x_values.size(), sub_x);
        const SplitIndices y_split = split_unit(unit.y_values.size(), sub_y);
        CalibratedPair pair;
        try {
            pair = standardize_two_sample(summarize_two_sample(unit, x_split, y_split),
                                          unit.unit_id);
        } catch (const DegenerateScaleError&) {
            pair = CalibratedPair{unit.unit_id, 0.0, 0.0, true};
            ++out.degenerate_count;
        }
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

} // namespace sens
