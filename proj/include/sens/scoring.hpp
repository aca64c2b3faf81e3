// Conformity scores U = f0_hat / f_mix_hat evaluated at the test and
// calibration statistics, and the anti-symmetric mirror transforms.

#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "density_estimation.hpp"

namespace sens {

enum class AntisymVariant { paper, g1, g2 };

inline const char* antisym_name(AntisymVariant v) {
    switch (v) {
        case AntisymVariant::paper: return "paper";
        case AntisymVariant::g1: return "g1";
        case AntisymVariant::g2: return "g2";
    }
    return "?";
}

struct ScoreSet {
    std::vector<double> u;  // g(T_i)
    std::vector<double> u0; // g(T0_i)
};

namespace detail {

inline double score_ratio(const DensityModel& model, double t) {
    const double mix = model.mix(t);
    if (!(mix > 0.0)) {
        // Unreachable with the Gaussian kernel: every evaluation point is a center.
        throw std::logic_error("score: mixture density evaluated to zero");
    }
    const double ratio = model.null_density(t) / mix;
    // Keep scores strictly positive even when the null density underflows.
    return ratio > 0.0 ? ratio : std::numeric_limits<double>::min();
}

} // namespace detail

inline ScoreSet score(const DensityModel& model, const std::vector<CalibratedPair>& pairs) {
    ScoreSet scores;
    scores.u.reserve(pairs.size());
    scores.u0.reserve(pairs.size());
    for (const auto& p : pairs) {
        scores.u.push_back(detail::score_ratio(model, p.t));
        scores.u0.push_back(detail::score_ratio(model, p.t0));
    }
    return scores;
}

// Anti-symmetric mirror statistic gamma(u, u0); exact ties give 0, which the
// thresholding stage counts on neither side. The default ("paper") variant
// clamps the exponential magnitude at the smallest positive normal so the
// sign survives underflow for enormous scores.
inline double mirror_statistic(double u, double u0, AntisymVariant variant) {
    if (!(std::isfinite(u) && std::isfinite(u0))) {
        throw std::invalid_argument("mirror_statistic: scores must be finite");
    }
    if (u == u0) return 0.0;
    const double sgn = u0 > u ? 1.0 : -1.0;
    double mag = 0.0;
    switch (variant) {
        case AntisymVariant::paper:
            mag = std::max(std::exp(-u), std::exp(-u0));
            if (mag <= 0.0) mag = std::numeric_limits<double>::min();
            break;
        case AntisymVariant::g1:
            mag = std::fabs(u - u0);
            break;
        case AntisymVariant::g2:
            mag = std::min(u, u0);
            break;
    }
    return sgn * mag;
}

inline std::vector<double> mirror_statistics(const ScoreSet& scores, AntisymVariant variant) {
    if (scores.u.size() != scores.u0.size()) {
        throw std::invalid_argument("mirror_statistics: size mismatch");
    }
    std::vector<double> g(scores.u.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = mirror_statistic(scores.u[i], scores.u0[i], variant);
    }
    return g;
}

} // namespace sens
