// Data generators for the simulation studies, FDP/TPP metrics, the decision
// variance and average-ranking metrics, the method registry, and the seeded
// replication runner.

#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "baselines.hpp"
#include "fdr_control.hpp"
#include "rng.hpp"
#include "sample_construction.hpp"

namespace sens {

// --- Scenarios ---------------------------------------------------------------

struct OneSampleScenario {
    std::size_t m = 2000;
    int n = 4;
    double pi = 0.1;        // non-null proportion
    double mu = 3.0;        // effects drawn from N(-mu, mu^2)
    double sigma_max = 0.1; // sigma_i ~ U(0.05, sigma_max)
    double beta = 1.0;      // non-Gaussian error weight

    void validate() const {
        if (m < 1 || n < 2) throw std::invalid_argument("one-sample scenario: need m >= 1, n >= 2");
        if (!(pi >= 0.0 && pi <= 1.0)) throw std::invalid_argument("scenario: pi outside [0,1]");
        if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("scenario: beta outside [0,1]");
        if (!(sigma_max > 0.05)) throw std::invalid_argument("scenario: sigma_max must exceed 0.05");
    }
};

struct TwoSampleScenario {
    std::size_t m = 2000;
    int n_x = 8;
    int n_y = 15;
    double pi_x = 0.05, pi_y = 0.1;
    double mu_x = 1.0, mu_y = -2.0;
    double sigma_x_max = 2.0, sigma_y_max = 1.0;
    double beta = 1.0; // mixes into the y errors only; x errors stay Gaussian

    void validate() const {
        if (m < 1 || n_x < 4 || n_y < 4) {
            throw std::invalid_argument("two-sample scenario: need m >= 1 and group sizes >= 4");
        }
        if (!(pi_x >= 0.0 && pi_x <= 1.0 && pi_y >= 0.0 && pi_y <= 1.0)) {
            throw std::invalid_argument("scenario: pi outside [0,1]");
        }
        if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("scenario: beta outside [0,1]");
        if (!(sigma_x_max > 0.05 && sigma_y_max > 0.05)) {
            throw std::invalid_argument("scenario: sigma_max must exceed 0.05");
        }
    }
};

// Semi-supervised pairs drawn directly from a bivariate Gaussian.
struct SsmtScenario {
    std::size_t m = 2000;
    double pi = 0.1;
    double mu0 = 0.0;
    double mua = 5.0;
    double sigma0 = 1.0;
    double rho = 0.5;

    void validate() const {
        if (m < 1) throw std::invalid_argument("ssmt scenario: need m >= 1");
        if (!(pi >= 0.0 && pi <= 1.0)) throw std::invalid_argument("scenario: pi outside [0,1]");
        if (!(sigma0 > 0.0)) throw std::invalid_argument("scenario: sigma0 must be > 0");
        if (!(std::fabs(rho) < 1.0)) throw std::invalid_argument("scenario: |rho| must be < 1");
    }
};

// --- Generators ---------------------------------------------------------------

// Error draw with variance sigma^2 for every component:
// (1-beta) N(0, sigma^2) + (3 beta/4) U(-sqrt(3) sigma, sqrt(3) sigma)
//   + (beta/4) Laplace(0, sigma/sqrt(2)).
inline double sample_error_mixture(double sigma, double beta, Rng& rng) {
    const double u = rng.next_uniform();
    if (u < 1.0 - beta) return rng.next_normal(0.0, sigma);
    if (u < 1.0 - 0.25 * beta) {
        const double half_width = std::sqrt(3.0) * sigma;
        return rng.next_uniform(-half_width, half_width);
    }
    return rng.next_laplace(0.0, sigma / std::sqrt(2.0));
}

struct GeneratedOneSample {
    std::vector<UnitObservations> units;
    std::vector<int> labels; // 1 = alternative
};

inline GeneratedOneSample generate_one_sample(const OneSampleScenario& sc, const Rng& root) {
    sc.validate();
    GeneratedOneSample out;
    out.units.resize(sc.m);
    out.labels.resize(sc.m);
    for (std::size_t i = 0; i < sc.m; ++i) {
        Rng rng = root.substream(i);
        double mu_i = 0.0;
        if (rng.next_uniform() < sc.pi) mu_i = rng.next_normal(-sc.mu, sc.mu);
        out.labels[i] = mu_i != 0.0 ? 1 : 0; // nullity of the drawn value, no tolerance
        const double sigma_i = rng.next_uniform(0.05, sc.sigma_max);
        auto& unit = out.units[i];
        unit.unit_id = std::to_string(i + 1);
        unit.values.resize(static_cast<std::size_t>(sc.n));
        for (auto& v : unit.values) v = mu_i + sample_error_mixture(sigma_i, sc.beta, rng);
    }
    return out;
}

struct GeneratedTwoSample {
    std::vector<TwoSampleUnit> units;
    std::vector<int> labels;
};

inline GeneratedTwoSample generate_two_sample(const TwoSampleScenario& sc, const Rng& root) {
    sc.validate();
    GeneratedTwoSample out;
    out.units.resize(sc.m);
    out.labels.resize(sc.m);
    for (std::size_t i = 0; i < sc.m; ++i) {
        Rng rng = root.substream(i);
        const double mu_xi = rng.next_uniform() < sc.pi_x ? sc.mu_x : 0.0;
        const double mu_yi = rng.next_uniform() < sc.pi_y ? sc.mu_y : 0.0;
        out.labels[i] = mu_xi != mu_yi ? 1 : 0;
        const double sigma_x = rng.next_uniform(0.05, sc.sigma_x_max);
        const double sigma_y = rng.next_uniform(0.05, sc.sigma_y_max);
        auto& unit = out.units[i];
        unit.unit_id = std::to_string(i + 1);
        unit.x_values.resize(static_cast<std::size_t>(sc.n_x));
        unit.y_values.resize(static_cast<std::size_t>(sc.n_y));
        for (auto& v : unit.x_values) v = mu_xi + rng.next_normal(0.0, sigma_x);
        for (auto& v : unit.y_values) v = mu_yi + sample_error_mixture(sigma_y, sc.beta, rng);
    }
    return out;
}

struct GeneratedPairs {
    std::vector<CalibratedPair> pairs;
    std::vector<int> labels;
};

inline GeneratedPairs generate_ssmt(const SsmtScenario& sc, const Rng& root) {
    sc.validate();
    GeneratedPairs out;
    out.pairs.resize(sc.m);
    out.labels.resize(sc.m);
    const double tail = std::sqrt(1.0 - sc.rho * sc.rho);
    for (std::size_t i = 0; i < sc.m; ++i) {
        Rng rng = root.substream(i);
        const double mu_i = rng.next_uniform() < sc.pi ? sc.mua : sc.mu0;
        out.labels[i] = mu_i != sc.mu0 ? 1 : 0;
        const double z1 = rng.next_normal();
        const double z2 = rng.next_normal();
        auto& pair = out.pairs[i];
        pair.unit_id = std::to_string(i + 1);
        pair.t0 = sc.mu0 + sc.sigma0 * z2;
        pair.t = mu_i + sc.sigma0 * (sc.rho * z2 + tail * z1);
    }
    return out;
}

// --- Metrics -------------------------------------------------------------------

struct Metrics {
    double fdp = 0.0;
    double tpp = 0.0;
    bool has_alternatives = true; // false: TPP defined as 0 with this flag raised
};

inline Metrics compute_metrics(const std::vector<std::size_t>& rejected,
                               const std::vector<int>& labels) {
    Metrics out;
    std::size_t false_pos = 0, true_pos = 0, n_alt = 0;
    for (int label : labels) n_alt += label ? 1u : 0u;
    for (std::size_t idx : rejected) {
        if (labels.at(idx)) {
            ++true_pos;
        } else {
            ++false_pos;
        }
    }
    const double denom = std::max<double>(static_cast<double>(rejected.size()), 1.0);
    out.fdp = static_cast<double>(false_pos) / denom;
    out.has_alternatives = n_alt > 0;
    out.tpp = n_alt > 0 ? static_cast<double>(true_pos) / static_cast<double>(n_alt) : 0.0;
    return out;
}

// Mean over units of the per-unit sample variance of 0/1 decisions
// across repeated analyses of the same data.
inline double variance_metric(const std::vector<std::vector<int>>& decisions) {
    const std::size_t reps = decisions.size();
    if (reps < 2) throw std::invalid_argument("variance_metric: need at least 2 replications");
    const std::size_t m = decisions.front().size();
    for (const auto& row : decisions) {
        if (row.size() != m) throw std::invalid_argument("variance_metric: ragged decision matrix");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t r = 0; r < reps; ++r) mean += decisions[r][i];
        mean /= static_cast<double>(reps);
        double ss = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            const double d = decisions[r][i] - mean;
            ss += d * d;
        }
        total += ss / static_cast<double>(reps - 1);
    }
    return total / static_cast<double>(m);
}

// Fraction of true alternatives among the k top-ranked units.
inline double average_ranking(const std::vector<std::size_t>& ranked_units,
                              const std::vector<int>& labels, std::size_t k) {
    if (k < 1 || k > ranked_units.size()) {
        throw std::invalid_argument("average_ranking: k outside [1, m]");
    }
    std::size_t hits = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (labels.at(ranked_units[j])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

// --- Method registry ------------------------------------------------------------

enum class MethodId { sens_kn, sens_jc, bh_tn, bh_een, sfbh, stbc, cfbh };

inline const char* method_name(MethodId id) {
    switch (id) {
        case MethodId::sens_kn: return "sens-kn";
        case MethodId::sens_jc: return "sens-jc";
        case MethodId::bh_tn: return "bh-tn";
        case MethodId::bh_een: return "bh-een";
        case MethodId::sfbh: return "sfbh";
        case MethodId::stbc: return "stbc";
        case MethodId::cfbh: return "cfbh";
    }
    return "?";
}

inline std::optional<MethodId> parse_method(const std::string& name) {
    for (MethodId id : {MethodId::sens_kn, MethodId::sens_jc, MethodId::bh_tn, MethodId::bh_een,
                        MethodId::sfbh, MethodId::stbc, MethodId::cfbh}) {
        if (name == method_name(id)) return id;
    }
    return std::nullopt;
}

inline std::string method_list() {
    std::string out;
    for (MethodId id : {MethodId::sens_kn, MethodId::sens_jc, MethodId::bh_tn, MethodId::bh_een,
                        MethodId::sfbh, MethodId::stbc, MethodId::cfbh}) {
        if (!out.empty()) out += ", ";
        out += method_name(id);
    }
    return out;
}

struct RunOptions {
    double alpha = 0.05;
    double jc_gamma = 0.1;
    bool bias_correct = false;
    AntisymVariant antisym = AntisymVariant::paper;
    int sfbh_flips = 1000;
    int derand_runs = 1; // > 1 switches SENS methods to derandomized aggregation
    double derand_alpha_frac = 0.5;
    NullEstimator cfbh_null = NullEstimator::kernel;
};

namespace detail {

inline SensConfig sens_config(const RunOptions& opt, NullEstimator estimator) {
    SensConfig cfg;
    cfg.alpha = opt.alpha;
    cfg.antisym = opt.antisym;
    cfg.density.null_estimator = estimator;
    cfg.density.jc_gamma = opt.jc_gamma;
    cfg.density.bias_correct = opt.bias_correct && estimator == NullEstimator::kernel;
    return cfg;
}

template <typename UnitVector>
std::vector<std::size_t> run_sens_on_units(const UnitVector& units, NullEstimator estimator,
                                           const RunOptions& opt, const Rng& rng) {
    const SensConfig cfg = sens_config(opt, estimator);
    if (opt.derand_runs > 1) {
        DerandConfig derand;
        derand.n_runs = opt.derand_runs;
        derand.per_run_alpha_frac = opt.derand_alpha_frac;
        return derandomized_sens(units, cfg, derand, rng).rejected;
    }
    const PairBatch batch = build_pairs(units, rng.substream(0x51u));
    return sens_run(batch.pairs, cfg).rejected;
}

template <typename UnitVector>
std::vector<std::size_t> run_cfbh_on_units(const UnitVector& units, const RunOptions& opt,
                                           const Rng& rng) {
    const PairBatch batch = build_pairs(units, rng.substream(0x51u));
    SensConfig cfg = sens_config(opt, opt.cfbh_null);
    const DensityModel model = fit_density_model(batch.pairs, cfg.density);
    const ScoreSet scores = score(model, batch.pairs);
    return bh_procedure(conformal_p_values(scores.u, scores.u0), opt.alpha);
}

} // namespace detail

inline std::vector<std::size_t> run_method(MethodId id,
                                           const std::vector<UnitObservations>& units,
                                           const RunOptions& opt, const Rng& rng) {
    switch (id) {
        case MethodId::sens_kn:
            return detail::run_sens_on_units(units, NullEstimator::kernel, opt, rng);
        case MethodId::sens_jc:
            return detail::run_sens_on_units(units, NullEstimator::jin_cai, opt, rng);
        case MethodId::bh_tn:
            return bh_procedure(p_from_null(z_values_full_sample(units), 0.0, 1.0), opt.alpha);
        case MethodId::bh_een: {
            const std::vector<double> z = z_values_full_sample(units);
            const JinCaiNull null = jin_cai_fit(z, opt.jc_gamma);
            return bh_procedure(p_from_null(z, null.mu0, null.sigma0), opt.alpha);
        }
        case MethodId::sfbh:
            return sf_bh(units, opt.sfbh_flips, opt.alpha, rng.substream(0xf1u));
        case MethodId::stbc:
            return st_bc(units, opt.alpha);
        case MethodId::cfbh:
            return detail::run_cfbh_on_units(units, opt, rng);
    }
    throw std::invalid_argument("run_method: unknown method");
}

inline std::vector<std::size_t> run_method(MethodId id, const std::vector<TwoSampleUnit>& units,
                                           const RunOptions& opt, const Rng& rng) {
    switch (id) {
        case MethodId::sens_kn:
            return detail::run_sens_on_units(units, NullEstimator::kernel, opt, rng);
        case MethodId::sens_jc:
            return detail::run_sens_on_units(units, NullEstimator::jin_cai, opt, rng);
        case MethodId::bh_tn:
            return bh_procedure(p_from_null(z_values_full_sample(units), 0.0, 1.0), opt.alpha);
        case MethodId::bh_een: {
            const std::vector<double> z = z_values_full_sample(units);
            const JinCaiNull null = jin_cai_fit(z, opt.jc_gamma);
            return bh_procedure(p_from_null(z, null.mu0, null.sigma0), opt.alpha);
        }
        case MethodId::cfbh:
            return detail::run_cfbh_on_units(units, opt, rng);
        case MethodId::sfbh:
        case MethodId::stbc:
            throw std::invalid_argument(std::string(method_name(id)) +
                                        " applies to one-sample data only");
    }
    throw std::invalid_argument("run_method: unknown method");
}

// Pairs provided directly (semi-supervised setup); nothing to split.
inline std::vector<std::size_t> run_method(MethodId id, const std::vector<CalibratedPair>& pairs,
                                           const RunOptions& opt, const Rng&) {
    if (opt.derand_runs > 1 && (id == MethodId::sens_kn || id == MethodId::sens_jc)) {
        throw std::invalid_argument("derandomization needs raw observations to resplit");
    }
    switch (id) {
        case MethodId::sens_kn:
            return sens_run(pairs, detail::sens_config(opt, NullEstimator::kernel)).rejected;
        case MethodId::sens_jc:
            return sens_run(pairs, detail::sens_config(opt, NullEstimator::jin_cai)).rejected;
        case MethodId::bh_tn: {
            std::vector<double> t_only;
            t_only.reserve(pairs.size());
            for (const auto& p : pairs) t_only.push_back(p.t);
            return bh_procedure(p_from_null(t_only, 0.0, 1.0), opt.alpha);
        }
        case MethodId::bh_een: {
            std::vector<double> t_only;
            t_only.reserve(pairs.size());
            for (const auto& p : pairs) t_only.push_back(p.t);
            const JinCaiNull null = jin_cai_fit(t_only, opt.jc_gamma);
            return bh_procedure(p_from_null(t_only, null.mu0, null.sigma0), opt.alpha);
        }
        case MethodId::cfbh: {
            SensConfig cfg = detail::sens_config(opt, opt.cfbh_null);
            const DensityModel model = fit_density_model(pairs, cfg.density);
            const ScoreSet scores = score(model, pairs);
            return bh_procedure(conformal_p_values(scores.u, scores.u0), opt.alpha);
        }
        case MethodId::sfbh:
        case MethodId::stbc:
            throw std::invalid_argument(std::string(method_name(id)) +
                                        " needs raw observations, not pairs");
    }
    throw std::invalid_argument("run_method: unknown method");
}

// --- Replication runner -----------------------------------------------------------

using ScenarioSpec = std::variant<OneSampleScenario, TwoSampleScenario, SsmtScenario>;

struct ReplicationRow {
    std::string scenario;
    MethodId method = MethodId::sens_kn;
    int rep = 0;
    double fdp = 0.0;
    double tpp = 0.0;
    bool failed = false;
    std::string error;
};

struct MethodAggregate {
    double fdr = 0.0; // mean FDP
    double ap = 0.0;  // mean TPP
    double fdp_se = 0.0;
    double tpp_se = 0.0;
    int reps_ok = 0;
    int failures = 0;
};

struct ReplicationReport {
    std::vector<ReplicationRow> rows; // ordered by (method, rep)
    std::map<std::string, MethodAggregate> aggregates;
};

inline std::uint64_t replication_seed(std::uint64_t master, int rep, MethodId method) {
    return hash_combine(hash_combine(master, static_cast<std::uint64_t>(rep)),
                        fnv1a64(method_name(method)));
}

namespace detail {

inline Metrics run_one_replication(const ScenarioSpec& spec, MethodId method,
                                   const RunOptions& opt, std::uint64_t seed) {
    const Rng rng(seed);
    return std::visit(
        [&](const auto& scenario) {
            using S = std::decay_t<decltype(scenario)>;
            const Rng data_rng = rng.substream(0xdau);
            if constexpr (std::is_same_v<S, OneSampleScenario>) {
                const auto data = generate_one_sample(scenario, data_rng);
                return compute_metrics(run_method(method, data.units, opt, rng), data.labels);
            } else if constexpr (std::is_same_v<S, TwoSampleScenario>) {
                const auto data = generate_two_sample(scenario, data_rng);
                return compute_metrics(run_method(method, data.units, opt, rng), data.labels);
            } else {
                const auto data = generate_ssmt(scenario, data_rng);
                return compute_metrics(run_method(method, data.pairs, opt, rng), data.labels);
            }
        },
        spec);
}

} // namespace detail

// Replications run in a small worker pool; every (method, rep) task owns a
// seed derived from (master seed, rep index, method id), results land in
// preallocated slots and the aggregation is a sequential reduce, so the
// report is identical for any thread count. Per-rep failures are recorded
// in the report rather than aborting the sweep.
inline ReplicationReport run_replications(const ScenarioSpec& spec, const std::string& label,
                                          const std::vector<MethodId>& methods, int reps,
                                          const RunOptions& opt, std::uint64_t master_seed,
                                          int threads = 0) {
    if (reps < 1) throw std::invalid_argument("run_replications: need reps >= 1");
    if (methods.empty()) throw std::invalid_argument("run_replications: no methods");

    ReplicationReport report;
    report.rows.resize(methods.size() * static_cast<std::size_t>(reps));
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        for (int rep = 0; rep < reps; ++rep) {
            auto& row = report.rows[mi * static_cast<std::size_t>(reps) + static_cast<std::size_t>(rep)];
            row.scenario = label;
            row.method = methods[mi];
            row.rep = rep;
        }
    }

    const auto run_task = [&](std::size_t task) {
        auto& row = report.rows[task];
        try {
            const Metrics metrics = detail::run_one_replication(
                spec, row.method, opt, replication_seed(master_seed, row.rep, row.method));
            row.fdp = metrics.fdp;
            row.tpp = metrics.tpp;
        } catch (const std::exception& ex) {
            row.failed = true;
            row.error = ex.what();
        }
    };

    int n_threads = threads > 0 ? threads
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
    const std::size_t n_tasks = report.rows.size();
    if (n_threads == 1 || n_tasks < 2) {
        for (std::size_t task = 0; task < n_tasks; ++task) run_task(task);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int w = 0; w < n_threads; ++w) {
            pool.emplace_back([&]() {
                for (std::size_t task = next.fetch_add(1); task < n_tasks;
                     task = next.fetch_add(1)) {
                    run_task(task);
                }
            });
        }
        for (auto& worker : pool) worker.join();
    }

    for (const auto& row : report.rows) {
        auto& agg = report.aggregates[method_name(row.method)];
        if (row.failed) {
            ++agg.failures;
        } else {
            ++agg.reps_ok;
            agg.fdr += row.fdp;
            agg.ap += row.tpp;
        }
    }
    for (auto& [name, agg] : report.aggregates) {
        if (agg.reps_ok > 0) {
            agg.fdr /= agg.reps_ok;
            agg.ap /= agg.reps_ok;
        }
    }
    for (const auto& row : report.rows) {
        if (row.failed) continue;
        auto& agg = report.aggregates[method_name(row.method)];
        agg.fdp_se += (row.fdp - agg.fdr) * (row.fdp - agg.fdr);
        agg.tpp_se += (row.tpp - agg.ap) * (row.tpp - agg.ap);
    }
    for (auto& [name, agg] : report.aggregates) {
        if (agg.reps_ok > 1) {
            const double n = static_cast<double>(agg.reps_ok);
            agg.fdp_se = std::sqrt(agg.fdp_se / (n - 1.0) / n);
            agg.tpp_se = std::sqrt(agg.tpp_se / (n - 1.0) / n);
        } else {
            agg.fdp_se = agg.tpp_se = 0.0;
        }
    }
    return report;
}

} // namespace sens
