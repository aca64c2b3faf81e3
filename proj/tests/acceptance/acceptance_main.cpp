// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. The default run uses the full replication counts; --ci
// switches to the reduced grids (>= 50 reps) with widened FDR tolerances.

#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <sstream>
#include <vector>

#include "sens/sens.hpp"
#include "support/test_helpers.hpp"

using namespace sens;

namespace {

struct Gate {
    int failures = 0;
    void report(int number, const std::string& name, bool pass, const std::string& detail) {
        std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << number << ": " << name
                  << " (" << detail << ")\n"
                  << std::flush;
        if (!pass) ++failures;
    }
};

struct Settings {
    bool ci = false;
    int reps_main() const { return ci ? 50 : 200; }
    int reps_power() const { return ci ? 50 : 100; }
    int reps_budget() const { return ci ? 150 : 500; }
    int decision_reps() const { return ci ? 60 : 200; }
    double fdr_budget() const { return ci ? 0.05 + 0.02 : 0.05 + 0.01; }
};

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(4);
    out << v;
    return out.str();
}

// Criteria 1 and 2: finite-sample FDR control for SENS and the theoretical-null
// failure, on Simulation 1 setting (a) at pi = 0.1.
void criteria_1_2(Gate& gate, const Settings& settings) {
    OneSampleScenario scenario;
    scenario.m = 2000;
    scenario.n = 4;
    scenario.pi = 0.1;
    scenario.mu = 3.0;
    scenario.sigma_max = 0.1;
    scenario.beta = 1.0;
    RunOptions opt;
    opt.alpha = 0.05;

    const auto start = std::chrono::steady_clock::now();
    const auto report = run_replications(
        scenario, "sim1a", {MethodId::sens_jc, MethodId::sens_kn, MethodId::bh_tn},
        settings.reps_main(), opt, 20250801, 0);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const double fdr_jc = report.aggregates.at("sens-jc").fdr;
    const double fdr_kn = report.aggregates.at("sens-kn").fdr;
    const double fdr_bh = report.aggregates.at("bh-tn").fdr;
    const double budget = settings.fdr_budget();

    gate.report(1, "finite-sample FDR control for SENS",
                fdr_jc <= budget && fdr_kn <= budget && elapsed < 600.0,
                "fdr_jc=" + fmt(fdr_jc) + " fdr_kn=" + fmt(fdr_kn) + " budget=" + fmt(budget) +
                    " reps=" + std::to_string(settings.reps_main()) +
                    " elapsed=" + fmt(elapsed) + "s");
    gate.report(2, "theoretical-null BH inflates the FDR",
                fdr_bh > 0.05 && fdr_bh > fdr_jc && fdr_bh > fdr_kn,
                "fdr_bh_tn=" + fmt(fdr_bh) + " vs alpha=0.05, fdr_sens<=" +
                    fmt(std::max(fdr_jc, fdr_kn)));
}

// Criterion 3: BC rejection set == e-BH rejection set, exactly.
void criterion_3(Gate& gate) {
    Rng rng(333);
    const double alphas[] = {0.05, 0.1, 0.2, 1.0};
    long mismatches = 0, checks = 0;
    for (int config = 0; config < 1000; ++config) {
        const std::size_t m = 20 + rng.next_below(380);
        std::vector<double> g(m);
        for (auto& v : g) {
            const double mag = rng.next_uniform(0.0, 3.0);
            v = rng.next_uniform() < 0.45 ? -mag : mag;
        }
        if (config % 7 == 0) {
            for (auto& v : g) v = -std::fabs(v); // all-negative edge case
        }
        for (double alpha : alphas) {
            const double tau = bc_threshold(g, alpha);
            std::vector<std::size_t> bc;
            if (!std::isinf(tau)) {
                for (std::size_t i = 0; i < m; ++i) {
                    if (g[i] >= tau) bc.push_back(i);
                }
            }
            if (e_bh(e_values(g, tau), alpha) != bc) ++mismatches;
            ++checks;
        }
    }
    gate.report(3, "BC rejections equal e-BH rejections", mismatches == 0,
                std::to_string(checks) + " configs, " + std::to_string(mismatches) +
                    " mismatches");
}

// Criterion 4: mirror-rule rejections equal the direct score rule with tau'.
void criterion_4(Gate& gate) {
    Rng rng(444);
    const double alphas[] = {0.05, 0.1, 0.2, 1.0};
    long mismatches = 0, checks = 0;
    for (int config = 0; config < 1000; ++config) {
        const std::size_t m = 20 + rng.next_below(180);
        std::vector<double> u(m), u0(m);
        for (std::size_t i = 0; i < m; ++i) {
            u[i] = rng.next_uniform(0.0, 4.0);
            u0[i] = rng.next_uniform(0.0, 4.0);
        }
        const double alpha = alphas[config % 4];

        std::vector<double> g(m);
        for (std::size_t i = 0; i < m; ++i) {
            g[i] = mirror_statistic(u[i], u0[i], AntisymVariant::paper);
        }
        const double tau = bc_threshold(g, alpha);

        std::vector<double> candidates = u;
        candidates.insert(candidates.end(), u0.begin(), u0.end());
        double tau_prime = -std::numeric_limits<double>::infinity();
        for (double lambda : candidates) {
            double numer = 1.0, denom = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                if (u0[j] <= std::min(u[j], lambda)) numer += 1.0;
                if (u[j] <= std::min(u0[j], lambda)) denom += 1.0;
            }
            if (numer / std::max(denom, 1.0) <= alpha) tau_prime = std::max(tau_prime, lambda);
        }
        for (std::size_t i = 0; i < m; ++i) {
            const bool via_mirror = !std::isinf(tau) && g[i] >= tau;
            const bool via_scores = u[i] <= std::min(u0[i], tau_prime);
            if (via_mirror != via_scores) ++mismatches;
            ++checks;
        }
    }
    gate.report(4, "mirror rule equals the direct score rule", mismatches == 0,
                std::to_string(checks) + " decisions, " + std::to_string(mismatches) +
                    " mismatches");
}

// Criterion 5: Jin-Cai recovery of N(0.5, 1.3^2) from 10^4 draws. The detail
// line reports the measured error spread alongside the stated 0.05 tolerance;
// for mu0 that tolerance sits at ~1.4 sigma of the estimator's own MC spread,
// so this criterion can fail for a faithful implementation.
void criterion_5(Gate& gate) {
    int good = 0;
    double mu_rms = 0.0, sigma_rms = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
        Rng rng(5000 + seed);
        std::vector<double> draws;
        draws.reserve(10000);
        for (int i = 0; i < 10000; ++i) draws.push_back(rng.next_normal(0.5, 1.3));
        const JinCaiNull fit = jin_cai_fit(draws, 0.1);
        const double err_mu = std::fabs(fit.mu0 - 0.5);
        const double err_sigma = std::fabs(fit.sigma0 - 1.3);
        mu_rms += err_mu * err_mu;
        sigma_rms += err_sigma * err_sigma;
        if (err_mu < 0.05 && err_sigma < 0.05) ++good;
    }
    mu_rms = std::sqrt(mu_rms / 20.0);
    sigma_rms = std::sqrt(sigma_rms / 20.0);
    gate.report(5, "Jin-Cai recovery of a gaussian null", good >= 18,
                std::to_string(good) + "/20 seeds within 0.05; measured rms errors: mu=" +
                    fmt(mu_rms) + " sigma=" + fmt(sigma_rms));
}

// Criterion 6: pairwise exchangeability of the constructions, plus the
// negative control for the full-sample-scale variant. The per-seed checks run
// at a 3-sigma band and a 1% KS critical value; consistency with those levels
// over 20 seeds allows the one nominal false alarm (>= 19/20).
void criterion_6(Gate& gate) {
    bool all_pass = true;
    std::ostringstream detail;

    {
        OneSampleScenario scenario;
        scenario.m = 2000;
        scenario.n = 6;
        scenario.pi = 0.0;
        scenario.mu = 3.0;
        scenario.sigma_max = 1.0;
        scenario.beta = 0.5;
        const double band = 3.0 * std::sqrt(0.25 / static_cast<double>(scenario.m));
        const double crit = test_support::ks_two_sample_crit_1pct(scenario.m);
        int ok = 0;
        for (int seed = 0; seed < 20; ++seed) {
            const auto data = generate_one_sample(scenario, Rng(61000 + seed));
            const PairBatch batch = build_pairs(data.units, Rng(62000 + seed));
            std::vector<double> t, t0;
            std::size_t greater = 0;
            for (const auto& p : batch.pairs) {
                t.push_back(p.t);
                t0.push_back(p.t0);
                if (p.t > p.t0) ++greater;
            }
            const double frac =
                static_cast<double>(greater) / static_cast<double>(batch.pairs.size());
            if (std::fabs(frac - 0.5) <= band &&
                test_support::ks_two_sample(t, t0) < crit) {
                ++ok;
            }
        }
        all_pass = all_pass && ok >= 19;
        detail << "one-sample " << ok << "/20";
    }
    {
        TwoSampleScenario scenario;
        scenario.m = 2000;
        scenario.n_x = 6;
        scenario.n_y = 8;
        scenario.pi_x = 0.0;
        scenario.pi_y = 0.0;
        scenario.sigma_x_max = 1.0;
        scenario.sigma_y_max = 0.6;
        scenario.beta = 0.5;
        const double band = 3.0 * std::sqrt(0.25 / static_cast<double>(scenario.m));
        const double crit = test_support::ks_two_sample_crit_1pct(scenario.m);
        int ok = 0;
        for (int seed = 0; seed < 20; ++seed) {
            const auto data = generate_two_sample(scenario, Rng(63000 + seed));
            const PairBatch batch = build_pairs(data.units, Rng(64000 + seed));
            std::vector<double> t, t0;
            std::size_t greater = 0;
            for (const auto& p : batch.pairs) {
                t.push_back(p.t);
                t0.push_back(p.t0);
                if (p.t > p.t0) ++greater;
            }
            const double frac =
                static_cast<double>(greater) / static_cast<double>(batch.pairs.size());
            if (std::fabs(frac - 0.5) <= band &&
                test_support::ks_two_sample(t, t0) < crit) {
                ++ok;
            }
        }
        all_pass = all_pass && ok >= 19;
        detail << ", two-sample " << ok << "/20";
    }
    {
        // Negative control: the naive scale must fail the KS check at m = 20000.
        const std::size_t m = 20000;
        Rng rng(65001);
        std::vector<double> t, t0;
        t.reserve(m);
        t0.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            UnitObservations obs{"u", {}};
            Rng sub = rng.substream(i);
            for (int j = 0; j < 4; ++j) obs.values.push_back(sub.next_normal());
            const auto split = split_unit(4, sub);
            const CalibratedPair pair = standardize_naive(obs, split);
            t.push_back(pair.t);
            t0.push_back(pair.t0);
        }
        const double ks = test_support::ks_two_sample(t, t0);
        const double crit = test_support::ks_two_sample_crit_1pct(m);
        const bool rejects = ks > crit;
        all_pass = all_pass && rejects;
        detail << ", negative control ks=" << fmt(ks) << (rejects ? ">" : "<=")
               << fmt(crit);
    }
    gate.report(6, "pairwise exchangeability suite", all_pass, detail.str());
}

// Criterion 7: symmetrized filtered sample matches the closed-form law.
void criterion_7(Gate& gate) {
    const std::size_t n = 100000;
    Rng rng(777);
    std::vector<double> draws;
    draws.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = rng.next_normal();
        const double t0 = rng.next_normal();
        const double kept = std::fabs(t) <= std::fabs(t0) ? t : t0;
        draws.push_back((rng.next_u64() & 1u) ? kept : -kept);
    }
    const auto cdf = [](double x) {
        const double a = std::fabs(x);
        const double phi = std_normal_cdf(a);
        const double upper = -2.0 * phi * phi + 4.0 * phi - 1.0; // F(a) for a >= 0
        return x >= 0.0 ? upper : 1.0 - upper;
    };
    const double ks = test_support::ks_one_sample(draws, cdf);
    gate.report(7, "filtering law matches the closed form", ks < 0.01,
                "ks=" + fmt(ks) + " at n=" + std::to_string(n));
}

// Criterion 8: generalized e-value budget under the global null.
void criterion_8(Gate& gate, const Settings& settings) {
    OneSampleScenario scenario;
    scenario.m = 500;
    scenario.n = 6;
    scenario.pi = 0.0;
    scenario.mu = 1.0;
    scenario.sigma_max = 1.0;
    scenario.beta = 0.5;
    SensConfig cfg;
    cfg.alpha = 0.05;

    const int reps = settings.reps_budget();
    std::vector<double> sums;
    sums.reserve(reps);
    for (int rep = 0; rep < reps; ++rep) {
        const auto data = generate_one_sample(scenario, Rng(80000 + rep));
        const PairBatch batch = build_pairs(data.units, Rng(81000 + rep));
        const MirrorResult result = sens_run(batch.pairs, cfg);
        double total = 0.0;
        for (double e : result.e) total += e;
        sums.push_back(total);
    }
    double mean = 0.0;
    for (double s : sums) mean += s;
    mean /= static_cast<double>(reps);
    double var = 0.0;
    for (double s : sums) var += (s - mean) * (s - mean);
    const double se = std::sqrt(var / (reps - 1.0) / reps);
    const double bound = static_cast<double>(scenario.m) + 3.0 * se;
    gate.report(8, "all-null e-value budget", mean <= bound,
                "mean sum=" + fmt(mean) + " <= m+3se=" + fmt(bound) + " over " +
                    std::to_string(reps) + " reps");
}

// Criterion 9: derandomization reduces decision variance on a fixed dataset.
// m stays well above 1/alpha_k so the per-run mirror threshold is attainable.
void criterion_9(Gate& gate, const Settings& settings) {
    OneSampleScenario scenario;
    scenario.m = 800;
    scenario.n = 50;
    scenario.pi = 0.1;
    scenario.mu = 0.12;
    scenario.sigma_max = 0.45;
    scenario.beta = 0.5;
    const auto data = generate_one_sample(scenario, Rng(909));

    SensConfig cfg;
    cfg.alpha = 0.05;
    DerandConfig derand;
    derand.n_runs = 10;
    derand.per_run_alpha_frac = 0.5;

    const int reps = settings.decision_reps();
    std::vector<std::vector<int>> single(reps, std::vector<int>(scenario.m, 0));
    std::vector<std::vector<int>> aggregated(reps, std::vector<int>(scenario.m, 0));
    double single_total = 0.0, aggregated_total = 0.0;
    for (int r = 0; r < reps; ++r) {
        const PairBatch batch = build_pairs(data.units, Rng(hash_combine(91000, r)));
        const MirrorResult run = sens_run(batch.pairs, cfg);
        for (std::size_t idx : run.rejected) single[r][idx] = 1;
        single_total += static_cast<double>(run.rejected.size());

        const DerandResult agg =
            derandomized_sens(data.units, cfg, derand, Rng(hash_combine(92000, r)));
        for (std::size_t idx : agg.rejected) aggregated[r][idx] = 1;
        aggregated_total += static_cast<double>(agg.rejected.size());
    }
    const double var_single = variance_metric(single);
    const double var_derand = variance_metric(aggregated);
    gate.report(9, "derandomization reduces decision variance", var_derand < var_single,
                "single=" + fmt(var_single) + " derand=" + fmt(var_derand) +
                    " mean discoveries " + fmt(single_total / reps) + " vs " +
                    fmt(aggregated_total / reps));
}

// Criterion 10: power ordering of SENS_KN against stBC and sfBH.
void criterion_10(Gate& gate, const Settings& settings) {
    OneSampleScenario scenario;
    scenario.m = 2000;
    scenario.n = 4;
    scenario.pi = 0.1;
    scenario.mu = 3.0;
    scenario.sigma_max = 0.3;
    scenario.beta = 1.0;
    RunOptions opt;
    opt.alpha = 0.05;
    opt.sfbh_flips = 1000;

    const auto report = run_replications(scenario, "sim2",
                                         {MethodId::sens_kn, MethodId::stbc, MethodId::sfbh},
                                         settings.reps_power(), opt, 20250810, 0);
    const auto& kn = report.aggregates.at("sens-kn");
    const auto& stbc = report.aggregates.at("stbc");
    const auto& sfbh = report.aggregates.at("sfbh");
    const double se_stbc = std::sqrt(kn.tpp_se * kn.tpp_se + stbc.tpp_se * stbc.tpp_se);
    const double se_sfbh = std::sqrt(kn.tpp_se * kn.tpp_se + sfbh.tpp_se * sfbh.tpp_se);
    const bool pass = kn.ap >= stbc.ap - se_stbc && kn.ap >= sfbh.ap - se_sfbh;
    gate.report(10, "power ordering of SENS_KN", pass,
                "ap_kn=" + fmt(kn.ap) + " ap_stbc=" + fmt(stbc.ap) + " ap_sfbh=" + fmt(sfbh.ap) +
                    " reps=" + std::to_string(settings.reps_power()));
}

// Criterion 11: special-function accuracy.
void criterion_11(Gate& gate) {
    double max_t_err = 0.0;
    const double pi = std::acos(-1.0);
    for (int k = 0; k <= 100000; ++k) {
        const double x = -50.0 + 100.0 * k / 100000.0;
        const double cauchy = 0.5 + std::atan(x) / pi;
        max_t_err = std::max(max_t_err, std::fabs(student_t_cdf(x, 1) - cauchy));
    }
    double max_round_trip = 0.0;
    for (int e = -8; e <= 8; ++e) {
        if (e == 0) continue;
        const double p = e < 0 ? std::pow(10.0, e) : 1.0 - std::pow(10.0, -e);
        max_round_trip =
            std::max(max_round_trip, std::fabs(std_normal_cdf(std_normal_quantile(p)) - p));
    }
    for (int k = 1; k < 1000; ++k) {
        const double p = static_cast<double>(k) / 1000.0;
        max_round_trip =
            std::max(max_round_trip, std::fabs(std_normal_cdf(std_normal_quantile(p)) - p));
    }
    gate.report(11, "special-function accuracy", max_t_err < 1e-10 && max_round_trip < 1e-10,
                "max t-cdf err=" + fmt(max_t_err) + " max round-trip err=" + fmt(max_round_trip));
}

} // namespace

int main(int argc, char** argv) {
    Settings settings;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--ci") == 0) settings.ci = true;
    }
    std::cout << "acceptance mode: " << (settings.ci ? "ci (reduced grids)" : "full") << "\n";

    Gate gate;
    criteria_1_2(gate, settings);
    criterion_3(gate);
    criterion_4(gate);
    criterion_5(gate);
    criterion_6(gate);
    criterion_7(gate);
    criterion_8(gate, settings);
    criterion_9(gate, settings);
    criterion_10(gate, settings);
    criterion_11(gate);

    if (gate.failures > 0) {
        std::cout << gate.failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
