#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sens/baselines.hpp"
#include "sens/simulation.hpp"
#include "support/test_helpers.hpp"

using namespace sens;

TEST_SUITE("baselines") {

TEST_CASE("BH frozen cases") {
    CHECK(bh_procedure({0.01, 0.02, 0.03, 0.5}, 0.1) == std::vector<std::size_t>{0, 1, 2});
    CHECK(bh_procedure({1.0, 1.0, 1.0}, 0.2).empty());
    CHECK(bh_procedure({0.05 / 3.0, 0.9, 0.9}, 0.05) == std::vector<std::size_t>{0});
}

TEST_CASE("BH equals brute-force step-up") {
    Rng rng(15);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + rng.next_below(60);
        std::vector<double> p(m);
        for (auto& v : p) v = rng.next_uniform();
        const double alpha = rng.next_uniform(0.01, 1.0);
        CHECK(bh_procedure(p, alpha) == test_support::brute_force_bh(p, alpha));
    }
}

TEST_CASE("full-sample z-values") {
    const std::vector<UnitObservations> units{
        {"zero", {-1.0, 1.0}},
        {"hand", {1.0, 1.0, 1.0, 2.0}},
    };
    const auto z = z_values_full_sample(units);
    CHECK(z[0] == 0.0);
    // mean 1.25, sd 0.5, t = 1.25 * 2 / 0.5 = 5, dof 3
    CHECK(z[1] == doctest::Approx(t_to_z(5.0, 3)).epsilon(1e-14));

    std::vector<UnitObservations> negated = units;
    for (auto& u : negated) {
        for (double& v : u.values) v = -v;
    }
    const auto zn = z_values_full_sample(negated);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(zn[i] == -z[i]);

    CHECK_THROWS_AS((void)z_values_full_sample(std::vector<UnitObservations>{{"c", {2.0, 2.0}}}),
                    DegenerateScaleError);
}

TEST_CASE("two-sample z-values use the pooled t") {
    TwoSampleUnit unit;
    unit.unit_id = "u";
    unit.x_values = {1.0, 2.0, 3.0, 4.0};
    unit.y_values = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
    const auto z = z_values_full_sample(std::vector<TwoSampleUnit>{unit});
    const double sx2 = 5.0 / 3.0, sy2 = 3.5; // sample variances
    const double pooled = (3.0 * sx2 + 5.0 * sy2) / 8.0;
    const double t = (2.5 - 2.5) / std::sqrt(pooled * (0.25 + 1.0 / 6.0));
    CHECK(z[0] == doctest::Approx(t_to_z(t, 8)).epsilon(1e-14));
    CHECK(z[0] == 0.0);
}

TEST_CASE("p-values from a gaussian null") {
    const std::vector<double> z{0.3, 0.3 + 1.959963985 * 1.7, -2.1};
    const auto p = p_from_null(z, 0.3, 1.7);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(0.05).epsilon(1e-6));
    const auto reflected = p_from_null({0.3 - (z[2] - 0.3)}, 0.3, 1.7);
    CHECK(p[2] == doctest::Approx(reflected[0]).epsilon(1e-12));
    CHECK_THROWS_AS((void)p_from_null(z, 0.0, 0.0), std::invalid_argument);

    // (mu0, sigma0) = (0, 1) is exactly the theoretical-null baseline.
    const auto theo = p_from_null(z, 0.0, 1.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(theo[i] == 2.0 * (1.0 - std_normal_cdf(std::fabs(z[i]))));
    }
}

TEST_CASE("sign-flip p frozen counts") {
    CHECK(sign_flip_p({0.5, 2.0, 1.0}, 1.5) == doctest::Approx(0.5));
    CHECK(sign_flip_p({2.0, 3.0, 4.0}, 1.0) == doctest::Approx(1.0));
    CHECK(sign_flip_p({0.1, 0.2, 0.3}, 1.0) == doctest::Approx(0.25)); // 1/(B+1)
}

TEST_CASE("sfBH p-values are super-uniform under symmetric nulls") {
    OneSampleScenario scenario;
    scenario.m = 500;
    scenario.n = 6;
    scenario.pi = 0.0;
    scenario.mu = 1.0;
    scenario.sigma_max = 1.0;
    scenario.beta = 0.5;
    const int reps = 500, flips = 64;
    std::vector<double> pooled;
    pooled.reserve(static_cast<std::size_t>(reps) * scenario.m);
    for (int rep = 0; rep < reps; ++rep) {
        const auto data = generate_one_sample(scenario, Rng(4000 + rep));
        const auto p = sf_bh_p_values(data.units, flips, Rng(9000000 + rep));
        pooled.insert(pooled.end(), p.begin(), p.end());
    }
    const double n_total = static_cast<double>(pooled.size());
    for (double q : {0.05, 0.1, 0.25, 0.5, 0.75}) {
        double below = 0.0;
        for (double p : pooled) {
            if (p <= q) below += 1.0;
        }
        const double frac = below / n_total;
        const double se = std::sqrt(q * (1.0 - q) / n_total);
        CHECK(frac <= q + 3.0 * se);
    }
}

TEST_CASE("sfBH end-to-end picks up strong signals") {
    OneSampleScenario scenario;
    scenario.m = 200;
    scenario.n = 10;
    scenario.pi = 0.2;
    scenario.mu = 3.0;
    scenario.sigma_max = 0.3;
    scenario.beta = 0.0;
    const auto data = generate_one_sample(scenario, Rng(77));
    const auto rejected = sf_bh(data.units, 500, 0.2, Rng(78));
    std::size_t hits = 0;
    for (std::size_t idx : rejected) hits += data.labels[idx] ? 1u : 0u;
    CHECK(rejected.size() > 0);
    CHECK(hits * 2 >= rejected.size()); // mostly true signals
}

TEST_CASE("stBC matches bc_threshold on the t statistics") {
    OneSampleScenario scenario;
    scenario.m = 300;
    scenario.n = 8;
    scenario.pi = 0.15;
    scenario.mu = 2.0;
    scenario.sigma_max = 0.4;
    scenario.beta = 0.5;
    const auto data = generate_one_sample(scenario, Rng(55));
    std::vector<double> t_stats;
    for (const auto& u : data.units) {
        double mean = 0.0;
        for (double v : u.values) mean += v;
        mean /= static_cast<double>(u.values.size());
        double ss = 0.0;
        for (double v : u.values) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(u.values.size() - 1));
        t_stats.push_back(mean * std::sqrt(static_cast<double>(u.values.size())) / sd);
    }
    const double tau = bc_threshold(t_stats, 0.2);
    std::vector<std::size_t> expected;
    if (!std::isinf(tau)) {
        for (std::size_t i = 0; i < t_stats.size(); ++i) {
            if (t_stats[i] >= tau) expected.push_back(i);
        }
    }
    CHECK(st_bc(data.units, 0.2) == expected);
}

TEST_CASE("stBC has one-directional power") {
    // All signals on the negative side: the right-tail mirror rejects nothing.
    Rng rng(91);
    std::vector<UnitObservations> units;
    for (int i = 0; i < 300; ++i) {
        UnitObservations u{std::to_string(i), {}};
        const double mu = i < 60 ? -3.0 : 0.0;
        for (int j = 0; j < 6; ++j) u.values.push_back(mu + 0.2 * rng.next_normal());
        units.push_back(std::move(u));
    }
    CHECK(st_bc(units, 0.1).empty());
}

TEST_CASE("stBC stays quiet on pure nulls") {
    OneSampleScenario scenario;
    scenario.m = 500;
    scenario.n = 6;
    scenario.pi = 0.0;
    scenario.mu = 1.0;
    scenario.sigma_max = 0.5;
    scenario.beta = 0.5;
    const auto data = generate_one_sample(scenario, Rng(66));
    CHECK(st_bc(data.units, 0.05).size() <= 5);
}

} // TEST_SUITE
