// Command-line entry point: `analyze` applies a testing procedure to a
// long-format CSV, `simulate` runs seeded replication studies over scenario
// files. All randomness flows from --seed; identical invocations produce
// byte-identical outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sens/sens.hpp"

namespace fs = std::filesystem;
using namespace sens;

namespace {

struct CommonOptions {
    double alpha = 0.05;
    std::uint64_t seed = 1;
    double jc_gamma = 0.1;
    bool bias_correct = false;
    std::string antisym = "paper";
    int sfbh_b = 1000;
    int derand_n = 1;
    double derand_alpha_frac = 0.5;
    std::string null_estimator = "kn";
};

AntisymVariant parse_antisym(const std::string& name) {
    if (name == "paper") return AntisymVariant::paper;
    if (name == "g1") return AntisymVariant::g1;
    if (name == "g2") return AntisymVariant::g2;
    throw std::runtime_error("unknown anti-symmetric function '" + name +
                             "' (valid: paper, g1, g2)");
}

NullEstimator parse_null_estimator(const std::string& name) {
    if (name == "kn") return NullEstimator::kernel;
    if (name == "jc") return NullEstimator::jin_cai;
    throw std::runtime_error("unknown null estimator '" + name + "' (valid: kn, jc)");
}

RunOptions to_run_options(const CommonOptions& common) {
    RunOptions opt;
    opt.alpha = common.alpha;
    opt.jc_gamma = common.jc_gamma;
    opt.bias_correct = common.bias_correct;
    opt.antisym = parse_antisym(common.antisym);
    opt.sfbh_flips = common.sfbh_b;
    opt.derand_runs = common.derand_n;
    opt.derand_alpha_frac = common.derand_alpha_frac;
    opt.cfbh_null = parse_null_estimator(common.null_estimator);
    return opt;
}

MethodId parse_method_or_fail(const std::string& name) {
    const auto id = parse_method(name);
    if (!id) {
        throw std::runtime_error("unknown method '" + name + "' (valid: " + method_list() + ")");
    }
    return *id;
}

void echo_common(std::ostream& out, const CommonOptions& common, MethodId method) {
    out << "method: " << method_name(method) << "\n"
        << "alpha: " << format_double(common.alpha) << "\n"
        << "seed: " << common.seed << "\n"
        << "antisym: " << common.antisym << "\n"
        << "jc_gamma: " << format_double(common.jc_gamma) << "\n"
        << "bias_correct: " << (common.bias_correct ? "true" : "false") << "\n"
        << "derand_n: " << common.derand_n << "\n"
        << "derand_alpha_frac: " << format_double(common.derand_alpha_frac) << "\n"
        << "sfbh_b: " << common.sfbh_b << "\n";
}

// Per-unit detail for the analyze output; fields absent for a method stay empty.
struct UnitDetail {
    std::string unit_id;
    std::optional<double> t, t0, u, u0, g, e;
    bool rejected = false;
};

struct AnalyzeRun {
    std::vector<UnitDetail> details;
    std::size_t discoveries = 0;
    std::optional<double> tau;
    std::size_t degenerate_count = 0;
};

bool method_is_randomized(MethodId id) {
    switch (id) {
        case MethodId::sens_kn:
        case MethodId::sens_jc:
        case MethodId::cfbh:
        case MethodId::sfbh:
            return true;
        default:
            return false;
    }
}

template <typename UnitVector>
std::vector<std::string> unit_ids_of(const UnitVector& units) {
    std::vector<std::string> ids;
    ids.reserve(units.size());
    for (const auto& u : units) ids.push_back(u.unit_id);
    return ids;
}

template <typename UnitVector>
AnalyzeRun analyze_sens(const UnitVector& units, MethodId id, const RunOptions& opt,
                        const Rng& rng) {
    const NullEstimator estimator =
        id == MethodId::sens_kn ? NullEstimator::kernel : NullEstimator::jin_cai;
    AnalyzeRun run;
    run.details.resize(units.size());
    const auto ids = unit_ids_of(units);
    for (std::size_t i = 0; i < units.size(); ++i) run.details[i].unit_id = ids[i];

    SensConfig cfg;
    cfg.alpha = opt.alpha;
    cfg.antisym = opt.antisym;
    cfg.density.null_estimator = estimator;
    cfg.density.jc_gamma = opt.jc_gamma;
    cfg.density.bias_correct = opt.bias_correct && estimator == NullEstimator::kernel;

    if (opt.derand_runs > 1) {
        DerandConfig derand;
        derand.n_runs = opt.derand_runs;
        derand.per_run_alpha_frac = opt.derand_alpha_frac;
        const DerandResult result = derandomized_sens(units, cfg, derand, rng);
        for (std::size_t i = 0; i < units.size(); ++i) run.details[i].e = result.e_bar[i];
        for (std::size_t idx : result.rejected) run.details[idx].rejected = true;
        run.discoveries = result.rejected.size();
        return run;
    }

    const PairBatch batch = build_pairs(units, rng.substream(0x51u));
    const MirrorResult result = sens_run(batch.pairs, cfg);
    for (std::size_t i = 0; i < units.size(); ++i) {
        auto& d = run.details[i];
        d.t = batch.pairs[i].t;
        d.t0 = batch.pairs[i].t0;
        d.u = result.u[i];
        d.u0 = result.u0[i];
        d.g = result.g[i];
        d.e = result.e[i];
    }
    for (std::size_t idx : result.rejected) run.details[idx].rejected = true;
    run.discoveries = result.rejected.size();
    run.tau = result.tau;
    run.degenerate_count = result.degenerate_count;
    return run;
}

template <typename UnitVector>
AnalyzeRun analyze_cfbh(const UnitVector& units, const RunOptions& opt, const Rng& rng) {
    AnalyzeRun run;
    run.details.resize(units.size());
    const auto ids = unit_ids_of(units);
    const PairBatch batch = build_pairs(units, rng.substream(0x51u));
    DensityOptions density;
    density.null_estimator = opt.cfbh_null;
    density.jc_gamma = opt.jc_gamma;
    const DensityModel model = fit_density_model(batch.pairs, density);
    const ScoreSet scores = score(model, batch.pairs);
    const auto rejected = bh_procedure(conformal_p_values(scores.u, scores.u0), opt.alpha);
    for (std::size_t i = 0; i < units.size(); ++i) {
        auto& d = run.details[i];
        d.unit_id = ids[i];
        d.t = batch.pairs[i].t;
        d.t0 = batch.pairs[i].t0;
        d.u = scores.u[i];
        d.u0 = scores.u0[i];
    }
    for (std::size_t idx : rejected) run.details[idx].rejected = true;
    run.discoveries = rejected.size();
    run.degenerate_count = batch.degenerate_count;
    return run;
}

AnalyzeRun analyze_z_method(const std::vector<double>& z, const std::vector<std::string>& ids,
                            MethodId id, const RunOptions& opt) {
    AnalyzeRun run;
    run.details.resize(z.size());
    std::vector<std::size_t> rejected;
    if (id == MethodId::bh_tn) {
        rejected = bh_procedure(p_from_null(z, 0.0, 1.0), opt.alpha);
    } else {
        const JinCaiNull null = jin_cai_fit(z, opt.jc_gamma);
        rejected = bh_procedure(p_from_null(z, null.mu0, null.sigma0), opt.alpha);
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
        run.details[i].unit_id = ids[i];
        run.details[i].t = z[i];
    }
    for (std::size_t idx : rejected) run.details[idx].rejected = true;
    run.discoveries = rejected.size();
    return run;
}

template <typename UnitVector>
AnalyzeRun analyze_once(const UnitVector& units, MethodId id, const RunOptions& opt,
                        const Rng& rng) {
    switch (id) {
        case MethodId::sens_kn:
        case MethodId::sens_jc:
            return analyze_sens(units, id, opt, rng);
        case MethodId::cfbh:
            return analyze_cfbh(units, opt, rng);
        case MethodId::bh_tn:
        case MethodId::bh_een:
            return analyze_z_method(z_values_full_sample(units), unit_ids_of(units), id, opt);
        case MethodId::sfbh:
        case MethodId::stbc:
            if constexpr (std::is_same_v<typename UnitVector::value_type, UnitObservations>) {
                AnalyzeRun run;
                run.details.resize(units.size());
                const auto ids = unit_ids_of(units);
                const auto z = z_values_full_sample(units);
                std::vector<std::size_t> rejected;
                if (id == MethodId::sfbh) {
                    rejected = sf_bh(units, opt.sfbh_flips, opt.alpha, rng.substream(0xf1u));
                } else {
                    rejected = st_bc(units, opt.alpha);
                }
                for (std::size_t i = 0; i < units.size(); ++i) {
                    run.details[i].unit_id = ids[i];
                    run.details[i].t = z[i];
                }
                for (std::size_t idx : rejected) run.details[idx].rejected = true;
                run.discoveries = rejected.size();
                return run;
            } else {
                throw std::runtime_error(std::string(method_name(id)) +
                                         " applies to one-sample data only");
            }
    }
    throw std::runtime_error("unknown method");
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string{};
}

template <typename UnitVector>
int run_analyze_on(const UnitVector& units, MethodId method, const CommonOptions& common,
                   int repeats, const std::string& output_path,
                   const std::string& summary_path) {
    const RunOptions opt = to_run_options(common);
    const Rng root(common.seed);
    const int runs = method_is_randomized(method) ? repeats : 1;

    AnalyzeRun first;
    std::vector<std::size_t> reject_counts(units.size(), 0);
    double total_discoveries = 0.0;
    for (int r = 0; r < runs; ++r) {
        const AnalyzeRun run = analyze_once(units, method, opt, root.substream(0xabu, r));
        if (r == 0) first = run;
        for (std::size_t i = 0; i < run.details.size(); ++i) {
            if (run.details[i].rejected) ++reject_counts[i];
        }
        total_discoveries += static_cast<double>(run.discoveries);
    }
    const double mean_discoveries = total_discoveries / static_cast<double>(runs);

    std::ofstream out(output_path);
    if (!out) throw std::runtime_error("cannot open output file '" + output_path + "'");
    out << "unit,t,t0,u,u0,g,e,rejected";
    if (runs > 1) out << ",reject_freq";
    out << "\n";
    for (std::size_t i = 0; i < first.details.size(); ++i) {
        const auto& d = first.details[i];
        out << d.unit_id << ',' << opt_cell(d.t) << ',' << opt_cell(d.t0) << ','
            << opt_cell(d.u) << ',' << opt_cell(d.u0) << ',' << opt_cell(d.g) << ','
            << opt_cell(d.e) << ',' << (d.rejected ? 1 : 0);
        if (runs > 1) {
            out << ','
                << format_double(static_cast<double>(reject_counts[i]) /
                                 static_cast<double>(runs));
        }
        out << "\n";
    }

    std::ostringstream summary;
    summary << "mode: analyze\n";
    echo_common(summary, common, method);
    summary << "units: " << units.size() << "\n"
            << "repeats: " << runs << "\n"
            << "degenerate_units: " << first.degenerate_count << "\n";
    if constexpr (std::is_same_v<typename UnitVector::value_type, TwoSampleUnit>) {
        if (method == MethodId::bh_tn || method == MethodId::bh_een) {
            summary << "z_dof: pooled n_x+n_y-2\n";
        }
    }
    if (first.tau) summary << "tau: " << format_double(*first.tau) << "\n";
    summary << "discoveries: " << first.discoveries << "\n"
            << "mean_discoveries: " << format_double(mean_discoveries) << "\n"
            << "output: " << output_path << "\n";
    if (summary_path.empty()) {
        std::cout << summary.str();
    } else {
        std::ofstream sfile(summary_path);
        if (!sfile) throw std::runtime_error("cannot open summary file '" + summary_path + "'");
        sfile << summary.str();
        std::cout << summary.str();
    }
    return 0;
}

int cmd_analyze(const std::string& input_path, const std::string& method_name_arg,
                const CommonOptions& common, int repeats, const std::string& output_path,
                const std::string& summary_path) {
    const MethodId method = parse_method_or_fail(method_name_arg);
    std::ifstream input(input_path);
    if (!input) throw std::runtime_error("cannot open input file '" + input_path + "'");
    const LongCsv csv = read_long_csv(input);
    if (csv.two_sample) {
        return run_analyze_on(csv.two_sample_units, method, common, repeats, output_path,
                              summary_path);
    }
    return run_analyze_on(csv.one_sample_units, method, common, repeats, output_path,
                          summary_path);
}

int cmd_simulate(const std::string& scenario_path, const std::string& methods_arg,
                 const CommonOptions& common, int reps, int threads,
                 const std::string& out_dir) {
    std::ifstream input(scenario_path);
    if (!input) throw std::runtime_error("cannot open scenario file '" + scenario_path + "'");
    const ScenarioSweep sweep = read_scenario_file(input);

    std::vector<MethodId> methods;
    std::stringstream names(methods_arg);
    std::string token;
    while (std::getline(names, token, ',')) {
        if (!token.empty()) methods.push_back(parse_method_or_fail(token));
    }
    if (methods.empty()) throw std::runtime_error("no methods given");

    const RunOptions opt = to_run_options(common);
    fs::create_directories(out_dir);

    std::vector<std::pair<std::string, ReplicationReport>> reports;
    for (const auto& [label, spec] : sweep.items) {
        const std::uint64_t item_seed = hash_combine(common.seed, fnv1a64(label));
        reports.emplace_back(label,
                             run_replications(spec, label, methods, reps, opt, item_seed, threads));
    }

    const fs::path rows_path = fs::path(out_dir) / "results_reps.csv";
    const fs::path agg_path = fs::path(out_dir) / "results_aggregate.csv";
    const fs::path summary_path = fs::path(out_dir) / "summary.txt";

    {
        std::ofstream out(rows_path);
        out << "scenario,method,rep,fdp,tpp\n";
        for (const auto& [label, report] : reports) {
            for (const auto& row : report.rows) {
                out << row.scenario << ',' << method_name(row.method) << ',' << row.rep << ',';
                if (row.failed) {
                    out << "NA,NA\n";
                } else {
                    out << format_double(row.fdp) << ',' << format_double(row.tpp) << '\n';
                }
            }
        }
    }
    {
        std::ofstream out(agg_path);
        write_aggregates(out, reports);
    }
    {
        std::ofstream out(summary_path);
        out << "mode: simulate\n"
            << "scenario_file: " << scenario_path << "\n"
            << "methods: " << methods_arg << "\n"
            << "reps: " << reps << "\n"
            << "alpha: " << format_double(common.alpha) << "\n"
            << "seed: " << common.seed << "\n"
            << "threads: " << threads << "\n"
            << "antisym: " << common.antisym << "\n"
            << "jc_gamma: " << format_double(common.jc_gamma) << "\n"
            << "sfbh_b: " << common.sfbh_b << "\n"
            << "derand_n: " << common.derand_n << "\n"
            << "derand_alpha_frac: " << format_double(common.derand_alpha_frac) << "\n"
            << "scenarios: " << reports.size() << "\n";
        for (const auto& [label, report] : reports) {
            for (const auto& [name, agg] : report.aggregates) {
                out << label << ' ' << name << " fdr=" << format_double(agg.fdr)
                    << " ap=" << format_double(agg.ap) << " reps_ok=" << agg.reps_ok
                    << " failures=" << agg.failures << "\n";
            }
        }
    }
    std::cout << "wrote " << rows_path.string() << "\n"
              << "wrote " << agg_path.string() << "\n"
              << "wrote " << summary_path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SENS conformalized multiple testing"};
    app.require_subcommand(1);

    CommonOptions common;

    auto add_common = [&common](CLI::App* cmd) {
        cmd->add_option("--alpha", common.alpha, "target FDR level in (0,1)")
            ->check(CLI::Range(1e-6, 0.999999));
        cmd->add_option("--seed", common.seed, "master seed; all randomness derives from it");
        cmd->add_option("--jc-gamma", common.jc_gamma,
                        "characteristic-function tuning parameter in (0, 0.5)");
        cmd->add_flag("--bias-correct", common.bias_correct,
                      "apply the filtering bias correction (kernel null only)");
        cmd->add_option("--antisym", common.antisym, "anti-symmetric function: paper, g1, g2");
        cmd->add_option("--sfbh-b", common.sfbh_b, "sign-flip count for sfbh");
        cmd->add_option("--derand-n", common.derand_n,
                        "derandomization runs for sens methods (1 = off)");
        cmd->add_option("--derand-alpha-frac", common.derand_alpha_frac,
                        "per-run alpha as a fraction of the target alpha");
        cmd->add_option("--null-estimator", common.null_estimator,
                        "working-null estimator for cfbh: kn or jc");
    };

    std::string input_path, output_path, summary_path, method_arg;
    int repeats = 1;
    CLI::App* analyze = app.add_subcommand("analyze", "run a method on a long-format CSV");
    analyze->add_option("--input", input_path, "CSV with columns unit[,group],value")->required();
    analyze->add_option("--method", method_arg, "one of: " + method_list())->required();
    analyze->add_option("--output", output_path, "per-unit output CSV")->required();
    analyze->add_option("--summary", summary_path, "summary text file (default: stdout only)");
    analyze->add_option("--repeats", repeats, "independent repeats for randomized methods")
        ->check(CLI::PositiveNumber);
    add_common(analyze);

    std::string scenario_path, methods_arg, out_dir = ".";
    int reps = 200;
    int threads = 0;
    CLI::App* simulate = app.add_subcommand("simulate", "run a replication study");
    simulate->add_option("--scenario", scenario_path, "scenario file (key = value)")->required();
    simulate->add_option("--methods", methods_arg, "comma-separated method ids")->required();
    simulate->add_option("--reps", reps, "replications per scenario")->check(CLI::PositiveNumber);
    simulate->add_option("--threads", threads, "worker threads (0 = hardware)");
    simulate->add_option("--out-dir", out_dir, "output directory");
    add_common(simulate);

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed()) {
            return cmd_analyze(input_path, method_arg, common, repeats, output_path, summary_path);
        }
        return cmd_simulate(scenario_path, methods_arg, common, reps, threads, out_dir);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
