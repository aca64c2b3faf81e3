// File formats: long-format CSV ingestion (unit,group,value), scenario files
// in key = value form, and the CSV/summary writers used by the CLI.

#pragma once

#include <cctype>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sample_construction.hpp"
#include "simulation.hpp"

namespace sens {

// Shortest round-trippable decimal representation; identical config + seed
// gives byte-identical output files.
inline std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t lo = 0, hi = s.size();
    while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
    while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
    return s.substr(lo, hi - lo);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(trim(field));
    return fields;
}

inline double parse_number(const std::string& text, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad numeric value '" +
                                 text + "'");
    }
}

} // namespace detail

struct LongCsv {
    bool two_sample = false;
    std::vector<UnitObservations> one_sample_units;
    std::vector<TwoSampleUnit> two_sample_units;
};

// Long-format ingestion: header with columns `unit` and `value`, plus an
// optional `group` column in {x, y}. A missing or constant group column
// routes to the one-sample pipeline. Parse errors carry line numbers.
inline LongCsv read_long_csv(std::istream& input) {
    std::string line;
    if (!std::getline(input, line)) throw std::runtime_error("line 1: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    int unit_col = -1, group_col = -1, value_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "unit") unit_col = static_cast<int>(c);
        if (header[c] == "group") group_col = static_cast<int>(c);
        if (header[c] == "value") value_col = static_cast<int>(c);
    }
    if (unit_col < 0 || value_col < 0) {
        throw std::runtime_error("line 1: header must name columns 'unit' and 'value'");
    }

    struct RawUnit {
        std::vector<double> x, y, plain;
    };
    std::vector<std::string> order;
    std::map<std::string, RawUnit> raw;
    bool saw_xy = false;
    std::string first_group;
    std::size_t line_no = 1;

    while (std::getline(input, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields, found " +
                                     std::to_string(fields.size()));
        }
        const std::string& unit = fields[static_cast<std::size_t>(unit_col)];
        if (unit.empty()) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": empty unit id");
        }
        const double value =
            detail::parse_number(fields[static_cast<std::size_t>(value_col)], line_no);
        auto [it, inserted] = raw.try_emplace(unit);
        if (inserted) order.push_back(unit);

        if (group_col < 0) {
            it->second.plain.push_back(value);
            continue;
        }
        const std::string& group = fields[static_cast<std::size_t>(group_col)];
        if (group == "x" || group == "y") {
            saw_xy = true;
            (group == "x" ? it->second.x : it->second.y).push_back(value);
        } else {
            if (first_group.empty()) first_group = group;
            if (group != first_group) {
                throw std::runtime_error("line " + std::to_string(line_no) + ": group '" + group +
                                         "' (expected 'x', 'y', or one constant label)");
            }
            it->second.plain.push_back(value);
        }
    }
    if (order.empty()) throw std::runtime_error("line " + std::to_string(line_no) + ": no data rows");
    if (saw_xy && !first_group.empty()) {
        throw std::runtime_error("group column mixes x/y with '" + first_group + "'");
    }

    LongCsv out;
    out.two_sample = saw_xy;
    for (const auto& unit : order) {
        auto& entry = raw[unit];
        if (out.two_sample) {
            if (entry.x.empty() || entry.y.empty()) {
                throw std::runtime_error("unit '" + unit + "': needs rows in both groups x and y");
            }
            out.two_sample_units.push_back({unit, std::move(entry.x), std::move(entry.y)});
        } else {
            out.one_sample_units.push_back({unit, std::move(entry.plain)});
        }
    }
    return out;
}

// --- Scenario files -----------------------------------------------------------

// Key = value lines, '#' comments. `kind` selects the scenario type; `sweep`
// plus `sweep_values` expand one numeric field into a list of scenarios.
struct ScenarioSweep {
    std::vector<std::pair<std::string, ScenarioSpec>> items; // (label, scenario)
};

namespace detail {

inline void set_scenario_field(OneSampleScenario& sc, const std::string& key, double value) {
    if (key == "m") sc.m = static_cast<std::size_t>(value);
    else if (key == "n") sc.n = static_cast<int>(value);
    else if (key == "pi") sc.pi = value;
    else if (key == "mu") sc.mu = value;
    else if (key == "sigma_max") sc.sigma_max = value;
    else if (key == "beta") sc.beta = value;
    else throw std::runtime_error("unknown one-sample scenario field '" + key + "'");
}

inline void set_scenario_field(TwoSampleScenario& sc, const std::string& key, double value) {
    if (key == "m") sc.m = static_cast<std::size_t>(value);
    else if (key == "n_x") sc.n_x = static_cast<int>(value);
    else if (key == "n_y") sc.n_y = static_cast<int>(value);
    else if (key == "pi_x") sc.pi_x = value;
    else if (key == "pi_y") sc.pi_y = value;
    else if (key == "mu_x") sc.mu_x = value;
    else if (key == "mu_y") sc.mu_y = value;
    else if (key == "sigma_x_max") sc.sigma_x_max = value;
    else if (key == "sigma_y_max") sc.sigma_y_max = value;
    else if (key == "beta") sc.beta = value;
    else throw std::runtime_error("unknown two-sample scenario field '" + key + "'");
}

inline void set_scenario_field(SsmtScenario& sc, const std::string& key, double value) {
    if (key == "m") sc.m = static_cast<std::size_t>(value);
    else if (key == "pi") sc.pi = value;
    else if (key == "mu0") sc.mu0 = value;
    else if (key == "mua") sc.mua = value;
    else if (key == "sigma0") sc.sigma0 = value;
    else if (key == "rho") sc.rho = value;
    else throw std::runtime_error("unknown ssmt scenario field '" + key + "'");
}

inline std::string short_number(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%g", value);
    return buffer;
}

} // namespace detail

inline ScenarioSweep read_scenario_file(std::istream& input) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(input, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("scenario line " + std::to_string(line_no) +
                                     ": expected key = value");
        }
        kv[detail::trim(trimmed.substr(0, eq))] = detail::trim(trimmed.substr(eq + 1));
    }

    const auto kind_it = kv.find("kind");
    if (kind_it == kv.end()) throw std::runtime_error("scenario file: missing 'kind'");
    const std::string kind = kind_it->second;
    kv.erase("kind");

    std::string sweep_key;
    std::vector<double> sweep_values;
    if (auto it = kv.find("sweep"); it != kv.end()) {
        sweep_key = it->second;
        kv.erase(it);
        auto vit = kv.find("sweep_values");
        if (vit == kv.end()) throw std::runtime_error("scenario file: sweep without sweep_values");
        std::stringstream ss(vit->second);
        std::string token;
        while (std::getline(ss, token, ',')) {
            sweep_values.push_back(detail::parse_number(detail::trim(token), 0));
        }
        if (sweep_values.empty()) throw std::runtime_error("scenario file: empty sweep_values");
        kv.erase(vit);
    }

    const auto build = [&](auto base) {
        for (const auto& [key, text] : kv) {
            detail::set_scenario_field(base, key, detail::parse_number(text, 0));
        }
        ScenarioSweep sweep;
        if (sweep_key.empty()) {
            base.validate();
            sweep.items.emplace_back("base", ScenarioSpec{base});
        } else {
            for (double value : sweep_values) {
                auto item = base;
                detail::set_scenario_field(item, sweep_key, value);
                item.validate();
                sweep.items.emplace_back(sweep_key + "=" + detail::short_number(value),
                                         ScenarioSpec{item});
            }
        }
        return sweep;
    };

    if (kind == "one_sample") return build(OneSampleScenario{});
    if (kind == "two_sample") return build(TwoSampleScenario{});
    if (kind == "ssmt") return build(SsmtScenario{});
    throw std::runtime_error("scenario file: kind must be one_sample, two_sample, or ssmt");
}

// --- Writers --------------------------------------------------------------------

inline void write_replication_rows(std::ostream& out, const ReplicationReport& report) {
    out << "scenario,method,rep,fdp,tpp\n";
    for (const auto& row : report.rows) {
        out << row.scenario << ',' << method_name(row.method) << ',' << row.rep << ',';
        if (row.failed) {
            out << "NA,NA\n";
        } else {
            out << format_double(row.fdp) << ',' << format_double(row.tpp) << '\n';
        }
    }
}

inline void write_aggregates(std::ostream& out,
                             const std::vector<std::pair<std::string, ReplicationReport>>& reports) {
    out << "scenario,method,reps_ok,failures,fdr,ap,fdp_se,tpp_se\n";
    for (const auto& [label, report] : reports) {
        for (const auto& [name, agg] : report.aggregates) {
            out << label << ',' << name << ',' << agg.reps_ok << ',' << agg.failures << ','
                << format_double(agg.fdr) << ',' << format_double(agg.ap) << ','
                << format_double(agg.fdp_se) << ',' << format_double(agg.tpp_se) << '\n';
        }
    }
}

} // namespace sens
