// Command-line front end: sweeps, matched-probability comparisons, and the
// self-validation suite. Exit codes: 0 success, 1 usage error, 2 validation
// failure.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "ecsim/sweep.hpp"

namespace {

struct CommonOpts {
    ecsim::SweepSpec spec;
    std::string schemes_csv = "original-even,original-odd,new";
    std::string variant = "adjudicated";
    std::string out_path;
    std::string config_path;
    double eta_one = 0.0;
    bool eta_one_set = false;
    CLI::Option* eta_one_opt = nullptr;
};

void add_common_options(CLI::App* cmd, CommonOpts& o, bool engine_flag) {
    cmd->add_option("--alpha-min", o.spec.alpha_min, "smallest amplitude on the grid")
        ->capture_default_str();
    cmd->add_option("--alpha-max", o.spec.alpha_max, "largest amplitude on the grid")
        ->capture_default_str();
    cmd->add_option("--points", o.spec.points, "number of grid points")->capture_default_str();
    cmd->add_option("--epsilon", o.spec.epsilon, "tapped energy fraction")->capture_default_str();
    CLI::Option* etot =
        cmd->add_option("--eta-total", o.spec.eta_total, "end-to-end channel loss")
            ->capture_default_str();
    o.eta_one_opt = cmd->add_option("--eta-one-sided", o.eta_one,
                                    "per-arm channel loss (alternative to --eta-total)");
    o.eta_one_opt->excludes(etot);
    etot->excludes(o.eta_one_opt);
    cmd->add_option("--detector-loss", o.spec.detector_loss, "detector inefficiency")
        ->capture_default_str();
    cmd->add_option("--schemes", o.schemes_csv,
                    "comma list from: original-even, original-odd, new")
        ->capture_default_str();
    cmd->add_option("--variant", o.variant, "closed-form convention")
        ->check(CLI::IsMember({"main-text", "appendix", "adjudicated"}))
        ->capture_default_str();
    if (engine_flag)
        cmd->add_flag("--engine", o.spec.with_engine,
                      "append simulation-engine columns next to the closed forms");
    cmd->add_option("--out", o.out_path, "write CSV to this path instead of stdout");
    cmd->add_option("--config", o.config_path,
                    "file of key=value pairs using these option names; flags override it");
}

// Plain key=value file, one pair per line; '#' or ';' lines are comments and a
// leading "--" on a key is tolerated.
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ecsim::UsageError("cannot open config file: " + path);
    auto trim = [](const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::string entry = trim(line);
        if (entry.empty() || entry[0] == '#' || entry[0] == ';') continue;
        const auto eq = entry.find('=');
        const std::string where = path + ":" + std::to_string(lineno);
        if (eq == std::string::npos)
            throw ecsim::UsageError("config entry is not key=value at " + where);
        std::string key = trim(entry.substr(0, eq));
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        const std::string val = trim(entry.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ecsim::UsageError("empty config key or value at " + where);
        if (!kv.emplace(key, val).second)
            throw ecsim::UsageError("duplicate config key '" + key + "' at " + where);
    }
    return kv;
}

double config_double(const std::string& key, const std::string& val) {
    std::size_t used = 0;
    double parsed = 0.0;
    try {
        parsed = std::stod(val, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != val.size())
        throw ecsim::UsageError("config value for '" + key + "' is not a number: " + val);
    return parsed;
}

int config_int(const std::string& key, const std::string& val) {
    std::size_t used = 0;
    int parsed = 0;
    try {
        parsed = std::stoi(val, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != val.size())
        throw ecsim::UsageError("config value for '" + key + "' is not an integer: " + val);
    return parsed;
}

bool config_bool(const std::string& key, const std::string& val) {
    if (val == "true" || val == "1" || val == "yes" || val == "on") return true;
    if (val == "false" || val == "0" || val == "no" || val == "off") return false;
    throw ecsim::UsageError("config value for '" + key + "' is not a boolean: " + val);
}

// Command-line flags win; file values fill in only what the user left unset.
void apply_config(const CLI::App* cmd, CommonOpts& o, bool engine_flag) {
    if (o.config_path.empty()) return;
    std::map<std::string, std::string> kv = read_config_file(o.config_path);
    auto take = [&](const char* key, auto&& use) {
        const auto it = kv.find(key);
        if (it == kv.end()) return;
        if (cmd->count(std::string("--") + key) == 0) use(it->second);
        kv.erase(it);
    };
    take("alpha-min", [&](const std::string& v) { o.spec.alpha_min = config_double("alpha-min", v); });
    take("alpha-max", [&](const std::string& v) { o.spec.alpha_max = config_double("alpha-max", v); });
    take("points", [&](const std::string& v) { o.spec.points = config_int("points", v); });
    take("epsilon", [&](const std::string& v) { o.spec.epsilon = config_double("epsilon", v); });
    take("detector-loss",
         [&](const std::string& v) { o.spec.detector_loss = config_double("detector-loss", v); });
    take("schemes", [&](const std::string& v) { o.schemes_csv = v; });
    take("variant", [&](const std::string& v) { o.variant = v; });
    take("out", [&](const std::string& v) { o.out_path = v; });
    if (engine_flag)
        take("engine", [&](const std::string& v) { o.spec.with_engine = config_bool("engine", v); });

    // The eta pair stays mutually exclusive across both sources; either flag on
    // the command line overrides both file keys.
    const auto et = kv.find("eta-total");
    const auto eo = kv.find("eta-one-sided");
    if (et != kv.end() && eo != kv.end())
        throw ecsim::UsageError("config sets both eta-total and eta-one-sided");
    const bool eta_flag_given = cmd->count("--eta-total") > 0 || cmd->count("--eta-one-sided") > 0;
    if (!eta_flag_given) {
        if (et != kv.end()) o.spec.eta_total = config_double("eta-total", et->second);
        if (eo != kv.end()) {
            o.eta_one = config_double("eta-one-sided", eo->second);
            o.eta_one_set = true;
        }
    }
    if (et != kv.end()) kv.erase("eta-total");
    if (eo != kv.end()) kv.erase("eta-one-sided");
    if (!kv.empty())
        throw ecsim::UsageError("unknown config key: '" + kv.begin()->first + "'");
}

void finalize_spec(CommonOpts& o) {
    if (o.eta_one_opt->count() > 0 || o.eta_one_set)
        o.spec.eta_total = ecsim::eta_total_from_one_sided(o.eta_one);
    o.spec.schemes = ecsim::parse_schemes(o.schemes_csv);
    if (o.variant == "main-text") o.spec.variant = ecsim::FormulaVariant::main_text;
    else if (o.variant == "appendix") o.spec.variant = ecsim::FormulaVariant::appendix;
    else if (o.variant == "adjudicated") o.spec.variant = ecsim::FormulaVariant::adjudicated;
    else throw ecsim::UsageError("unknown variant: '" + o.variant + "'");
}

void emit_csv(const ecsim::SweepTable& t, const std::string& out_path) {
    if (out_path.empty()) {
        ecsim::write_csv(std::cout, t);
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw ecsim::UsageError("cannot open output file: " + out_path);
    ecsim::write_csv(f, t);
}

void print_crossover(std::ostream& os, const ecsim::CrossoverReport& cr) {
    if (cr.found) {
        os << "crossover: alpha_star = " << ecsim::format_value(cr.alpha_star)
           << " (fidelity " << ecsim::format_value(cr.fidelity_new)
           << " at matched probability " << ecsim::format_value(cr.probability_at_crossover)
           << ")\n";
    } else if (cr.advantage_everywhere) {
        os << "crossover: none in range; the new scheme keeps the fidelity advantage "
              "over the whole grid\n";
    } else {
        os << "crossover: none found; the new scheme has no fidelity advantage at the "
              "start of the grid\n";
    }
}

int run_validate(const std::string& preset, int cutoff, const std::string& out_path) {
    const ecsim::ValidationPreset vp =
        preset == "smoke" ? ecsim::ValidationPreset::smoke : ecsim::ValidationPreset::full;
    const ecsim::ValidationReport r = ecsim::run_validation(vp, cutoff);
    for (const ecsim::AdjudicationEntry& e : r.adjudication)
        std::cout << "adjudication: " << e.formula << " -> " << e.winner << " (residual "
                  << ecsim::format_value(e.winner_residual) << "; " << e.loser << " residual "
                  << ecsim::format_value(e.loser_residual) << ")\n";
    std::cout << "closed form vs engine: max residual "
              << ecsim::format_value(r.grid_max_residual) << " over " << r.grid_points
              << " grid points (tolerance " << ecsim::format_value(r.grid_tolerance) << "): "
              << (r.grid_pass ? "PASS" : "FAIL") << "\n";
    for (const ecsim::OracleCheck& c : r.oracle_checks)
        std::cout << "engine vs oracle: " << c.task << " alpha=" << c.params.alpha
                  << " epsilon=" << c.params.epsilon << " eta_total=" << c.params.eta_total
                  << " detector_loss=" << c.params.detector_loss
                  << ": dF=" << ecsim::format_value(c.fidelity_error)
                  << " dP=" << ecsim::format_value(c.probability_error)
                  << " bound=" << ecsim::format_value(c.truncation_bound)
                  << " tolerance=" << ecsim::format_value(c.tolerance) << ": "
                  << (c.pass ? "PASS" : "FAIL") << "\n";
    std::cout << "validation: " << (r.pass ? "PASS" : "FAIL") << "\n";
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw ecsim::UsageError("cannot open output file: " + out_path);
        f << r.to_json() << "\n";
    }
    return r.pass ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heralded entangled-coherent-state distribution calculator"};
    app.require_subcommand(1);

    CommonOpts sweep_opts;
    CLI::App* sweep = app.add_subcommand(
        "sweep", "closed-form (and optionally engine) figures of merit over an amplitude grid");
    add_common_options(sweep, sweep_opts, /*engine_flag=*/true);

    CommonOpts par_opts;
    CLI::App* parametric = app.add_subcommand(
        "parametric", "fidelity-versus-probability curves and the advantage crossover");
    add_common_options(parametric, par_opts, /*engine_flag=*/false);

    std::string preset = "full";
    int cutoff = 0;
    std::string validate_out;
    CLI::App* validate =
        app.add_subcommand("validate", "formula adjudication and engine cross-checks");
    validate->add_option("--preset", preset, "smoke (fast) or full")
        ->check(CLI::IsMember({"smoke", "full"}))
        ->capture_default_str();
    validate->add_option("--cutoff", cutoff, "oracle truncation cutoff (0 = preset default)")
        ->capture_default_str();
    validate->add_option("--out", validate_out, "write a JSON report to this path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the message
        return 1;
    }

    try {
        if (sweep->parsed()) {
            apply_config(sweep, sweep_opts, /*engine_flag=*/true);
            finalize_spec(sweep_opts);
            emit_csv(ecsim::run_sweep(sweep_opts.spec), sweep_opts.out_path);
            return 0;
        }
        if (parametric->parsed()) {
            apply_config(parametric, par_opts, /*engine_flag=*/false);
            finalize_spec(par_opts);
            const ecsim::ParametricResult r = ecsim::run_parametric(par_opts.spec);
            emit_csv(r.table, par_opts.out_path);
            // keep stdout machine-readable when it carries the CSV
            print_crossover(par_opts.out_path.empty() ? std::cerr : std::cout, r.crossover);
            return 0;
        }
        if (validate->parsed()) return run_validate(preset, cutoff, validate_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
