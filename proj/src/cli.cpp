#include "mvcwm/cli.hpp"

#include "mvcwm/ecm.hpp"
#include "mvcwm/errors.hpp"
#include "mvcwm/io.hpp"
#include "mvcwm/parallel.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace mvcwm {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::pair<Family, Family> parse_pair(const std::string& s) {
    const auto dash = s.find('-');
    if (dash == std::string::npos) {
        throw ValidationError("family pair '" + s + "' must look like COV-RESP, e.g. MVST-MVGH");
    }
    return {parse_family(s.substr(0, dash)), parse_family(s.substr(dash + 1))};
}

// Response family of an FMR grid entry: "MVST", "FMR-MVST" or a pair whose
// covariate half is ignored.
Family parse_fmr_family(const std::string& s) {
    const auto dash = s.find('-');
    return parse_family(dash == std::string::npos ? s : s.substr(dash + 1));
}

std::vector<std::pair<Family, Family>> grid_pairs(const RunConfig& config) {
    std::vector<std::pair<Family, Family>> out;
    for (const auto& f : config.families) {
        if (f == "all") {
            if (config.fmr) {
                for (Family r : kAllFamilies) out.emplace_back(Family::Normal, r);
            } else {
                for (Family c : kAllFamilies)
                    for (Family r : kAllFamilies) out.emplace_back(c, r);
            }
        } else if (config.fmr) {
            out.emplace_back(Family::Normal, parse_fmr_family(f));
        } else {
            out.push_back(parse_pair(f));
        }
    }
    std::vector<std::pair<Family, Family>> unique;
    std::set<std::pair<Family, Family>> seen;
    for (const auto& p : out) {
        if (seen.insert(p).second) unique.push_back(p);
    }
    return unique;
}

template <class T>
T get_key(const json& doc, const std::string& key) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config key '" + key + "' has the wrong type");
    }
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

template <class Fn>
void write_text(const fs::path& path, Fn&& fn) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    fn(out);
}

ModelParams simulation_truth(const RunConfig& config, int& n, std::uint64_t& seed,
                             std::string& name) {
    if (!config.scenario.empty()) {
        Scenario s = find_scenario(config.scenario);
        n = config.n > 0 ? config.n : s.N;
        seed = config.controls.seed;
        name = s.name;
        return s.truth;
    }
    if (config.families.size() != 1 || config.families[0] == "all") {
        throw ValidationError("simulate needs --scenario or a single --families pair");
    }
    const auto [cov, resp] = parse_pair(config.families[0]);
    n = config.n > 0 ? config.n : 200;
    seed = config.controls.seed;
    name = config.families[0];
    return reference_truth(cov, resp, config.separation);
}

int cmd_fit_or_select(const RunConfig& config) {
    const ThreeWayData data = ingest(config.data);
    const SelectOutcome outcome = run_select(config, data);
    write_select_outputs(outcome, config.out);
    int ok = 0;
    for (const auto& e : outcome.report.entries) {
        ok += e.ok ? 1 : 0;
        std::cerr << e.pair << " G=" << e.G << ": "
                  << (e.ok ? "BIC " + format_double(e.bic) + (e.converged ? "" : " (max_iter)")
                           : "failed: " + e.error)
                  << '\n';
    }
    if (ok == 0) {
        std::cerr << "every fit failed\n";
        return 3;
    }
    const auto& best = outcome.report.best >= 0
                           ? outcome.report.entries[static_cast<std::size_t>(outcome.report.best)]
                           : outcome.report.entries.front();
    std::cout << "best: " << best.pair << " G=" << best.G << " BIC " << format_double(best.bic)
              << '\n';
    return 0;
}

int cmd_simulate(const RunConfig& config) {
    int n = 0;
    std::uint64_t seed = 0;
    std::string name;
    const ModelParams truth = simulation_truth(config, n, seed, name);
    SimulatedData sim = sample_cwm(truth, n, seed);
    if (config.epsilon > 0.0) {
        sim.data = skew_transform(sim.data, config.epsilon);
    }
    fs::create_directories(config.out);
    const fs::path dir(config.out);
    write_long_csv(sim.data, (dir / "data.csv").string());
    write_text(dir / "labels.csv", [&](std::ostream& out) {
        out << "obs,label\n";
        for (std::size_t i = 0; i < sim.labels.size(); ++i) {
            out << i + 1 << ',' << sim.labels[i] + 1 << '\n';
        }
    });
    json truth_doc = to_json(truth);
    truth_doc["name"] = name;
    truth_doc["N"] = n;
    truth_doc["seed"] = seed;
    truth_doc["epsilon"] = config.epsilon;
    write_json(truth_doc, dir / "truth.json");
    std::cout << "wrote " << n << " observations to " << (dir / "data.csv").string() << '\n';
    return 0;
}

int cmd_study(const RunConfig& config) {
    fs::create_directories(config.out);
    const fs::path dir(config.out);
    if (config.kind == "recovery") {
        if (config.scenario.empty()) {
            throw ValidationError("recovery study needs --scenario");
        }
        Scenario s = find_scenario(config.scenario);
        if (config.n > 0) {
            s.N = config.n;
        }
        const RecoveryReport rep =
            recovery_study(s, config.replicates, config.controls.seed, config.controls, config.jobs);
        write_json(to_json(rep), dir / "study.json");
        write_text(dir / "study.csv", [&](std::ostream& out) { write_recovery_csv(rep, out); });
        std::cout << "recovery: " << rep.used << " replicates used, " << rep.excluded
                  << " excluded\n";
        return rep.used > 0 ? 0 : 3;
    }
    ClassificationConfig cc;
    cc.epsilon = config.epsilon;
    cc.replicates = config.replicates;
    cc.seed = config.controls.seed;
    cc.N = config.n > 0 ? config.n : 200;
    cc.separation = config.separation;
    cc.g_min = config.g_min;
    cc.g_max = config.g_max;
    cc.controls = config.controls;
    cc.jobs = config.jobs;
    RunConfig pairs_only = config;
    pairs_only.fmr = false;
    cc.specs = grid_pairs(pairs_only);
    const ClassificationReport rep = classification_study(cc);
    write_json(to_json(rep), dir / "study.json");
    write_text(dir / "study.csv", [&](std::ostream& out) { write_classification_csv(rep, out); });
    for (const auto& row : rep.rows) {
        std::cout << row.pair << ": mean ARI " << format_double(row.mean_ari) << '\n';
    }
    return 0;
}

}  // namespace

void apply_config_json(RunConfig& config, const json& doc) {
    if (!doc.is_object()) {
        throw ValidationError("config must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (key == "data") {
            config.data = get_key<std::string>(doc, key);
        } else if (key == "families") {
            config.families = value.is_string() ? split_list(value.get<std::string>())
                                                : get_key<std::vector<std::string>>(doc, key);
        } else if (key == "g_min") {
            config.g_min = get_key<int>(doc, key);
        } else if (key == "g_max") {
            config.g_max = get_key<int>(doc, key);
        } else if (key == "fmr") {
            config.fmr = get_key<bool>(doc, key);
        } else if (key == "tol") {
            config.controls.tol = get_key<double>(doc, key);
        } else if (key == "max_iter") {
            config.controls.max_iter = get_key<int>(doc, key);
        } else if (key == "seed") {
            config.controls.seed = get_key<std::uint64_t>(doc, key);
        } else if (key == "starts") {
            config.controls.starts = get_key<int>(doc, key);
        } else if (key == "jobs") {
            config.jobs = get_key<int>(doc, key);
        } else if (key == "out") {
            config.out = get_key<std::string>(doc, key);
        } else if (key == "scenario") {
            config.scenario = get_key<std::string>(doc, key);
        } else if (key == "kind") {
            config.kind = get_key<std::string>(doc, key);
        } else if (key == "n") {
            config.n = get_key<int>(doc, key);
        } else if (key == "epsilon") {
            config.epsilon = get_key<double>(doc, key);
        } else if (key == "separation") {
            config.separation = get_key<double>(doc, key);
        } else if (key == "replicates") {
            config.replicates = get_key<int>(doc, key);
        } else {
            throw ValidationError("unknown config key '" + key + "'");
        }
    }
}

void validate_config(const RunConfig& config) {
    if (config.g_min < 1 || config.g_max < config.g_min) {
        throw ValidationError("G range [" + std::to_string(config.g_min) + ", " +
                              std::to_string(config.g_max) + "] is empty");
    }
    if (config.families.empty()) {
        throw ValidationError("no families given");
    }
    (void)grid_pairs(config);  // throws on unknown codes
    if (!(config.controls.tol > 0.0) || config.controls.max_iter < 1 || config.controls.starts < 1) {
        throw ValidationError("tol, max_iter and starts must be positive");
    }
    if (config.jobs < 1) {
        throw ValidationError("jobs must be at least 1");
    }
    if (config.n < 0 || !(config.epsilon >= 0.0)) {
        throw ValidationError("n and epsilon must be non-negative");
    }
    switch (config.command) {
        case Command::Fit:
            if (config.g_min != config.g_max || grid_pairs(config).size() != 1) {
                throw ValidationError("fit takes exactly one family pair and one G");
            }
            [[fallthrough]];
        case Command::Select:
            if (config.data.empty()) {
                throw ValidationError("--data is required");
            }
            break;
        case Command::Simulate:
            break;
        case Command::Study:
            if (config.replicates < 1) {
                throw ValidationError("a study needs at least one replicate");
            }
            if (config.kind != "recovery" && config.kind != "classification") {
                throw ValidationError("study kind must be recovery or classification");
            }
            if (config.kind == "classification" && !(config.epsilon > 0.0)) {
                throw ValidationError("classification study needs epsilon > 0");
            }
            break;
    }
}

std::vector<ModelSpec> expand_grid(const RunConfig& config, int p, int q, int r) {
    std::vector<ModelSpec> out;
    for (const auto& [cov, resp] : grid_pairs(config)) {
        for (int g = config.g_min; g <= config.g_max; ++g) {
            ModelSpec s;
            s.covariate_family = cov;
            s.response_family = resp;
            s.G = g;
            s.p = p;
            s.q = q;
            s.r = r;
            s.fmr = config.fmr;
            out.push_back(s);
        }
    }
    return out;
}

ThreeWayData ingest(const std::string& data_path) {
    if (!fs::exists(data_path)) {
        throw ValidationError("data file " + data_path + " does not exist");
    }
    return read_long_csv(data_path);
}

SelectOutcome run_select(const RunConfig& config, const ThreeWayData& data) {
    SelectOutcome out;
    out.specs = expand_grid(config, static_cast<int>(data.p()), static_cast<int>(data.q()),
                            static_cast<int>(data.r()));
    out.fits.resize(out.specs.size());
    out.report.entries.resize(out.specs.size());
    parallel_for(out.specs.size(), config.jobs, [&](std::size_t k) {
        const ModelSpec& spec = out.specs[k];
        SelectionEntry& e = out.report.entries[k];
        e.pair = spec.pair_name();
        e.G = spec.G;
        e.fmr = spec.fmr;
        try {
            FitResult r = fit(data, spec, config.controls);
            e.ok = true;
            e.converged = r.converged;
            e.loglik = r.loglik;
            e.bic = r.bic;
            e.n_params = r.n_params;
            out.fits[k] = std::move(r);
        } catch (const Error& err) {
            e.error = err.what();
        }
    });
    pick_best(out.report);
    return out;
}

void write_select_outputs(const SelectOutcome& outcome, const std::string& out_dir) {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    for (std::size_t k = 0; k < outcome.fits.size(); ++k) {
        if (!outcome.fits[k]) {
            continue;
        }
        const SelectionEntry& e = outcome.report.entries[k];
        const fs::path sub = dir / (e.pair + "_G" + std::to_string(e.G));
        fs::create_directories(sub);
        write_json(to_json(*outcome.fits[k]), sub / "result.json");
    }
    write_text(dir / "summary.csv",
               [&](std::ostream& out) { write_summary_csv(outcome.report, out); });
    write_json(to_json(outcome.report), dir / "summary.json");
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Matrix-variate cluster-weighted models: fitting, selection and simulation"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    RunConfig flags;
    std::string config_path;
    std::string families;
    std::uint64_t seed = 0;
    int max_iter = 0;
    int starts = 0;
    double tol = 0.0;

    auto* o_config = app.add_option("--config", config_path, "JSON config (flags win)");
    auto* o_data = app.add_option("--data", flags.data, "long CSV: obs,block,row,col,value");
    auto* o_families = app.add_option("--families", families,
                                      "comma list of COV-RESP pairs, response codes with --fmr, or all");
    auto* o_gmin = app.add_option("--g-min", flags.g_min, "smallest G");
    auto* o_gmax = app.add_option("--g-max", flags.g_max, "largest G");
    auto* o_fmr = app.add_flag("--fmr", flags.fmr, "fit mixtures of regressions instead");
    auto* o_tol = app.add_option("--tol", tol, "log-likelihood change for convergence");
    auto* o_iter = app.add_option("--max-iter", max_iter, "ECM sweeps per start");
    auto* o_seed = app.add_option("--seed", seed, "master seed");
    auto* o_starts = app.add_option("--starts", starts, "initializations per model");
    auto* o_jobs = app.add_option("--jobs", flags.jobs, "worker threads");
    auto* o_out = app.add_option("--out", flags.out, "output directory");
    auto* o_scen = app.add_option("--scenario", flags.scenario, "builtin scenario name");
    auto* o_kind = app.add_option("--kind", flags.kind, "study kind: recovery or classification");
    auto* o_n = app.add_option("--n", flags.n, "observations per simulated dataset");
    auto* o_eps = app.add_option("--epsilon", flags.epsilon, "skewing transform strength");
    auto* o_sep = app.add_option("--separation", flags.separation, "covariate location shift c");
    auto* o_rep = app.add_option("--replicates", flags.replicates, "study replicates");
    bool list_scenarios = false;
    app.add_flag("--list-scenarios", list_scenarios, "print builtin scenario names");

    auto* fit_cmd = app.add_subcommand("fit", "fit one model");
    auto* select_cmd = app.add_subcommand("select", "fit a grid and rank by BIC");
    auto* sim_cmd = app.add_subcommand("simulate", "draw a dataset");
    auto* study_cmd = app.add_subcommand("study", "recovery or classification study");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (list_scenarios) {
        for (const auto& s : builtin_scenarios()) {
            std::cout << s.name << '\n';
        }
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << "a subcommand is required (fit, select, simulate, study)\n";
        return 2;
    }

    try {
        RunConfig config;
        if (*o_config) {
            std::ifstream in(config_path);
            if (!in) {
                throw ValidationError("cannot open config " + config_path);
            }
            json doc;
            try {
                doc = json::parse(in);
            } catch (const json::parse_error& e) {
                throw ValidationError(std::string("config is not valid JSON: ") + e.what());
            }
            apply_config_json(config, doc);
        }
        if (*o_data) config.data = flags.data;
        if (*o_families) config.families = split_list(families);
        if (*o_gmin) config.g_min = flags.g_min;
        if (*o_gmax) config.g_max = flags.g_max;
        if (*o_fmr) config.fmr = flags.fmr;
        if (*o_tol) config.controls.tol = tol;
        if (*o_iter) config.controls.max_iter = max_iter;
        if (*o_seed) config.controls.seed = seed;
        if (*o_starts) config.controls.starts = starts;
        if (*o_jobs) config.jobs = flags.jobs;
        if (*o_out) config.out = flags.out;
        if (*o_scen) config.scenario = flags.scenario;
        if (*o_kind) config.kind = flags.kind;
        if (*o_n) config.n = flags.n;
        if (*o_eps) config.epsilon = flags.epsilon;
        if (*o_sep) config.separation = flags.separation;
        if (*o_rep) config.replicates = flags.replicates;

        if (fit_cmd->parsed()) {
            config.command = Command::Fit;
            if (!*o_gmax && *o_gmin) config.g_max = config.g_min;
        } else if (select_cmd->parsed()) {
            config.command = Command::Select;
        } else if (sim_cmd->parsed()) {
            config.command = Command::Simulate;
        } else if (study_cmd->parsed()) {
            config.command = Command::Study;
            if (!*o_gmin && !*o_gmax && config.kind == "classification") {
                config.g_min = 1;
                config.g_max = 4;
            }
        }
        validate_config(config);

        switch (config.command) {
            case Command::Fit:
            case Command::Select:
                return cmd_fit_or_select(config);
            case Command::Simulate:
                return cmd_simulate(config);
            case Command::Study:
                return cmd_study(config);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace mvcwm
