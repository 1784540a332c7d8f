#include "neuroexc/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <limits>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "neuroexc/errors.hpp"
#include "neuroexc/identifier.hpp"
#include "neuroexc/keyvalue.hpp"
#include "neuroexc/numeric_io.hpp"
#include "neuroexc/plant.hpp"
#include "neuroexc/scenario.hpp"

namespace neuroexc {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool out_required) {
    cmd->add_option("--config", opts.config, "Configuration file")->required();
    auto* out = cmd->add_option("--out", opts.out, "Output file");
    if (out_required) out->required();
    cmd->add_option("--seed", opts.seed, "RNG seed (overrides the config)");
}

// Keys understood by identify, train and validate.
void reject_unknown_identification_keys(const KeyValueFile& file) {
    file.reject_unknown({"machine", "n_samples", "dt", "substeps", "u_min", "u_max", "hold", "fast_fraction", "seed",
                         "v_operating", "p_hidden", "q_hidden", "train_fraction", "max_iter", "cost_tol", "mu_init",
                         "data", "weights"});
}

struct IdentificationConfig {
    KeyValueFile file;
    MachineParams machine;
    ExcitationPlan plan;
    TrainPlan train;
};

IdentificationConfig load_identification(const CommonOptions& opts) {
    IdentificationConfig cfg{KeyValueFile::load(opts.config), {}, {}, {}};
    reject_unknown_identification_keys(cfg.file);
    cfg.machine = load_machine_params(cfg.file.get_path("machine"));
    cfg.plan = parse_excitation_plan(cfg.file);
    cfg.train = parse_train_plan(cfg.file);
    if (opts.seed) {
        cfg.plan.seed = *opts.seed;
        cfg.train.seed = *opts.seed;
    }
    return cfg;
}

InputOutputSeries series_for(const IdentificationConfig& cfg, const std::string& data_flag) {
    if (!data_flag.empty()) return load_series(data_flag);
    if (cfg.file.contains("data")) return load_series(cfg.file.get_path("data"));
    return excite_and_record(cfg.machine, cfg.plan);
}

int run_identify(const CommonOptions& opts, std::ostream& out) {
    const auto cfg = load_identification(opts);
    const auto series = excite_and_record(cfg.machine, cfg.plan);
    save_series(series, opts.out);
    const auto [lo, hi] = std::minmax_element(series.y.begin(), series.y.end());
    out << "samples=" << series.y.size() << " seed=" << cfg.plan.seed << " y_min=" << format_double(*lo)
        << " y_max=" << format_double(*hi) << '\n';
    return kExitOk;
}

int run_train(const CommonOptions& opts, const std::string& data_flag, std::string history, std::ostream& out) {
    const auto cfg = load_identification(opts);
    const auto series = series_for(cfg, data_flag);
    const TrainOutcome result = train_narx(series, cfg.train);
    save_weights(result.model, opts.out);

    if (history.empty()) history = fs::path(opts.out).replace_extension(".history.csv").string();
    std::string csv = "iteration,cost\n";
    for (std::size_t i = 0; i < result.lm.cost_history.size(); ++i) {
        csv += std::to_string(i) + ',' + format_double(result.lm.cost_history[i]) + '\n';
    }
    write_text_atomic(history, csv);

    out << "iterations=" << result.lm.iteration << " final_cost=" << format_double(result.lm.cost_history.back())
        << " holdout_relative_error_pct=" << format_double(result.validation.relative_error_pct)
        << " suggested_d0=" << format_double(result.deadzone) << '\n';
    return kExitOk;
}

int run_validate(const CommonOptions& opts, const std::string& data_flag, std::string weights, std::ostream& out) {
    const auto cfg = load_identification(opts);
    if (weights.empty()) {
        if (!cfg.file.contains("weights")) throw ConfigError("validate: no weights file (use --weights)");
        weights = cfg.file.get_path("weights").string();
    }
    const NarxModel model = load_weights(weights);
    const Dataset data = build_regression_set(series_for(cfg, data_flag));
    const Dataset holdout = split(data, cfg.train.train_fraction).second;
    const ValidationReport report = cross_validate(model, holdout);
    out << "records=" << holdout.size() << '\n'
        << "max_abs_error=" << format_double(report.max_abs_error) << '\n'
        << "max_abs_output=" << format_double(report.max_abs_output) << '\n'
        << "relative_error_pct=" << format_double(report.relative_error_pct) << '\n'
        << "suggested_d0=" << format_double(select_deadzone(report)) << '\n';
    if (!opts.out.empty()) {
        std::string csv = "k,error\n";
        for (std::size_t k = 0; k < report.errors.size(); ++k) {
            csv += std::to_string(k) + ',' + format_double(report.errors[k]) + '\n';
        }
        write_text_atomic(opts.out, csv);
    }
    return kExitOk;
}

int run_minphase(const CommonOptions& opts, std::ostream& out) {
    const auto file = KeyValueFile::load(opts.config);
    file.reject_unknown({"machine", "v_ref"});
    const MachineParams machine = load_machine_params(file.get_path("machine"));
    std::vector<double> grid;
    for (const auto& v : file.get_all("v_ref")) {
        for (const auto& token : split_whitespace(v)) grid.push_back(parse_double(token));
    }
    if (grid.empty()) grid = {1.0, 1.1392, 1.5, 2.0};

    std::string csv = "v_ref,delta,u_eq,cb,zero_re,zero_im\n";
    bool all_ok = true;
    for (double v : grid) {
        const Equilibrium eq = find_equilibrium(machine, v);
        const LinearModel lin = linearize(machine, eq.state, eq.u);
        double max_re = -std::numeric_limits<double>::infinity();
        for (const auto& z : lin.zeros) {
            max_re = std::max(max_re, z.real());
            csv += format_double(v) + ',' + format_double(eq.state.delta) + ',' + format_double(eq.u) + ',' +
                   format_double(lin.cb()) + ',' + format_double(z.real()) + ',' + format_double(z.imag()) + '\n';
        }
        const bool ok = !lin.zeros.empty() && max_re < 0.0 && lin.cb() != 0.0 && !lin.ill_conditioned;
        all_ok = all_ok && ok;
        out << "v_ref=" << format_double(v) << " cb=" << format_double(lin.cb()) << " zeros=" << lin.zeros.size()
            << " max_zero_re=" << format_double(max_re) << " minimum_phase=" << (ok ? "yes" : "no") << '\n';
    }
    out << "all_minimum_phase=" << (all_ok ? "yes" : "no") << '\n';
    if (!opts.out.empty()) write_text_atomic(opts.out, csv);
    return kExitOk;
}

Trace simulate_file(const fs::path& scenario, std::optional<std::uint64_t> seed) {
    ScenarioSetup setup = load_scenario(scenario);
    if (seed) setup.config.seed = *seed;
    return run_scenario(setup);
}

int run_simulate(const CommonOptions& opts, std::ostream& out) {
    const Trace trace = simulate_file(opts.config, opts.seed);
    save_trace(trace, opts.out);
    const auto& last = trace.rows.back();
    out << "rows=" << trace.rows.size() << " t_end=" << format_double(last.t) << " v_t=" << format_double(last.v_t)
        << " v_ref=" << format_double(last.v_ref) << '\n';
    return kExitOk;
}

// A trace CSV, or a scenario file that is run first.
Trace trace_from(const fs::path& path, std::optional<std::uint64_t> seed) {
    const std::string text = read_text(path);
    if (text.starts_with(kTraceHeader)) return parse_trace_csv(text);
    return simulate_file(path, seed);
}

int run_compare(const CommonOptions& opts, std::ostream& out) {
    const auto file = KeyValueFile::load(opts.config);
    file.reject_unknown({"a", "b"});
    const fs::path a = file.get_path("a");
    const fs::path b = file.get_path("b");
    // Independent runs; each is sequential inside.
    auto fa = std::async(std::launch::async, trace_from, a, opts.seed);
    const Trace tb = trace_from(b, opts.seed);
    const Trace ta = fa.get();
    const TraceComparison cmp = compare_traces(ta, tb);
    write_text_atomic(opts.out, cmp.csv);
    out << "rows=" << cmp.rows << " max_abs_v_t_diff=" << format_double(cmp.max_abs_v_t_diff)
        << " rms_v_t_diff=" << format_double(cmp.rms_v_t_diff)
        << " max_abs_delta_diff=" << format_double(cmp.max_abs_delta_diff) << '\n';
    return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive neural excitation control toolkit", "neuroexc"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string data_flag;
    std::string history;
    std::string weights;

    auto* identify = app.add_subcommand("identify", "Excite the plant and record a k,u,y dataset");
    add_common(identify, opts, true);

    auto* train = app.add_subcommand("train", "Fit the NARX networks with Levenberg-Marquardt");
    add_common(train, opts, true);
    train->add_option("--data", data_flag, "Dataset CSV (default: regenerate from the config)");
    train->add_option("--history", history, "Cost history CSV (default: <out>.history.csv)");

    auto* validate = app.add_subcommand("validate", "One-step-ahead holdout validation");
    add_common(validate, opts, false);
    validate->add_option("--data", data_flag, "Dataset CSV (default: regenerate from the config)");
    validate->add_option("--weights", weights, "Weight file (default: config key 'weights')");

    auto* minphase = app.add_subcommand("minphase", "Transmission zeros over a v_ref grid");
    add_common(minphase, opts, false);

    auto* simulate = app.add_subcommand("simulate", "Run a scenario and write its trace");
    add_common(simulate, opts, true);

    auto* compare = app.add_subcommand("compare", "Align two traces and write their difference");
    add_common(compare, opts, true);

    std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv_rest.begin(), argv_rest.end());
    try {
        app.parse(argv_rest);
    } catch (const CLI::ParseError& e) {
        if (app.exit(e, out, err) == 0) return kExitOk;  // --help
        err << '\n' << app.help();
        return kExitConfig;
    }

    try {
        if (identify->parsed()) return run_identify(opts, out);
        if (train->parsed()) return run_train(opts, data_flag, history, out);
        if (validate->parsed()) return run_validate(opts, data_flag, weights, out);
        if (minphase->parsed()) return run_minphase(opts, out);
        if (simulate->parsed()) return run_simulate(opts, out);
        if (compare->parsed()) return run_compare(opts, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    err << app.help();
    return kExitConfig;
}

}  // namespace neuroexc
