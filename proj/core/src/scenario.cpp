#include "neuroexc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "neuroexc/errors.hpp"
#include "neuroexc/keyvalue.hpp"
#include "neuroexc/numeric_io.hpp"

namespace neuroexc {

namespace {

constexpr double kEventSlack = 1e-9;

EventAction parse_action(const std::string& name, const KeyValueFile& file) {
    if (name == "set_vref") return EventAction::set_vref;
    if (name == "scale_H") return EventAction::scale_H;
    if (name == "set_Pm") return EventAction::set_Pm;
    throw ConfigError(file.source() + ": unknown event action '" + name + "'");
}

// Linear transition of one scalar, started by an event.
struct Ramp {
    double* target = nullptr;
    double from = 0.0;
    double to = 0.0;
    double start = 0.0;
    double duration = 0.0;

    [[nodiscard]] bool done(double t) const { return t >= start + duration - kEventSlack; }
    void apply(double t) const {
        const double s = duration > 0.0 ? std::clamp((t - start) / duration, 0.0, 1.0) : 1.0;
        *target = s >= 1.0 ? to : from + s * (to - from);
    }
};

}  // namespace

void ScenarioConfig::validate() const {
    if (!(dt_control > 0.0)) throw ConfigError("scenario: dt_control must be positive");
    if (!(t_end > 0.0)) throw ConfigError("scenario: t_end must be positive");
    if (substeps < 1) throw ConfigError("scenario: substeps must be >= 1");
    double last = 0.0;
    for (const auto& ev : events) {
        if (ev.time < last) throw ConfigError("scenario: event times must be non-decreasing");
        if (ev.time < 0.0 || ev.time > t_end) throw ConfigError("scenario: event time outside [0, t_end]");
        if (ev.ramp < 0.0) throw ConfigError("scenario: ramp must be >= 0");
        if (ev.action == EventAction::scale_H && !(ev.value > 0.0)) {
            throw ConfigError("scenario: scale_H factor must be positive");
        }
        last = ev.time;
    }
}

ScenarioConfig parse_scenario_config(const KeyValueFile& file) {
    file.reject_unknown({"machine", "controller", "t_end", "dt_control", "substeps", "v_ref", "seed", "event"});
    ScenarioConfig cfg;
    cfg.machine = file.get_path("machine");
    cfg.controller = file.get_path("controller");
    cfg.t_end = file.get_double("t_end", cfg.t_end);
    cfg.dt_control = file.get_double("dt_control", cfg.dt_control);
    cfg.substeps = static_cast<int>(file.get_int("substeps", cfg.substeps));
    cfg.v_ref = file.get_double("v_ref", cfg.v_ref);
    cfg.seed = static_cast<std::uint64_t>(file.get_int("seed", 0));
    for (const auto& entry : file.entries()) {
        if (entry.key != "event") continue;
        const auto tokens = split_whitespace(entry.value);
        if (tokens.size() != 3 && tokens.size() != 4) file.fail(entry, "event is '<t> <action> <value> [ramp]'");
        ScenarioEvent ev;
        ev.time = parse_double(tokens[0]);
        ev.action = parse_action(tokens[1], file);
        ev.value = parse_double(tokens[2]);
        ev.ramp = tokens.size() == 4 ? parse_double(tokens[3]) : 0.0;
        cfg.events.push_back(ev);
    }
    cfg.validate();
    return cfg;
}

ScenarioSetup load_scenario(const std::filesystem::path& path) {
    const auto file = KeyValueFile::load(path);
    ScenarioSetup setup;
    setup.config = parse_scenario_config(file);
    setup.machine = load_machine_params(setup.config.machine);
    setup.controller = parse_controller_config(KeyValueFile::load(setup.config.controller));
    if (setup.controller.kind == ControllerKind::neural) setup.model = load_weights(setup.controller.weights);
    return setup;
}

Trace run_scenario(const ScenarioSetup& setup) {
    const ScenarioConfig& cfg = setup.config;
    cfg.validate();
    setup.st1a.validate();
    MachineParams machine = setup.machine;
    machine.validate();

    const Equilibrium start = find_equilibrium(machine, cfg.v_ref);
    MachineState x = start.state;
    double v_ref = cfg.v_ref;

    // Neural u is relative to the identification operating point, the
    // others to the starting equilibrium.
    double u_base = start.u;
    std::optional<ControllerState> neural;
    if (setup.controller.kind == ControllerKind::neural) {
        if (!setup.model) throw ConfigError("scenario: neural controller without weights");
        u_base = find_equilibrium(machine, setup.controller.v_nominal).u;
        const double y0 = electrical_interface(x, machine).v_t;
        neural.emplace(*setup.model, setup.controller.spec(), y0, start.u - u_base);
    }

    const double h0 = machine.H;
    std::vector<Ramp> ramps;
    std::size_t next_event = 0;
    const auto n_steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.dt_control));

    Trace trace;
    trace.rows.reserve(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt_control;
        while (next_event < cfg.events.size() && t >= cfg.events[next_event].time - kEventSlack) {
            const auto& ev = cfg.events[next_event++];
            Ramp ramp;
            ramp.start = t;
            ramp.duration = ev.ramp;
            switch (ev.action) {
                case EventAction::set_vref: ramp.target = &v_ref; ramp.to = ev.value; break;
                case EventAction::scale_H: ramp.target = &machine.H; ramp.to = h0 * ev.value; break;
                case EventAction::set_Pm: ramp.target = &machine.P_m; ramp.to = ev.value; break;
            }
            ramp.from = *ramp.target;
            ramps.push_back(ramp);
        }
        for (const auto& ramp : ramps) ramp.apply(t);
        std::erase_if(ramps, [t](const Ramp& r) { return r.done(t); });

        const double y = electrical_interface(x, machine).v_t;
        TraceRow row{t, v_ref, y, 0.0, x.delta, x.omega, 0.0, 0};
        switch (setup.controller.kind) {
            case ControllerKind::neural:
                // The PSS acts on per-unit rotor speed deviation.
                row.v_f = neural->step(v_ref, y, x.omega / machine.omega_b);
                row.e_star = neural->last_error();
                row.adapted = neural->last_adapted() ? 1 : 0;
                break;
            case ControllerKind::st1a: row.v_f = st1a_control(y, v_ref, setup.st1a); break;
            case ControllerKind::none: break;
        }
        trace.rows.push_back(row);
        if (k == n_steps) break;

        try {
            x = advance(x, u_base + row.v_f, cfg.dt_control, cfg.substeps, machine);
        } catch (const NumericalError&) {
            throw DivergenceError("scenario diverged at t = " + format_double(t), t, k);
        }
        if (!x.is_finite() || std::abs(x.omega) > 1e3 * machine.omega_b) {
            throw DivergenceError("scenario diverged at t = " + format_double(t), t, k);
        }
    }
    return trace;
}

std::vector<double> Trace::column(std::string_view name) const {
    double TraceRow::*member = nullptr;
    if (name == "t") member = &TraceRow::t;
    else if (name == "v_ref") member = &TraceRow::v_ref;
    else if (name == "v_t") member = &TraceRow::v_t;
    else if (name == "v_f") member = &TraceRow::v_f;
    else if (name == "delta") member = &TraceRow::delta;
    else if (name == "omega") member = &TraceRow::omega;
    else if (name == "e_star") member = &TraceRow::e_star;
    std::vector<double> out;
    out.reserve(rows.size());
    if (name == "adapted") {
        for (const auto& r : rows) out.push_back(r.adapted);
        return out;
    }
    if (member == nullptr) throw ConfigError("trace: unknown column '" + std::string(name) + "'");
    for (const auto& r : rows) out.push_back(r.*member);
    return out;
}

std::string format_trace_csv(const Trace& trace) {
    std::string out(kTraceHeader);
    out += '\n';
    for (const auto& r : trace.rows) {
        for (double v : {r.t, r.v_ref, r.v_t, r.v_f, r.delta, r.omega, r.e_star}) {
            out += format_double(v);
            out += ',';
        }
        out += r.adapted ? '1' : '0';
        out += '\n';
    }
    return out;
}

Trace parse_trace_csv(std::string_view text) {
    const CsvTable table = parse_csv(text, "trace");
    std::string header;
    for (std::size_t i = 0; i < table.header.size(); ++i) header += (i ? "," : "") + table.header[i];
    if (header != kTraceHeader) throw ConfigError("trace: header must be '" + std::string(kTraceHeader) + "'");
    Trace trace;
    for (const auto& v : table.rows) {
        trace.rows.push_back(TraceRow{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7] != 0.0 ? 1 : 0});
    }
    return trace;
}

void save_trace(const Trace& trace, const std::filesystem::path& path) { write_text_atomic(path, format_trace_csv(trace)); }

Trace load_trace(const std::filesystem::path& path) { return parse_trace_csv(read_text(path)); }

OracleRun run_oracle_loop(const PolePlacement& spec, const SyntheticNarxPlant& plant, const std::vector<double>& r,
                          double y0) {
    ControllerSpec cs;
    cs.poles = spec;
    cs.adapt = false;
    ControllerState ctrl(ExactModel{plant.f, plant.g}, cs, y0);

    OracleRun run;
    run.r = r;
    run.y.push_back(y0);
    for (std::size_t k = 0; k < r.size(); ++k) {
        const double y = run.y.back();
        const double u = ctrl.step(r[k], y, 0.0);
        const Regressor& z = ctrl.last_regressor();
        const double y_next = plant.f(z) + plant.g(z) * u;
        const std::vector<double> ys(ctrl.y_hist().begin(), ctrl.y_hist().end());
        const double ideal = u_tilde(r[k], ys, spec);
        run.u.push_back(u);
        run.y.push_back(y_next);
        run.residual.push_back(y_next - ideal);
    }
    return run;
}

double damping_metric(const Trace& trace, double t_from) {
    std::vector<double> d;
    for (const auto& row : trace.rows) {
        if (row.t >= t_from - kEventSlack) d.push_back(row.delta);
    }
    if (d.size() < 3) throw NumericalError("damping_metric: not enough samples after t_from");
    const double final_value = d.back();
    for (double& v : d) v -= final_value;

    // One peak per sign segment. The first segment counts only if its peak is
    // interior; the last is cut off by the end of the trace.
    std::vector<double> peaks;
    std::size_t i = 0;
    while (i < d.size()) {
        if (d[i] == 0.0) {
            ++i;
            continue;
        }
        const bool positive = d[i] > 0.0;
        std::size_t j = i;
        std::size_t arg = i;
        while (j < d.size() && d[j] != 0.0 && (d[j] > 0.0) == positive) {
            if (std::abs(d[j]) > std::abs(d[arg])) arg = j;
            ++j;
        }
        const bool reaches_end = j >= d.size();
        if (!reaches_end && arg != 0) peaks.push_back(std::abs(d[arg]));
        i = j;
    }
    if (!peaks.empty()) {
        const double largest = *std::max_element(peaks.begin(), peaks.end());
        const auto first = std::find(peaks.begin(), peaks.end(), largest);
        peaks.erase(peaks.begin(), first);
        const auto cut = std::find_if(peaks.begin(), peaks.end(), [&](double a) { return a < 0.01 * largest; });
        peaks.erase(cut, peaks.end());
    }
    if (peaks.size() < 2) throw NumericalError("damping_metric: fewer than two oscillation peaks");
    const double n = static_cast<double>(peaks.size() - 1);
    return 2.0 * std::log(peaks.front() / peaks.back()) / n;
}

double peak_deviation(const Trace& trace, double t_from) {
    if (trace.rows.empty()) throw ConfigError("peak_deviation: empty trace");
    double before = trace.rows.front().delta;
    double peak = 0.0;
    for (const auto& row : trace.rows) {
        if (row.t < t_from - kEventSlack) before = row.delta;
        else peak = std::max(peak, std::abs(row.delta - before));
    }
    return peak;
}

TraceComparison compare_traces(const Trace& a, const Trace& b) {
    TraceComparison out;
    out.rows = std::min(a.rows.size(), b.rows.size());
    static constexpr std::string_view cols[] = {"v_ref", "v_t", "v_f", "delta", "omega"};
    out.csv = "t";
    for (auto c : cols) {
        out.csv += ",a_" + std::string(c) + ",b_" + std::string(c) + ",diff_" + std::string(c);
    }
    out.csv += '\n';
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < out.rows; ++k) {
        const auto& ra = a.rows[k];
        const auto& rb = b.rows[k];
        if (std::abs(ra.t - rb.t) > 1e-9) throw ConfigError("compare: traces use different time grids");
        out.csv += format_double(ra.t);
        const double va[] = {ra.v_ref, ra.v_t, ra.v_f, ra.delta, ra.omega};
        const double vb[] = {rb.v_ref, rb.v_t, rb.v_f, rb.delta, rb.omega};
        for (std::size_t c = 0; c < std::size(cols); ++c) {
            out.csv += ',' + format_double(va[c]) + ',' + format_double(vb[c]) + ',' + format_double(va[c] - vb[c]);
        }
        out.csv += '\n';
        const double dv = ra.v_t - rb.v_t;
        out.max_abs_v_t_diff = std::max(out.max_abs_v_t_diff, std::abs(dv));
        out.max_abs_delta_diff = std::max(out.max_abs_delta_diff, std::abs(ra.delta - rb.delta));
        sum_sq += dv * dv;
    }
    if (out.rows > 0) out.rms_v_t_diff = std::sqrt(sum_sq / static_cast<double>(out.rows));
    return out;
}

}  // namespace neuroexc
