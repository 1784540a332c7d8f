#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neuroexc/controller.hpp"
#include "neuroexc/narx.hpp"
#include "neuroexc/plant.hpp"

namespace neuroexc {

class KeyValueFile;

enum class EventAction { set_vref, scale_H, set_Pm };

/// Takes effect at the first sample with t_k >= time. A positive `ramp`
/// moves the quantity linearly to its target over that many seconds.
struct ScenarioEvent {
    double time = 0.0;
    EventAction action = EventAction::set_vref;
    double value = 0.0;
    double ramp = 0.0;
};

struct ScenarioConfig {
    std::filesystem::path machine;
    std::filesystem::path controller;
    double t_end = 5.0;
    double dt_control = 0.002;
    int substeps = 4;
    double v_ref = 1.1392;
    std::uint64_t seed = 0;  // recorded only; a run has no random inputs
    std::vector<ScenarioEvent> events;

    void validate() const;
};

/// Everything a run needs, already loaded from disk.
struct ScenarioSetup {
    ScenarioConfig config;
    MachineParams machine;
    ControllerConfig controller;
    std::optional<NarxModel> model;
    St1aConfig st1a;
};

struct TraceRow {
    double t = 0.0;
    double v_ref = 0.0;
    double v_t = 0.0;
    double v_f = 0.0;  // controller output, relative to the equilibrium field voltage
    double delta = 0.0;
    double omega = 0.0;
    double e_star = 0.0;
    int adapted = 0;
};

struct Trace {
    std::vector<TraceRow> rows;

    [[nodiscard]] std::vector<double> column(std::string_view name) const;
};

inline constexpr std::string_view kTraceHeader = "t,v_ref,v_t,v_f,delta,omega,e_star,adapted";

ScenarioConfig parse_scenario_config(const KeyValueFile& file);
ScenarioSetup load_scenario(const std::filesystem::path& path);

Trace run_scenario(const ScenarioSetup& setup);

std::string format_trace_csv(const Trace& trace);
Trace parse_trace_csv(std::string_view text);
void save_trace(const Trace& trace, const std::filesystem::path& path);
Trace load_trace(const std::filesystem::path& path);

/// A plant that is exactly y(k+1) = f(z(k)) + g(z(k)) u(k).
struct SyntheticNarxPlant {
    std::function<double(const Regressor&)> f;
    std::function<double(const Regressor&)> g;
};

struct OracleRun {
    std::vector<double> r;
    std::vector<double> y;  // y(0) .. y(K)
    std::vector<double> u;
    /// y(k+1) - (k1 r(k) - sum C y) for each step.
    std::vector<double> residual;
};

OracleRun run_oracle_loop(const PolePlacement& spec, const SyntheticNarxPlant& plant, const std::vector<double>& r,
                          double y0);

/// Log-decrement per full period from the half-cycle peaks of
/// |delta - delta_final| after `t_from`. Peaks below 1% of the largest are
/// ignored. Throws NumericalError with fewer than two peaks.
double damping_metric(const Trace& trace, double t_from);

/// max |delta(t) - delta(t_from-)| for t >= t_from.
double peak_deviation(const Trace& trace, double t_from);

struct TraceComparison {
    std::string csv;  // t, a_<col>, b_<col>, diff_<col>
    double max_abs_v_t_diff = 0.0;
    double rms_v_t_diff = 0.0;
    double max_abs_delta_diff = 0.0;
    std::size_t rows = 0;
};

/// Aligns two traces on their common time grid prefix.
TraceComparison compare_traces(const Trace& a, const Trace& b);

}  // namespace neuroexc
