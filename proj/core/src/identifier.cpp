#include "neuroexc/identifier.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "neuroexc/errors.hpp"
#include "neuroexc/keyvalue.hpp"
#include "neuroexc/numeric_io.hpp"

namespace neuroexc {

void ExcitationPlan::validate() const {
    if (n_samples <= kRegressorSize) throw ConfigError("excitation: n_samples must exceed 13");
    if (!(dt > 0.0)) throw ConfigError("excitation: dt must be positive");
    if (substeps < 1) throw ConfigError("excitation: substeps must be >= 1");
    // u_min == u_max is allowed and gives a constant input.
    if (!(u_min <= u_max)) throw ConfigError("excitation: u_min must not exceed u_max");
    if (hold < 1) throw ConfigError("excitation: hold must be >= 1");
    if (!(fast_fraction >= 0.0 && fast_fraction <= 1.0)) {
        throw ConfigError("excitation: fast_fraction must lie in [0, 1]");
    }
    if (!(v_operating > 0.0)) throw ConfigError("excitation: v_operating must be positive");
}

InputOutputSeries excite_and_record(const MachineParams& params, const ExcitationPlan& plan) {
    plan.validate();
    const Equilibrium eq = find_equilibrium(params, plan.v_operating);

    std::mt19937_64 rng(plan.seed);
    std::uniform_real_distribution<double> level_dist(plan.u_min, plan.u_max);
    const auto n = static_cast<std::size_t>(plan.n_samples);

    InputOutputSeries out;
    out.u.reserve(n);
    out.y.reserve(n);
    MachineState x = eq.state;
    const auto draw = [&] { return plan.u_min == plan.u_max ? plan.u_min : level_dist(rng); };
    double level = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k % static_cast<std::size_t>(plan.hold) == 0) level = draw();
        const double u = plan.fast_fraction > 0.0
                             ? (1.0 - plan.fast_fraction) * level + plan.fast_fraction * draw()
                             : level;
        const double y = electrical_interface(x, params).v_t;
        if (!std::isfinite(y)) {
            throw DivergenceError("excitation diverged at sample " + std::to_string(k), k * plan.dt, k);
        }
        out.y.push_back(y);
        out.u.push_back(u);
        try {
            x = advance(x, eq.u + u, plan.dt, plan.substeps, params);
        } catch (const NumericalError&) {
            throw DivergenceError("excitation diverged at sample " + std::to_string(k), k * plan.dt, k);
        }
    }
    return out;
}

Dataset build_regression_set(const InputOutputSeries& series) {
    const std::size_t n = series.y.size();
    if (series.u.size() != n) throw ConfigError("regression set: u and y lengths differ");
    if (n < static_cast<std::size_t>(kOutputLags + 1)) {
        throw ConfigError("regression set: need at least 8 samples, got " + std::to_string(n));
    }
    Dataset data;
    data.records.reserve(n - kOutputLags);
    for (std::size_t k = kOutputLags - 1; k + 1 < n; ++k) {
        Record rec;
        for (int i = 0; i < kOutputLags; ++i) rec.z(i) = series.y[k - static_cast<std::size_t>(i)];
        for (int i = 0; i < kInputLags; ++i) rec.z(kOutputLags + i) = series.u[k - 1 - static_cast<std::size_t>(i)];
        rec.u = series.u[k];
        rec.y_next = series.y[k + 1];
        data.records.push_back(rec);
    }
    return data;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("split: train_fraction must lie in (0, 1)");
    }
    const auto n = data.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) throw ConfigError("split: degenerate split of " + std::to_string(n) + " records");
    Dataset train;
    Dataset holdout;
    train.records.assign(data.records.begin(), data.records.begin() + static_cast<std::ptrdiff_t>(n_train));
    holdout.records.assign(data.records.begin() + static_cast<std::ptrdiff_t>(n_train), data.records.end());
    return {std::move(train), std::move(holdout)};
}

ValidationReport make_report(std::vector<double> errors, double max_abs_output) {
    ValidationReport report;
    report.errors = std::move(errors);
    for (double e : report.errors) report.max_abs_error = std::max(report.max_abs_error, std::abs(e));
    report.max_abs_output = max_abs_output;
    report.relative_error_pct = max_abs_output > 0.0 ? 100.0 * report.max_abs_error / max_abs_output : 0.0;
    return report;
}

ValidationReport cross_validate(const NarxModel& model, const Dataset& holdout) {
    if (holdout.empty()) throw ConfigError("cross_validate: empty holdout set");
    std::vector<double> errors;
    errors.reserve(holdout.size());
    double max_out = 0.0;
    for (const auto& rec : holdout.records) {
        errors.push_back(narx_predict(model, rec.z, rec.u) - rec.y_next);
        max_out = std::max(max_out, std::abs(rec.y_next));
    }
    return make_report(std::move(errors), max_out);
}

double ceil_one_significant(double value) {
    if (!(value > 0.0) || !std::isfinite(value)) throw ConfigError("ceil_one_significant: value must be positive");
    const int exponent = static_cast<int>(std::floor(std::log10(value)));
    const double scale = std::pow(10.0, std::abs(exponent));
    double mantissa = exponent < 0 ? value * scale : value / scale;
    // Absorb representation error so that 0.009 stays 0.009.
    const double nearest = std::round(mantissa);
    mantissa = std::abs(mantissa - nearest) <= 1e-9 * nearest ? nearest : std::ceil(mantissa);
    return exponent < 0 ? mantissa / scale : mantissa * scale;
}

double select_deadzone(const ValidationReport& report) {
    if (report.errors.empty()) throw ConfigError("select_deadzone: empty error series");
    std::vector<double> mags;
    mags.reserve(report.errors.size());
    for (double e : report.errors) mags.push_back(std::abs(e));
    std::sort(mags.begin(), mags.end());
    // Linear interpolation between closest ranks.
    const double pos = 0.95 * static_cast<double>(mags.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, mags.size() - 1);
    const double p95 = mags[lo] + (pos - static_cast<double>(lo)) * (mags[hi] - mags[lo]);
    constexpr double floor_value = 1e-6;
    if (!(p95 > floor_value)) return floor_value;
    return std::max(floor_value, ceil_one_significant(p95));
}

TrainOutcome train_narx(const InputOutputSeries& series, const TrainPlan& plan) {
    const Dataset data = build_regression_set(series);
    auto [train, holdout] = split(data, plan.train_fraction);
    const NarxModel init = random_model(plan.p, plan.q, plan.seed);
    LmResult fit = lm_train(init, train, plan.lm);
    TrainOutcome out;
    out.validation = cross_validate(fit.model, holdout);
    out.deadzone = select_deadzone(out.validation);
    out.model = std::move(fit.model);
    out.lm = std::move(fit.state);
    return out;
}

ExcitationPlan parse_excitation_plan(const KeyValueFile& file, ExcitationPlan plan) {
    plan.n_samples = static_cast<int>(file.get_int("n_samples", plan.n_samples));
    plan.dt = file.get_double("dt", plan.dt);
    plan.substeps = static_cast<int>(file.get_int("substeps", plan.substeps));
    plan.u_min = file.get_double("u_min", plan.u_min);
    plan.u_max = file.get_double("u_max", plan.u_max);
    plan.hold = static_cast<int>(file.get_int("hold", plan.hold));
    plan.fast_fraction = file.get_double("fast_fraction", plan.fast_fraction);
    plan.seed = static_cast<std::uint64_t>(file.get_int("seed", static_cast<long>(plan.seed)));
    plan.v_operating = file.get_double("v_operating", plan.v_operating);
    plan.validate();
    return plan;
}

TrainPlan parse_train_plan(const KeyValueFile& file, TrainPlan plan) {
    plan.p = static_cast<int>(file.get_int("p_hidden", plan.p));
    plan.q = static_cast<int>(file.get_int("q_hidden", plan.q));
    plan.seed = static_cast<std::uint64_t>(file.get_int("seed", static_cast<long>(plan.seed)));
    plan.train_fraction = file.get_double("train_fraction", plan.train_fraction);
    plan.lm.max_iter = static_cast<int>(file.get_int("max_iter", plan.lm.max_iter));
    plan.lm.cost_tol = file.get_double("cost_tol", plan.lm.cost_tol);
    plan.lm.mu_init = file.get_double("mu_init", plan.lm.mu_init);
    if (plan.p < 1 || plan.q < 1) throw ConfigError("train: hidden sizes must be >= 1");
    if (plan.lm.max_iter < 1) throw ConfigError("train: max_iter must be >= 1");
    return plan;
}

std::string format_series_csv(const InputOutputSeries& series) {
    if (series.u.size() != series.y.size()) throw ConfigError("series: u and y lengths differ");
    std::string out = "k,u,y\n";
    for (std::size_t k = 0; k < series.u.size(); ++k) {
        out += std::to_string(k);
        out += ',';
        out += format_double(series.u[k]);
        out += ',';
        out += format_double(series.y[k]);
        out += '\n';
    }
    return out;
}

InputOutputSeries parse_series_csv(std::string_view text) {
    const CsvTable table = parse_csv(text, "dataset");
    const std::vector<std::string> expected{"k", "u", "y"};
    if (table.header != expected) throw ConfigError("dataset: header must be 'k,u,y'");
    InputOutputSeries series;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i][0] != static_cast<double>(i)) throw ConfigError("dataset: k column must count from 0");
        series.u.push_back(table.rows[i][1]);
        series.y.push_back(table.rows[i][2]);
    }
    return series;
}

void save_series(const InputOutputSeries& series, const std::filesystem::path& path) {
    write_text_atomic(path, format_series_csv(series));
}

InputOutputSeries load_series(const std::filesystem::path& path) { return parse_series_csv(read_text(path)); }

}  // namespace neuroexc
