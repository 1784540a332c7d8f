#include <doctest.h>

#include <cmath>
#include <numbers>

#include "neuroexc/errors.hpp"
#include "neuroexc/keyvalue.hpp"
#include "neuroexc/scenario.hpp"
#include "support/generators.hpp"

using namespace neuroexc;
using cd = std::complex<double>;

namespace {

ScenarioSetup setup_with(ControllerKind kind, double t_end) {
    ScenarioSetup s;
    s.machine = reference_machine();
    s.controller.kind = kind;
    s.config.t_end = t_end;
    return s;
}

Trace synthetic_trace(double t_end, double dt, const std::function<double(double)>& delta) {
    Trace tr;
    const auto n = static_cast<int>(std::llround(t_end / dt));
    for (int k = 0; k <= n; ++k) {
        TraceRow row;
        row.t = k * dt;
        row.delta = delta(row.t);
        tr.rows.push_back(row);
    }
    return tr;
}

// A plant that is exactly NARX: mild nonlinearity in f, g bounded away from 0.
SyntheticNarxPlant toy_plant() {
    return {[](const Regressor& z) { return 0.6 * z(0) + 0.2 * std::tanh(z(1) - z(2)) + 0.1 * z(7) * z(0); },
            [](const Regressor& z) { return 0.8 + 0.1 * std::sin(z(0)); }};
}

}  // namespace

TEST_SUITE("scenario") {
    TEST_CASE("open loop stays at the equilibrium") {
        const auto setup = load_scenario(testgen::source_path("configs/open_loop.scn"));
        const Trace tr = run_scenario(setup);
        REQUIRE(tr.rows.size() == 2501);
        CHECK(tr.rows.back().t == doctest::Approx(5.0));
        for (const auto& row : tr.rows) {
            CHECK(std::abs(row.v_t - 1.1392) <= 1e-6);
            CHECK(row.v_f == 0.0);
        }
    }

    TEST_CASE("ST1A leaves a steady-state error") {
        const auto setup = load_scenario(testgen::source_path("configs/step_nominal_st1a.scn"));
        const Trace tr = run_scenario(setup);
        const double err_pct = 100.0 * std::abs(tr.rows.back().v_t - 1.2392) / 1.2392;
        CHECK(err_pct >= 0.2);
        CHECK(err_pct <= 1.0);
    }

    TEST_CASE("set_vref events apply from the first sample at or after their time") {
        auto setup = setup_with(ControllerKind::st1a, 0.1);
        setup.config.events = {{0.011, EventAction::set_vref, 1.2, 0.0}, {0.05, EventAction::set_vref, 1.25, 0.0}};
        const Trace tr = run_scenario(setup);
        for (const auto& row : tr.rows) {
            const double expected_ref = row.t < 0.011 ? 1.1392 : (row.t < 0.05 - 1e-12 ? 1.2 : 1.25);
            CHECK(row.v_ref == expected_ref);
            CHECK(row.v_f == st1a_control(row.v_t, expected_ref, setup.st1a));
        }
        CHECK(tr.rows[5].v_ref == 1.1392);
        CHECK(tr.rows[6].v_ref == 1.2);
        CHECK(tr.rows[25].v_ref == 1.25);
        CHECK(tr.rows[24].v_ref == 1.2);
    }

    TEST_CASE("ramped events interpolate linearly") {
        auto setup = setup_with(ControllerKind::none, 0.1);
        setup.config.events = {{0.02, EventAction::set_vref, 1.2392, 0.04}};
        const Trace tr = run_scenario(setup);
        CHECK(tr.rows[10].v_ref == 1.1392);
        CHECK(tr.rows[20].v_ref == doctest::Approx(1.1892).epsilon(1e-12));
        CHECK(tr.rows[30].v_ref == 1.2392);
        CHECK(tr.rows.back().v_ref == 1.2392);
    }

    TEST_CASE("scenario validation") {
        ScenarioConfig cfg;
        cfg.events = {{2.0, EventAction::set_vref, 1.2, 0.0}, {1.0, EventAction::set_vref, 1.3, 0.0}};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.events = {{6.0, EventAction::set_vref, 1.2, 0.0}};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.events = {{1.0, EventAction::scale_H, -1.0, 0.0}};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.events.clear();
        cfg.dt_control = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);

        const auto parsed = parse_scenario_config(KeyValueFile::parse(
            "machine = m\ncontroller = c\nt_end = 3\nevent = 1 scale_H 0.5 0.2\nevent = 2 set_Pm 1.1\n", "s.scn"));
        REQUIRE(parsed.events.size() == 2);
        CHECK(parsed.events[0].action == EventAction::scale_H);
        CHECK(parsed.events[0].ramp == 0.2);
        CHECK(parsed.events[1].value == 1.1);
        CHECK_THROWS_AS(parse_scenario_config(KeyValueFile::parse("machine = m\ncontroller = c\nevent = 1 jump 2\n")),
                        ConfigError);
        CHECK_THROWS_AS(parse_scenario_config(KeyValueFile::parse("machine = m\ncontroller = c\nevent = 1\n")),
                        ConfigError);
        CHECK_THROWS_AS(parse_scenario_config(KeyValueFile::parse("machine = m\ncontroller = c\ncolour = red\n")),
                        ConfigError);
    }

    TEST_CASE("infeasible operating point is a numerical failure") {
        auto setup = setup_with(ControllerKind::none, 0.1);
        setup.config.v_ref = 40.0;
        CHECK_THROWS_AS(run_scenario(setup), NumericalError);
    }

    TEST_CASE("runs are deterministic and the CSV round-trips") {
        const auto setup = load_scenario(testgen::source_path("configs/step_nominal.scn"));
        const std::string a = format_trace_csv(run_scenario(setup));
        const std::string b = format_trace_csv(run_scenario(setup));
        CHECK(a == b);
        CHECK(a.rfind(std::string(kTraceHeader) + "\n", 0) == 0);
        const Trace back = parse_trace_csv(a);
        CHECK(format_trace_csv(back) == a);
        const auto path = testgen::tmp_path("trace.csv");
        save_trace(back, path);
        CHECK(format_trace_csv(load_trace(path)) == a);
        CHECK_THROWS_AS(parse_trace_csv("t,v_t\n0,1\n"), ConfigError);
        CHECK_THROWS_AS((void)back.column("speed"), ConfigError);
        CHECK(back.column("v_t").size() == back.rows.size());
    }

    TEST_CASE("oracle loop: first order approaches geometrically") {
        const auto pp = synthesize_poly({cd(0.7)});
        const std::vector<double> r(60, 1.5);
        const auto run = run_oracle_loop(pp, toy_plant(), r, 1.0);
        REQUIRE(run.y.size() == 61);
        for (std::size_t k = 0; k < run.y.size(); ++k) {
            const double closed_form = 1.5 - 0.5 * std::pow(0.7, static_cast<double>(k));
            CHECK(std::abs(run.y[k] - closed_form) <= 1e-12);
        }
    }

    TEST_CASE("oracle loop: p = 0 is one-step deadbeat") {
        testgen::Gen g(501);
        std::vector<double> r(100);
        for (double& v : r) v = g.uniform(0.8, 1.4);
        const auto run = run_oracle_loop(synthesize_poly({}), toy_plant(), r, 1.0);
        for (std::size_t k = 0; k < r.size(); ++k) CHECK(std::abs(run.y[k + 1] - r[k]) <= 1e-12);
    }

    TEST_CASE("property: oracle loop obeys the pole polynomial") {
        testgen::for_all(20, 502, [](testgen::Gen& g, int) {
            std::vector<cd> poles;
            const int p = g.integer(0, 7);
            for (int i = 0; i < p; ++i) poles.emplace_back(g.uniform(0.0, 0.9));
            const auto pp = synthesize_poly(poles);
            std::vector<double> r(200);
            double level = 1.0;
            for (std::size_t k = 0; k < r.size(); ++k) {
                if (k % 40 == 0) level = g.uniform(0.9, 1.3);
                r[k] = level;
            }
            const auto run = run_oracle_loop(pp, toy_plant(), r, 1.0);
            // Independent recurrence with zero-padded pre-history at y0.
            std::vector<double> y(r.size() + 1 + static_cast<std::size_t>(std::max(p, 7)), 1.0);
            const std::size_t off = y.size() - r.size() - 1;
            for (std::size_t k = 0; k < r.size(); ++k) {
                double next = pp.k1 * r[k];
                for (int i = 0; i < p; ++i) next -= pp.coeffs[static_cast<std::size_t>(p - 1 - i)] * y[off + k - i];
                y[off + k + 1] = next;
            }
            for (std::size_t k = 0; k < r.size(); ++k) {
                CHECK(std::abs(run.residual[k]) <= 1e-12);
                CHECK(std::abs(run.y[k + 1] - y[off + k + 1]) <= 1e-9);
            }
        });
    }

    TEST_CASE("damping_metric of a decaying cosine") {
        const double w = 2.0 * std::numbers::pi;
        const Trace tr = synthetic_trace(10.0, 0.002, [w](double t) { return 0.3 + std::exp(-t) * std::cos(w * t); });
        CHECK(damping_metric(tr, 0.0) == doctest::Approx(1.0).epsilon(1e-3));
        const Trace slow = synthetic_trace(60.0, 0.002, [w](double t) { return std::exp(-0.2 * t) * std::cos(w * t); });
        CHECK(damping_metric(slow, 0.0) == doctest::Approx(0.2).epsilon(1e-3));
        CHECK_THROWS_AS(damping_metric(synthetic_trace(5.0, 0.002, [](double) { return 0.4; }), 0.0), NumericalError);
        CHECK_THROWS_AS(damping_metric(synthetic_trace(5.0, 0.002, [](double t) { return std::exp(-t); }), 0.0),
                        NumericalError);
    }

    TEST_CASE("peak_deviation") {
        const Trace tr = synthetic_trace(4.0, 0.01, [](double t) { return t < 2.0 ? 0.5 : 0.5 + 0.2 * std::sin(t - 2.0); });
        CHECK(peak_deviation(tr, 2.0) == doctest::Approx(0.2).epsilon(1e-4));
        CHECK_THROWS_AS(peak_deviation(Trace{}, 0.0), ConfigError);
    }

    TEST_CASE("compare_traces") {
        const Trace a = synthetic_trace(1.0, 0.01, [](double t) { return t; });
        Trace b = synthetic_trace(0.5, 0.01, [](double t) { return t; });
        for (auto& row : b.rows) row.v_t = 0.1;
        const auto cmp = compare_traces(a, b);
        CHECK(cmp.rows == 51);
        CHECK(cmp.max_abs_v_t_diff == doctest::Approx(0.1));
        CHECK(cmp.rms_v_t_diff == doctest::Approx(0.1));
        CHECK(cmp.max_abs_delta_diff == 0.0);
        CHECK(cmp.csv.rfind("t,a_v_ref,b_v_ref,diff_v_ref,a_v_t,", 0) == 0);

        Trace shifted = b;
        for (auto& row : shifted.rows) row.t += 0.005;
        CHECK_THROWS_AS(compare_traces(a, shifted), ConfigError);
    }
}
