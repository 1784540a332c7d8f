#include <benchmark/benchmark.h>

#include <complex>

#include "neuroexc/controller.hpp"
#include "neuroexc/identifier.hpp"
#include "neuroexc/lm.hpp"
#include "neuroexc/plant.hpp"

using namespace neuroexc;

namespace {

Dataset small_dataset() {
    ExcitationPlan plan;
    plan.n_samples = 1000;
    plan.seed = 1;
    return build_regression_set(excite_and_record(reference_machine(), plan));
}

}  // namespace

// One 2 ms control sample: four RK4 micro-steps.
static void BM_PlantAdvance(benchmark::State& state) {
    const auto params = reference_machine();
    const auto eq = find_equilibrium(params, 1.1392);
    MachineState x = eq.state;
    for (auto _ : state) {
        x = advance(x, eq.u + 0.01, 0.002, 4, params);
        benchmark::DoNotOptimize(x);
    }
}
BENCHMARK(BM_PlantAdvance);

static void BM_MlpForward(benchmark::State& state) {
    const auto model = random_model(5, 5, 1);
    const Regressor z = Regressor::Constant(0.3);
    for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(model.f, z));
}
BENCHMARK(BM_MlpForward);

static void BM_WeightJacobian(benchmark::State& state) {
    const auto model = random_model(5, 5, 1);
    const Regressor z = Regressor::Constant(0.3);
    for (auto _ : state) benchmark::DoNotOptimize(weight_jacobian(model, z, 0.05));
}
BENCHMARK(BM_WeightJacobian);

// A single LM iteration on ~1000 records.
static void BM_LmIteration(benchmark::State& state) {
    const Dataset data = small_dataset();
    const auto model = random_model(5, 5, 2);
    LmOptions opt;
    opt.max_iter = 1;
    for (auto _ : state) benchmark::DoNotOptimize(lm_train(model, data, opt));
}
BENCHMARK(BM_LmIteration)->Unit(benchmark::kMillisecond);

static void BM_ControlStep(benchmark::State& state) {
    ControllerSpec spec;
    spec.poles = synthesize_poly(std::vector<std::complex<double>>(7, 0.7));
    spec.pss.nu = 3.0;
    ControllerState ctrl(random_model(5, 5, 3), spec, 1.1392);
    double y = 1.1392;
    for (auto _ : state) {
        const double u = ctrl.step(1.2392, y, 0.0);
        y = *ctrl.prediction() + 1e-3;
        benchmark::DoNotOptimize(u);
    }
}
BENCHMARK(BM_ControlStep);
BENCHMARK_MAIN();
