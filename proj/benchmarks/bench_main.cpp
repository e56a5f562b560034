#include <modal_strength/modal_decomp.hpp>
#include <modal_strength/response_engine.hpp>
#include <modal_strength_app/pipeline.hpp>
#include <modal_strength_app/property_check.hpp>
#include <modal_strength_app/scenario.hpp>

#include <benchmark/benchmark.h>

#include <cstdint>

namespace ms = modal_strength;
namespace app = modal_strength::app;

namespace {

void pencil_solve(benchmark::State& state) {
    const auto sys = app::random_lossless_system(7, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(ms::decompose(sys.problem));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(pencil_solve)->RangeMultiplier(2)->Range(4, 128)->Complexity();

void modal_superposition(benchmark::State& state) {
    const auto sc = app::builtin_scenario("four-device-case3");
    const auto prepared = app::prepare(sc);
    const auto dec = ms::decompose(app::build_problem(sc, prepared, ms::Side::Frequency));
    const auto t = ms::Vector::LinSpaced(static_cast<Eigen::Index>(sc.simulation.t_end / sc.simulation.output_dt) + 1,
                                         0.0, sc.simulation.t_end);
    std::vector<ms::Disturbance> dist;
    for (const auto& d : sc.disturbances)
        if (d.quantity == ms::Quantity::Active) dist.push_back(d);
    for (auto _ : state) benchmark::DoNotOptimize(ms::modal_superpose(dec, dist, t));
}
BENCHMARK(modal_superposition)->Unit(benchmark::kMillisecond);

void direct_simulation(benchmark::State& state) {
    const auto sc = app::builtin_scenario("four-device-case3");
    const auto prepared = app::prepare(sc);
    const auto t = ms::Vector::LinSpaced(static_cast<Eigen::Index>(sc.simulation.t_end / sc.simulation.output_dt) + 1,
                                         0.0, sc.simulation.t_end);
    std::vector<ms::Disturbance> dist;
    for (const auto& d : sc.disturbances)
        if (d.quantity == ms::Quantity::Active) dist.push_back(d);
    ms::DirectOptions opt;
    opt.dt = sc.simulation.dt;
    for (auto _ : state)
        benchmark::DoNotOptimize(ms::simulate_direct(prepared.network, sc.devices, ms::Side::Frequency, dist, t, opt));
}
BENCHMARK(direct_simulation)->Unit(benchmark::kMillisecond);

void spring_sweep(benchmark::State& state) {
    const auto sc = app::builtin_scenario("four-device-case4a");
    for (auto _ : state) benchmark::DoNotOptimize(app::run_sweep(sc, static_cast<unsigned>(state.range(0))));
}
BENCHMARK(spring_sweep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
