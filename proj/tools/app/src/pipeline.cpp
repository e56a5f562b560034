#include "modal_strength_app/pipeline.hpp"

#include <modal_strength/error.hpp>

#include <algorithm>

namespace modal_strength::app {

Prepared prepare(const Scenario& scenario) {
    Prepared p;
    p.op = solve_power_flow(scenario.grid, scenario.operating_point.injections, scenario.operating_point.mode);
    p.network = reduce_network(scenario.grid, p.op);
    return p;
}

PencilProblem build_problem(const Scenario& scenario, const Prepared& prepared, Side side) {
    if (side == Side::Frequency) return frequency_problem(prepared.network, scenario.devices);
    return voltage_problem(prepared.network, scenario.devices, scenario.analysis.voltage_path);
}

namespace {

Quantity quantity_for(Side side) { return side == Side::Frequency ? Quantity::Active : Quantity::Reactive; }

}  // namespace

RunResult run(const Scenario& scenario, const RunOptions& options) {
    RunResult result;
    result.scenario = scenario;
    const Prepared prepared = prepare(scenario);
    const Vector grid = make_time_grid(scenario.simulation.t_end, scenario.simulation.output_dt);

    for (Side side : {Side::Frequency, Side::Voltage}) {
        const bool wanted = side == Side::Frequency ? scenario.analysis.frequency && options.frequency
                                                    : scenario.analysis.voltage && options.voltage;
        if (!wanted) continue;
        SideRun sr;
        sr.side = side;
        sr.dec = decompose(build_problem(scenario, prepared, side));
        sr.report = build_strength_report(sr.dec);
        result.warnings.insert(result.warnings.end(), sr.dec.problem.warnings.begin(), sr.dec.problem.warnings.end());
        std::copy_if(scenario.disturbances.begin(), scenario.disturbances.end(), std::back_inserter(sr.disturbances),
                     [side](const Disturbance& d) { return d.quantity == quantity_for(side); });

        const bool dynamic = !sr.dec.problem.static_only;
        if (dynamic) sr.finals = final_values(sr.dec, sr.disturbances);

        if (options.simulate) {
            DirectOptions direct;
            direct.dt = scenario.simulation.dt;
            if (dynamic) {
                sr.modal = modal_superpose(sr.dec, sr.disturbances, grid);
                sr.direct = simulate_direct(prepared.network, scenario.devices, side, sr.disturbances, grid, direct);
                sr.gap = max_trace_gap(*sr.modal, *sr.direct);
            } else if (side == Side::Voltage && scenario.analysis.uniform_damping) {
                direct.uniform_damping = scenario.analysis.uniform_damping;
                sr.direct = simulate_direct(prepared.network, scenario.devices, side, sr.disturbances, grid, direct);
            } else {
                result.warnings.push_back({"W_NO_TIME_DOMAIN",
                                           "static-only voltage side has no dynamic model; set "
                                           "analysis.uniform_damping to simulate it"});
            }
        }
        result.sides.push_back(std::move(sr));
    }

    if (options.sweep && scenario.analysis.sweep) result.sweep = run_sweep(scenario, options.threads);
    return result;
}

SweepResult run_sweep(const Scenario& scenario, unsigned threads) {
    if (!scenario.analysis.sweep) throw Error(ErrorKind::Input, "scenario has no analysis.sweep section");
    const auto& spec = *scenario.analysis.sweep;
    Scenario base = scenario;
    base.analysis.voltage_path = VoltagePath::Static;
    // Validate the parameter once on the calling thread.
    (void)with_parameter(base, spec.parameter, spec.values.front());
    const auto build = [&base, &spec](double value) {
        const Scenario s = with_parameter(base, spec.parameter, value);
        return build_problem(s, prepare(s), Side::Voltage);
    };
    return spring_sweep(build, spec.values, threads);
}

}  // namespace modal_strength::app
