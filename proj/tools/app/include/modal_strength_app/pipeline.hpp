#pragma once

#include "modal_strength_app/scenario.hpp"

#include <modal_strength/modal_decomp.hpp>
#include <modal_strength/response_engine.hpp>
#include <modal_strength/strength_metrics.hpp>

#include <optional>
#include <vector>

namespace modal_strength::app {

struct Prepared {
    OperatingPoint op;
    ReducedNetwork network;
};

[[nodiscard]] Prepared prepare(const Scenario& scenario);

[[nodiscard]] PencilProblem build_problem(const Scenario& scenario, const Prepared& prepared, Side side);

struct SideRun {
    Side side = Side::Frequency;
    ModalDecomposition dec;
    StrengthReport report;
    std::vector<Disturbance> disturbances;  // those acting on this side
    std::optional<FinalValues> finals;
    std::optional<ResponseTrace> modal;
    std::optional<ResponseTrace> direct;
    std::optional<double> gap;  // max |modal - direct| of the observable
};

struct RunOptions {
    bool simulate = false;
    bool sweep = false;
    bool frequency = true;
    bool voltage = true;
    unsigned threads = 0;
};

struct RunResult {
    Scenario scenario;
    std::vector<SideRun> sides;
    std::optional<SweepResult> sweep;
    std::vector<Warning> warnings;
};

/// Decomposes every requested side, builds strength reports and final
/// values, and optionally simulates (modal and direct) and sweeps.
[[nodiscard]] RunResult run(const Scenario& scenario, const RunOptions& options);

/// Static spring sweep over `scenario.analysis.sweep` on the voltage side.
[[nodiscard]] SweepResult run_sweep(const Scenario& scenario, unsigned threads = 0);

}  // namespace modal_strength::app
