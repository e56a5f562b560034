#pragma once

// Scenario description: network, devices, operating point, disturbances,
// simulation grid and analysis options. Serialized as JSON
// (schema "modal-strength/1").

#include <modal_strength/closed_loop.hpp>
#include <modal_strength/device_model.hpp>
#include <modal_strength/grid_model.hpp>
#include <modal_strength/response_engine.hpp>

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace modal_strength::app {

inline constexpr const char* kSchema = "modal-strength/1";

struct SimulationSpec {
    double t_end = 20.0;
    double dt = kDefaultStep;
    double output_dt = 0.01;

    friend bool operator==(const SimulationSpec&, const SimulationSpec&) = default;
};

struct SweepSpec {
    std::string parameter;
    std::vector<double> values;

    friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct AnalysisSpec {
    bool frequency = true;
    bool voltage = true;
    VoltagePath voltage_path = VoltagePath::Auto;
    std::optional<double> uniform_damping;
    std::optional<SweepSpec> sweep;

    friend bool operator==(const AnalysisSpec&, const AnalysisSpec&) = default;
};

struct OperatingPointSpec {
    FlowMode mode = FlowMode::Flat;
    std::vector<Injection> injections;

    friend bool operator==(const OperatingPointSpec&, const OperatingPointSpec&) = default;
};

struct Scenario {
    std::string name;
    std::vector<std::string> notes;
    Grid grid;
    DeviceSet devices;
    OperatingPointSpec operating_point;
    std::vector<Disturbance> disturbances;
    SimulationSpec simulation;
    AnalysisSpec analysis;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Strict parse: unknown keys and wrong types raise Input errors naming the
/// JSON path.
[[nodiscard]] Scenario scenario_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json scenario_to_json(const Scenario& scenario);

/// `builtin:<name>` or a path to a JSON file.
[[nodiscard]] Scenario load_scenario(const std::string& source);

[[nodiscard]] std::vector<std::string> builtin_names();
[[nodiscard]] Scenario builtin_scenario(const std::string& name);

/// Sweepable scalars:
///   load_q_total            total CRPL consumption, split equally
///   generator_k_qv          k_qv of every unified device
///   device:<bus>:k_qv | s_theta | s_v
///   load:<bus>:q            consumption of one CRPL
[[nodiscard]] Scenario with_parameter(const Scenario& scenario, const std::string& parameter, double value);

}  // namespace modal_strength::app
