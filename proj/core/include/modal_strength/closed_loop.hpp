#pragma once

// Assembles the pencil (L, S) for one side of the decoupled closed loop.
//
// Device buses are sorted into three groups:
//   retained   - nonzero scaling, part of the pencil
//   boundary   - infinite devices; fixed at zero deviation (row/column deleted)
//   eliminated - zero scaling (no device dynamics on this side); removed by a
//                Schur complement of L, their response follows the retained
//                buses through `extension`.

#include "modal_strength/device_model.hpp"
#include "modal_strength/grid_model.hpp"
#include "modal_strength/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace modal_strength {

struct Warning {
    std::string code;
    std::string message;

    friend bool operator==(const Warning&, const Warning&) = default;
};

enum class VoltagePath {
    Auto,     // dynamic when the shifted voltage dynamics are homogeneous
    Dynamic,  // request eigen-subsystems with damping; falls back with a warning
    Static,   // s = 0, springs only
};

struct PencilProblem {
    Side side = Side::Frequency;
    std::vector<BusId> all_buses;
    std::vector<BusId> buses;
    std::vector<BusId> boundary_buses;
    std::vector<BusId> eliminated_buses;
    Matrix l;
    Vector s;
    Matrix extension;  // eliminated x retained
    Matrix l_full;     // L over all_buses, for boundary power bookkeeping

    // Nominal dynamics J0 s^2 + D0 s + K0 (voltage: J0 = 0). The network
    // term enters the modal spring multiplied by `network_gain` (omega0 on
    // the frequency side, 1 on the voltage side).
    double nominal_inertia = 0.0;
    double nominal_damping = 0.0;
    double nominal_spring = 0.0;
    double network_gain = 1.0;

    bool static_only = false;
    std::vector<Warning> warnings;

    [[nodiscard]] Eigen::Index size() const { return l.rows(); }
    [[nodiscard]] bool has_boundary() const { return !boundary_buses.empty(); }
    /// Position of `bus` among retained buses, or -1.
    [[nodiscard]] Eigen::Index retained_index(BusId bus) const;
};

/// Generic builder: `scaling[k]` is the pencil weight for `bus_ids[k]`,
/// zero entries are eliminated, `boundary[k]` rows are deleted.
[[nodiscard]] PencilProblem make_pencil_problem(Side side, std::span<const BusId> bus_ids, const Matrix& l,
                                                const Vector& scaling, const std::vector<bool>& boundary);

[[nodiscard]] PencilProblem frequency_problem(const ReducedNetwork& network, const DeviceSet& devices);

[[nodiscard]] PencilProblem voltage_problem(const ReducedNetwork& network, const DeviceSet& devices,
                                            VoltagePath path = VoltagePath::Auto);

}  // namespace modal_strength
