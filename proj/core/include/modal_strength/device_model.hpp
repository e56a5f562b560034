#pragma once

// Grid-connected devices in inertia-damper-spring form.
//
// Frequency loop:  G_Ptheta(s) = (J s^2 + D s + K) / omega0
// Voltage loop:    G_QV(s)     = D_qv s + K_qv
//
// Homogeneous sets satisfy params_i = scaling_i * nominal, which is what
// makes the closed loop decouple into eigen-subsystems.

#include "modal_strength/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace modal_strength {

/// Device parameters before reduction: swing inertia/damping, primary and
/// secondary frequency regulation through a first-order governor, and Q-V
/// droop behind a measurement filter.
struct FullDeviceParams {
    double j = 0.0;
    double d = 0.0;
    double k_p = 0.0;
    double k_s = 0.0;
    double t_g = 0.0;
    double k_qv = 0.0;
    double t_m = 0.0;

    friend bool operator==(const FullDeviceParams&, const FullDeviceParams&) = default;
};

struct UnifiedDeviceParams {
    double j_ptheta = 0.0;
    double d_ptheta = 0.0;
    double k_ptheta = 0.0;
    double d_qv = 0.0;
    double k_qv = 0.0;

    friend bool operator==(const UnifiedDeviceParams&, const UnifiedDeviceParams&) = default;
};

enum class DeviceKind {
    Unified,   // generator / VSG in unified form
    Crpl,      // constant reactive power load
    Infinite,  // fixed angle and voltage; a boundary condition on both sides
};

struct DeviceEntry {
    BusId bus = 0;
    DeviceKind kind = DeviceKind::Unified;
    UnifiedDeviceParams params;
    double s_theta = 1.0;
    double s_v = 1.0;
    std::optional<FullDeviceParams> full;  // kept for exact governor simulation

    friend bool operator==(const DeviceEntry&, const DeviceEntry&) = default;
};

struct FrequencyNominal {
    double j = 0.0;
    double d = 0.0;
    double k = 0.0;

    friend bool operator==(const FrequencyNominal&, const FrequencyNominal&) = default;
};

struct VoltageNominal {
    double d = 0.0;
    double k = 0.0;

    friend bool operator==(const VoltageNominal&, const VoltageNominal&) = default;
};

struct DeviceSet {
    std::vector<DeviceEntry> entries;
    FrequencyNominal nominal_freq;
    VoltageNominal nominal_volt;
    double omega0 = kDefaultOmega0;
    bool homogeneous = true;

    [[nodiscard]] const DeviceEntry* find(BusId bus) const;

    friend bool operator==(const DeviceSet&, const DeviceSet&) = default;
};

/// Scaling matrices in bus order. Infinite devices are flagged as boundary
/// buses; their scaling entries are left at zero and must not be read.
struct DeviceMatrices {
    std::vector<BusId> buses;
    Vector s_theta;
    Vector s_v;
    std::vector<bool> boundary;
    FrequencyNominal nominal_freq;
    VoltageNominal nominal_volt;
    double omega0 = kDefaultOmega0;
};

/// Per-bus voltage dynamics after moving 2 Q_e from the network side onto
/// the device side.
struct EffectiveVoltageDevice {
    BusId bus = 0;
    DeviceKind kind = DeviceKind::Unified;
    double d = 0.0;
    double k = 0.0;
    bool boundary = false;
};

[[nodiscard]] UnifiedDeviceParams reduce_to_unified(const FullDeviceParams& full);

/// Unified parameters implied by a scaling pair and the nominal dynamics.
[[nodiscard]] UnifiedDeviceParams scaled_nominal(double s_theta, double s_v, const FrequencyNominal& freq,
                                                 const VoltageNominal& volt);

/// Unified entries whose parameters differ from scaling x nominal (relative
/// tolerance 1e-9). Empty for a consistent homogeneous set.
[[nodiscard]] std::vector<BusId> heterogeneous_entries(const DeviceSet& devices);

/// Throws Consistency when `devices.homogeneous` is set and any unified entry
/// breaks the scaling relation, and Input when a bus in `bus_order` has no
/// device (or more than one).
[[nodiscard]] DeviceMatrices assemble_device_matrices(const DeviceSet& devices, std::span<const BusId> bus_order);

/// `q_e` holds injected reactive power per bus of `bus_order`.
[[nodiscard]] std::vector<EffectiveVoltageDevice> shift_load_spring(const DeviceSet& devices,
                                                                    std::span<const BusId> bus_order,
                                                                    const Vector& q_e);

}  // namespace modal_strength
