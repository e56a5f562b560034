#pragma once

// Strength metrics derived from a modal decomposition: modal and
// bus-specific inertia/damping/spring, nodal inertia, the common-mode voltage
// spring estimate and the generalized short-circuit ratio.

#include "modal_strength/closed_loop.hpp"
#include "modal_strength/modal_decomp.hpp"
#include "modal_strength/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace modal_strength {

/// Below this |phi_k,i psi_k,j| a mode is unobservable at i or
/// uncontrollable from j.
inline constexpr double kObservabilityFloor = 1e-9;

/// Modal parameters of `mode` seen from bus `observe` for a disturbance at
/// `disturb`: each coefficient divided by phi_k,observe * psi_k,disturb.
[[nodiscard]] ModeParams bus_modal_params(const ModalDecomposition& dec, Eigen::Index mode, BusId observe,
                                          BusId disturb);

/// Harmonic composition of bus-specific modal inertias over all modes.
/// Infinity when the contributions cancel.
[[nodiscard]] double nodal_inertia(const ModalDecomposition& dec, BusId observe, BusId disturb);

/// Bus-1 style slots: slot 0 is CM (infinity when a boundary bus pins the
/// angle and no CM exists), slot k is DMk. Empty optionals are absent modes.
[[nodiscard]] std::vector<std::optional<double>> modal_inertia_slots(const ModalDecomposition& dec, BusId bus,
                                                                     std::size_t slots);

/// Sum of droop springs minus twice the consumed reactive power.
[[nodiscard]] double cm_voltage_spring_estimate(std::span<const double> k_qv, std::span<const double> load_q);

/// Smallest eigenvalue of diag(load_q)^-1 l22; `load_q` is consumption (> 0).
[[nodiscard]] double gscr(const Matrix& l22, const Vector& load_q);

/// gSCR of a load-only static voltage pencil (generators as boundary buses,
/// every retained bus a load with spring -2 Q).
[[nodiscard]] double gscr(const PencilProblem& problem);

struct BridgeRecord {
    double gscr = 0.0;
    double k_mv = 0.0;                // first-DM spring from the decomposition
    double l22_form = 0.0;            // psi^T L22 phi
    double q_form = 0.0;              // psi^T Q phi
    double printed_estimate = 0.0;    // (gSCR - 2) psi^T L22 phi
    double exact_estimate = 0.0;      // (gSCR - 2) psi^T Q phi
    double relative_gap = 0.0;        // |k_mv - printed_estimate| / max(|k_mv|, |printed_estimate|)
    bool signs_agree = true;
};

/// Cross-checks the first-DM spring of a load-only static voltage
/// decomposition against gSCR. Throws BridgeViolation on a sign mismatch.
[[nodiscard]] BridgeRecord gscr_spring_bridge(const ModalDecomposition& dec, double gscr_value);

/// Closed-form decomposition of the two-device system
/// L = [L11, -L11; -L22, L22], S = diag(S1, S2).
struct TwoDeviceOracle {
    double s_l = 0.0;  // L22 S1 + L11 S2
    double lambda_dm = 0.0;
    Eigen::Vector2d phi_cm, psi_cm, phi_dm, psi_dm;
    double s_m_cm = 0.0, l_m_cm = 0.0;
    double s_m_dm = 0.0, l_m_dm = 0.0;
    ModeParams freq_cm, freq_dm;
    ModeParams volt_cm, volt_dm;
};

[[nodiscard]] TwoDeviceOracle two_device_oracle(double l11, double l22, double s1, double s2,
                                                const FrequencyNominal& freq, const VoltageNominal& volt,
                                                double omega0);

/// Bus-1 modal inertias of a lossless two-device system: {J1 + J2, (S1 + S2) J1 / S2}.
[[nodiscard]] std::pair<double, double> two_device_bus1_inertia(double j1, double j2, double s1, double s2);

/// Static voltage springs with unit nominal spring: {S1 + S2, (S1 + S2)(S1 S2 + (S1 + S2) L) / S1^2}.
[[nodiscard]] std::pair<double, double> two_device_voltage_springs(double l, double s1, double s2);

/// S2 at which the DM voltage spring reaches zero: -L / (L / S1 + 1).
[[nodiscard]] double two_device_dm_threshold(double l, double s1);

struct ModeReport {
    std::string label;
    ModeKind kind = ModeKind::DM;
    double lambda = 0.0;
    ModeParams params;
    bool collapse = false;
};

struct BusSpecificEntry {
    std::string mode;
    BusId observe = 0;
    BusId disturb = 0;
    ModeParams params;
};

struct NodalInertiaEntry {
    BusId observe = 0;
    BusId disturb = 0;
    double value = 0.0;
};

struct StrengthReport {
    Side side = Side::Frequency;
    bool static_only = false;
    std::vector<ModeReport> modes;
    std::vector<BusSpecificEntry> bus_specific;  // unobservable pairs omitted
    std::vector<NodalInertiaEntry> nodal_inertia;  // frequency side only
    double cm_v_spring_estimate = 0.0;             // voltage side only
    std::optional<double> gscr;                    // load-only static pencils
    std::vector<Warning> warnings;
};

[[nodiscard]] StrengthReport build_strength_report(const ModalDecomposition& dec);

}  // namespace modal_strength
