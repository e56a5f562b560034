#pragma once

// Time-domain responses to step power disturbances: closed-form eigen-
// subsystem responses, modal superposition, and direct RK4 integration of
// the coupled linear closed loop (no modal transform).

#include "modal_strength/closed_loop.hpp"
#include "modal_strength/device_model.hpp"
#include "modal_strength/grid_model.hpp"
#include "modal_strength/modal_decomp.hpp"
#include "modal_strength/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace modal_strength {

enum class Quantity { Active, Reactive };

/// Step change of external power injection at `bus`, signed (a load step of
/// 0.2 p.u. is magnitude -0.2).
struct Disturbance {
    BusId bus = 0;
    Quantity quantity = Quantity::Active;
    double magnitude = 0.0;
    double start_time = 0.0;

    friend bool operator==(const Disturbance&, const Disturbance&) = default;
};

inline constexpr double kDefaultStep = 1e-3;
inline constexpr double kTruncationLimit = 10.0;

/// Sample times 0, dt, 2 dt, ..., t_end (t_end included).
[[nodiscard]] Vector make_time_grid(double t_end, double output_dt);

/// A scalar modal coordinate and its time derivative, already divided by the
/// network gain (omega0 on the frequency side, 1 on the voltage side).
struct ModeSeries {
    Vector value;
    Vector rate;
};

/// J q'' + D q' + K q = omega0 a u(t); rate = q' / omega0.
[[nodiscard]] ModeSeries mode_step_response_second_order(double j, double d, double k, double amplitude,
                                                         double omega0, const Vector& t);

/// D q' + K q = a u(t); rate = q'.
[[nodiscard]] ModeSeries mode_step_response_first_order(double d, double k, double amplitude, const Vector& t);

/// Sample-by-bus series. On the frequency side `primary` is the angle (rad)
/// and `rate` the frequency deviation (p.u.); on the voltage side `primary`
/// is the relative voltage deviation and `rate` its derivative.
struct ResponseTrace {
    Side side = Side::Frequency;
    Vector t;
    std::vector<BusId> buses;
    Matrix primary;
    Matrix rate;
    Matrix device_power;  // active power (frequency) or virtual reactive power (voltage) delivered by each device

    std::vector<std::string> mode_labels;
    std::vector<Matrix> mode_primary;
    std::vector<Matrix> mode_rate;
    std::vector<Matrix> mode_power;

    bool truncated = false;

    /// Frequency deviation on the frequency side, voltage deviation otherwise.
    [[nodiscard]] const Matrix& observable() const { return side == Side::Frequency ? rate : primary; }
};

/// Per-mode series phi_k (psi_k^T u) q_k(t), summed per bus. Disturbances must
/// match the decomposition side and sit on retained buses.
[[nodiscard]] ResponseTrace modal_superpose(const ModalDecomposition& dec, std::span<const Disturbance> disturbances,
                                            const Vector& t);

/// Device power split by mode, -S_i phi_k,i (psi_k^T u - l_m,k q_k) / s_m,k.
/// Fills `mode_power` and `device_power` of a trace built by modal_superpose.
void modal_power(const ModalDecomposition& dec, std::span<const Disturbance> disturbances, ResponseTrace& trace);

struct FinalValues {
    std::vector<std::string> labels;
    Matrix per_mode;  // modes x buses: frequency or voltage deviation as t -> infinity
    Vector per_bus;
    std::vector<bool> divergent;  // no finite final value

    [[nodiscard]] bool any_divergent() const;
};

[[nodiscard]] FinalValues final_values(const ModalDecomposition& dec, std::span<const Disturbance> disturbances);

struct DirectOptions {
    double dt = kDefaultStep;
    /// Voltage side only: give every non-boundary bus this damping and its
    /// static spring, so heterogeneous springs can be simulated.
    std::optional<double> uniform_damping;
};

/// Integrates the linear closed loop on all device buses of one side with
/// classical RK4. Boundary buses stay at zero; buses without dynamics are
/// solved algebraically; governors with t_g > 0 carry their own lag state.
[[nodiscard]] ResponseTrace simulate_direct(const ReducedNetwork& network, const DeviceSet& devices, Side side,
                                            std::span<const Disturbance> disturbances, const Vector& t,
                                            const DirectOptions& options = {});

/// Largest |a - b| of the observable series over the samples both traces hold.
[[nodiscard]] double max_trace_gap(const ResponseTrace& a, const ResponseTrace& b);

struct SweepPoint {
    double value = 0.0;
    std::vector<std::string> labels;        // tracked from the first point by mode shape
    std::vector<std::string> rank_labels;   // labels assigned at this point alone
    std::vector<double> lambdas;
    std::vector<double> springs;
    std::vector<Vector> shapes;             // phi over all buses of the side
    std::string error;  // non-empty when this point could not be decomposed
};

struct Crossing {
    std::string mode;
    double value = 0.0;
    int direction = 0;  // -1: spring falls through zero, +1: rises through zero
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::vector<Crossing> crossings;

    [[nodiscard]] std::optional<Crossing> first_crossing(const std::string& mode) const;
};

/// Threads used by spring_sweep: MODAL_STRENGTH_THREADS if set, otherwise
/// the hardware concurrency.
[[nodiscard]] unsigned sweep_thread_count();

/// Rebuilds the pencil for every value, decomposes it and records modal
/// springs; zero crossings per mode label are located by linear
/// interpolation. Points are evaluated in parallel, results keep input order.
/// Labels follow each mode along the sweep by matching mode shapes between
/// neighbouring points, so a mode keeps the label it had at the first point.
[[nodiscard]] SweepResult spring_sweep(const std::function<PencilProblem(double)>& build,
                                       std::span<const double> values, unsigned threads = 0);

/// Relabels points after the first by greatest |cosine| between mode shapes.
void track_modes(std::span<SweepPoint> points);

[[nodiscard]] std::vector<Crossing> find_crossings(std::span<const SweepPoint> points);

}  // namespace modal_strength
