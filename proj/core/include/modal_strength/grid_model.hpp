#pragma once

// Static network model: nodal admittance assembly, Kron reduction to the
// device buses, power flow and the linearised network Jacobian blocks.
//
// Per-unit throughout. Power injected into the network is positive.

#include "modal_strength/types.hpp"

#include <span>
#include <vector>

namespace modal_strength {

enum class BusKind { Device, Interior };

struct Bus {
    BusId id = 0;
    BusKind kind = BusKind::Device;
    double shunt_g = 0.0;
    double shunt_b = 0.0;

    friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
    BusId from = 0;
    BusId to = 0;
    double r = 0.0;
    double x = 0.0;

    friend bool operator==(const Branch&, const Branch&) = default;
};

struct Grid {
    std::vector<Bus> buses;
    std::vector<Branch> branches;

    [[nodiscard]] std::size_t index_of(BusId id) const;
    [[nodiscard]] bool contains(BusId id) const;
    [[nodiscard]] std::vector<BusId> bus_ids() const;
    [[nodiscard]] std::vector<BusId> device_bus_ids() const;

    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Bus quantities at the linearisation point, indexed like the bus list they
/// were computed for.
struct OperatingPoint {
    Vector theta;
    Vector v;
    Vector p;
    Vector q;

    [[nodiscard]] Eigen::Index size() const { return theta.size(); }
    [[nodiscard]] OperatingPoint restrict_to(std::span<const std::size_t> indices) const;
};

enum class BusType { Slack, PV, PQ };
enum class FlowMode { Flat, Newton };

/// Declared injection at one bus. Buses without an entry are PQ with zero
/// injection. `v` and `theta` are only read for slack/PV buses in Newton mode.
struct Injection {
    BusId bus = 0;
    BusType type = BusType::PQ;
    double p = 0.0;
    double q = 0.0;
    double v = 1.0;
    double theta = 0.0;

    friend bool operator==(const Injection&, const Injection&) = default;
};

struct JacobianBlocks {
    Matrix l;
    Matrix n;
    Vector p_e;
    Vector q_e;
    Vector v_e;
};

inline constexpr double kPowerFlowTolerance = 1e-8;
inline constexpr int kPowerFlowMaxIterations = 50;

/// Nodal admittance matrix in bus-list order. Validates ids, branch
/// impedances, duplicates and connectivity.
[[nodiscard]] ComplexMatrix build_admittance(std::span<const Bus> buses,
                                             std::span<const Branch> branches);

/// Schur complement of `y` onto `retained_ids`, in the order given.
/// `bus_ids` labels the rows of `y`.
[[nodiscard]] ComplexMatrix kron_reduce(const ComplexMatrix& y, std::span<const BusId> bus_ids,
                                        std::span<const BusId> retained_ids);

/// Complex power injections S = V conj(Y V).
void compute_injections(const ComplexMatrix& y, const Vector& theta, const Vector& v, Vector& p,
                        Vector& q);

/// Flat: theta = 0, v = 1, p/q as declared. Newton: polar Newton-Raphson from
/// a flat start; exactly one slack bus required.
[[nodiscard]] OperatingPoint solve_power_flow(const Grid& grid, std::span<const Injection> injections,
                                              FlowMode mode);

/// L and N from the off-diagonal conductance/susceptance of `y_red` and the
/// operating point; diagonal power matrices copied from the operating point.
[[nodiscard]] JacobianBlocks build_jacobian_blocks(const ComplexMatrix& y_red, const OperatingPoint& op);

/// Largest absolute row sum over L and N. Zero (to rounding) for any blocks
/// built by build_jacobian_blocks.
[[nodiscard]] double check_flow_invariance(const JacobianBlocks& blocks);

/// Device-bus view of a grid at an operating point.
struct ReducedNetwork {
    std::vector<BusId> buses;  // device buses, grid order
    ComplexMatrix y_red;
    OperatingPoint op;         // restricted to `buses`
    JacobianBlocks blocks;
};

[[nodiscard]] ReducedNetwork reduce_network(const Grid& grid, const OperatingPoint& op);

}  // namespace modal_strength
