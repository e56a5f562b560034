#include "modal_strength/closed_loop.hpp"

#include "modal_strength/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace modal_strength {

Eigen::Index PencilProblem::retained_index(BusId bus) const {
    const auto it = std::find(buses.begin(), buses.end(), bus);
    return it == buses.end() ? -1 : static_cast<Eigen::Index>(it - buses.begin());
}

PencilProblem make_pencil_problem(Side side, std::span<const BusId> bus_ids, const Matrix& l, const Vector& scaling,
                                  const std::vector<bool>& boundary) {
    const auto n = static_cast<Eigen::Index>(bus_ids.size());
    if (l.rows() != n || l.cols() != n || scaling.size() != n || boundary.size() != bus_ids.size()) {
        throw Error(ErrorKind::Input, "pencil problem: dimension mismatch");
    }
    PencilProblem p;
    p.side = side;
    p.all_buses.assign(bus_ids.begin(), bus_ids.end());
    p.l_full = l;

    std::vector<Eigen::Index> kept, elim;
    for (Eigen::Index k = 0; k < n; ++k) {
        const BusId id = bus_ids[static_cast<std::size_t>(k)];
        if (boundary[static_cast<std::size_t>(k)]) {
            p.boundary_buses.push_back(id);
        } else if (scaling[k] == 0.0) {
            p.eliminated_buses.push_back(id);
            elim.push_back(k);
        } else {
            if (!std::isfinite(scaling[k])) {
                throw Error(ErrorKind::Input, "non-finite scaling at bus " + std::to_string(id) +
                                                  "; mark infinite devices as boundary instead");
            }
            p.buses.push_back(id);
            kept.push_back(k);
        }
    }
    if (kept.empty()) {
        throw Error(ErrorKind::Input, "pencil problem has no bus with device dynamics");
    }

    const Matrix l_rr = l(kept, kept);
    p.s = scaling(kept);
    if (elim.empty()) {
        p.l = l_rr;
        p.extension = Matrix::Zero(0, static_cast<Eigen::Index>(kept.size()));
        return p;
    }
    const Matrix l_ee = l(elim, elim);
    Eigen::FullPivLU<Matrix> lu(l_ee);
    if (!lu.isInvertible()) {
        std::ostringstream msg;
        msg << "buses without device dynamics cannot be eliminated (singular network block):";
        for (BusId b : p.eliminated_buses) msg << ' ' << b;
        throw Error(ErrorKind::Reduction, msg.str());
    }
    p.extension = -lu.solve(l(elim, kept));
    p.l = l_rr + l(kept, elim) * p.extension;
    return p;
}

PencilProblem frequency_problem(const ReducedNetwork& network, const DeviceSet& devices) {
    const DeviceMatrices dm = assemble_device_matrices(devices, network.buses);

    std::vector<BusId> offenders;
    for (const auto& e : devices.entries) {
        if (e.kind != DeviceKind::Unified) continue;
        const auto expect = scaled_nominal(e.s_theta, e.s_v, devices.nominal_freq, devices.nominal_volt);
        const auto tol = [](double a, double b) {
            return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
        };
        if (!tol(e.params.j_ptheta, expect.j_ptheta) || !tol(e.params.d_ptheta, expect.d_ptheta) ||
            !tol(e.params.k_ptheta, expect.k_ptheta)) {
            offenders.push_back(e.bus);
        }
    }
    if (!offenders.empty()) {
        std::ostringstream msg;
        msg << "frequency decomposition needs homogeneous devices; offending buses:";
        for (BusId b : offenders) msg << ' ' << b;
        throw Error(ErrorKind::Consistency, msg.str());
    }

    PencilProblem p = make_pencil_problem(Side::Frequency, network.buses, network.blocks.l, dm.s_theta, dm.boundary);
    p.nominal_inertia = devices.nominal_freq.j;
    p.nominal_damping = devices.nominal_freq.d;
    p.nominal_spring = devices.nominal_freq.k;
    p.network_gain = devices.omega0;
    return p;
}

PencilProblem voltage_problem(const ReducedNetwork& network, const DeviceSet& devices, VoltagePath path) {
    const DeviceMatrices dm = assemble_device_matrices(devices, network.buses);
    const auto effective = shift_load_spring(devices, network.buses, network.blocks.q_e);
    const auto n = static_cast<Eigen::Index>(effective.size());

    // Dynamic decoupling needs (d_i, k_i) = s_i (D0, K0 + c) with one common c.
    bool homogeneous = true;
    std::vector<BusId> offenders;
    double shift = 0.0;
    bool shift_set = false;
    const auto& nom = devices.nominal_volt;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& e = effective[static_cast<std::size_t>(k)];
        if (e.boundary) continue;
        const double s = dm.s_v[k];
        const auto tol = [](double a, double b) {
            return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
        };
        bool ok = e.kind == DeviceKind::Unified;
        if (ok && s == 0.0) {
            ok = e.d == 0.0 && e.k == 0.0;
        } else if (ok) {
            const double c = e.k / s - nom.k;
            if (!shift_set) {
                shift = c;
                shift_set = true;
            }
            ok = tol(e.d, s * nom.d) && tol(c, shift);
        }
        if (!ok) {
            homogeneous = false;
            offenders.push_back(e.bus);
        }
    }

    const bool use_static = path == VoltagePath::Static || !homogeneous;
    PencilProblem p;
    if (use_static) {
        Vector springs(n);
        for (Eigen::Index k = 0; k < n; ++k) springs[k] = effective[static_cast<std::size_t>(k)].k;
        p = make_pencil_problem(Side::Voltage, network.buses, network.blocks.l, springs, dm.boundary);
        p.nominal_inertia = 0.0;
        p.nominal_damping = 0.0;
        p.nominal_spring = 1.0;
        p.static_only = true;
        if (!homogeneous && path != VoltagePath::Static) {
            std::ostringstream msg;
            msg << "voltage dynamics are heterogeneous (buses";
            for (BusId b : offenders) msg << ' ' << b;
            msg << "); reporting static springs only (s = 0)";
            p.warnings.push_back({"W_VOLTAGE_STATIC_ONLY", msg.str()});
        }
    } else {
        p = make_pencil_problem(Side::Voltage, network.buses, network.blocks.l, dm.s_v, dm.boundary);
        p.nominal_inertia = 0.0;
        p.nominal_damping = nom.d;
        p.nominal_spring = nom.k + shift;
    }
    p.network_gain = 1.0;
    return p;
}

}  // namespace modal_strength
