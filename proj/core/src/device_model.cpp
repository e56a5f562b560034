#include "modal_strength/device_model.hpp"

#include "modal_strength/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace modal_strength {

namespace {

bool close(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

const DeviceEntry* DeviceSet::find(BusId bus) const {
    const auto it = std::find_if(entries.begin(), entries.end(), [bus](const DeviceEntry& e) { return e.bus == bus; });
    return it == entries.end() ? nullptr : &*it;
}

UnifiedDeviceParams reduce_to_unified(const FullDeviceParams& full) {
    // Governor: the DC gain and the high-frequency asymptote of
    // (K_P s + K_S)/(T_G s + 1) are kept; T_G itself drops out.
    return UnifiedDeviceParams{
        .j_ptheta = full.j,
        .d_ptheta = full.d + full.k_p,
        .k_ptheta = full.k_s,
        .d_qv = full.t_m * full.k_qv,
        .k_qv = full.k_qv,
    };
}

UnifiedDeviceParams scaled_nominal(double s_theta, double s_v, const FrequencyNominal& freq,
                                   const VoltageNominal& volt) {
    return UnifiedDeviceParams{
        .j_ptheta = s_theta * freq.j,
        .d_ptheta = s_theta * freq.d,
        .k_ptheta = s_theta * freq.k,
        .d_qv = s_v * volt.d,
        .k_qv = s_v * volt.k,
    };
}

std::vector<BusId> heterogeneous_entries(const DeviceSet& devices) {
    std::vector<BusId> offenders;
    for (const auto& e : devices.entries) {
        if (e.kind != DeviceKind::Unified) continue;
        const auto expect = scaled_nominal(e.s_theta, e.s_v, devices.nominal_freq, devices.nominal_volt);
        const auto& p = e.params;
        if (!close(p.j_ptheta, expect.j_ptheta) || !close(p.d_ptheta, expect.d_ptheta) ||
            !close(p.k_ptheta, expect.k_ptheta) || !close(p.d_qv, expect.d_qv) || !close(p.k_qv, expect.k_qv)) {
            offenders.push_back(e.bus);
        }
    }
    return offenders;
}

DeviceMatrices assemble_device_matrices(const DeviceSet& devices, std::span<const BusId> bus_order) {
    if (devices.homogeneous) {
        const auto offenders = heterogeneous_entries(devices);
        if (!offenders.empty()) {
            std::ostringstream msg;
            msg << "devices are not scaling x nominal at buses:";
            for (BusId b : offenders) msg << ' ' << b;
            throw Error(ErrorKind::Consistency, msg.str());
        }
    }
    for (const auto& e : devices.entries) {
        if (std::find(bus_order.begin(), bus_order.end(), e.bus) == bus_order.end()) {
            throw Error(ErrorKind::Input, "device at bus " + std::to_string(e.bus) + " is not on a device bus");
        }
    }

    const auto n = static_cast<Eigen::Index>(bus_order.size());
    DeviceMatrices out;
    out.buses.assign(bus_order.begin(), bus_order.end());
    out.s_theta = Vector::Zero(n);
    out.s_v = Vector::Zero(n);
    out.boundary.assign(bus_order.size(), false);
    out.nominal_freq = devices.nominal_freq;
    out.nominal_volt = devices.nominal_volt;
    out.omega0 = devices.omega0;

    for (Eigen::Index k = 0; k < n; ++k) {
        const BusId bus = bus_order[static_cast<std::size_t>(k)];
        const auto count = std::count_if(devices.entries.begin(), devices.entries.end(),
                                         [bus](const DeviceEntry& e) { return e.bus == bus; });
        if (count != 1) {
            throw Error(ErrorKind::Input, "device bus " + std::to_string(bus) + " must carry exactly one device, has " +
                                              std::to_string(count));
        }
        const DeviceEntry& e = *devices.find(bus);
        switch (e.kind) {
            case DeviceKind::Infinite:
                out.boundary[static_cast<std::size_t>(k)] = true;
                break;
            case DeviceKind::Crpl:
                // No frequency support; voltage scaling is its (negative) spring,
                // supplied later by shift_load_spring.
                out.s_theta[k] = 0.0;
                out.s_v[k] = 0.0;
                break;
            case DeviceKind::Unified:
                out.s_theta[k] = e.s_theta;
                out.s_v[k] = e.s_v;
                break;
        }
    }
    return out;
}

std::vector<EffectiveVoltageDevice> shift_load_spring(const DeviceSet& devices, std::span<const BusId> bus_order,
                                                      const Vector& q_e) {
    if (q_e.size() != static_cast<Eigen::Index>(bus_order.size())) {
        throw Error(ErrorKind::Input, "shift_load_spring: q_e dimension does not match bus order");
    }
    std::vector<EffectiveVoltageDevice> out;
    out.reserve(bus_order.size());
    for (std::size_t k = 0; k < bus_order.size(); ++k) {
        const DeviceEntry* e = devices.find(bus_order[k]);
        if (e == nullptr) {
            throw Error(ErrorKind::Input, "no device at bus " + std::to_string(bus_order[k]));
        }
        const double shift = 2.0 * q_e[static_cast<Eigen::Index>(k)];
        EffectiveVoltageDevice dev{.bus = e->bus, .kind = e->kind};
        switch (e->kind) {
            case DeviceKind::Infinite:
                dev.boundary = true;
                break;
            case DeviceKind::Crpl:
                dev.k = shift;
                break;
            case DeviceKind::Unified:
                dev.d = e->params.d_qv;
                dev.k = e->params.k_qv + shift;
                break;
        }
        out.push_back(dev);
    }
    return out;
}

}  // namespace modal_strength
