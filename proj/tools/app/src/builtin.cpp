#include "modal_strength_app/scenario.hpp"

#include <modal_strength/error.hpp>

#include <algorithm>
#include <functional>
#include <map>

namespace modal_strength::app {

namespace {

DeviceEntry unified(const DeviceSet& set, BusId bus, double s_theta, double s_v) {
    DeviceEntry e;
    e.bus = bus;
    e.s_theta = s_theta;
    e.s_v = s_v;
    e.params = scaled_nominal(s_theta, s_v, set.nominal_freq, set.nominal_volt);
    return e;
}

DeviceEntry special(BusId bus, DeviceKind kind) {
    DeviceEntry e;
    e.bus = bus;
    e.kind = kind;
    e.s_theta = 0.0;
    e.s_v = 0.0;
    return e;
}

// Two device buses joined by one lossless line with L = [3, -3; -3, 3].
Scenario two_device(const std::string& name, double j0, double d0) {
    Scenario s;
    s.name = name;
    s.grid.buses = {{1, BusKind::Device}, {2, BusKind::Device}};
    s.grid.branches = {{1, 2, 0.0, 1.0 / 3.0}};
    s.devices.nominal_freq = {j0, d0, 0.0};
    s.devices.nominal_volt = {1.0, 10.0};
    s.devices.entries = {unified(s.devices, 1, 1.0, 1.0), unified(s.devices, 2, 1.0, 1.0)};
    s.simulation.t_end = 20.0;
    return s;
}

Scenario case1(const std::string& name, double j0, double d0) {
    Scenario s = two_device(name, j0, d0);
    s.analysis.voltage = false;
    s.disturbances = {{1, Quantity::Active, -0.2, 1.0}};
    return s;
}

Scenario case2(const std::string& name) {
    Scenario s = two_device(name, 10.0, 10.0);
    s.analysis.frequency = false;
    s.disturbances = {{1, Quantity::Reactive, -0.2, 1.0}};
    return s;
}

// Four device buses (1-4) feeding a five-bus interior corridor (5-9).
Scenario four_device(const std::string& name) {
    Scenario s;
    s.name = name;
    for (BusId id = 1; id <= 4; ++id) s.grid.buses.push_back({id, BusKind::Device});
    for (BusId id = 5; id <= 9; ++id) s.grid.buses.push_back({id, BusKind::Interior});
    s.grid.buses[5].shunt_g = 0.5;  // bus 6
    s.grid.buses[5].shunt_b = 0.05;
    s.grid.buses[7].shunt_g = 0.5;  // bus 8
    s.grid.buses[7].shunt_b = 0.05;
    const auto line = [](BusId a, BusId b, double x) { return Branch{a, b, 0.1 * x, x}; };
    s.grid.branches = {line(1, 5, 0.1),    line(2, 5, 0.1),    line(3, 9, 0.1),    line(4, 9, 0.1),
                       line(5, 6, 0.0375), line(6, 7, 0.0375), line(7, 8, 0.0375), line(8, 9, 0.0375)};
    s.notes = {"corridor 5-9 split into four equal sections of 0.0375 p.u.",
               "shunts (g = 0.5, b = 0.05) placed at corridor buses 6 and 8"};
    s.devices.nominal_freq = {10.0, 10.0, 0.0};
    s.devices.nominal_volt = {5.0, 10.0};
    return s;
}

Scenario case3() {
    Scenario s = four_device("four-device-case3");
    const double s_theta[] = {1, 1, 2, 1};
    const double s_v[] = {1, 1, 1, 10};
    for (BusId id = 1; id <= 4; ++id) s.devices.entries.push_back(unified(s.devices, id, s_theta[id - 1], s_v[id - 1]));
    s.disturbances = {{1, Quantity::Active, -0.2, 1.0}, {1, Quantity::Reactive, -0.2, 1.0}};
    return s;
}

Scenario case4(const std::string& name) {
    Scenario s = four_device(name);
    s.grid.buses[7].shunt_b = 0.9;
    s.notes.push_back("shunt susceptance at bus 8 raised to 0.9 p.u.");
    s.devices.homogeneous = false;
    s.devices.entries = {unified(s.devices, 1, 1.0, 1.0), unified(s.devices, 2, 1.0, 1.0),
                         special(3, DeviceKind::Crpl), special(4, DeviceKind::Crpl)};
    s.operating_point.injections = {{3, BusType::PQ, 0.0, -0.4}, {4, BusType::PQ, 0.0, -0.4}};
    s.analysis.frequency = false;
    s.analysis.voltage_path = VoltagePath::Static;
    s.analysis.uniform_damping = 1.0;
    s.disturbances = {{1, Quantity::Reactive, -0.01, 0.0}, {3, Quantity::Reactive, -0.01, 0.0}};
    s.simulation.t_end = 60.0;
    return s;
}

std::vector<double> linspace(double from, double to, int count) {
    std::vector<double> v;
    for (int i = 0; i < count; ++i) v.push_back(from + (to - from) * i / (count - 1));
    return v;
}

const std::map<std::string, std::function<Scenario()>>& registry() {
    static const std::map<std::string, std::function<Scenario()>> r = {
        {"two-device-case1a", [] { return case1("two-device-case1a", 10.0, 10.0); }},
        {"two-device-case1b", [] { return case1("two-device-case1b", 2.0, 20.0); }},
        {"two-device-case1c",
         [] {
             Scenario s = case1("two-device-case1c", 10.0, 10.0);
             s.devices.entries[1] = special(2, DeviceKind::Infinite);
             return s;
         }},
        {"two-device-case1d",
         [] {
             Scenario s = case1("two-device-case1d", 10.0, 10.0);
             s.devices.entries[1] = unified(s.devices, 2, 0.0, 1.0);
             return s;
         }},
        {"two-device-case2a", [] { return case2("two-device-case2a"); }},
        {"two-device-case2b",
         [] {
             Scenario s = case2("two-device-case2b");
             s.devices.entries[1] = special(2, DeviceKind::Infinite);
             return s;
         }},
        {"four-device-case3", [] { return case3(); }},
        {"four-device-case4a",
         [] {
             Scenario s = case4("four-device-case4a");
             s.analysis.sweep = SweepSpec{"load_q_total", linspace(0.8, 12.0, 113)};
             return s;
         }},
        {"four-device-case4b",
         [] {
             Scenario s = case4("four-device-case4b");
             s.analysis.sweep = SweepSpec{"generator_k_qv", linspace(10.0, 0.1, 100)};
             return s;
         }},
        {"gscr-bridge",
         [] {
             Scenario s = case4("gscr-bridge");
             s.devices.entries[0] = special(1, DeviceKind::Infinite);
             s.devices.entries[1] = special(2, DeviceKind::Infinite);
             s.disturbances = {{3, Quantity::Reactive, -0.01, 0.0}};
             s.analysis.sweep = SweepSpec{"load_q_total", linspace(0.8, 12.0, 113)};
             return s;
         }},
    };
    return r;
}

DeviceEntry& device_at(Scenario& s, BusId bus) {
    for (auto& e : s.devices.entries) {
        if (e.bus == bus) return e;
    }
    throw Error(ErrorKind::Input, "no device at bus " + std::to_string(bus));
}

void set_k_qv(DeviceEntry& e, double value) {
    if (e.kind != DeviceKind::Unified) throw Error(ErrorKind::Input, "k_qv applies to unified devices only");
    if (e.full) {
        e.full->k_qv = value;
        e.params = reduce_to_unified(*e.full);
    } else {
        e.params.k_qv = value;
    }
}

void set_load(Scenario& s, BusId bus, double consumption) {
    auto& inj = s.operating_point.injections;
    const auto it = std::find_if(inj.begin(), inj.end(), [bus](const Injection& i) { return i.bus == bus; });
    if (it == inj.end()) {
        inj.push_back({bus, BusType::PQ, 0.0, -consumption});
    } else {
        it->q = -consumption;
    }
}

}  // namespace

std::vector<std::string> builtin_names() {
    std::vector<std::string> names;
    for (const auto& [name, make] : registry()) names.push_back(name);
    return names;
}

Scenario builtin_scenario(const std::string& name) {
    const auto& r = registry();
    const auto it = r.find(name);
    if (it == r.end()) throw Error(ErrorKind::Input, "unknown built-in scenario '" + name + "'");
    return it->second();
}

Scenario with_parameter(const Scenario& scenario, const std::string& parameter, double value) {
    Scenario s = scenario;
    if (parameter == "load_q_total") {
        std::vector<BusId> loads;
        for (const auto& e : s.devices.entries) {
            if (e.kind == DeviceKind::Crpl) loads.push_back(e.bus);
        }
        if (loads.empty()) throw Error(ErrorKind::Input, "load_q_total: scenario has no CRPL");
        for (BusId b : loads) set_load(s, b, value / static_cast<double>(loads.size()));
        return s;
    }
    if (parameter == "generator_k_qv") {
        for (auto& e : s.devices.entries) {
            if (e.kind == DeviceKind::Unified) set_k_qv(e, value);
        }
        return s;
    }

    // device:<bus>:<field> and load:<bus>:q
    const auto first = parameter.find(':');
    const auto second = parameter.find(':', first == std::string::npos ? first : first + 1);
    if (first == std::string::npos || second == std::string::npos) {
        throw Error(ErrorKind::Input, "unknown sweep parameter '" + parameter + "'");
    }
    const std::string scope = parameter.substr(0, first);
    const std::string field = parameter.substr(second + 1);
    BusId bus = 0;
    try {
        bus = std::stoi(parameter.substr(first + 1, second - first - 1));
    } catch (const std::exception&) {
        throw Error(ErrorKind::Input, "bad bus id in sweep parameter '" + parameter + "'");
    }
    if (scope == "load" && field == "q") {
        if (device_at(s, bus).kind != DeviceKind::Crpl) throw Error(ErrorKind::Input, "bus is not a CRPL");
        set_load(s, bus, value);
        return s;
    }
    if (scope == "device") {
        DeviceEntry& e = device_at(s, bus);
        if (field == "k_qv") {
            set_k_qv(e, value);
            return s;
        }
        if (field == "s_theta" || field == "s_v") {
            if (e.kind != DeviceKind::Unified) throw Error(ErrorKind::Input, "scalings apply to unified devices");
            (field == "s_theta" ? e.s_theta : e.s_v) = value;
            if (s.devices.homogeneous && !e.full) {
                e.params = scaled_nominal(e.s_theta, e.s_v, s.devices.nominal_freq, s.devices.nominal_volt);
            }
            return s;
        }
    }
    throw Error(ErrorKind::Input, "unknown sweep parameter '" + parameter + "'");
}

}  // namespace modal_strength::app
