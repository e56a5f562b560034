#include "modal_strength_app/scenario.hpp"

#include <modal_strength/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>

namespace modal_strength::app {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::Input, path + ": " + what);
}

// Strict view of one JSON object.
class Obj {
public:
    Obj(const json& j, std::string path, std::initializer_list<const char*> keys) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
        for (const auto& [key, value] : j_.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
                fail(path_ + "." + key, "unknown key");
            }
        }
    }

    [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }
    [[nodiscard]] std::string at(const char* key) const { return path_ + "." + key; }
    [[nodiscard]] const json& raw(const char* key) const {
        if (!has(key)) fail(at(key), "missing required key");
        return j_.at(key);
    }

    [[nodiscard]] double number(const char* key) const {
        const json& v = raw(key);
        if (!v.is_number()) fail(at(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(at(key), "expected a finite number");
        return x;
    }
    [[nodiscard]] double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

    [[nodiscard]] int integer(const char* key) const {
        const json& v = raw(key);
        if (!v.is_number_integer()) fail(at(key), "expected an integer");
        return v.get<int>();
    }

    [[nodiscard]] bool boolean(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) fail(at(key), "expected true or false");
        return v.get<bool>();
    }

    [[nodiscard]] std::string string(const char* key) const {
        const json& v = raw(key);
        if (!v.is_string()) fail(at(key), "expected a string");
        return v.get<std::string>();
    }
    [[nodiscard]] std::string string(const char* key, const std::string& fallback) const {
        return has(key) ? string(key) : fallback;
    }

    [[nodiscard]] const json& array(const char* key) const {
        const json& v = raw(key);
        if (!v.is_array()) fail(at(key), "expected an array");
        return v;
    }

private:
    const json& j_;
    std::string path_;
};

template <typename E>
E choose(const std::string& path, const std::string& value, std::initializer_list<std::pair<const char*, E>> options) {
    for (const auto& [name, e] : options) {
        if (value == name) return e;
    }
    std::string allowed;
    for (const auto& [name, e] : options) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    fail(path, "unknown value '" + value + "' (expected one of: " + allowed + ")");
}

template <typename E>
const char* name_of(E value, std::initializer_list<std::pair<const char*, E>> options) {
    for (const auto& [name, e] : options) {
        if (e == value) return name;
    }
    return "";
}

const std::initializer_list<std::pair<const char*, BusKind>> kBusKinds = {{"device", BusKind::Device},
                                                                          {"interior", BusKind::Interior}};
const std::initializer_list<std::pair<const char*, DeviceKind>> kDeviceKinds = {
    {"unified", DeviceKind::Unified}, {"crpl", DeviceKind::Crpl}, {"infinite", DeviceKind::Infinite}};
const std::initializer_list<std::pair<const char*, BusType>> kBusTypes = {
    {"slack", BusType::Slack}, {"pv", BusType::PV}, {"pq", BusType::PQ}};
const std::initializer_list<std::pair<const char*, FlowMode>> kFlowModes = {{"flat", FlowMode::Flat},
                                                                            {"newton", FlowMode::Newton}};
const std::initializer_list<std::pair<const char*, Quantity>> kQuantities = {{"active", Quantity::Active},
                                                                             {"reactive", Quantity::Reactive}};
const std::initializer_list<std::pair<const char*, VoltagePath>> kVoltagePaths = {
    {"auto", VoltagePath::Auto}, {"dynamic", VoltagePath::Dynamic}, {"static", VoltagePath::Static}};

std::string item(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

DeviceEntry parse_device(const json& j, const std::string& path, const DeviceSet& set) {
    Obj o(j, path, {"bus", "kind", "s_theta", "s_v", "unified", "full"});
    DeviceEntry e;
    e.bus = o.integer("bus");
    e.kind = choose(o.at("kind"), o.string("kind", "unified"), kDeviceKinds);
    e.s_theta = o.number("s_theta", 1.0);
    e.s_v = o.number("s_v", 1.0);
    if (o.has("unified") && o.has("full")) fail(path, "give either 'unified' or 'full' parameters, not both");
    if (e.kind != DeviceKind::Unified) {
        if (o.has("unified") || o.has("full")) fail(path, "only unified devices take parameters");
        e.s_theta = 0.0;
        e.s_v = 0.0;
        return e;
    }
    if (o.has("full")) {
        Obj f(o.raw("full"), o.at("full"), {"j", "d", "k_p", "k_s", "t_g", "k_qv", "t_m"});
        FullDeviceParams p;
        p.j = f.number("j", 0.0);
        p.d = f.number("d", 0.0);
        p.k_p = f.number("k_p", 0.0);
        p.k_s = f.number("k_s", 0.0);
        p.t_g = f.number("t_g", 0.0);
        p.k_qv = f.number("k_qv", 0.0);
        p.t_m = f.number("t_m", 0.0);
        if (p.t_g < 0.0 || p.t_m < 0.0) fail(o.at("full"), "time constants must be >= 0");
        e.full = p;
        e.params = reduce_to_unified(p);
    } else if (o.has("unified")) {
        Obj u(o.raw("unified"), o.at("unified"), {"j_ptheta", "d_ptheta", "k_ptheta", "d_qv", "k_qv"});
        e.params.j_ptheta = u.number("j_ptheta", 0.0);
        e.params.d_ptheta = u.number("d_ptheta", 0.0);
        e.params.k_ptheta = u.number("k_ptheta", 0.0);
        e.params.d_qv = u.number("d_qv", 0.0);
        e.params.k_qv = u.number("k_qv", 0.0);
    } else {
        e.params = scaled_nominal(e.s_theta, e.s_v, set.nominal_freq, set.nominal_volt);
    }
    return e;
}

std::vector<double> parse_sweep_values(const Obj& o) {
    if (o.has("values")) {
        if (o.has("from") || o.has("to") || o.has("count")) fail(o.at("values"), "use either values or from/to/count");
        std::vector<double> out;
        const json& arr = o.array("values");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_number()) fail(item(o.at("values"), i), "expected a number");
            out.push_back(arr[i].get<double>());
        }
        if (out.empty()) fail(o.at("values"), "sweep needs at least one value");
        return out;
    }
    const double from = o.number("from");
    const double to = o.number("to");
    const int count = o.integer("count");
    if (count < 2) fail(o.at("count"), "sweep needs count >= 2");
    std::vector<double> out;
    for (int i = 0; i < count; ++i) out.push_back(from + (to - from) * i / (count - 1));
    return out;
}

}  // namespace

void check_references(const Scenario& s) {
    std::map<BusId, BusKind> kinds;
    for (std::size_t i = 0; i < s.grid.buses.size(); ++i) {
        const auto& b = s.grid.buses[i];
        if (!kinds.emplace(b.id, b.kind).second) {
            fail(item("$.buses", i) + ".id", "duplicate bus id " + std::to_string(b.id));
        }
    }
    const auto known = [&](BusId id, const std::string& path) {
        if (!kinds.count(id)) fail(path, "unknown bus " + std::to_string(id));
    };
    for (std::size_t i = 0; i < s.grid.branches.size(); ++i) {
        known(s.grid.branches[i].from, item("$.branches", i) + ".from");
        known(s.grid.branches[i].to, item("$.branches", i) + ".to");
    }
    std::set<BusId> with_device;
    for (std::size_t i = 0; i < s.devices.entries.size(); ++i) {
        const BusId bus = s.devices.entries[i].bus;
        const auto path = item("$.devices", i) + ".bus";
        known(bus, path);
        if (kinds[bus] != BusKind::Device) fail(path, "bus " + std::to_string(bus) + " is an interior bus");
        if (!with_device.insert(bus).second) fail(path, "bus " + std::to_string(bus) + " already has a device");
    }
    for (const auto& [id, kind] : kinds) {
        if (kind == BusKind::Device && !with_device.count(id)) {
            fail("$.devices", "device bus " + std::to_string(id) + " has no device");
        }
    }
    for (std::size_t i = 0; i < s.operating_point.injections.size(); ++i) {
        known(s.operating_point.injections[i].bus, item("$.operating_point.injections", i) + ".bus");
    }
    for (std::size_t i = 0; i < s.disturbances.size(); ++i) {
        const auto path = item("$.disturbances", i) + ".bus";
        if (!with_device.count(s.disturbances[i].bus)) {
            fail(path, "bus " + std::to_string(s.disturbances[i].bus) + " has no device");
        }
    }
}

Scenario scenario_from_json(const json& doc) {
    Obj top(doc, "$",
            {"schema", "name", "notes", "omega0", "homogeneous", "buses", "branches", "nominal", "devices",
             "operating_point", "disturbances", "simulation", "analysis"});
    if (top.string("schema", kSchema) != kSchema) fail(top.at("schema"), std::string("expected ") + kSchema);

    Scenario s;
    s.name = top.string("name", "unnamed");
    if (top.has("notes")) {
        const json& notes = top.array("notes");
        for (std::size_t i = 0; i < notes.size(); ++i) {
            if (!notes[i].is_string()) fail(item(top.at("notes"), i), "expected a string");
            s.notes.push_back(notes[i].get<std::string>());
        }
    }
    s.devices.omega0 = top.number("omega0", kDefaultOmega0);
    if (s.devices.omega0 <= 0.0) fail(top.at("omega0"), "must be positive");
    s.devices.homogeneous = top.boolean("homogeneous", true);

    const json& buses = top.array("buses");
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const auto path = item(top.at("buses"), i);
        Obj o(buses[i], path, {"id", "kind", "shunt_g", "shunt_b"});
        s.grid.buses.push_back({o.integer("id"), choose(o.at("kind"), o.string("kind", "device"), kBusKinds),
                                o.number("shunt_g", 0.0), o.number("shunt_b", 0.0)});
    }
    const json& branches = top.array("branches");
    for (std::size_t i = 0; i < branches.size(); ++i) {
        Obj o(branches[i], item(top.at("branches"), i), {"from", "to", "r", "x"});
        s.grid.branches.push_back({o.integer("from"), o.integer("to"), o.number("r", 0.0), o.number("x")});
    }

    if (top.has("nominal")) {
        Obj n(top.raw("nominal"), top.at("nominal"), {"frequency", "voltage"});
        if (n.has("frequency")) {
            Obj f(n.raw("frequency"), n.at("frequency"), {"j", "d", "k"});
            s.devices.nominal_freq = {f.number("j", 0.0), f.number("d", 0.0), f.number("k", 0.0)};
        }
        if (n.has("voltage")) {
            Obj v(n.raw("voltage"), n.at("voltage"), {"d", "k"});
            s.devices.nominal_volt = {v.number("d", 0.0), v.number("k", 0.0)};
        }
    }
    const json& devices = top.array("devices");
    if (devices.empty()) throw Error(ErrorKind::Input, top.at("devices") + ": device list is empty");
    for (std::size_t i = 0; i < devices.size(); ++i) {
        s.devices.entries.push_back(parse_device(devices[i], item(top.at("devices"), i), s.devices));
    }

    if (top.has("operating_point")) {
        Obj op(top.raw("operating_point"), top.at("operating_point"), {"mode", "injections"});
        s.operating_point.mode = choose(op.at("mode"), op.string("mode", "flat"), kFlowModes);
        if (op.has("injections")) {
            const json& inj = op.array("injections");
            for (std::size_t i = 0; i < inj.size(); ++i) {
                Obj o(inj[i], item(op.at("injections"), i), {"bus", "type", "p", "q", "v", "theta"});
                s.operating_point.injections.push_back({o.integer("bus"),
                                                        choose(o.at("type"), o.string("type", "pq"), kBusTypes),
                                                        o.number("p", 0.0), o.number("q", 0.0), o.number("v", 1.0),
                                                        o.number("theta", 0.0)});
            }
        }
    }

    if (top.has("disturbances")) {
        const json& d = top.array("disturbances");
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto path = item(top.at("disturbances"), i);
            Obj o(d[i], path, {"bus", "quantity", "magnitude", "start_time"});
            Disturbance dist{o.integer("bus"), choose(o.at("quantity"), o.string("quantity", "active"), kQuantities),
                             o.number("magnitude"), o.number("start_time", 0.0)};
            if (dist.start_time < 0.0) fail(o.at("start_time"), "must be >= 0");
            s.disturbances.push_back(dist);
        }
    }

    if (top.has("simulation")) {
        Obj o(top.raw("simulation"), top.at("simulation"), {"t_end", "dt", "output_dt"});
        s.simulation.t_end = o.number("t_end", s.simulation.t_end);
        s.simulation.dt = o.number("dt", s.simulation.dt);
        s.simulation.output_dt = o.number("output_dt", s.simulation.output_dt);
        if (s.simulation.t_end < 0.0) fail(o.at("t_end"), "must be >= 0");
        if (s.simulation.dt <= 0.0) fail(o.at("dt"), "must be positive");
        if (s.simulation.output_dt <= 0.0) fail(o.at("output_dt"), "must be positive");
    }

    if (top.has("analysis")) {
        Obj o(top.raw("analysis"), top.at("analysis"), {"sides", "voltage_path", "uniform_damping", "sweep"});
        if (o.has("sides")) {
            const json& sides = o.array("sides");
            s.analysis.frequency = false;
            s.analysis.voltage = false;
            for (std::size_t i = 0; i < sides.size(); ++i) {
                const auto path = item(o.at("sides"), i);
                if (!sides[i].is_string()) fail(path, "expected a string");
                const auto side = choose(path, sides[i].get<std::string>(),
                                         {std::pair{"frequency", Side::Frequency}, std::pair{"voltage", Side::Voltage}});
                (side == Side::Frequency ? s.analysis.frequency : s.analysis.voltage) = true;
            }
        }
        s.analysis.voltage_path = choose(o.at("voltage_path"), o.string("voltage_path", "auto"), kVoltagePaths);
        if (o.has("uniform_damping")) {
            s.analysis.uniform_damping = o.number("uniform_damping");
            if (*s.analysis.uniform_damping <= 0.0) fail(o.at("uniform_damping"), "must be positive");
        }
        if (o.has("sweep")) {
            Obj w(o.raw("sweep"), o.at("sweep"), {"parameter", "values", "from", "to", "count"});
            s.analysis.sweep = SweepSpec{w.string("parameter"), parse_sweep_values(w)};
        }
    }
    check_references(s);
    return s;
}

json scenario_to_json(const Scenario& s) {
    json doc;
    doc["schema"] = kSchema;
    doc["name"] = s.name;
    doc["notes"] = s.notes;
    doc["omega0"] = s.devices.omega0;
    doc["homogeneous"] = s.devices.homogeneous;

    doc["buses"] = json::array();
    for (const auto& b : s.grid.buses) {
        doc["buses"].push_back(
            {{"id", b.id}, {"kind", name_of(b.kind, kBusKinds)}, {"shunt_g", b.shunt_g}, {"shunt_b", b.shunt_b}});
    }
    doc["branches"] = json::array();
    for (const auto& br : s.grid.branches) {
        doc["branches"].push_back({{"from", br.from}, {"to", br.to}, {"r", br.r}, {"x", br.x}});
    }
    const auto& nf = s.devices.nominal_freq;
    const auto& nv = s.devices.nominal_volt;
    doc["nominal"] = {{"frequency", {{"j", nf.j}, {"d", nf.d}, {"k", nf.k}}}, {"voltage", {{"d", nv.d}, {"k", nv.k}}}};

    doc["devices"] = json::array();
    for (const auto& e : s.devices.entries) {
        json d = {{"bus", e.bus}, {"kind", name_of(e.kind, kDeviceKinds)}};
        if (e.kind == DeviceKind::Unified) {
            d["s_theta"] = e.s_theta;
            d["s_v"] = e.s_v;
            if (e.full) {
                const auto& f = *e.full;
                d["full"] = {{"j", f.j},     {"d", f.d},       {"k_p", f.k_p}, {"k_s", f.k_s},
                             {"t_g", f.t_g}, {"k_qv", f.k_qv}, {"t_m", f.t_m}};
            } else {
                const auto& p = e.params;
                d["unified"] = {{"j_ptheta", p.j_ptheta},
                                {"d_ptheta", p.d_ptheta},
                                {"k_ptheta", p.k_ptheta},
                                {"d_qv", p.d_qv},
                                {"k_qv", p.k_qv}};
            }
        }
        doc["devices"].push_back(d);
    }

    json inj = json::array();
    for (const auto& i : s.operating_point.injections) {
        inj.push_back({{"bus", i.bus},
                       {"type", name_of(i.type, kBusTypes)},
                       {"p", i.p},
                       {"q", i.q},
                       {"v", i.v},
                       {"theta", i.theta}});
    }
    doc["operating_point"] = {{"mode", name_of(s.operating_point.mode, kFlowModes)}, {"injections", inj}};

    doc["disturbances"] = json::array();
    for (const auto& d : s.disturbances) {
        doc["disturbances"].push_back({{"bus", d.bus},
                                       {"quantity", name_of(d.quantity, kQuantities)},
                                       {"magnitude", d.magnitude},
                                       {"start_time", d.start_time}});
    }
    doc["simulation"] = {
        {"t_end", s.simulation.t_end}, {"dt", s.simulation.dt}, {"output_dt", s.simulation.output_dt}};

    json analysis;
    analysis["sides"] = json::array();
    if (s.analysis.frequency) analysis["sides"].push_back("frequency");
    if (s.analysis.voltage) analysis["sides"].push_back("voltage");
    analysis["voltage_path"] = name_of(s.analysis.voltage_path, kVoltagePaths);
    if (s.analysis.uniform_damping) analysis["uniform_damping"] = *s.analysis.uniform_damping;
    if (s.analysis.sweep) {
        analysis["sweep"] = {{"parameter", s.analysis.sweep->parameter}, {"values", s.analysis.sweep->values}};
    }
    doc["analysis"] = analysis;
    return doc;
}

Scenario load_scenario(const std::string& source) {
    constexpr std::string_view prefix = "builtin:";
    if (source.rfind(prefix, 0) == 0) return builtin_scenario(source.substr(prefix.size()));
    std::ifstream in(source);
    if (!in) throw Error(ErrorKind::Io, "cannot open scenario file " + source);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Input, source + ": " + e.what());
    }
    return scenario_from_json(doc);
}

}  // namespace modal_strength::app
