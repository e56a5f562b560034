#include "modal_strength_app/output.hpp"

#include <modal_strength/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace modal_strength::app {

using nlohmann::json;

namespace {

const char* side_name(Side side) { return side == Side::Frequency ? "frequency" : "voltage"; }

std::string bus_col(const std::string& prefix, BusId bus) { return prefix + "_b" + std::to_string(bus); }

void put_number(json& obj, const std::string& key, double value) {
    if (std::isinf(value)) {
        obj[key] = nullptr;
        obj[key + "_infinite"] = true;
    } else {
        obj[key] = value;
    }
}

struct Row {
    std::string side, record, mode, observe, disturb, field, value;
};

void emit(std::ostream& out, const Row& r) {
    out << r.side << ',' << r.record << ',' << r.mode << ',' << r.observe << ',' << r.disturb << ',' << r.field
        << ',' << r.value << '\n';
}

std::vector<std::optional<double>> slots_for(const ModalDecomposition& dec, BusId bus) {
    std::size_t dms = 0;
    for (auto k : dec.kinds) dms += k == ModeKind::DM ? 1 : 0;
    return modal_inertia_slots(dec, bus, dms + 1);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const ResponseTrace& trace) {
    const bool freq = trace.side == Side::Frequency;
    const std::string primary = freq ? "theta" : "v";
    const std::string rate = freq ? "omega" : "dvdt";
    const std::string power = freq ? "p" : "virtual_q";
    const std::string observable = freq ? rate : primary;

    out << "t";
    for (BusId b : trace.buses) out << ',' << bus_col(primary, b) << ',' << bus_col(rate, b);
    for (const auto& label : trace.mode_labels) {
        for (BusId b : trace.buses) out << ',' << bus_col(observable + "_" + label, b);
    }
    for (BusId b : trace.buses) out << ',' << bus_col(power, b);
    for (const auto& label : trace.mode_labels) {
        for (BusId b : trace.buses) out << ',' << bus_col(power + "_" + label, b);
    }
    out << '\n';

    const auto& mode_obs = freq ? trace.mode_rate : trace.mode_primary;
    for (Eigen::Index s = 0; s < trace.t.size(); ++s) {
        out << format_number(trace.t[s]);
        for (Eigen::Index b = 0; b < trace.primary.cols(); ++b) {
            out << ',' << format_number(trace.primary(s, b)) << ',' << format_number(trace.rate(s, b));
        }
        for (const auto& m : mode_obs) {
            for (Eigen::Index b = 0; b < m.cols(); ++b) out << ',' << format_number(m(s, b));
        }
        for (Eigen::Index b = 0; b < trace.device_power.cols(); ++b) out << ',' << format_number(trace.device_power(s, b));
        for (const auto& m : trace.mode_power) {
            for (Eigen::Index b = 0; b < m.cols(); ++b) out << ',' << format_number(m(s, b));
        }
        out << '\n';
    }
}

void write_report_csv(std::ostream& out, const RunResult& run) {
    out << "side,record,mode,observe,disturb,field,value\n";
    for (const auto& sr : run.sides) {
        const std::string side = side_name(sr.side);
        const auto& dec = sr.dec;
        for (std::size_t k = 0; k < sr.report.modes.size(); ++k) {
            const auto& m = sr.report.modes[k];
            const auto ki = static_cast<Eigen::Index>(k);
            emit(out, {side, "mode", m.label, "", "", "lambda", format_number(m.lambda)});
            if (sr.side == Side::Frequency) emit(out, {side, "mode", m.label, "", "", "inertia", format_number(m.params.inertia)});
            emit(out, {side, "mode", m.label, "", "", "damping", format_number(m.params.damping)});
            emit(out, {side, "mode", m.label, "", "", "spring", format_number(m.params.spring)});
            emit(out, {side, "mode", m.label, "", "", "s_m", format_number(dec.solution.s_m[ki])});
            emit(out, {side, "mode", m.label, "", "", "l_m", format_number(dec.solution.l_m[ki])});
            emit(out, {side, "mode", m.label, "", "", "collapse", m.collapse ? "1" : "0"});
        }
        for (const auto& e : sr.report.bus_specific) {
            const auto o = std::to_string(e.observe);
            const auto d = std::to_string(e.disturb);
            if (sr.side == Side::Frequency) emit(out, {side, "bus_specific", e.mode, o, d, "inertia", format_number(e.params.inertia)});
            emit(out, {side, "bus_specific", e.mode, o, d, "damping", format_number(e.params.damping)});
            emit(out, {side, "bus_specific", e.mode, o, d, "spring", format_number(e.params.spring)});
        }
        for (const auto& e : sr.report.nodal_inertia) {
            emit(out, {side, "nodal_inertia", "", std::to_string(e.observe), std::to_string(e.disturb), "inertia",
                       format_number(e.value)});
        }
        if (sr.side == Side::Frequency && dec.problem.nominal_inertia != 0.0) {
            for (BusId bus : dec.problem.buses) {
                const auto slots = slots_for(dec, bus);
                for (std::size_t s = 0; s < slots.size(); ++s) {
                    if (!slots[s]) continue;
                    const std::string label = s == 0 ? "CM" : "DM" + std::to_string(s);
                    emit(out, {side, "inertia_slot", label, std::to_string(bus), std::to_string(bus), "inertia",
                               format_number(*slots[s])});
                }
            }
        }
        if (sr.side == Side::Voltage) {
            emit(out, {side, "summary", "", "", "", "static_only", sr.report.static_only ? "1" : "0"});
            emit(out, {side, "summary", "", "", "", "cm_v_spring_estimate", format_number(sr.report.cm_v_spring_estimate)});
            if (sr.report.gscr) emit(out, {side, "summary", "", "", "", "gscr", format_number(*sr.report.gscr)});
        }
        if (sr.finals) {
            const auto& f = *sr.finals;
            for (Eigen::Index k = 0; k < f.per_mode.rows(); ++k) {
                const auto& label = f.labels[static_cast<std::size_t>(k)];
                if (f.divergent[static_cast<std::size_t>(k)]) {
                    emit(out, {side, "final_value", label, "", "", "divergent", "1"});
                    continue;
                }
                for (std::size_t b = 0; b < dec.problem.all_buses.size(); ++b) {
                    emit(out, {side, "final_value", label, std::to_string(dec.problem.all_buses[b]), "", "value",
                               format_number(f.per_mode(k, static_cast<Eigen::Index>(b)))});
                }
            }
            for (std::size_t b = 0; b < dec.problem.all_buses.size(); ++b) {
                emit(out, {side, "final_value", "total", std::to_string(dec.problem.all_buses[b]), "", "value",
                           format_number(f.per_bus[static_cast<Eigen::Index>(b)])});
            }
        }
        if (sr.gap) emit(out, {side, "simulation", "", "", "", "max_gap", format_number(*sr.gap)});
        if (sr.modal) emit(out, {side, "simulation", "", "", "", "modal_truncated", sr.modal->truncated ? "1" : "0"});
        if (sr.direct) emit(out, {side, "simulation", "", "", "", "direct_truncated", sr.direct->truncated ? "1" : "0"});
    }
    if (run.sweep) {
        for (const auto& c : run.sweep->crossings) {
            emit(out, {"voltage", "crossing", c.mode, "", "", c.direction < 0 ? "falling" : "rising",
                       format_number(c.value)});
        }
    }
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
    std::vector<std::string> labels;
    for (const auto& p : sweep.points) {
        for (const auto& l : p.labels) {
            if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
        }
    }
    std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
        if ((a == "CM") != (b == "CM")) return a == "CM";
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    out << "value";
    for (const auto& l : labels) out << ",spring_" << l << ",lambda_" << l;
    out << ",error\n";
    for (const auto& p : sweep.points) {
        out << format_number(p.value);
        for (const auto& l : labels) {
            const auto it = std::find(p.labels.begin(), p.labels.end(), l);
            if (it == p.labels.end()) {
                out << ",,";
            } else {
                const auto k = static_cast<std::size_t>(it - p.labels.begin());
                out << ',' << format_number(p.springs[k]) << ',' << format_number(p.lambdas[k]);
            }
        }
        std::string err = p.error;
        std::replace(err.begin(), err.end(), ',', ';');
        out << ',' << err << '\n';
    }
}

json report_json(const RunResult& run) {
    json doc;
    doc["scenario"] = run.scenario.name;
    doc["notes"] = run.scenario.notes;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(scenario_to_json(run.scenario).dump())));
    doc["provenance"] = {{"scenario_hash", hash}, {"tool_version", MODAL_STRENGTH_TOOL_VERSION}};
    doc["warnings"] = json::array();
    for (const auto& w : run.warnings) doc["warnings"].push_back({{"code", w.code}, {"message", w.message}});
    doc["sides"] = json::array();
    for (const auto& sr : run.sides) {
        const auto& dec = sr.dec;
        json side;
        side["side"] = side_name(sr.side);
        side["static_only"] = sr.report.static_only;
        side["buses"] = dec.problem.all_buses;
        side["boundary_buses"] = dec.problem.boundary_buses;
        side["eliminated_buses"] = dec.problem.eliminated_buses;
        side["modes"] = json::array();
        for (std::size_t k = 0; k < sr.report.modes.size(); ++k) {
            const auto& m = sr.report.modes[k];
            const auto ki = static_cast<Eigen::Index>(k);
            json mj = {{"label", m.label},
                       {"kind", m.kind == ModeKind::CM ? "CM" : "DM"},
                       {"lambda", m.lambda},
                       {"damping", m.params.damping},
                       {"spring", m.params.spring},
                       {"s_m", dec.solution.s_m[ki]},
                       {"l_m", dec.solution.l_m[ki]},
                       {"collapse", m.collapse}};
            if (sr.side == Side::Frequency) mj["inertia"] = m.params.inertia;
            const Vector phi = dec.phi_full(ki);
            mj["phi"] = std::vector<double>(phi.data(), phi.data() + phi.size());
            const Vector psi = dec.solution.psi.col(ki);
            mj["psi"] = std::vector<double>(psi.data(), psi.data() + psi.size());
            side["modes"].push_back(mj);
        }
        side["bus_specific"] = json::array();
        for (const auto& e : sr.report.bus_specific) {
            json ej = {{"mode", e.mode}, {"observe", e.observe}, {"disturb", e.disturb}};
            if (sr.side == Side::Frequency) put_number(ej, "inertia", e.params.inertia);
            put_number(ej, "damping", e.params.damping);
            put_number(ej, "spring", e.params.spring);
            side["bus_specific"].push_back(ej);
        }
        if (sr.side == Side::Frequency) {
            side["nodal_inertia"] = json::array();
            for (const auto& e : sr.report.nodal_inertia) {
                json ej = {{"observe", e.observe}, {"disturb", e.disturb}};
                put_number(ej, "value", e.value);
                side["nodal_inertia"].push_back(ej);
            }
            if (dec.problem.nominal_inertia != 0.0) {
                side["inertia_slots"] = json::array();
                for (BusId bus : dec.problem.buses) {
                    json bj = {{"bus", bus}, {"slots", json::array()}};
                    const auto slots = slots_for(dec, bus);
                    for (std::size_t s = 0; s < slots.size(); ++s) {
                        json sj = {{"mode", s == 0 ? std::string("CM") : "DM" + std::to_string(s)}};
                        if (slots[s]) {
                            put_number(sj, "value", *slots[s]);
                        } else {
                            sj["value"] = nullptr;
                            sj["absent"] = true;
                        }
                        bj["slots"].push_back(sj);
                    }
                    side["inertia_slots"].push_back(bj);
                }
            }
        } else {
            side["cm_v_spring_estimate"] = sr.report.cm_v_spring_estimate;
            if (sr.report.gscr) side["gscr"] = *sr.report.gscr;
        }
        if (sr.finals) {
            json fj;
            const auto& f = *sr.finals;
            fj["per_bus"] = std::vector<double>(f.per_bus.data(), f.per_bus.data() + f.per_bus.size());
            fj["divergent_modes"] = json::array();
            for (std::size_t k = 0; k < f.labels.size(); ++k) {
                if (f.divergent[k]) fj["divergent_modes"].push_back(f.labels[k]);
            }
            side["final_values"] = fj;
        }
        if (sr.modal || sr.direct) {
            json sj;
            if (sr.gap) sj["max_gap"] = *sr.gap;
            if (sr.modal) sj["modal_truncated"] = sr.modal->truncated;
            if (sr.direct) sj["direct_truncated"] = sr.direct->truncated;
            side["simulation"] = sj;
        }
        doc["sides"].push_back(side);
    }
    if (run.sweep) {
        json sw;
        sw["parameter"] = run.scenario.analysis.sweep ? run.scenario.analysis.sweep->parameter : "";
        sw["crossings"] = json::array();
        for (const auto& c : run.sweep->crossings) {
            sw["crossings"].push_back({{"mode", c.mode}, {"value", c.value}, {"direction", c.direction}});
        }
        std::size_t failed = 0;
        for (const auto& p : run.sweep->points) failed += p.error.empty() ? 0 : 1;
        sw["points"] = run.sweep->points.size();
        sw["failed_points"] = failed;
        doc["sweep"] = sw;
    }
    return doc;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
constexpr double kWidth = 720, kHeight = 360, kLeft = 70, kRight = 20, kTop = 36, kBottom = 40;

struct Frame {
    double x0, x1, y0, y1;
    [[nodiscard]] double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    [[nodiscard]] double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

Frame frame_for(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) {
        const double pad = std::max(1e-12, std::abs(y0) * 0.1);
        y0 -= pad;
        y1 += pad;
    }
    const double pad = 0.05 * (y1 - y0);
    return {x0, x1, y0 - pad, y1 + pad};
}

void open_svg(std::ostringstream& s, const std::string& title, const Frame& f, const std::string& xlabel) {
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << kLeft << "\" y=\"20\" font-size=\"13\">" << title << "</text>\n";
    s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
      << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"#444\"/>\n";
    const double ys[] = {f.y0, 0.5 * (f.y0 + f.y1), f.y1};
    for (double y : ys) {
        s << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">" << format_number(y)
          << "</text>\n";
    }
    if (f.y0 < 0.0 && f.y1 > 0.0) {
        s << "<line x1=\"" << kLeft << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << f.py(0) << "\" y2=\"" << f.py(0)
          << "\" stroke=\"#bbb\" stroke-dasharray=\"2,3\"/>\n";
    }
    s << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 12 << "\">" << format_number(f.x0) << "</text>\n";
    s << "<text x=\"" << kWidth - kRight << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"end\">" << format_number(f.x1)
      << "</text>\n";
    s << "<text x=\"" << 0.5 * (kLeft + kWidth - kRight) << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
      << xlabel << "</text>\n";
}

void polyline(std::ostringstream& s, const Frame& f, const Vector& x, const Eigen::Ref<const Vector>& y,
              const char* colour, bool dashed) {
    s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.3\""
      << (dashed ? " stroke-dasharray=\"5,4\"" : "") << " points=\"";
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(y[i])) continue;
        s << format_number(std::round(f.px(x[i]) * 10) / 10) << ',' << format_number(std::round(f.py(y[i]) * 10) / 10)
          << ' ';
    }
    s << "\"/>\n";
}

void legend(std::ostringstream& s, std::size_t i, const std::string& text) {
    const double y = kTop + 14 + 14 * static_cast<double>(i);
    s << "<line x1=\"" << kWidth - kRight - 110 << "\" x2=\"" << kWidth - kRight - 90 << "\" y1=\"" << y - 4
      << "\" y2=\"" << y - 4 << "\" stroke=\"" << kPalette[i % 8] << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << kWidth - kRight - 86 << "\" y=\"" << y << "\">" << text << "</text>\n";
}

}  // namespace

std::string svg_traces(const std::string& title, const ResponseTrace& solid, const ResponseTrace* dashed) {
    const Matrix& obs = solid.observable();
    double y0 = obs.size() ? obs.minCoeff() : 0.0;
    double y1 = obs.size() ? obs.maxCoeff() : 0.0;
    if (dashed && dashed->observable().size()) {
        y0 = std::min(y0, dashed->observable().minCoeff());
        y1 = std::max(y1, dashed->observable().maxCoeff());
    }
    const double t1 = solid.t.size() ? solid.t[solid.t.size() - 1] : 1.0;
    const Frame f = frame_for(solid.t.size() ? solid.t[0] : 0.0, t1, y0, y1);
    std::ostringstream s;
    open_svg(s, title, f, "t (s)");
    const std::string name = solid.side == Side::Frequency ? "omega" : "dV/V";
    for (std::size_t b = 0; b < solid.buses.size(); ++b) {
        polyline(s, f, solid.t, obs.col(static_cast<Eigen::Index>(b)), kPalette[b % 8], false);
        if (dashed) polyline(s, f, dashed->t, dashed->observable().col(static_cast<Eigen::Index>(b)), "#000", true);
        legend(s, b, name + " bus " + std::to_string(solid.buses[b]));
    }
    s << "</svg>\n";
    return s.str();
}

std::string svg_sweep(const std::string& title, const std::string& parameter, const SweepResult& sweep) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series;
    std::vector<std::string> order;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 0;
    bool first = true;
    for (const auto& p : sweep.points) {
        for (std::size_t k = 0; k < p.labels.size(); ++k) {
            if (!series.count(p.labels[k])) order.push_back(p.labels[k]);
            auto& [xs, ys] = series[p.labels[k]];
            xs.push_back(p.value);
            ys.push_back(p.springs[k]);
            if (first) {
                x0 = x1 = p.value;
                y0 = y1 = p.springs[k];
                first = false;
            }
            x0 = std::min(x0, p.value);
            x1 = std::max(x1, p.value);
            y0 = std::min(y0, p.springs[k]);
            y1 = std::max(y1, p.springs[k]);
        }
    }
    const Frame f = frame_for(x0, x1, std::min(y0, 0.0), std::max(y1, 0.0));
    std::ostringstream s;
    open_svg(s, title, f, parameter);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& [xs, ys] = series[order[i]];
        polyline(s, f, Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                 Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size())), kPalette[i % 8], false);
        legend(s, i, "K " + order[i]);
    }
    s << "</svg>\n";
    return s.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

OutputFormats parse_formats(const std::string& list) {
    OutputFormats f{false, false, false};
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "csv") {
            f.csv = true;
        } else if (item == "json") {
            f.json = true;
        } else if (item == "svg") {
            f.svg = true;
        } else if (!item.empty()) {
            throw Error(ErrorKind::Input, "unknown output format '" + item + "' (csv, json, svg)");
        }
    }
    return f;
}

std::vector<std::string> emit_outputs(const RunResult& run, const std::filesystem::path& dir,
                                      const OutputFormats& formats) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());

    std::vector<std::pair<std::string, std::string>> files;
    const auto add = [&files](std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); };

    if (formats.csv) {
        std::ostringstream r;
        write_report_csv(r, run);
        add("report.csv", r.str());
        for (const auto& sr : run.sides) {
            const std::string side = sr.side == Side::Frequency ? "freq" : "volt";
            if (sr.modal) {
                std::ostringstream t;
                write_trace_csv(t, *sr.modal);
                add("trace_" + side + "_modal.csv", t.str());
            }
            if (sr.direct) {
                std::ostringstream t;
                write_trace_csv(t, *sr.direct);
                add("trace_" + side + "_direct.csv", t.str());
            }
        }
        if (run.sweep) {
            std::ostringstream w;
            write_sweep_csv(w, *run.sweep);
            add("sweep.csv", w.str());
        }
    }
    if (formats.json) add("report.json", report_json(run).dump(2) + "\n");
    if (formats.svg) {
        for (const auto& sr : run.sides) {
            const std::string side = sr.side == Side::Frequency ? "freq" : "volt";
            const ResponseTrace* solid = sr.modal ? &*sr.modal : (sr.direct ? &*sr.direct : nullptr);
            if (solid == nullptr) continue;
            const ResponseTrace* dashed = sr.modal && sr.direct ? &*sr.direct : nullptr;
            add("panel_" + side + ".svg",
                svg_traces(run.scenario.name + " " + side + (dashed ? " (solid modal, dashed direct)" : ""), *solid,
                           dashed));
        }
        if (run.sweep && run.scenario.analysis.sweep) {
            add("panel_sweep.svg", svg_sweep(run.scenario.name + " modal springs", run.scenario.analysis.sweep->parameter,
                                             *run.sweep));
        }
    }

    std::vector<std::string> names;
    std::ostringstream manifest;
    for (const auto& [name, content] : files) {
        write_file(dir / name, content);
        names.push_back(name);
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(content)));
        manifest << hex << "  " << content.size() << "  " << name << '\n';
    }
    write_file(dir / "manifest.txt", manifest.str());
    names.push_back("manifest.txt");
    return names;
}

}  // namespace modal_strength::app
