// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <modal_strength/error.hpp>
#include <modal_strength/modal_decomp.hpp>
#include <modal_strength/response_engine.hpp>
#include <modal_strength/strength_metrics.hpp>
#include <modal_strength_app/pipeline.hpp>
#include <modal_strength_app/property_check.hpp>
#include <modal_strength_app/scenario.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ms = modal_strength;
namespace app = modal_strength::app;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [" << what << "]";
        }
    }
};

double rel_err(double got, double want) {
    if (std::isinf(want) || std::isinf(got)) return got == want ? 0.0 : kInf;
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

double rel_err_floor(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

const app::SideRun& side_of(const app::RunResult& run, ms::Side side) {
    for (const auto& s : run.sides) {
        if (s.side == side) return s;
    }
    throw ms::Error(ms::ErrorKind::Input, "requested side missing from run");
}

app::RunResult run_builtin(const std::string& name, const app::RunOptions& opt, double t_end = -1.0) {
    auto sc = app::builtin_scenario(name);
    if (t_end > 0.0) sc.simulation.t_end = t_end;
    return app::run(sc, opt);
}

bool report(int id, const std::string& title, double budget_s, const std::function<void(Outcome&)>& body) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(out);
    } catch (const std::exception& e) {
        out.pass = false;
        out.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget_s > 0.0 && secs > budget_s) {
        out.pass = false;
        out.detail << " [runtime " << secs << " s over budget " << budget_s << " s]";
    }
    std::printf("%s criterion %d: %s (%.3f s)%s\n", out.pass ? "PASS" : "FAIL", id, title.c_str(), secs,
                out.detail.str().c_str());
    std::fflush(stdout);
    return out.pass;
}

// 1 ---------------------------------------------------------------------------

void two_device_inertia(Outcome& out) {
    struct Row {
        const char* name;
        std::vector<std::optional<double>> slots;
        double nodal;
    };
    const std::vector<Row> rows{{"two-device-case1a", {20.0, 20.0}, 10.0},
                                {"two-device-case1b", {4.0, 4.0}, 2.0},
                                {"two-device-case1c", {kInf, 10.0}, 10.0},
                                {"two-device-case1d", {10.0, std::nullopt}, 10.0}};
    double worst = 0.0;
    for (const auto& row : rows) {
        const auto run = run_builtin(row.name, {});
        const auto& f = side_of(run, ms::Side::Frequency);
        const auto slots = ms::modal_inertia_slots(f.dec, 1, 2);
        for (std::size_t k = 0; k < 2; ++k) {
            if (!row.slots[k]) {
                out.require(!slots[k].has_value(), std::string(row.name) + " slot " + std::to_string(k) + " should be absent");
                continue;
            }
            if (!slots[k]) {
                out.require(false, std::string(row.name) + " slot " + std::to_string(k) + " missing");
                continue;
            }
            const double e = rel_err(*slots[k], *row.slots[k]);
            worst = std::max(worst, std::isinf(*row.slots[k]) ? 0.0 : e);
            out.require(e <= 1e-9, std::string(row.name) + " slot " + std::to_string(k));
        }
        const double e = rel_err(ms::nodal_inertia(f.dec, 1, 1), row.nodal);
        worst = std::max(worst, e);
        out.require(e <= 1e-9, std::string(row.name) + " nodal inertia");
    }
    out.detail << " max rel err " << worst;
}

// 2 ---------------------------------------------------------------------------

/// Rescales a column so its bus-2 entry is 1 (the closed-form convention).
double bus2_scale(const ms::Vector& v) { return 1.0 / v[1]; }

void closed_form(Outcome& out) {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> ldist(0.5, 10.0), sdist(0.1, 10.0);
    const ms::FrequencyNominal freq{10.0, 5.0, 2.0};
    const ms::VoltageNominal volt{3.0, 1.0};
    const double omega0 = 2.0 * M_PI * 50.0;
    double worst = 0.0, worst_spring = 0.0, worst_threshold = 0.0;
    const std::vector<ms::BusId> ids{1, 2};

    const auto problem = [&](double l11, double l22, double s1, double s2, ms::Side side) {
        ms::Matrix l(2, 2);
        l << l11, -l11, -l22, l22;
        auto p = ms::make_pencil_problem(side, ids, l, ms::Vector(ms::Vector::Map(std::vector<double>{s1, s2}.data(), 2)),
                                         {false, false});
        if (side == ms::Side::Frequency) {
            p.nominal_inertia = freq.j;
            p.nominal_damping = freq.d;
            p.nominal_spring = freq.k;
            p.network_gain = omega0;
        } else {
            p.nominal_damping = volt.d;
            p.nominal_spring = volt.k;
        }
        return p;
    };

    for (int trial = 0; trial < 100; ++trial) {
        const double l11 = ldist(rng), l22 = ldist(rng), s1 = sdist(rng), s2 = sdist(rng);
        const auto o = ms::two_device_oracle(l11, l22, s1, s2, freq, volt, omega0);
        for (ms::Side side : {ms::Side::Frequency, ms::Side::Voltage}) {
            const auto dec = ms::decompose(problem(l11, l22, s1, s2, side));
            const auto cm = *dec.cm_index();
            const auto dm = *dec.first_dm_index();
            worst = std::max(worst, rel_err_floor(dec.solution.eigenvalues[dm], o.lambda_dm));
            const struct {
                Eigen::Index k;
                Eigen::Vector2d phi, psi;
                double s_m, l_m;
                ms::ModeParams params;
            } modes[] = {{cm, o.phi_cm, o.psi_cm, o.s_m_cm, o.l_m_cm, side == ms::Side::Frequency ? o.freq_cm : o.volt_cm},
                         {dm, o.phi_dm, o.psi_dm, o.s_m_dm, o.l_m_dm, side == ms::Side::Frequency ? o.freq_dm : o.volt_dm}};
            for (const auto& m : modes) {
                const ms::Vector phi = dec.solution.phi.col(m.k), psi = dec.solution.psi.col(m.k);
                const double a = bus2_scale(phi), b = bus2_scale(psi);
                for (int i = 0; i < 2; ++i) {
                    worst = std::max(worst, rel_err_floor(a * phi[i], m.phi[i]));
                    worst = std::max(worst, rel_err_floor(b * psi[i], m.psi[i]));
                }
                // Denominator coefficients follow the product of the two rescalings.
                const double ab = a * b;
                const auto& p = dec.params[static_cast<std::size_t>(m.k)];
                worst = std::max(worst, rel_err(ab * dec.solution.s_m[m.k], m.s_m));
                worst = std::max(worst, rel_err_floor(ab * dec.solution.l_m[m.k], m.l_m));
                worst = std::max(worst, rel_err_floor(ab * p.inertia, m.params.inertia));
                worst = std::max(worst, rel_err(ab * p.damping, m.params.damping));
                worst = std::max(worst, rel_err(ab * p.spring, m.params.spring));
            }
        }

        // Symmetric line, unit nominal voltage spring: modal springs in closed form.
        const double l = l11;
        auto sym = problem(l, l, s1, s2, ms::Side::Voltage);
        sym.nominal_damping = 0.0;
        sym.nominal_spring = 1.0;
        const auto dec = ms::decompose(sym);
        const auto [k_cm, k_dm] = ms::two_device_voltage_springs(l, s1, s2);
        const auto cm = *dec.cm_index();
        const auto dm = *dec.first_dm_index();
        worst_spring = std::max(worst_spring, rel_err(dec.params[static_cast<std::size_t>(cm)].spring, k_cm));
        const double ab = bus2_scale(dec.solution.phi.col(dm)) * bus2_scale(dec.solution.psi.col(dm));
        // The closed form fixes bus 1 of the differential vectors at -S2/S1 and bus 2 at 1.
        worst_spring = std::max(worst_spring, rel_err(ab * dec.params[static_cast<std::size_t>(dm)].spring, k_dm));

        // Threshold: bisection on the numeric differential spring as S2 goes negative.
        const double th = ms::two_device_dm_threshold(l, s1);
        const auto k_of = [&](double s2_trial) {
            auto p = problem(l, l, s1, s2_trial, ms::Side::Voltage);
            p.nominal_damping = 0.0;
            p.nominal_spring = 1.0;
            const auto d = ms::decompose(p);
            for (Eigen::Index k = 0; k < d.mode_count(); ++k) {
                if (d.kinds[static_cast<std::size_t>(k)] == ms::ModeKind::DM) return d.params[static_cast<std::size_t>(k)].spring;
            }
            throw ms::Error(ms::ErrorKind::Degenerate, "no differential mode");
        };
        double lo = 0.5 * (th - s1), hi = 0.5 * th;
        double f_lo = k_of(lo);
        if ((f_lo > 0.0) == (k_of(hi) > 0.0)) {
            out.require(false, "threshold bracket has no sign change");
            continue;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(th)); ++it) {
            const double mid = 0.5 * (lo + hi);
            const double f_mid = k_of(mid);
            if ((f_mid > 0.0) == (f_lo > 0.0)) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        worst_threshold = std::max(worst_threshold, std::abs(0.5 * (lo + hi) - th));
    }
    out.require(worst <= 1e-9, "eigenvectors/denominators");
    out.require(worst_spring <= 1e-9, "voltage springs");
    out.require(worst_threshold <= 1e-8, "threshold");
    out.detail << " max rel err " << worst << ", springs " << worst_spring << ", threshold abs err " << worst_threshold;
}

// 3 ---------------------------------------------------------------------------

void superposition(Outcome& out) {
    app::RunOptions opt;
    opt.simulate = true;
    const auto run = run_builtin("four-device-case3", opt, 20.0);
    for (const auto& side : run.sides) {
        const char* name = side.side == ms::Side::Frequency ? "frequency" : "voltage";
        if (!side.gap) {
            out.require(false, std::string(name) + " gap missing");
            continue;
        }
        out.require(*side.gap <= 1e-6, std::string(name) + " gap");
        out.require(side.modal && side.direct && side.modal->t[side.modal->t.size() - 1] >= 20.0, "horizon");
        out.detail << ' ' << name << " gap " << *side.gap;
    }
    out.require(run.sides.size() == 2, "both sides simulated");
}

// 4 ---------------------------------------------------------------------------

void final_value(Outcome& out) {
    app::RunOptions opt;
    opt.simulate = true;
    double worst = 0.0;
    for (const char* name : {"two-device-case1a", "two-device-case1b", "two-device-case2a", "two-device-case2b"}) {
        const auto run = run_builtin(name, opt, 200.0);
        for (const auto& side : run.sides) {
            if (!side.finals || !side.direct) {
                out.require(false, std::string(name) + " missing finals or direct trace");
                continue;
            }
            const auto& obs = side.direct->observable();
            const auto last = obs.rows() - 1;
            for (Eigen::Index b = 0; b < obs.cols(); ++b) {
                const double gap = std::abs(obs(last, b) - side.finals->per_bus[b]);
                worst = std::max(worst, gap);
                out.require(gap <= 1e-4, std::string(name) + " bus " + std::to_string(side.direct->buses[static_cast<std::size_t>(b)]));
            }
        }
    }
    const auto run = run_builtin("two-device-case1a", {});
    const auto& f = side_of(run, ms::Side::Frequency);
    const auto cm = *f.dec.cm_index();
    // D_M = 2 D0 = 20 and P0 = -0.2: omega(inf) = P0 / D_M.
    const double expected = -0.2 / 20.0;
    out.require(std::abs(f.finals->per_mode(cm, 0) - expected) <= 1e-12, "case 1-a CM final value");
    out.detail << " max |direct - analytic| " << worst << ", case 1-a CM " << f.finals->per_mode(cm, 0);
}

// 5 ---------------------------------------------------------------------------

void power_bookkeeping(Outcome& out) {
    app::RunOptions opt;
    opt.simulate = true;
    opt.voltage = false;
    double worst_dm = 0.0, worst_cm = 0.0, worst_balance = 0.0;
    std::vector<std::string> without_cm;
    for (const auto& name : app::builtin_names()) {
        const auto sc = app::builtin_scenario(name);
        if (!sc.analysis.frequency) continue;
        const auto run = app::run(sc, opt);
        const auto& f = side_of(run, ms::Side::Frequency);
        if (!f.modal) continue;
        const auto& tr = *f.modal;
        double applied_total = 0.0;
        for (const auto& d : f.disturbances) applied_total += d.magnitude;
        const double start = f.disturbances.front().start_time;

        const auto cm_index = f.dec.cm_index();
        if (!cm_index) {
            // No common mode (infinite bus): the identity is a projection on psi_CM and does not
            // apply. All modes together still deliver the disturbance, the infinite bus included.
            without_cm.push_back(name);
            ms::Matrix total = ms::Matrix::Zero(tr.t.size(), 1);
            for (const auto& m : tr.mode_power) total += m.rowwise().sum();
            for (Eigen::Index s = 0; s < tr.t.size(); ++s) {
                const double expected = tr.t[s] < start ? 0.0 : -applied_total;
                worst_balance = std::max(worst_balance, std::abs(total(s, 0) - expected));
            }
            continue;
        }
        const auto cm = static_cast<std::size_t>(*cm_index);
        // Lossless flat-start cases: psi_CM is the all-ones vector, so the projection is a plain sum.
        const ms::Vector psi_cm = f.dec.solution.psi.col(*cm_index);
        out.require((psi_cm.array() - psi_cm[0]).abs().maxCoeff() <= 1e-12 * std::abs(psi_cm[0]), name + " uniform psi_CM");
        for (std::size_t k = 0; k < tr.mode_labels.size(); ++k) {
            if (k == cm) continue;
            const double s = tr.mode_power[k].rowwise().sum().cwiseAbs().maxCoeff();
            worst_dm = std::max(worst_dm, s);
            out.require(s <= 1e-9, name + " " + tr.mode_labels[k] + " power sum");
        }
        const bool symmetric = name == "two-device-case1a" || name == "two-device-case1b";
        if (symmetric) {
            for (Eigen::Index s = 0; s < tr.t.size(); ++s) {
                if (tr.t[s] < start) continue;
                const double total = tr.mode_power[cm].row(s).sum();
                worst_cm = std::max(worst_cm, std::abs(std::abs(total) - std::abs(applied_total)));
            }
        }
    }
    out.require(worst_cm <= 1e-9, "CM shares");
    out.require(worst_balance <= 1e-9, "total balance without CM");
    out.detail << " max |sum DM power| " << worst_dm << ", max CM share error " << worst_cm;
    for (const auto& n : without_cm) out.detail << "; " << n << " has no CM, total balance error " << worst_balance;
}

// 6 ---------------------------------------------------------------------------

template <class F>
double bisect(double lo, double hi, F f) {
    double f_lo = f(lo);
    if ((f_lo > 0.0) == (f(hi) > 0.0)) throw ms::Error(ms::ErrorKind::Input, "bisection bracket has no sign change");
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = f(mid);
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

void gscr_bridge(Outcome& out) {
    auto base = app::builtin_scenario("gscr-bridge");
    base.analysis.voltage_path = ms::VoltagePath::Static;
    const std::string param = base.analysis.sweep->parameter;
    const auto decompose_at = [&](double q) {
        const auto sc = app::with_parameter(base, param, q);
        return ms::decompose(app::build_problem(sc, app::prepare(sc), ms::Side::Voltage));
    };
    const auto gscr_minus_two = [&](double q) { return ms::gscr(decompose_at(q).problem) - 2.0; };
    const auto dm_spring = [&](double q) {
        const auto dec = decompose_at(q);
        return dec.params[static_cast<std::size_t>(*dec.first_dm_index())].spring;
    };
    const double lo = base.analysis.sweep->values.front(), hi = base.analysis.sweep->values.back();
    const double q_gscr = bisect(lo, hi, gscr_minus_two);
    const double q_spring = bisect(lo, hi, dm_spring);
    out.require(std::abs(q_gscr - q_spring) <= 1e-6, "crossings coincide");

    // The sweep must report the same crossing and the bridge must hold along it.
    const auto sweep = app::run_sweep(base);
    const auto c = sweep.first_crossing("DM1");
    out.require(c.has_value(), "sweep reports DM1 crossing");
    for (double q : {lo, 0.5 * (lo + q_spring), 0.5 * (q_spring + hi)}) {
        const auto dec = decompose_at(q);
        const auto r = ms::gscr_spring_bridge(dec, ms::gscr(dec.problem));
        out.require(r.signs_agree, "sign agreement");
    }
    out.detail << " gSCR = 2 at " << q_gscr << ", K_DM1 = 0 at " << q_spring << ", |diff| " << std::abs(q_gscr - q_spring);
    if (c) out.detail << ", sweep interpolation " << c->value;
}

// 7 ---------------------------------------------------------------------------

struct CollapseShape {
    bool truncated = false;
    bool same_sign = true;
    double uniformity = 0.0;  // min |dv| / max |dv| over buses at the last sample
};

CollapseShape collapse_shape(const app::Scenario& base, const std::string& parameter, double value) {
    const auto sc = app::with_parameter(base, parameter, value);
    app::RunOptions opt;
    opt.simulate = true;
    opt.frequency = false;
    const auto run = app::run(sc, opt);
    const auto& direct = *side_of(run, ms::Side::Voltage).direct;
    const auto last = direct.primary.row(direct.primary.rows() - 1);
    CollapseShape shape;
    shape.truncated = direct.truncated;
    shape.same_sign = (last.array() > 0.0).all() || (last.array() < 0.0).all();
    shape.uniformity = last.cwiseAbs().minCoeff() / last.cwiseAbs().maxCoeff();
    return shape;
}

void collapse_modes(Outcome& out) {
    constexpr double kNearIdentical = 0.9;

    const auto dm_case = app::builtin_scenario("four-device-case4a");
    const auto dm_sweep = app::run_sweep(dm_case);
    const auto dm_cross = dm_sweep.first_crossing("DM1");
    out.require(dm_cross.has_value(), "case 4-a sweep reports DM1 crossing");
    if (dm_cross) {
        const auto cm = dm_sweep.first_crossing("CM");
        out.require(!cm || (cm->value - dm_cross->value) * (dm_sweep.points.back().value - dm_sweep.points.front().value) > 0.0,
                    "case 4-a CM still stable at DM1 crossing");
        out.detail << " 4-a DM1 crosses at " << dm_cross->value;
        if (cm) out.detail << " (CM at " << cm->value << ")";
    }

    const auto cm_case = app::builtin_scenario("four-device-case4b");
    const auto cm_sweep = app::run_sweep(cm_case);
    const auto cm_cross = cm_sweep.first_crossing("CM");
    out.require(cm_cross.has_value(), "case 4-b sweep reports CM crossing");
    if (cm_cross) out.detail << ", 4-b CM crosses at " << cm_cross->value;

    const auto dm = collapse_shape(dm_case, dm_case.analysis.sweep->parameter, 1.9);
    out.require(dm.truncated, "case 4-a diverges past DM1 threshold");
    out.require(!dm.same_sign || dm.uniformity < kNearIdentical, "case 4-a deviations unequal");
    out.detail << ", 4-a min/max |dv| " << dm.uniformity << (dm.same_sign ? " same sign" : " mixed sign");

    const auto cm = collapse_shape(cm_case, cm_case.analysis.sweep->parameter, 0.7);
    out.require(cm.truncated, "case 4-b diverges past CM threshold");
    out.require(cm.same_sign && cm.uniformity >= kNearIdentical, "case 4-b deviations near-identical (min/max >= 0.9)");
    out.detail << ", 4-b min/max |dv| " << cm.uniformity << (cm.same_sign ? " same sign" : " mixed sign");
}

// 8 ---------------------------------------------------------------------------

void structural(Outcome& out) {
    double worst_row = 0, worst_bi = 0, worst_nodal = 0, worst_res = 0;
    int bad_zero = 0;
    for (int i = 0; i < 50; ++i) {
        const auto seed = static_cast<std::uint64_t>(9001 + i);
        const int n = 2 + i % 19;
        const auto sys = app::random_lossless_system(seed, n);
        const auto r = app::check_invariants(sys.problem);
        worst_row = std::max(worst_row, r.row_sum);
        worst_bi = std::max(worst_bi, r.biorthogonality);
        worst_nodal = std::max(worst_nodal, r.nodal_inertia);
        worst_res = std::max(worst_res, r.resolvent);
        bad_zero += (r.zero_modes != 1 || r.cm_modes != 1 || r.cm_shape > 1e-9) ? 1 : 0;
    }
    out.require(worst_row <= 1e-9, "L 1 = 0");
    out.require(bad_zero == 0, "single zero mode with unit shape");
    out.require(worst_bi <= 1e-8, "biorthogonality");
    out.require(worst_nodal <= 1e-9, "nodal inertia identity");
    out.require(worst_res <= 1e-8, "resolvent reconstruction");
    out.detail << " max |L1| " << worst_row << ", biorth " << worst_bi << ", nodal " << worst_nodal << ", resolvent "
               << worst_res << ", zero-mode violations " << bad_zero;
}

}  // namespace

int main() {
    bool ok = true;
    ok &= report(1, "two-device modal and nodal inertia", 1.0, two_device_inertia);
    ok &= report(2, "two-device closed-form equivalence", 5.0, closed_form);
    ok &= report(3, "modal superposition equals direct simulation (case 3)", 10.0, superposition);
    ok &= report(4, "final-value theorem (cases 1-a, 1-b, 2-a, 2-b)", 0.0, final_value);
    ok &= report(5, "modal power bookkeeping", 0.0, power_bookkeeping);
    ok &= report(6, "gSCR bridge", 5.0, gscr_bridge);
    ok &= report(7, "collapse mode discrimination (cases 4-a, 4-b)", 10.0, collapse_modes);
    ok &= report(8, "structural invariants on random networks", 0.0, structural);
    return ok ? 0 : 1;
}
