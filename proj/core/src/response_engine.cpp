#include "modal_strength/response_engine.hpp"

#include "modal_strength/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <complex>

namespace modal_strength {

namespace {

// e^{sigma t} C(t) and e^{sigma t} S(t), with C/S = cosh/sinh, cos/sin or
// 1/t depending on the sign of b2 = sigma^2 - K/J.
struct Oscillation {
    double c;
    double s;
};

Oscillation oscillation(double sigma, double b2, double t) {
    if (b2 > 0.0) {
        const double beta = std::sqrt(b2);
        if (beta * t < 1.0) {
            const double e = std::exp(sigma * t);
            return {e * std::cosh(beta * t), e * std::sinh(beta * t) / beta};
        }
        const double ep = std::exp((sigma + beta) * t);
        const double em = std::exp((sigma - beta) * t);
        return {0.5 * (ep + em), 0.5 * (ep - em) / beta};
    }
    const double e = std::exp(sigma * t);
    if (b2 < 0.0) {
        const double w = std::sqrt(-b2);
        return {e * std::cos(w * t), e * std::sin(w * t) / w};
    }
    return {e, e * t};
}

void check_grid(const Vector& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i]) || (i > 0 && t[i] < t[i - 1])) {
            throw Error(ErrorKind::Input, "time grid must be finite and non-decreasing");
        }
    }
}

Vector delayed(const Vector& t, double start) { return (t.array() - start).max(0.0).matrix(); }

void zero_before(ModeSeries& m, const Vector& t, double start) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (t[i] < start) {
            m.value[i] = 0.0;
            m.rate[i] = 0.0;
        }
    }
}

void truncate_trace(ResponseTrace& trace) {
    const Matrix& obs = trace.observable();
    Eigen::Index keep = obs.rows();
    for (Eigen::Index r = 0; r < obs.rows(); ++r) {
        if (!obs.row(r).allFinite() || obs.row(r).cwiseAbs().maxCoeff() > kTruncationLimit) {
            keep = r + 1;
            trace.truncated = true;
            break;
        }
    }
    if (!trace.truncated) return;
    const auto cut = [keep](Matrix& m) {
        if (m.rows() > keep) m.conservativeResize(keep, Eigen::NoChange);
    };
    trace.t.conservativeResize(keep);
    cut(trace.primary);
    cut(trace.rate);
    cut(trace.device_power);
    for (auto* group : {&trace.mode_primary, &trace.mode_rate, &trace.mode_power}) {
        for (auto& m : *group) cut(m);
    }
}

struct ResolvedDisturbance {
    Eigen::Index retained = -1;
    double magnitude = 0.0;
    double start_time = 0.0;
};

Quantity quantity_for(Side side) { return side == Side::Frequency ? Quantity::Active : Quantity::Reactive; }

std::vector<ResolvedDisturbance> resolve(const PencilProblem& p, std::span<const Disturbance> disturbances) {
    std::vector<ResolvedDisturbance> out;
    for (const auto& d : disturbances) {
        if (d.start_time < 0.0 || !std::isfinite(d.start_time) || !std::isfinite(d.magnitude)) {
            throw Error(ErrorKind::Input, "disturbance needs a finite magnitude and start_time >= 0");
        }
        if (d.quantity != quantity_for(p.side)) continue;
        const auto r = p.retained_index(d.bus);
        if (r < 0) {
            const bool known = std::find(p.all_buses.begin(), p.all_buses.end(), d.bus) != p.all_buses.end();
            throw Error(ErrorKind::Input, "disturbance at bus " + std::to_string(d.bus) +
                                              (known ? " has no device dynamics on this side (boundary or eliminated)"
                                                     : " is not a device bus"));
        }
        out.push_back({r, d.magnitude, d.start_time});
    }
    return out;
}

double modal_input(const ModalDecomposition& dec, Eigen::Index k, const ResolvedDisturbance& d) {
    return dec.solution.psi(d.retained, k) * d.magnitude;
}

}  // namespace

Vector make_time_grid(double t_end, double output_dt) {
    if (!(t_end >= 0.0) || !(output_dt > 0.0) || !std::isfinite(t_end)) {
        throw Error(ErrorKind::Input, "time grid needs t_end >= 0 and output_dt > 0");
    }
    const auto steps = static_cast<Eigen::Index>(std::llround(std::ceil(t_end / output_dt - 1e-9)));
    Vector t(steps + 1);
    for (Eigen::Index i = 0; i <= steps; ++i) t[i] = std::min(t_end, static_cast<double>(i) * output_dt);
    return t;
}

ModeSeries mode_step_response_first_order(double d, double k, double amplitude, const Vector& t) {
    ModeSeries out{Vector(t.size()), Vector(t.size())};
    if (d == 0.0 && k == 0.0) throw Error(ErrorKind::Degenerate, "first-order mode with D = K = 0");
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (d == 0.0) {
            out.value[i] = amplitude / k;
            out.rate[i] = 0.0;
        } else if (k == 0.0) {
            out.value[i] = amplitude * t[i] / d;
            out.rate[i] = amplitude / d;
        } else {
            const double r = -k / d;
            out.value[i] = -amplitude / k * std::expm1(r * t[i]);
            out.rate[i] = amplitude / d * std::exp(r * t[i]);
        }
    }
    return out;
}

ModeSeries mode_step_response_second_order(double j, double d, double k, double amplitude, double omega0,
                                           const Vector& t) {
    if (j == 0.0) {
        ModeSeries out = mode_step_response_first_order(d, k, omega0 * amplitude, t);
        out.rate /= omega0;
        return out;
    }
    ModeSeries out{Vector(t.size()), Vector(t.size())};
    const double drive = omega0 * amplitude;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double ti = t[i];
        if (k == 0.0 && d == 0.0) {
            out.value[i] = drive * ti * ti / (2.0 * j);
            out.rate[i] = amplitude * ti / j;
        } else if (k == 0.0) {
            const double e = std::expm1(-d * ti / j);
            out.value[i] = drive * (ti / d + j / (d * d) * e);
            out.rate[i] = -amplitude / d * e;
        } else {
            const double sigma = -d / (2.0 * j);
            const double b2 = sigma * sigma - k / j;
            const auto osc = oscillation(sigma, b2, ti);
            out.value[i] = drive / k * (1.0 - (osc.c - sigma * osc.s));
            out.rate[i] = amplitude / j * osc.s;
        }
    }
    return out;
}

ResponseTrace modal_superpose(const ModalDecomposition& dec, std::span<const Disturbance> disturbances,
                              const Vector& t) {
    check_grid(t);
    const auto& p = dec.problem;
    const auto dist = resolve(p, disturbances);
    const auto samples = t.size();
    const auto nb = static_cast<Eigen::Index>(p.all_buses.size());

    ResponseTrace trace;
    trace.side = p.side;
    trace.t = t;
    trace.buses = p.all_buses;
    trace.mode_labels = dec.labels;
    trace.primary = Matrix::Zero(samples, nb);
    trace.rate = Matrix::Zero(samples, nb);

    for (Eigen::Index k = 0; k < dec.mode_count(); ++k) {
        const auto& mp = dec.params[static_cast<std::size_t>(k)];
        ModeSeries q{Vector::Zero(samples), Vector::Zero(samples)};
        for (const auto& d : dist) {
            const double c = modal_input(dec, k, d);
            if (c == 0.0) continue;
            ModeSeries part = mode_step_response_second_order(mp.inertia, mp.damping, mp.spring, c, p.network_gain,
                                                              delayed(t, d.start_time));
            zero_before(part, t, d.start_time);
            q.value += part.value;
            q.rate += part.rate;
        }
        const Vector phi = dec.phi_full(k);
        trace.mode_primary.push_back(q.value * phi.transpose());
        trace.mode_rate.push_back(q.rate * phi.transpose());
        trace.primary += trace.mode_primary.back();
        trace.rate += trace.mode_rate.back();
    }
    modal_power(dec, disturbances, trace);
    truncate_trace(trace);
    return trace;
}

void modal_power(const ModalDecomposition& dec, std::span<const Disturbance> disturbances, ResponseTrace& trace) {
    const auto& p = dec.problem;
    const auto dist = resolve(p, disturbances);
    const auto samples = trace.t.size();
    const auto nb = static_cast<Eigen::Index>(p.all_buses.size());
    if (static_cast<Eigen::Index>(trace.mode_primary.size()) != dec.mode_count()) {
        throw Error(ErrorKind::Input, "modal_power needs a trace produced by modal_superpose");
    }

    trace.mode_power.clear();
    trace.device_power = Matrix::Zero(samples, nb);
    for (Eigen::Index k = 0; k < dec.mode_count(); ++k) {
        const auto ks = static_cast<std::size_t>(k);
        // Modal coordinate: the per-mode primary series divided by phi.
        const Vector phi = dec.phi_full(k);
        Eigen::Index ref = 0;
        phi.cwiseAbs().maxCoeff(&ref);
        const Vector q = trace.mode_primary[ks].col(ref) / phi[ref];

        Vector input = Vector::Zero(samples);
        for (const auto& d : dist) {
            const double c = modal_input(dec, k, d);
            for (Eigen::Index s = 0; s < samples; ++s) {
                if (trace.t[s] >= d.start_time) input[s] += c;
            }
        }
        const double s_m = dec.solution.s_m[k];
        const double l_m = dec.solution.l_m[k];
        const Vector shared = (input - l_m * q) / s_m;

        Matrix power = Matrix::Zero(samples, nb);
        for (Eigen::Index b = 0; b < nb; ++b) {
            const BusId bus = p.all_buses[static_cast<std::size_t>(b)];
            const auto r = p.retained_index(bus);
            if (r >= 0) {
                power.col(b) = -p.s[r] * phi[b] * shared;
            } else if (std::find(p.boundary_buses.begin(), p.boundary_buses.end(), bus) != p.boundary_buses.end()) {
                // An infinite bus delivers whatever the network draws from it.
                power.col(b) = p.l_full.row(b).dot(phi) * q;
            }
        }
        trace.device_power += power;
        trace.mode_power.push_back(std::move(power));
    }
}

bool FinalValues::any_divergent() const { return std::find(divergent.begin(), divergent.end(), true) != divergent.end(); }

FinalValues final_values(const ModalDecomposition& dec, std::span<const Disturbance> disturbances) {
    const auto& p = dec.problem;
    const auto dist = resolve(p, disturbances);
    const auto nb = static_cast<Eigen::Index>(p.all_buses.size());

    double spring_scale = 1.0;
    for (const auto& mp : dec.params) spring_scale = std::max(spring_scale, std::abs(mp.spring));
    const double zero = 1e-12 * spring_scale;

    FinalValues out;
    out.labels = dec.labels;
    out.per_mode = Matrix::Zero(dec.mode_count(), nb);
    out.divergent.assign(static_cast<std::size_t>(dec.mode_count()), false);
    for (Eigen::Index k = 0; k < dec.mode_count(); ++k) {
        const auto& mp = dec.params[static_cast<std::size_t>(k)];
        double c = 0.0;
        for (const auto& d : dist) c += modal_input(dec, k, d);
        const Vector phi = dec.phi_full(k);
        bool divergent = false;
        double value = 0.0;
        if (p.side == Side::Frequency) {
            if (std::abs(mp.spring) <= zero) {
                if (mp.damping > 0.0 && mp.inertia >= 0.0) {
                    value = c / mp.damping;
                } else {
                    divergent = true;
                }
            } else {
                divergent = mp.spring < 0.0 || mp.damping <= 0.0 || mp.inertia < 0.0;
            }
        } else {
            if (mp.spring > zero && mp.damping >= 0.0) {
                value = c / mp.spring;
            } else {
                divergent = true;
            }
        }
        out.divergent[static_cast<std::size_t>(k)] = divergent && c != 0.0;
        if (!divergent) out.per_mode.row(k) = value * phi.transpose();
    }
    out.per_bus = out.per_mode.colwise().sum().transpose();
    return out;
}

ResponseTrace simulate_direct(const ReducedNetwork& network, const DeviceSet& devices, Side side,
                              std::span<const Disturbance> disturbances, const Vector& t,
                              const DirectOptions& options) {
    check_grid(t);
    if (!(options.dt > 0.0)) throw Error(ErrorKind::Input, "integration step must be positive");
    if (t.size() > 0 && t[0] < 0.0) throw Error(ErrorKind::Input, "time grid must start at t >= 0");

    const auto& buses = network.buses;
    const auto n = static_cast<Eigen::Index>(buses.size());
    const Matrix& l = network.blocks.l;
    const double sigma = side == Side::Frequency ? devices.omega0 : 1.0;

    // Per-bus dynamics m v' + c v + (k / sigma) x + gov = u - (L x)_i, x' = sigma v.
    struct Dyn {
        bool boundary = false;
        double m = 0.0, c = 0.0, k = 0.0;
        bool governor = false;
        double kp = 0.0, ks = 0.0, tg = 0.0;
    };
    std::vector<Dyn> dyn(static_cast<std::size_t>(n));
    std::vector<EffectiveVoltageDevice> effective;
    if (side == Side::Voltage) effective = shift_load_spring(devices, buses, network.blocks.q_e);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto is = static_cast<std::size_t>(i);
        const DeviceEntry* e = devices.find(buses[is]);
        if (e == nullptr) throw Error(ErrorKind::Input, "no device at bus " + std::to_string(buses[is]));
        Dyn& dy = dyn[is];
        if (e->kind == DeviceKind::Infinite) {
            dy.boundary = true;
            continue;
        }
        if (side == Side::Frequency) {
            if (e->kind == DeviceKind::Crpl) continue;
            if (e->full && e->full->t_g > 0.0) {
                dy.m = e->full->j;
                dy.c = e->full->d;
                dy.governor = true;
                dy.kp = e->full->k_p;
                dy.ks = e->full->k_s;
                dy.tg = e->full->t_g;
            } else {
                dy.m = e->params.j_ptheta;
                dy.c = e->params.d_ptheta;
                dy.k = e->params.k_ptheta;
            }
        } else {
            dy.c = options.uniform_damping ? *options.uniform_damping : effective[is].d;
            dy.k = effective[is].k;
        }
    }

    Vector u_total = Vector::Zero(n);
    struct Step {
        Eigen::Index bus;
        double magnitude;
        double start;
    };
    std::vector<Step> steps;
    for (const auto& d : disturbances) {
        if (d.start_time < 0.0 || !std::isfinite(d.start_time) || !std::isfinite(d.magnitude)) {
            throw Error(ErrorKind::Input, "disturbance needs a finite magnitude and start_time >= 0");
        }
        if (d.quantity != quantity_for(side)) continue;
        const auto it = std::find(buses.begin(), buses.end(), d.bus);
        if (it == buses.end()) throw Error(ErrorKind::Input, "disturbance at bus " + std::to_string(d.bus) + " is not a device bus");
        const auto i = static_cast<Eigen::Index>(it - buses.begin());
        if (dyn[static_cast<std::size_t>(i)].boundary) {
            throw Error(ErrorKind::Input, "disturbance at infinite bus " + std::to_string(d.bus));
        }
        steps.push_back({i, d.magnitude, d.start_time});
    }

    std::vector<Eigen::Index> xs, rs, gs, zs;  // dynamic, second-order, algebraic, governor buses
    for (Eigen::Index i = 0; i < n; ++i) {
        const Dyn& dy = dyn[static_cast<std::size_t>(i)];
        if (dy.boundary) continue;
        if (dy.m != 0.0 || dy.c != 0.0) {
            xs.push_back(i);
            if (dy.m != 0.0) rs.push_back(i);
            if (dy.governor) zs.push_back(i);
        } else if (dy.governor) {
            throw Error(ErrorKind::Input, "governor at bus " + std::to_string(buses[static_cast<std::size_t>(i)]) +
                                              " needs inertia or damping");
        } else {
            gs.push_back(i);
        }
    }
    const auto nx = static_cast<Eigen::Index>(xs.size());
    const auto nr = static_cast<Eigen::Index>(rs.size());
    const auto nz = static_cast<Eigen::Index>(zs.size());
    const auto ng = static_cast<Eigen::Index>(gs.size());
    const auto ny = nx + nr + nz;

    // Algebraic buses: (k_G / sigma + L_GG) x_G = u_G - L_GX x_X.
    Matrix mg_inv = Matrix::Zero(ng, ng);
    if (ng > 0) {
        Matrix mg = l(gs, gs);
        for (Eigen::Index a = 0; a < ng; ++a) mg(a, a) += dyn[static_cast<std::size_t>(gs[a])].k / sigma;
        Eigen::FullPivLU<Matrix> lu(mg);
        if (!lu.isInvertible()) {
            throw Error(ErrorKind::Reduction, "buses without dynamics form a singular algebraic block");
        }
        mg_inv = lu.inverse();
    }
    const Matrix l_xg = l(xs, gs);
    const Matrix l_gx = l(gs, xs);
    const Matrix l_eff = l(xs, xs) - l_xg * mg_inv * l_gx;

    // Force on dynamic buses: f = fx x + fz z + fu u.
    Matrix fx = -l_eff;
    Matrix fz = Matrix::Zero(nx, nz);
    Matrix fu = Matrix::Zero(nx, n);
    for (Eigen::Index a = 0; a < nx; ++a) {
        const Dyn& dy = dyn[static_cast<std::size_t>(xs[a])];
        fx(a, a) -= dy.k / sigma;
        fu(a, xs[a]) += 1.0;
    }
    if (ng > 0) fu(Eigen::all, gs) -= l_xg * mg_inv;
    for (Eigen::Index g = 0; g < nz; ++g) {
        const auto a = static_cast<Eigen::Index>(std::find(xs.begin(), xs.end(), zs[g]) - xs.begin());
        const Dyn& dy = dyn[static_cast<std::size_t>(zs[g])];
        fx(a, a) -= dy.kp / (dy.tg * sigma);
        fz(a, g) -= (dy.ks - dy.kp / dy.tg) / sigma;
    }

    Matrix a_mat = Matrix::Zero(ny, ny);
    Matrix b_mat = Matrix::Zero(ny, n);
    for (Eigen::Index a = 0; a < nx; ++a) {
        const Dyn& dy = dyn[static_cast<std::size_t>(xs[a])];
        if (dy.m != 0.0) {
            const auto r = static_cast<Eigen::Index>(std::find(rs.begin(), rs.end(), xs[a]) - rs.begin());
            a_mat(a, nx + r) = sigma;
            a_mat.row(nx + r).head(nx) = fx.row(a) / dy.m;
            a_mat.row(nx + r).tail(nz) = fz.row(a) / dy.m;
            a_mat(nx + r, nx + r) = -dy.c / dy.m;
            b_mat.row(nx + r) = fu.row(a) / dy.m;
        } else {
            a_mat.row(a).head(nx) = sigma / dy.c * fx.row(a);
            a_mat.row(a).tail(nz) = sigma / dy.c * fz.row(a);
            b_mat.row(a) = sigma / dy.c * fu.row(a);
        }
    }
    for (Eigen::Index g = 0; g < nz; ++g) {
        const auto a = static_cast<Eigen::Index>(std::find(xs.begin(), xs.end(), zs[g]) - xs.begin());
        const double tg = dyn[static_cast<std::size_t>(zs[g])].tg;
        a_mat(nx + nr + g, a) = 1.0 / tg;
        a_mat(nx + nr + g, nx + nr + g) = -1.0 / tg;
    }

    // Bus deviations: x_all = cx y + du u.
    Matrix cx = Matrix::Zero(n, ny);
    Matrix du = Matrix::Zero(n, n);
    for (Eigen::Index a = 0; a < nx; ++a) cx(xs[a], a) = 1.0;
    if (ng > 0) {
        cx(gs, Eigen::seqN(0, nx)) = -mg_inv * l_gx;
        du(gs, gs) = mg_inv;
    }

    if (ny > 0) {
        Eigen::EigenSolver<Matrix> eig(a_mat, false);
        if (eig.info() != Eigen::Success) throw Error(ErrorKind::Integrator, "state matrix eigenvalues failed");
        for (Eigen::Index i = 0; i < ny; ++i) {
            const std::complex<double> mu = eig.eigenvalues()[i];
            if (mu.real() > 0.0) continue;
            const std::complex<double> z = mu * options.dt;
            const std::complex<double> gain = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
            if (std::abs(gain) > 1.0 + 1e-12) {
                throw Error(ErrorKind::Integrator, "RK4 step " + std::to_string(options.dt) +
                                                       " s is outside the stability region (fastest pole " +
                                                       std::to_string(std::abs(mu)) + " 1/s); use a smaller dt");
            }
        }
    }

    const auto input_at = [&](double time) {
        Vector u = Vector::Zero(n);
        for (const auto& s : steps) {
            if (time >= s.start) u[s.bus] += s.magnitude;
        }
        return u;
    };

    ResponseTrace trace;
    trace.side = side;
    trace.t = t;
    trace.buses = buses;
    trace.primary = Matrix::Zero(t.size(), n);
    trace.rate = Matrix::Zero(t.size(), n);
    trace.device_power = Matrix::Zero(t.size(), n);

    std::vector<double> breaks;
    for (const auto& s : steps) breaks.push_back(s.start);
    std::sort(breaks.begin(), breaks.end());

    Vector y = Vector::Zero(ny);
    double now = 0.0;
    const auto advance = [&](double to) {
        while (now < to) {
            double seg_end = to;
            for (double b : breaks) {
                if (b > now && b < seg_end) seg_end = b;
            }
            const Vector bu = b_mat * input_at(now);
            const double span = seg_end - now;
            const auto count = std::max<long long>(1, std::llround(std::ceil(span / options.dt - 1e-9)));
            const double h = span / static_cast<double>(count);
            for (long long s = 0; s < count; ++s) {
                const Vector k1 = a_mat * y + bu;
                const Vector k2 = a_mat * (y + 0.5 * h * k1) + bu;
                const Vector k3 = a_mat * (y + 0.5 * h * k2) + bu;
                const Vector k4 = a_mat * (y + h * k3) + bu;
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            now = seg_end;
        }
    };

    Eigen::Index recorded = t.size();
    for (Eigen::Index s = 0; s < t.size(); ++s) {
        advance(t[s]);
        const Vector u = input_at(t[s]);
        const Vector x = cx * y + du * u;
        const Vector xdot = cx * (a_mat * y + b_mat * u);
        trace.primary.row(s) = x.transpose();
        trace.rate.row(s) = (xdot / sigma).transpose();
        trace.device_power.row(s) = (l * x - u).transpose();
        const Matrix& obs = trace.observable();
        if (!obs.row(s).allFinite() || obs.row(s).cwiseAbs().maxCoeff() > kTruncationLimit) {
            recorded = s + 1;
            trace.truncated = true;
            break;
        }
    }
    if (trace.truncated) {
        trace.t.conservativeResize(recorded);
        trace.primary.conservativeResize(recorded, Eigen::NoChange);
        trace.rate.conservativeResize(recorded, Eigen::NoChange);
        trace.device_power.conservativeResize(recorded, Eigen::NoChange);
    }
    return trace;
}

double max_trace_gap(const ResponseTrace& a, const ResponseTrace& b) {
    const Matrix& oa = a.observable();
    const Matrix& ob = b.observable();
    if (oa.cols() != ob.cols()) throw Error(ErrorKind::Input, "traces cover different bus sets");
    const auto rows = std::min(oa.rows(), ob.rows());
    if (rows == 0) return 0.0;
    return (oa.topRows(rows) - ob.topRows(rows)).cwiseAbs().maxCoeff();
}

}  // namespace modal_strength
