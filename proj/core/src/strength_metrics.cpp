#include "modal_strength/strength_metrics.hpp"

#include "modal_strength/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numeric>

namespace modal_strength {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double pair_weight(const ModalDecomposition& dec, Eigen::Index mode, BusId observe, BusId disturb) {
    const auto psi = dec.psi_at(mode, disturb);
    if (!psi) {
        throw Error(ErrorKind::Input, "bus " + std::to_string(disturb) + " cannot carry a disturbance on this side");
    }
    return dec.phi_at(mode, observe) * *psi;
}

bool collapses(const ModalDecomposition& dec, const ModeParams& p) {
    const double scale = std::max(1.0, std::abs(p.damping) + std::abs(dec.problem.nominal_spring));
    if (dec.problem.side == Side::Voltage) return p.spring <= 1e-12 * scale;
    // A zero frequency spring is the marginal CM with a finite final value.
    return p.spring < -1e-12 * scale;
}

}  // namespace

ModeParams bus_modal_params(const ModalDecomposition& dec, Eigen::Index mode, BusId observe, BusId disturb) {
    if (mode < 0 || mode >= dec.mode_count()) {
        throw Error(ErrorKind::Input, "mode index out of range");
    }
    const double w = pair_weight(dec, mode, observe, disturb);
    if (std::abs(w) < kObservabilityFloor) {
        throw Error(ErrorKind::Degenerate, dec.labels[static_cast<std::size_t>(mode)] + " is unobservable at bus " +
                                               std::to_string(observe) + " or uncontrollable from bus " +
                                               std::to_string(disturb));
    }
    const auto& p = dec.params[static_cast<std::size_t>(mode)];
    return {p.inertia / w, p.damping / w, p.spring / w};
}

double nodal_inertia(const ModalDecomposition& dec, BusId observe, BusId disturb) {
    double sum = 0.0;
    double magnitude = 0.0;
    for (Eigen::Index k = 0; k < dec.mode_count(); ++k) {
        const double w = pair_weight(dec, k, observe, disturb);
        const double j = dec.params[static_cast<std::size_t>(k)].inertia;
        if (j == 0.0) throw Error(ErrorKind::Input, "nodal inertia needs nonzero modal inertia in every mode");
        sum += w / j;
        magnitude += std::abs(w / j);
    }
    // Modal contributions cancel exactly for i != j; rounding leaves ~eps.
    return std::abs(sum) <= 1e-12 * magnitude ? kInf : 1.0 / sum;
}

std::vector<std::optional<double>> modal_inertia_slots(const ModalDecomposition& dec, BusId bus, std::size_t slots) {
    std::vector<std::optional<double>> out(slots);
    if (slots == 0) return out;
    const auto value = [&](Eigen::Index k) -> std::optional<double> {
        const double w = pair_weight(dec, k, bus, bus);
        if (std::abs(w) < kObservabilityFloor) return kInf;
        return dec.params[static_cast<std::size_t>(k)].inertia / w;
    };
    if (const auto cm = dec.cm_index()) {
        out[0] = value(*cm);
    } else if (dec.problem.has_boundary()) {
        out[0] = kInf;
    }
    for (std::size_t s = 1; s < slots; ++s) {
        const std::string label = "DM" + std::to_string(s);
        for (std::size_t k = 0; k < dec.labels.size(); ++k) {
            if (dec.labels[k] == label) out[s] = value(static_cast<Eigen::Index>(k));
        }
    }
    return out;
}

double cm_voltage_spring_estimate(std::span<const double> k_qv, std::span<const double> load_q) {
    const double springs = std::accumulate(k_qv.begin(), k_qv.end(), 0.0);
    const double loads = std::accumulate(load_q.begin(), load_q.end(), 0.0);
    return springs - 2.0 * loads;
}

double gscr(const Matrix& l22, const Vector& load_q) {
    const auto n = l22.rows();
    if (n == 0 || l22.cols() != n || load_q.size() != n) {
        throw Error(ErrorKind::Input, "gscr: L22 must be square and match the load vector");
    }
    if ((load_q.array() <= 0.0).any()) {
        throw Error(ErrorKind::Input, "gscr: every load must consume positive reactive power");
    }
    Eigen::EigenSolver<Matrix> eig(load_q.cwiseInverse().asDiagonal() * l22, false);
    if (eig.info() != Eigen::Success) throw Error(ErrorKind::Degenerate, "gscr: eigensolver failed");
    const Eigen::VectorXcd values = eig.eigenvalues();
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < n; ++k) {
        if (values[k].real() < values[best].real()) best = k;
    }
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    if (std::abs(values[best].imag()) > 1e-9 * scale) {
        throw Error(ErrorKind::Regime, "gscr: smallest eigenvalue is complex");
    }
    return values[best].real();
}

double gscr(const PencilProblem& problem) {
    if (!problem.static_only || (problem.s.array() >= 0.0).any()) {
        throw Error(ErrorKind::Input, "gscr needs a static voltage pencil made of loads only");
    }
    return gscr(problem.l, Vector(-0.5 * problem.s));
}

BridgeRecord gscr_spring_bridge(const ModalDecomposition& dec, double gscr_value) {
    const auto& p = dec.problem;
    if (p.side != Side::Voltage || !p.static_only || (p.s.array() >= 0.0).any()) {
        throw Error(ErrorKind::Input, "gSCR bridge needs a static voltage pencil made of loads only");
    }
    const auto dm = dec.first_dm_index();
    if (!dm) throw Error(ErrorKind::Input, "gSCR bridge: decomposition has no DM mode");

    const Vector phi = dec.solution.phi.col(*dm);
    const Vector psi = dec.solution.psi.col(*dm);
    const Vector q = -0.5 * p.s;

    BridgeRecord r;
    r.gscr = gscr_value;
    r.k_mv = dec.params[static_cast<std::size_t>(*dm)].spring;
    r.l22_form = psi.dot(p.l * phi);
    r.q_form = psi.dot(q.cwiseProduct(phi));
    r.printed_estimate = (gscr_value - 2.0) * r.l22_form;
    r.exact_estimate = (gscr_value - 2.0) * r.q_form;
    const double denom = std::max(std::abs(r.k_mv), std::abs(r.printed_estimate));
    r.relative_gap = denom == 0.0 ? 0.0 : std::abs(r.k_mv - r.printed_estimate) / denom;

    const double tol = 1e-9 * std::max(1.0, p.s.cwiseAbs().maxCoeff());
    const bool k_zero = std::abs(r.k_mv) <= tol;
    const bool est_zero = std::abs(r.printed_estimate) <= tol;
    r.signs_agree = (k_zero || est_zero) || ((r.k_mv > 0.0) == (r.printed_estimate > 0.0));
    if (!r.signs_agree) {
        throw Error(ErrorKind::BridgeViolation, "first-DM spring " + std::to_string(r.k_mv) +
                                                    " disagrees in sign with (gSCR - 2) psi^T L22 phi = " +
                                                    std::to_string(r.printed_estimate));
    }
    return r;
}

TwoDeviceOracle two_device_oracle(double l11, double l22, double s1, double s2, const FrequencyNominal& freq,
                                  const VoltageNominal& volt, double omega0) {
    if (s1 == 0.0 || s2 == 0.0 || l11 == 0.0 || l22 == 0.0) {
        throw Error(ErrorKind::Input, "two-device oracle: L11, L22, S1 and S2 must be nonzero");
    }
    TwoDeviceOracle o;
    o.s_l = l22 * s1 + l11 * s2;
    o.lambda_dm = o.s_l / (s1 * s2);
    o.phi_cm = {1.0, 1.0};
    o.psi_cm = {l22 / l11, 1.0};
    o.s_m_cm = o.s_l / l11;
    o.l_m_cm = 0.0;
    o.phi_dm = {-l11 * s2 / (l22 * s1), 1.0};
    o.psi_dm = {-s2 / s1, 1.0};
    o.s_m_dm = s2 * o.s_l / (l22 * s1);
    o.l_m_dm = o.s_l * o.s_l / (l22 * s1 * s1);

    const auto freq_params = [&](double s_m, double l_m) {
        return ModeParams{s_m * freq.j, s_m * freq.d, s_m * freq.k + omega0 * l_m};
    };
    const auto volt_params = [&](double s_m, double l_m) {
        return ModeParams{0.0, s_m * volt.d, s_m * volt.k + l_m};
    };
    o.freq_cm = freq_params(o.s_m_cm, o.l_m_cm);
    o.freq_dm = freq_params(o.s_m_dm, o.l_m_dm);
    o.volt_cm = volt_params(o.s_m_cm, o.l_m_cm);
    o.volt_dm = volt_params(o.s_m_dm, o.l_m_dm);
    return o;
}

std::pair<double, double> two_device_bus1_inertia(double j1, double j2, double s1, double s2) {
    if (s2 == 0.0) throw Error(ErrorKind::Input, "two-device inertia: S2 must be nonzero");
    return {j1 + j2, (s1 + s2) * j1 / s2};
}

std::pair<double, double> two_device_voltage_springs(double l, double s1, double s2) {
    if (s1 == 0.0) throw Error(ErrorKind::Input, "two-device springs: S1 must be nonzero");
    const double sum = s1 + s2;
    return {sum, sum * (s1 * s2 + sum * l) / (s1 * s1)};
}

double two_device_dm_threshold(double l, double s1) {
    if (s1 == 0.0) throw Error(ErrorKind::Input, "two-device threshold: S1 must be nonzero");
    return -l / (l / s1 + 1.0);
}

StrengthReport build_strength_report(const ModalDecomposition& dec) {
    const auto& p = dec.problem;
    StrengthReport r;
    r.side = p.side;
    r.static_only = p.static_only;
    r.warnings = p.warnings;

    for (Eigen::Index k = 0; k < dec.mode_count(); ++k) {
        const auto ks = static_cast<std::size_t>(k);
        r.modes.push_back({dec.labels[ks], dec.kinds[ks], dec.solution.eigenvalues[k], dec.params[ks],
                           collapses(dec, dec.params[ks])});
    }

    for (Eigen::Index k = 0; k < dec.mode_count(); ++k) {
        for (BusId i : p.all_buses) {
            for (BusId j : p.buses) {
                const double w = pair_weight(dec, k, i, j);
                if (std::abs(w) < kObservabilityFloor) continue;
                r.bus_specific.push_back({dec.labels[static_cast<std::size_t>(k)], i, j,
                                          bus_modal_params(dec, k, i, j)});
            }
        }
    }

    if (p.side == Side::Frequency && p.nominal_inertia != 0.0) {
        for (BusId i : p.all_buses) {
            for (BusId j : p.buses) r.nodal_inertia.push_back({i, j, nodal_inertia(dec, i, j)});
        }
    }

    if (p.side == Side::Voltage) {
        r.cm_v_spring_estimate = p.s.sum() * p.nominal_spring;
        if (p.static_only && (p.s.array() < 0.0).all()) r.gscr = gscr(p);
    }
    return r;
}

}  // namespace modal_strength
