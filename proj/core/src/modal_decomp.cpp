#include "modal_strength/modal_decomp.hpp"

#include "modal_strength/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace modal_strength {

namespace {

constexpr double kTieTolerance = 1e-9;

Eigen::Index largest_entry(const Eigen::Ref<const Vector>& v) {
    const double peak = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= peak * (1.0 - kTieTolerance)) return i;
    }
    return 0;
}

bool is_symmetric(const Matrix& l) {
    const double scale = std::max(1.0, l.cwiseAbs().maxCoeff());
    return (l - l.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

void finish(PencilSolution& sol, const Matrix& l, const Vector& s) {
    const auto n = sol.eigenvalues.size();
    const double scale = std::max(1.0, sol.eigenvalues.cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double la = sol.eigenvalues[a];
        const double lb = sol.eigenvalues[b];
        if (std::abs(la - lb) > kTieTolerance * scale) return la < lb;
        return largest_entry(sol.phi.col(a)) < largest_entry(sol.phi.col(b));
    });
    PencilSolution sorted;
    sorted.eigenvalues = sol.eigenvalues(order);
    sorted.phi = sol.phi(Eigen::all, order);
    sorted.psi = sol.psi(Eigen::all, order);
    sorted.s_m = (sorted.psi.transpose() * s.asDiagonal() * sorted.phi).diagonal();
    sorted.l_m = (sorted.psi.transpose() * l * sorted.phi).diagonal();
    sol = std::move(sorted);
}

PencilSolution solve_symmetric(const Matrix& l, const Vector& s, double sign) {
    const Vector w = s.cwiseAbs().cwiseSqrt().cwiseInverse();
    const Matrix a = w.asDiagonal() * l * w.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorKind::Degenerate, "symmetric eigensolver failed to converge");
    }
    PencilSolution sol;
    sol.eigenvalues = sign * eig.eigenvalues();
    sol.phi = w.asDiagonal() * eig.eigenvectors();
    sol.psi = sol.phi;
    return sol;
}

PencilSolution solve_general(const Matrix& l, const Vector& s) {
    const Matrix m = s.cwiseInverse().asDiagonal() * l;
    Eigen::EigenSolver<Matrix> eig(m, true);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorKind::Degenerate, "nonsymmetric eigensolver failed to converge");
    }
    const Eigen::VectorXcd values = eig.eigenvalues();
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    const auto n = values.size();
    for (Eigen::Index k = 0; k < n; ++k) {
        if (std::abs(values[k].imag()) > 1e-9 * scale) {
            std::ostringstream msg;
            msg << "pencil has a complex eigenvalue " << values[k].real() << (values[k].imag() < 0 ? " - " : " + ")
                << std::abs(values[k].imag()) << "i; only real spectra are supported";
            throw Error(ErrorKind::Regime, msg.str());
        }
    }
    const Eigen::MatrixXcd vectors = eig.eigenvectors();
    PencilSolution sol;
    sol.eigenvalues = values.real();
    sol.phi.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::VectorXcd v = vectors.col(k);
        Eigen::Index peak = 0;
        v.cwiseAbs().maxCoeff(&peak);
        v /= v[peak] / std::abs(v[peak]);  // remove the arbitrary complex phase
        sol.phi.col(k) = v.real();
    }
    Eigen::FullPivLU<Matrix> lu(sol.phi);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) {
        throw Error(ErrorKind::Degenerate, "pencil is defective: eigenvectors do not span the space");
    }
    // Rows of Phi^-1 S^-1 are left eigenvectors, already biorthogonal to Phi.
    sol.psi = (lu.inverse() * s.cwiseInverse().asDiagonal()).transpose();
    return sol;
}

}  // namespace

PencilSolution solve_pencil(const Matrix& l, const Vector& s) {
    const auto n = l.rows();
    if (n == 0 || l.cols() != n || s.size() != n) {
        throw Error(ErrorKind::Input, "solve_pencil: L must be square and match S");
    }
    if (n > kMaxPencilSize) {
        throw Error(ErrorKind::Input, "solve_pencil: size " + std::to_string(n) + " exceeds dense limit " +
                                          std::to_string(kMaxPencilSize));
    }
    if (!l.allFinite() || !s.allFinite() || (s.array() == 0.0).any()) {
        throw Error(ErrorKind::Input, "solve_pencil: S must be finite with no zero entries");
    }
    const bool positive = (s.array() > 0.0).all();
    const bool negative = (s.array() < 0.0).all();
    PencilSolution sol;
    if (is_symmetric(l) && (positive || negative)) {
        sol = solve_symmetric(l, s, positive ? 1.0 : -1.0);
    } else {
        sol = solve_general(l, s);
    }
    finish(sol, l, s);
    return sol;
}

PencilSolution normalize_eigenvectors(PencilSolution sol) {
    for (Eigen::Index k = 0; k < sol.size(); ++k) {
        const double a = sol.phi(largest_entry(sol.phi.col(k)), k);
        const double b = sol.psi(largest_entry(sol.psi.col(k)), k);
        if (a == 0.0 || b == 0.0) {
            throw Error(ErrorKind::Degenerate, "zero eigenvector in mode " + std::to_string(k));
        }
        sol.phi.col(k) /= a;
        sol.psi.col(k) /= b;
        sol.s_m[k] /= a * b;
        sol.l_m[k] /= a * b;
    }
    return sol;
}

double zero_eigenvalue_tolerance(const Vector& eigenvalues) {
    const double peak = eigenvalues.size() ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
    return 1e-8 * std::max(1.0, peak);
}

std::vector<ModeKind> classify_modes(const PencilSolution& sol) {
    const double tol = zero_eigenvalue_tolerance(sol.eigenvalues);
    std::vector<ModeKind> kinds(static_cast<std::size_t>(sol.size()), ModeKind::DM);
    int near_zero = 0;
    for (Eigen::Index k = 0; k < sol.size(); ++k) {
        if (std::abs(sol.eigenvalues[k]) > tol) continue;
        ++near_zero;
        const double off = (sol.phi.col(k).array() - 1.0).abs().maxCoeff();
        if (off <= 1e-6) kinds[static_cast<std::size_t>(k)] = ModeKind::CM;
    }
    if (near_zero > 1) {
        throw Error(ErrorKind::Degenerate, std::to_string(near_zero) +
                                               " near-zero eigenvalues; the network is disconnected or the "
                                               "pencil is defective (scalings summing to zero)");
    }
    return kinds;
}

std::vector<ModeParams> modal_params_frequency(const PencilSolution& sol, const FrequencyNominal& nominal,
                                               double omega0) {
    std::vector<ModeParams> out;
    for (Eigen::Index k = 0; k < sol.size(); ++k) {
        out.push_back({sol.s_m[k] * nominal.j, sol.s_m[k] * nominal.d, sol.s_m[k] * nominal.k + omega0 * sol.l_m[k]});
    }
    return out;
}

std::vector<ModeParams> modal_params_voltage(const PencilSolution& sol, const VoltageNominal& nominal) {
    std::vector<ModeParams> out;
    for (Eigen::Index k = 0; k < sol.size(); ++k) {
        out.push_back({0.0, sol.s_m[k] * nominal.d, sol.s_m[k] * nominal.k + sol.l_m[k]});
    }
    return out;
}

std::optional<Eigen::Index> ModalDecomposition::cm_index() const {
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        if (kinds[k] == ModeKind::CM) return static_cast<Eigen::Index>(k);
    }
    return std::nullopt;
}

double ModalDecomposition::spring_margin(Eigen::Index mode) const {
    const double s_m = solution.s_m[mode];
    if (s_m == 0.0) return std::numeric_limits<double>::infinity();
    return params[static_cast<std::size_t>(mode)].spring / std::abs(s_m);
}

std::optional<Eigen::Index> ModalDecomposition::first_dm_index() const {
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] == "DM1") return static_cast<Eigen::Index>(k);
    }
    return std::nullopt;
}

Eigen::Index ModalDecomposition::mode_by_label(const std::string& label) const {
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] == label) return static_cast<Eigen::Index>(k);
    }
    throw Error(ErrorKind::Input, "no mode labelled " + label);
}

double ModalDecomposition::phi_at(Eigen::Index mode, BusId bus) const {
    if (const auto r = problem.retained_index(bus); r >= 0) return solution.phi(r, mode);
    const auto& elim = problem.eliminated_buses;
    if (const auto it = std::find(elim.begin(), elim.end(), bus); it != elim.end()) {
        const auto e = static_cast<Eigen::Index>(it - elim.begin());
        return problem.extension.row(e).dot(solution.phi.col(mode));
    }
    const auto& bnd = problem.boundary_buses;
    if (std::find(bnd.begin(), bnd.end(), bus) != bnd.end()) return 0.0;
    throw Error(ErrorKind::Input, "bus " + std::to_string(bus) + " is not a device bus");
}

Vector ModalDecomposition::phi_full(Eigen::Index mode) const {
    Vector out(static_cast<Eigen::Index>(problem.all_buses.size()));
    for (std::size_t i = 0; i < problem.all_buses.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = phi_at(mode, problem.all_buses[i]);
    }
    return out;
}

std::optional<double> ModalDecomposition::psi_at(Eigen::Index mode, BusId bus) const {
    const auto r = problem.retained_index(bus);
    if (r < 0) return std::nullopt;
    return solution.psi(r, mode);
}

ModalDecomposition decompose(const PencilProblem& problem) {
    ModalDecomposition dec;
    dec.problem = problem;
    dec.solution = normalize_eigenvectors(solve_pencil(problem.l, problem.s));
    dec.kinds = classify_modes(dec.solution);

    auto& sol = dec.solution;
    if (const auto cm = dec.cm_index()) {
        // L 1 = 0 holds exactly in exact arithmetic; remove the rounding.
        sol.eigenvalues[*cm] = 0.0;
        sol.phi.col(*cm).setOnes();
        sol.l_m[*cm] = 0.0;
        sol.s_m[*cm] = sol.psi.col(*cm).dot(problem.s);
    }

    const auto n = sol.size();
    std::vector<Eigen::Index> dm;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (dec.kinds[static_cast<std::size_t>(k)] == ModeKind::DM) dm.push_back(k);
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        dec.params.push_back({sol.s_m[k] * problem.nominal_inertia, sol.s_m[k] * problem.nominal_damping,
                              sol.s_m[k] * problem.nominal_spring + problem.network_gain * sol.l_m[k]});
    }
    std::stable_sort(dm.begin(), dm.end(), [&](Eigen::Index a, Eigen::Index b) {
        return dec.spring_margin(a) < dec.spring_margin(b);
    });
    dec.labels.assign(static_cast<std::size_t>(n), "CM");
    for (std::size_t r = 0; r < dm.size(); ++r) {
        dec.labels[static_cast<std::size_t>(dm[r])] = "DM" + std::to_string(r + 1);
    }
    return dec;
}

}  // namespace modal_strength
