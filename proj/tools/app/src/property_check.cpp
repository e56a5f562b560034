#include "modal_strength_app/property_check.hpp"

#include <modal_strength/modal_decomp.hpp>
#include <modal_strength/strength_metrics.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace modal_strength::app {

RandomSystem random_lossless_system(std::uint64_t seed, int n) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> reactance(0.05, 1.0);
    std::uniform_real_distribution<double> scaling(0.1, 10.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    RandomSystem sys;
    for (int i = 1; i <= n; ++i) sys.grid.buses.push_back({static_cast<BusId>(i), BusKind::Device, 0.0, 0.0});
    std::set<std::pair<int, int>> used;
    for (int i = 2; i <= n; ++i) {
        const int j = 1 + static_cast<int>(unit(rng) * (i - 1));
        used.insert({std::min(i, j), std::max(i, j)});
        sys.grid.branches.push_back({static_cast<BusId>(j), static_cast<BusId>(i), 0.0, reactance(rng)});
    }
    const int chords = n / 2;
    for (int c = 0; c < chords; ++c) {
        const int a = 1 + static_cast<int>(unit(rng) * n);
        const int b = 1 + static_cast<int>(unit(rng) * n);
        if (a == b || a > n || b > n || used.count({std::min(a, b), std::max(a, b)})) continue;
        used.insert({std::min(a, b), std::max(a, b)});
        sys.grid.branches.push_back({static_cast<BusId>(a), static_cast<BusId>(b), 0.0, reactance(rng)});
    }

    const OperatingPoint op = solve_power_flow(sys.grid, {}, FlowMode::Flat);
    const ReducedNetwork net = reduce_network(sys.grid, op);
    Vector s(n);
    for (int i = 0; i < n; ++i) s[i] = scaling(rng);
    sys.problem = make_pencil_problem(Side::Frequency, net.buses, net.blocks.l, s,
                                      std::vector<bool>(static_cast<std::size_t>(n), false));
    sys.problem.nominal_inertia = 0.5 + 10.0 * unit(rng);
    sys.problem.nominal_damping = 1.0;
    sys.problem.network_gain = 1.0;
    return sys;
}

bool InvariantResiduals::ok() const {
    return row_sum <= 1e-8 && zero_modes == 1 && cm_modes == 1 && cm_shape <= 1e-9 && biorthogonality <= 1e-8 &&
           nodal_inertia <= 1e-9 && resolvent <= 1e-8;
}

std::string InvariantResiduals::summary() const {
    std::ostringstream s;
    s << "n=" << buses << " row_sum=" << row_sum << " zero_modes=" << zero_modes << " cm_modes=" << cm_modes
      << " cm_shape=" << cm_shape << " biorth=" << biorthogonality << " nodal=" << nodal_inertia
      << " resolvent=" << resolvent;
    return s.str();
}

InvariantResiduals check_invariants(const PencilProblem& problem) {
    InvariantResiduals r;
    const Matrix& l = problem.l;
    const Vector& s = problem.s;
    const Eigen::Index n = l.rows();
    r.buses = static_cast<int>(n);
    r.row_sum = (l * Vector::Ones(n)).cwiseAbs().maxCoeff();

    const ModalDecomposition dec = decompose(problem);
    const auto& sol = dec.solution;
    const double tol = zero_eigenvalue_tolerance(sol.eigenvalues);
    for (Eigen::Index k = 0; k < sol.size(); ++k) r.zero_modes += std::abs(sol.eigenvalues[k]) <= tol ? 1 : 0;
    for (auto kind : dec.kinds) r.cm_modes += kind == ModeKind::CM ? 1 : 0;
    if (const auto cm = dec.cm_index()) r.cm_shape = (sol.phi.col(*cm).array() - 1.0).abs().maxCoeff();

    const Matrix ms = sol.psi.transpose() * s.asDiagonal() * sol.phi;
    const Matrix ml = sol.psi.transpose() * l * sol.phi;
    const double ms_scale = ms.diagonal().cwiseAbs().maxCoeff();
    const double ml_scale = std::max(1.0, ml.diagonal().cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            r.biorthogonality = std::max({r.biorthogonality, std::abs(ms(i, j)) / ms_scale, std::abs(ml(i, j)) / ml_scale});
        }
    }

    // Initial RoCoF per unit step sees (J0 S)^-1, which is diagonal.
    for (Eigen::Index i = 0; i < n; ++i) {
        const BusId bus = problem.buses[static_cast<std::size_t>(i)];
        const double expected = problem.nominal_inertia * s[i];
        const double got = nodal_inertia(dec, bus, bus);
        r.nodal_inertia = std::max(r.nodal_inertia, std::abs(1.0 / got - 1.0 / expected) * expected);
    }

    const double g = 1.37;
    const Matrix shifted = Matrix(s.asDiagonal()) * g + l;
    const Matrix direct = shifted.partialPivLu().inverse();
    Matrix modal = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < sol.size(); ++k) {
        modal += sol.phi.col(k) * sol.psi.col(k).transpose() / (sol.s_m[k] * g + sol.l_m[k]);
    }
    r.resolvent = (modal - direct).norm() / direct.norm();
    return r;
}

}  // namespace modal_strength::app
