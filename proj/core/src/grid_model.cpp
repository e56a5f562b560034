#include "modal_strength/grid_model.hpp"

#include "modal_strength/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace modal_strength {

namespace {

std::string join_ids(const std::vector<BusId>& ids) {
    std::ostringstream out;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        out << (k ? ", " : "") << ids[k];
    }
    return out.str();
}

std::unordered_map<BusId, std::size_t> index_buses(std::span<const Bus> buses) {
    std::unordered_map<BusId, std::size_t> index;
    for (std::size_t k = 0; k < buses.size(); ++k) {
        if (!index.emplace(buses[k].id, k).second) {
            throw Error(ErrorKind::Input, "duplicate bus id " + std::to_string(buses[k].id));
        }
    }
    return index;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t k) {
    while (parent[k] != k) {
        parent[k] = parent[parent[k]];
        k = parent[k];
    }
    return k;
}

}  // namespace

std::size_t Grid::index_of(BusId id) const {
    for (std::size_t k = 0; k < buses.size(); ++k) {
        if (buses[k].id == id) return k;
    }
    throw Error(ErrorKind::Input, "unknown bus id " + std::to_string(id));
}

bool Grid::contains(BusId id) const {
    return std::any_of(buses.begin(), buses.end(), [id](const Bus& b) { return b.id == id; });
}

std::vector<BusId> Grid::bus_ids() const {
    std::vector<BusId> ids;
    ids.reserve(buses.size());
    for (const auto& b : buses) ids.push_back(b.id);
    return ids;
}

std::vector<BusId> Grid::device_bus_ids() const {
    std::vector<BusId> ids;
    for (const auto& b : buses) {
        if (b.kind == BusKind::Device) ids.push_back(b.id);
    }
    return ids;
}

OperatingPoint OperatingPoint::restrict_to(std::span<const std::size_t> indices) const {
    const auto m = static_cast<Eigen::Index>(indices.size());
    OperatingPoint out{Vector(m), Vector(m), Vector(m), Vector(m)};
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto src = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(k)]);
        out.theta[k] = theta[src];
        out.v[k] = v[src];
        out.p[k] = p[src];
        out.q[k] = q[src];
    }
    return out;
}

ComplexMatrix build_admittance(std::span<const Bus> buses, std::span<const Branch> branches) {
    if (buses.empty()) throw Error(ErrorKind::Input, "network has no buses");
    const auto index = index_buses(buses);
    const auto n = static_cast<Eigen::Index>(buses.size());

    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    std::vector<std::size_t> parent(buses.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::set<std::pair<BusId, BusId>> seen;

    for (const auto& br : branches) {
        const auto from = index.find(br.from);
        const auto to = index.find(br.to);
        if (from == index.end() || to == index.end()) {
            throw Error(ErrorKind::Input, "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                              " references an unknown bus");
        }
        if (br.from == br.to) {
            throw Error(ErrorKind::Input, "branch at bus " + std::to_string(br.from) + " is a self-loop");
        }
        if (br.x == 0.0 || !std::isfinite(br.x) || !std::isfinite(br.r)) {
            throw Error(ErrorKind::Input, "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                              " has zero or non-finite reactance");
        }
        const auto key = std::minmax(br.from, br.to);
        if (!seen.insert(key).second) {
            throw Error(ErrorKind::Input, "duplicate branch " + std::to_string(key.first) + "-" +
                                              std::to_string(key.second));
        }
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const auto i = static_cast<Eigen::Index>(from->second);
        const auto j = static_cast<Eigen::Index>(to->second);
        y(i, i) += ys;
        y(j, j) += ys;
        y(i, j) -= ys;
        y(j, i) -= ys;
        parent[find_root(parent, from->second)] = find_root(parent, to->second);
    }

    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& b = buses[static_cast<std::size_t>(k)];
        y(k, k) += Complex(b.shunt_g, b.shunt_b);
    }

    std::vector<BusId> isolated;
    const auto root = find_root(parent, 0);
    for (std::size_t k = 1; k < buses.size(); ++k) {
        if (find_root(parent, k) != root) isolated.push_back(buses[k].id);
    }
    if (!isolated.empty()) {
        throw Error(ErrorKind::Topology, "network is disconnected; buses not reachable from bus " +
                                             std::to_string(buses[0].id) + ": " + join_ids(isolated));
    }
    return y;
}

ComplexMatrix kron_reduce(const ComplexMatrix& y, std::span<const BusId> bus_ids,
                          std::span<const BusId> retained_ids) {
    const auto n = y.rows();
    if (y.cols() != n || static_cast<Eigen::Index>(bus_ids.size()) != n) {
        throw Error(ErrorKind::Input, "kron_reduce: admittance size does not match bus labels");
    }
    std::vector<Eigen::Index> kept;
    std::vector<bool> is_kept(static_cast<std::size_t>(n), false);
    for (BusId id : retained_ids) {
        const auto it = std::find(bus_ids.begin(), bus_ids.end(), id);
        if (it == bus_ids.end()) {
            throw Error(ErrorKind::Input, "kron_reduce: retained bus " + std::to_string(id) + " not in network");
        }
        const auto k = static_cast<Eigen::Index>(it - bus_ids.begin());
        if (is_kept[static_cast<std::size_t>(k)]) {
            throw Error(ErrorKind::Input, "kron_reduce: bus " + std::to_string(id) + " retained twice");
        }
        is_kept[static_cast<std::size_t>(k)] = true;
        kept.push_back(k);
    }
    std::vector<Eigen::Index> dropped;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (!is_kept[static_cast<std::size_t>(k)]) dropped.push_back(k);
    }

    const auto m = static_cast<Eigen::Index>(kept.size());
    ComplexMatrix y_tt = y(kept, kept);
    if (dropped.empty()) return y_tt;

    const ComplexMatrix y_ii = y(dropped, dropped);
    Eigen::FullPivLU<ComplexMatrix> lu(y_ii);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        const ComplexMatrix kernel = lu.kernel();
        std::vector<BusId> offenders;
        for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
            if (kernel.row(r).norm() > 1e-9) {
                offenders.push_back(bus_ids[static_cast<std::size_t>(dropped[static_cast<std::size_t>(r)])]);
            }
        }
        throw Error(ErrorKind::Reduction,
                    "kron_reduce: interior admittance block is singular; offending buses: " + join_ids(offenders));
    }
    const ComplexMatrix y_ti = y(kept, dropped);
    const ComplexMatrix y_it = y(dropped, kept);
    ComplexMatrix reduced = y_tt - y_ti * lu.solve(y_it);
    (void)m;
    return reduced;
}

void compute_injections(const ComplexMatrix& y, const Vector& theta, const Vector& v, Vector& p, Vector& q) {
    const auto n = y.rows();
    Eigen::VectorXcd volt(n);
    for (Eigen::Index k = 0; k < n; ++k) volt[k] = std::polar(v[k], theta[k]);
    const Eigen::VectorXcd current = y * volt;
    p.resize(n);
    q.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Complex s = volt[k] * std::conj(current[k]);
        p[k] = s.real();
        q[k] = s.imag();
    }
}

namespace {

// L and N per the linearised power-flow expressions, using only the
// off-diagonal entries of y.
void fill_ln(const ComplexMatrix& y, const Vector& theta, const Vector& v, Matrix& l, Matrix& n) {
    const auto size = y.rows();
    l = Matrix::Zero(size, size);
    n = Matrix::Zero(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
        for (Eigen::Index j = 0; j < size; ++j) {
            if (i == j) continue;
            const double g = y(i, j).real();
            const double b = y(i, j).imag();
            if (g == 0.0 && b == 0.0) continue;
            const double th = theta[i] - theta[j];
            const double vv = v[i] * v[j];
            const double c = std::cos(th);
            const double s = std::sin(th);
            const double l_term = vv * (b * c - g * s);
            const double n_term = vv * (-b * s - g * c);
            l(i, j) = -l_term;
            l(i, i) += l_term;
            n(i, j) = -n_term;
            n(i, i) += n_term;
        }
    }
}

}  // namespace

OperatingPoint solve_power_flow(const Grid& grid, std::span<const Injection> injections, FlowMode mode) {
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    std::vector<BusType> types(grid.buses.size(), BusType::PQ);
    Vector p_set = Vector::Zero(n);
    Vector q_set = Vector::Zero(n);
    Vector v_set = Vector::Ones(n);
    Vector th_set = Vector::Zero(n);
    std::vector<bool> declared(grid.buses.size(), false);
    for (const auto& inj : injections) {
        const auto k = grid.index_of(inj.bus);
        if (declared[k]) throw Error(ErrorKind::Input, "duplicate injection at bus " + std::to_string(inj.bus));
        declared[k] = true;
        types[k] = inj.type;
        p_set[static_cast<Eigen::Index>(k)] = inj.p;
        q_set[static_cast<Eigen::Index>(k)] = inj.q;
        v_set[static_cast<Eigen::Index>(k)] = inj.v;
        th_set[static_cast<Eigen::Index>(k)] = inj.theta;
        if (!(inj.v > 0.0)) throw Error(ErrorKind::Input, "voltage setpoint must be positive at bus " + std::to_string(inj.bus));
    }

    if (mode == FlowMode::Flat) {
        return OperatingPoint{Vector::Zero(n), Vector::Ones(n), p_set, q_set};
    }

    const auto slack_count = std::count(types.begin(), types.end(), BusType::Slack);
    if (slack_count != 1) {
        throw Error(ErrorKind::Input, "newton power flow needs exactly one slack bus, found " + std::to_string(slack_count));
    }
    const ComplexMatrix y = build_admittance(grid.buses, grid.branches);

    std::vector<Eigen::Index> angle_vars;
    std::vector<Eigen::Index> volt_vars;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (types[static_cast<std::size_t>(k)] != BusType::Slack) angle_vars.push_back(k);
        if (types[static_cast<std::size_t>(k)] == BusType::PQ) volt_vars.push_back(k);
    }

    Vector theta = Vector::Zero(n);
    Vector v = Vector::Ones(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (types[static_cast<std::size_t>(k)] == BusType::Slack) theta[k] = th_set[k];
        if (types[static_cast<std::size_t>(k)] != BusType::PQ) v[k] = v_set[k];
    }

    const auto na = static_cast<Eigen::Index>(angle_vars.size());
    const auto nv = static_cast<Eigen::Index>(volt_vars.size());
    Vector p, q;
    double mismatch = 0.0;
    for (int iter = 0; iter <= kPowerFlowMaxIterations; ++iter) {
        compute_injections(y, theta, v, p, q);
        Vector residual(na + nv);
        for (Eigen::Index a = 0; a < na; ++a) residual[a] = p_set[angle_vars[a]] - p[angle_vars[a]];
        for (Eigen::Index b = 0; b < nv; ++b) residual[na + b] = q_set[volt_vars[b]] - q[volt_vars[b]];
        mismatch = residual.size() ? residual.cwiseAbs().maxCoeff() : 0.0;
        if (mismatch < kPowerFlowTolerance) {
            return OperatingPoint{theta, v, p, q};
        }
        if (iter == kPowerFlowMaxIterations) break;

        // Full Jacobian in (dtheta, dV/V): [L, N + 2P; -N, L + 2Q].
        Matrix l, nn;
        fill_ln(y, theta, v, l, nn);
        Matrix jac(na + nv, na + nv);
        for (Eigen::Index r = 0; r < na; ++r) {
            const auto i = angle_vars[r];
            for (Eigen::Index c = 0; c < na; ++c) jac(r, c) = l(i, angle_vars[c]);
            for (Eigen::Index c = 0; c < nv; ++c) {
                const auto j = volt_vars[c];
                jac(r, na + c) = nn(i, j) + (i == j ? 2.0 * p[i] : 0.0);
            }
        }
        for (Eigen::Index r = 0; r < nv; ++r) {
            const auto i = volt_vars[r];
            for (Eigen::Index c = 0; c < na; ++c) jac(na + r, c) = -nn(i, angle_vars[c]);
            for (Eigen::Index c = 0; c < nv; ++c) {
                const auto j = volt_vars[c];
                jac(na + r, na + c) = l(i, j) + (i == j ? 2.0 * q[i] : 0.0);
            }
        }
        Eigen::FullPivLU<Matrix> lu(jac);
        if (!lu.isInvertible()) {
            throw Error(ErrorKind::Divergence, "newton power flow: singular Jacobian at iteration " +
                                                   std::to_string(iter) + ", mismatch " + std::to_string(mismatch));
        }
        const Vector step = lu.solve(residual);
        for (Eigen::Index a = 0; a < na; ++a) theta[angle_vars[a]] += step[a];
        for (Eigen::Index b = 0; b < nv; ++b) v[volt_vars[b]] *= 1.0 + step[na + b];
        if (!theta.allFinite() || !v.allFinite()) break;
    }
    std::ostringstream msg;
    msg << "newton power flow did not converge in " << kPowerFlowMaxIterations
        << " iterations; final mismatch " << mismatch << " p.u.";
    throw Error(ErrorKind::Divergence, msg.str());
}

JacobianBlocks build_jacobian_blocks(const ComplexMatrix& y_red, const OperatingPoint& op) {
    if (y_red.rows() != y_red.cols() || op.size() != y_red.rows() || op.v.size() != op.size() ||
        op.p.size() != op.size() || op.q.size() != op.size()) {
        throw Error(ErrorKind::Input, "build_jacobian_blocks: operating point dimension does not match admittance");
    }
    if ((op.v.array() <= 0.0).any()) {
        throw Error(ErrorKind::Input, "build_jacobian_blocks: voltage magnitudes must be positive");
    }
    JacobianBlocks blocks;
    fill_ln(y_red, op.theta, op.v, blocks.l, blocks.n);
    blocks.p_e = op.p;
    blocks.q_e = op.q;
    blocks.v_e = op.v;
    return blocks;
}

double check_flow_invariance(const JacobianBlocks& blocks) {
    double worst = 0.0;
    if (blocks.l.size()) worst = std::max(worst, blocks.l.rowwise().sum().cwiseAbs().maxCoeff());
    if (blocks.n.size()) worst = std::max(worst, blocks.n.rowwise().sum().cwiseAbs().maxCoeff());
    return worst;
}

ReducedNetwork reduce_network(const Grid& grid, const OperatingPoint& op) {
    const auto ids = grid.bus_ids();
    if (op.size() != static_cast<Eigen::Index>(ids.size())) {
        throw Error(ErrorKind::Input, "operating point size does not match bus count");
    }
    ReducedNetwork out;
    out.buses = grid.device_bus_ids();
    if (out.buses.empty()) throw Error(ErrorKind::Input, "network has no device buses");
    const ComplexMatrix y = build_admittance(grid.buses, grid.branches);
    out.y_red = kron_reduce(y, ids, out.buses);
    std::vector<std::size_t> idx;
    for (BusId b : out.buses) idx.push_back(grid.index_of(b));
    out.op = op.restrict_to(idx);
    out.blocks = build_jacobian_blocks(out.y_red, out.op);
    return out;
}

}  // namespace modal_strength
