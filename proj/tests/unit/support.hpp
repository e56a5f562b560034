#pragma once

#include <modal_strength/closed_loop.hpp>
#include <modal_strength/modal_decomp.hpp>

#include <initializer_list>
#include <vector>

namespace test_support {

namespace ms = modal_strength;

inline ms::Matrix matrix(int n, std::initializer_list<double> values) {
    ms::Matrix m(n, n);
    auto it = values.begin();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m(i, j) = *it++;
    }
    return m;
}

inline ms::Vector vector(std::initializer_list<double> values) {
    ms::Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

/// Frequency pencil over buses 1..n with optional boundary flags.
inline ms::PencilProblem pencil(const ms::Matrix& l, const ms::Vector& s, std::vector<bool> boundary = {},
                                double j0 = 10.0, double d0 = 10.0, double k0 = 0.0, double gain = 1.0) {
    std::vector<ms::BusId> ids;
    for (Eigen::Index i = 0; i < l.rows(); ++i) ids.push_back(static_cast<ms::BusId>(i + 1));
    if (boundary.empty()) boundary.assign(ids.size(), false);
    auto p = ms::make_pencil_problem(ms::Side::Frequency, ids, l, s, boundary);
    p.nominal_inertia = j0;
    p.nominal_damping = d0;
    p.nominal_spring = k0;
    p.network_gain = gain;
    return p;
}

inline ms::Matrix two_bus_l(double b = 3.0) { return matrix(2, {b, -b, -b, b}); }

}  // namespace test_support
