#pragma once

#include <modal_strength/closed_loop.hpp>
#include <modal_strength/grid_model.hpp>

#include <cstdint>
#include <string>

namespace modal_strength::app {

/// Connected lossless network of `n` device buses (random spanning tree plus
/// extra chords), flat start, random positive scalings in [0.1, 10].
struct RandomSystem {
    Grid grid;
    PencilProblem problem;  // frequency side
};

[[nodiscard]] RandomSystem random_lossless_system(std::uint64_t seed, int n);

struct InvariantResiduals {
    int buses = 0;
    double row_sum = 0.0;          // max |L 1|
    int zero_modes = 0;            // eigenvalues within the zero tolerance
    int cm_modes = 0;              // modes classified CM
    double cm_shape = 0.0;         // max |phi_CM - 1|
    double biorthogonality = 0.0;  // off-diagonal Psi^T S Phi and Psi^T L Phi, relative
    double nodal_inertia = 0.0;    // relative error of 1/J(i,i) against 1/(J0 S_i)
    double resolvent = 0.0;        // relative error of the modal resolvent

    [[nodiscard]] bool ok() const;
    [[nodiscard]] std::string summary() const;
};

[[nodiscard]] InvariantResiduals check_invariants(const PencilProblem& problem);

}  // namespace modal_strength::app
