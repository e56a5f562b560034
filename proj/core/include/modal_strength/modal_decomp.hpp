#pragma once

// Eigen-subsystem decomposition of the pencil (L, S).
//
//   L phi_k = lambda_k S phi_k,   psi_k^T L = lambda_k psi_k^T S
//
// With Psi^T S Phi = diag(s_m) and Psi^T L Phi = diag(l_m) the closed loop
// (S G(s) + L)^-1 splits into one scalar subsystem per mode:
//
//   phi_k psi_k^T / (s_m,k G(s) + l_m,k)

#include "modal_strength/closed_loop.hpp"
#include "modal_strength/device_model.hpp"
#include "modal_strength/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace modal_strength {

inline constexpr Eigen::Index kMaxPencilSize = 512;

struct PencilSolution {
    Vector eigenvalues;  // ascending
    Matrix phi;          // right eigenvectors, one per column
    Matrix psi;          // left eigenvectors, one per column
    Vector s_m;          // diag(Psi^T S Phi)
    Vector l_m;          // diag(Psi^T L Phi)

    [[nodiscard]] Eigen::Index size() const { return eigenvalues.size(); }
};

enum class ModeKind { CM, DM };

/// Coefficients of one eigen-subsystem denominator J s^2 + D s + K (voltage
/// modes carry inertia = 0).
struct ModeParams {
    double inertia = 0.0;
    double damping = 0.0;
    double spring = 0.0;
};

/// Dense generalized eigensolution. Symmetric L with a definite diagonal S
/// goes through the symmetric standard problem |S|^-1/2 L |S|^-1/2; anything
/// else through the nonsymmetric S^-1 L. Throws Regime for complex spectra
/// and Degenerate for defective pencils.
[[nodiscard]] PencilSolution solve_pencil(const Matrix& l, const Vector& s);

/// Scale every phi_k and psi_k so its largest-magnitude entry is +1 (ties go
/// to the lowest index); s_m and l_m follow the scaling.
[[nodiscard]] PencilSolution normalize_eigenvectors(PencilSolution solution);

/// A mode is CM when |lambda| <= 1e-8 max(1, |lambda_max|) and phi is within
/// 1e-6 of the all-ones vector. Throws Degenerate on more than one near-zero
/// eigenvalue.
[[nodiscard]] std::vector<ModeKind> classify_modes(const PencilSolution& solution);

[[nodiscard]] double zero_eigenvalue_tolerance(const Vector& eigenvalues);

[[nodiscard]] std::vector<ModeParams> modal_params_frequency(const PencilSolution& solution,
                                                             const FrequencyNominal& nominal, double omega0);

[[nodiscard]] std::vector<ModeParams> modal_params_voltage(const PencilSolution& solution,
                                                           const VoltageNominal& nominal);

struct ModalDecomposition {
    PencilProblem problem;
    PencilSolution solution;  // normalized; the CM mode (if any) snapped to lambda = 0, phi = 1, l_m = 0
    std::vector<ModeKind> kinds;
    std::vector<std::string> labels;  // "CM", "DM1", "DM2", ... (DM ranked by spring_margin, weakest first)
    std::vector<ModeParams> params;

    [[nodiscard]] Eigen::Index mode_count() const { return solution.size(); }
    [[nodiscard]] std::optional<Eigen::Index> cm_index() const;
    /// Modal spring per unit modal capacity, K_k / |s_m,k|. Invariant under
    /// eigenvector scaling; equals K0 + gain lambda_k when s_m,k > 0.
    [[nodiscard]] double spring_margin(Eigen::Index mode) const;
    /// Weakest DM mode. With a definite S this is the nonzero lambda closest
    /// to zero; with an indefinite S it is the DM mode nearest to collapse.
    [[nodiscard]] std::optional<Eigen::Index> first_dm_index() const;
    [[nodiscard]] Eigen::Index mode_by_label(const std::string& label) const;

    /// Right-vector entry at any device bus on this side: boundary buses
    /// read 0, eliminated buses follow the retained ones.
    [[nodiscard]] double phi_at(Eigen::Index mode, BusId bus) const;
    /// Full right vector over `problem.all_buses`.
    [[nodiscard]] Vector phi_full(Eigen::Index mode) const;
    /// Left-vector entry; only retained buses can be disturbed.
    [[nodiscard]] std::optional<double> psi_at(Eigen::Index mode, BusId bus) const;
};

[[nodiscard]] ModalDecomposition decompose(const PencilProblem& problem);

}  // namespace modal_strength
