#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace modal_strength {

/// Broad failure categories. Each maps onto a CLI exit code.
enum class ErrorKind {
    Input,            // malformed or inconsistent user input
    Topology,         // disconnected network
    Reduction,        // singular interior block during Kron reduction
    Consistency,      // heterogeneous devices where homogeneity is required
    Divergence,       // power flow did not converge
    Regime,           // complex spectrum, outside the supported real-eigenvalue regime
    Degenerate,       // defective pencil, repeated zero modes, unobservable pairs
    Integrator,       // RK4 step size outside the stability region
    BridgeViolation,  // gSCR / modal spring sign disagreement
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

/// 1 = input error, 2 = numeric/regime error, 3 = I/O error.
[[nodiscard]] int exit_code(ErrorKind kind) noexcept;

}  // namespace modal_strength
