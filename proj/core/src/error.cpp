#include "modal_strength/error.hpp"

namespace modal_strength {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Input: return "input";
        case ErrorKind::Topology: return "topology";
        case ErrorKind::Reduction: return "reduction";
        case ErrorKind::Consistency: return "consistency";
        case ErrorKind::Divergence: return "divergence";
        case ErrorKind::Regime: return "regime";
        case ErrorKind::Degenerate: return "degenerate";
        case ErrorKind::Integrator: return "integrator";
        case ErrorKind::BridgeViolation: return "bridge-violation";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Input:
        case ErrorKind::Topology:
        case ErrorKind::Consistency:
            return 1;
        case ErrorKind::Io:
            return 3;
        default:
            return 2;
    }
}

}  // namespace modal_strength
