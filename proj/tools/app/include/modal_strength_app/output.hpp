#pragma once

#include "modal_strength_app/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace modal_strength::app {

/// Shortest round-trip decimal, locale independent; "inf", "-inf", "nan".
[[nodiscard]] std::string format_number(double value);

void write_trace_csv(std::ostream& out, const ResponseTrace& trace);
void write_report_csv(std::ostream& out, const RunResult& run);
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);

/// Infinite values are written as null with a sibling "<key>_infinite": true.
[[nodiscard]] nlohmann::json report_json(const RunResult& run);

/// One panel per trace, one polyline per bus; `dashed` traces overlay.
[[nodiscard]] std::string svg_traces(const std::string& title, const ResponseTrace& solid,
                                     const ResponseTrace* dashed = nullptr);
[[nodiscard]] std::string svg_sweep(const std::string& title, const std::string& parameter, const SweepResult& sweep);

[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes);

struct OutputFormats {
    bool csv = true;
    bool json = true;
    bool svg = false;
};

/// "csv,json,svg" (any subset).
[[nodiscard]] OutputFormats parse_formats(const std::string& list);

/// Writes every artifact of `run` into `dir` plus manifest.txt (FNV-1a-64
/// and size per file). Returns the file names written, manifest last.
std::vector<std::string> emit_outputs(const RunResult& run, const std::filesystem::path& dir,
                                      const OutputFormats& formats);

}  // namespace modal_strength::app
