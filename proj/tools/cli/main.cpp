#include <modal_strength/error.hpp>
#include <modal_strength_app/output.hpp>
#include <modal_strength_app/pipeline.hpp>
#include <modal_strength_app/property_check.hpp>
#include <modal_strength_app/scenario.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace ms = modal_strength;
namespace app = modal_strength::app;

namespace {

struct Options {
    std::string scenario;
    std::string out;
    std::string format = "csv,json";
    std::string side = "both";
    std::uint64_t seed = 1;
    int count = 50;
};

void apply_side(const std::string& side, app::RunOptions& run) {
    if (side == "freq") {
        run.voltage = false;
    } else if (side == "volt") {
        run.frequency = false;
    } else if (side != "both") {
        throw ms::Error(ms::ErrorKind::Input, "--side must be freq, volt or both");
    }
}

void print_summary(std::ostream& os, const app::RunResult& run) {
    os << "scenario " << run.scenario.name << '\n';
    for (const auto& w : run.warnings) os << "warning " << w.code << ": " << w.message << '\n';
    for (const auto& sr : run.sides) {
        const bool freq = sr.side == ms::Side::Frequency;
        os << (freq ? "frequency" : "voltage") << (sr.report.static_only ? " (static)" : "") << '\n';
        for (const auto& m : sr.report.modes) {
            os << "  " << m.label << "  lambda=" << app::format_number(m.lambda);
            if (freq) os << "  J=" << app::format_number(m.params.inertia);
            os << "  D=" << app::format_number(m.params.damping) << "  K=" << app::format_number(m.params.spring)
               << (m.collapse ? "  COLLAPSE" : "") << '\n';
        }
        for (const auto& e : sr.report.nodal_inertia) {
            if (e.observe == e.disturb) {
                os << "  nodal inertia bus " << e.observe << " = " << app::format_number(e.value) << '\n';
            }
        }
        if (!freq) {
            os << "  CM voltage spring estimate = " << app::format_number(sr.report.cm_v_spring_estimate) << '\n';
            if (sr.report.gscr) os << "  gSCR = " << app::format_number(*sr.report.gscr) << '\n';
        }
        if (sr.gap) os << "  modal vs direct max gap = " << app::format_number(*sr.gap) << '\n';
        if (sr.direct && sr.direct->truncated) os << "  direct simulation diverged (truncated)\n";
    }
    if (run.sweep) {
        for (const auto& c : run.sweep->crossings) {
            os << "crossing " << c.mode << (c.direction < 0 ? " falls through 0 at " : " rises through 0 at ")
               << app::format_number(c.value) << '\n';
        }
    }
}

int execute(const std::string& command, const Options& opt) {
    if (command == "list-scenarios") {
        for (const auto& name : app::builtin_names()) std::cout << "builtin:" << name << '\n';
        return 0;
    }
    if (command == "check") {
        int failures = 0;
        for (int i = 0; i < opt.count; ++i) {
            const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(i);
            const int n = 2 + static_cast<int>(seed % 19);
            const auto sys = app::random_lossless_system(seed, n);
            const auto res = app::check_invariants(sys.problem);
            std::cout << (res.ok() ? "ok   " : "FAIL ") << "seed=" << seed << ' ' << res.summary() << '\n';
            failures += res.ok() ? 0 : 1;
        }
        return failures == 0 ? 0 : 2;
    }

    if (opt.scenario.empty()) throw ms::Error(ms::ErrorKind::Input, "--scenario is required");
    const app::Scenario scenario = app::load_scenario(opt.scenario);
    if (command == "export") {
        std::cout << app::scenario_to_json(scenario).dump(2) << '\n';
        return 0;
    }

    app::RunOptions run_opt;
    apply_side(opt.side, run_opt);
    run_opt.simulate = command == "simulate";
    run_opt.sweep = command == "sweep";
    if (run_opt.sweep && !scenario.analysis.sweep) {
        throw ms::Error(ms::ErrorKind::Input, "scenario '" + scenario.name + "' has no sweep specification");
    }
    const auto formats = app::parse_formats(opt.format);
    const app::RunResult result = app::run(scenario, run_opt);
    print_summary(std::cout, result);
    if (!opt.out.empty()) {
        const auto files = app::emit_outputs(result, opt.out, formats);
        std::cout << "wrote " << files.size() << " files to " << opt.out << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Modal frequency and voltage strength analysis"};
    cli.set_version_flag("--version", MODAL_STRENGTH_TOOL_VERSION);
    cli.require_subcommand(1);
    Options opt;

    const auto add_run = [&](const std::string& name, const std::string& help) {
        auto* sub = cli.add_subcommand(name, help);
        sub->add_option("--scenario", opt.scenario, "Scenario file or builtin:<name>")->required();
        sub->add_option("--out", opt.out, "Output directory");
        sub->add_option("--format", opt.format, "Comma-separated subset of csv,json,svg");
        sub->add_option("--side", opt.side, "freq, volt or both");
        return sub;
    };
    add_run("analyze", "Decompose and report modal strength metrics");
    add_run("simulate", "Analyze plus modal and direct time-domain responses");
    add_run("sweep", "Track static voltage springs over the scenario's sweep parameter");
    cli.add_subcommand("list-scenarios", "List built-in scenarios");
    cli.add_subcommand("export", "Print a scenario as JSON")
        ->add_option("--scenario", opt.scenario, "Scenario file or builtin:<name>")
        ->required();
    auto* check = cli.add_subcommand("check", "Structural invariants on random lossless networks");
    check->add_option("--seed", opt.seed, "First seed");
    check->add_option("--count", opt.count, "Number of networks")->check(CLI::PositiveNumber);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        return execute(cli.get_subcommands().front()->get_name(), opt);
    } catch (const ms::Error& e) {
        std::cerr << "error [" << ms::to_string(e.kind()) << "]: " << e.what() << '\n';
        return ms::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
