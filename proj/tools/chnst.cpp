/// @file chnst.cpp
/// @brief Command-line driver: validate a model, run a simulation, or run a convergence study.
///
/// Exit codes: 0 success, 1 numerical or structure failure, 2 usage or parse error.

#include "chnst/config.hpp"
#include "chnst/diagnostics.hpp"
#include "chnst/errors.hpp"
#include "chnst/harness.hpp"
#include "chnst/io.hpp"
#include "chnst/physics.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

constexpr int validation_samples = 41;

struct Options {
    std::string config_path;
    std::optional<std::string> output;
};

chnst::physics::ValidationReport validate(const chnst::config::Config& cfg) {
    const chnst::physics::MaterialModel model(cfg.run.model);
    return chnst::physics::validate_model(model, chnst::physics::default_phi_range,
                                          chnst::physics::default_theta_range, validation_samples);
}

std::filesystem::path prepare_output(const chnst::config::Config& cfg, const Options& opt) {
    const std::filesystem::path dir = opt.output ? *opt.output : cfg.output_directory;
    std::filesystem::create_directories(dir);
    return dir;
}

int cmd_validate(const chnst::config::Config& cfg) {
    const auto report = validate(cfg);
    std::cout << "model " << cfg.model_name << "\n" << report.to_string();
    return report.all_passed() ? exit_ok : exit_failure;
}

/// Refuses to start from a model that violates the structural assumptions.
bool check_model(const chnst::config::Config& cfg) {
    const auto report = validate(cfg);
    if (report.all_passed()) return true;
    std::cerr << "error: model fails validation\n" << report.to_string();
    return false;
}

int cmd_run(const chnst::config::Config& cfg, const Options& opt) {
    if (!check_model(cfg)) return exit_failure;
    if (cfg.snapshot_stride < 0) {
        std::cerr << "error: snapshot_stride must be >= 0\n";
        return exit_usage;
    }
    const auto dir = prepare_output(cfg, opt);
    std::optional<chnst::io::DiagnosticsWriter> csv;
    if (cfg.write_csv) csv.emplace((dir / "diagnostics.csv").string());

    std::shared_ptr<const chnst::scheme::Discretization> disc;
    const auto observe = [&](const chnst::scheme::State& s, const chnst::diagnostics::DiagnosticsRecord& r) {
        if (csv) csv->write(r);
        if (cfg.snapshot_stride > 0 && r.step % cfg.snapshot_stride == 0) {
            if (!disc) disc = std::make_shared<const chnst::scheme::Discretization>(cfg.run.n(), cfg.run.quad_degree);
            if (cfg.write_vtk) chnst::io::write_vtk((dir / chnst::io::snapshot_name(r.step, "vtk")).string(), *disc, s);
            if (cfg.write_raw) chnst::io::write_raw((dir / chnst::io::snapshot_name(r.step, "raw")).string(), s);
        }
    };
    const auto tr = chnst::harness::run(cfg.run, chnst::scheme::benchmark_initial_data(), observe, false);
    const auto& first = tr.records.front();
    const auto& last = tr.records.back();
    std::cout << "n = " << cfg.run.n() << ", tau = " << tr.tau << ", steps = " << last.step << "\n"
              << "mass drift " << last.mass - first.mass << ", energy drift " << last.total_energy - first.total_energy
              << ", entropy change " << last.entropy - first.entropy << "\n";
    if (tr.split_warnings > 0)
        std::cerr << "warning: min theta <= 1/2 in " << tr.split_warnings
                  << " steps; the convex-concave split is not guaranteed there\n";
    return exit_ok;
}

int cmd_converge(const chnst::config::Config& cfg, const Options& opt) {
    if (cfg.converge_levels < 2) {
        std::cerr << "error: converge needs levels >= 2, got " << cfg.converge_levels << "\n";
        return exit_usage;
    }
    if (!check_model(cfg)) return exit_failure;
    const auto dir = prepare_output(cfg, opt);
    const auto study = chnst::harness::converge(
        cfg.run, cfg.converge_levels, chnst::scheme::benchmark_initial_data(), [](const auto& s) {
            std::cout << "level " << s.level << ": n = " << s.n << ", steps = " << s.steps << ", tau = " << s.tau
                      << ", mass drift " << s.mass_drift << ", energy drift " << s.energy_drift << ", min d_num "
                      << s.min_d_num << std::endl;
        });
    const std::string text = study.table.to_text();
    std::ofstream((dir / "eoc_table.csv").string(), std::ios::binary) << study.table.to_csv();
    std::ofstream((dir / "eoc_table.txt").string(), std::ios::binary) << text;
    std::cout << text;

    using chnst::harness::Column;
    if (!study.table.strictly_decreasing(Column::combined)) {
        std::cerr << "error: combined error is not decreasing\n";
        return exit_failure;
    }
    const auto order = study.table.last_order(Column::combined);
    if (!order) {
        std::cout << "eoc gate not evaluated (needs at least three levels)\n";
        return exit_ok;
    }
    if (!(*order >= cfg.eoc_gate)) {
        std::cerr << "error: final eoc " << *order << " below gate " << cfg.eoc_gate << "\n";
        return exit_failure;
    }
    std::cout << "final eoc " << *order << " >= gate " << cfg.eoc_gate << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structure-preserving finite element solver for non-isothermal Cahn-Hilliard-Navier-Stokes flow"};
    app.require_subcommand(1);
    Options opt;
    auto add = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config_path, "Configuration file")->required();
        sub->add_option("--output", opt.output, "Output directory (overrides [output] directory)");
        return sub;
    };
    auto* validate_cmd = add("validate", "Check the structural assumptions of the material model");
    auto* run_cmd = add("run", "Run one simulation and write diagnostics.csv and snapshots");
    auto* converge_cmd = add("converge", "Run a refinement study and write eoc_table.csv/txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    chnst::config::Config cfg;
    try {
        cfg = chnst::config::load(opt.config_path);
        cfg.run.validate();
    } catch (const chnst::ParseError& e) {
        std::cerr << "error: " << opt.config_path << ": " << e.what() << "\n";
        return exit_usage;
    } catch (const chnst::InvalidArgument& e) {
        std::cerr << "error: " << opt.config_path << ": " << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (*validate_cmd) return cmd_validate(cfg);
        if (*run_cmd) return cmd_run(cfg, opt);
        if (*converge_cmd) return cmd_converge(cfg, opt);
    } catch (const chnst::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const chnst::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_usage;
}
