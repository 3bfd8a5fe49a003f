// wgqed — scenario runner for waveguide-QED few-photon scattering computations.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "wgqed/scenario.hpp"

namespace {

void print_summary(const wgqed::RunSummary& s) {
    std::printf("scenario %s: %s = %.12g\n", s.name.c_str(), s.headline_name.c_str(),
                s.headline);
    for (const auto& e : s.extras) {
        std::printf("  %s = %.12g\n", e.name.c_str(), e.value);
    }
    std::printf("  config_hash = %s\n", s.config_hash.c_str());
    for (const auto& o : s.outputs) std::printf("  wrote %s\n", o.c_str());
    std::printf("  wall_time_s = %.3f\n", s.wall_seconds);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-photon waveguide QED scenario runner"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string output_dir = ".";
    std::string format;
    unsigned threads = 1;

    CLI::App* cmd_run = app.add_subcommand("run", "run one scenario file");
    cmd_run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    cmd_run->add_option("--output-dir", output_dir, "directory for artifacts");
    cmd_run->add_option("--format", format, "override output format (csv|json)");
    cmd_run->add_option("--threads", threads, "worker threads");

    std::string param;
    std::vector<double> values;
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "fan a scenario out over a parameter");
    cmd_sweep->add_option("scenario", scenario_path, "scenario JSON file")->required();
    cmd_sweep->add_option("--param", param, "dot path of the scalar to sweep")->required();
    cmd_sweep->add_option("--values", values, "values to run")->required()->delimiter(',');
    cmd_sweep->add_option("--output-dir", output_dir, "directory for artifacts");
    cmd_sweep->add_option("--format", format, "override output format (csv|json)");
    cmd_sweep->add_option("--threads", threads, "worker threads");

    CLI11_PARSE(app, argc, argv);

    try {
        wgqed::Scenario scenario = wgqed::scenario_from_file(scenario_path);
        if (!format.empty()) scenario.format = format;
        if (cmd_run->parsed()) {
            print_summary(wgqed::run(scenario, output_dir, threads));
        } else {
            for (const auto& s : wgqed::sweep(scenario, param, values, output_dir, threads)) {
                print_summary(s);
            }
        }
    } catch (const wgqed::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_validation() ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
