// Command-line driver: one subcommand per experiment, CSV output plus a
// manifest in --out.
#include <CLI11.hpp>

#include <iostream>

#include "chbctl/config.hpp"
#include "chbctl/errors.hpp"
#include "chbctl/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Null-control experiments for the linearized Cahn-Hilliard-Burgers system"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::vector<std::string> overrides;
    long long seed = -1;
    bool print_config = false;
    app.add_option("--config", config_path, "Config file (sections of key = value)")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", seed, "Seed for the random generator (overrides run.seed)")->check(CLI::NonNegativeNumber);
    app.add_option("--override", overrides, "section.key=value, repeatable")->take_all();
    app.add_flag("--print-config", print_config, "Print the resolved config and exit");

    for (const auto& name : chb::experiment_names()) app.add_subcommand(name)->fallthrough();

    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        const std::filesystem::path cfg_file(config_path);
        if (seed >= 0) overrides.push_back("run.seed=" + std::to_string(seed));
        const chb::Config cfg = chb::resolve_config(config_path.empty() ? nullptr : &cfg_file, overrides);
        if (print_config) {
            std::cout << cfg.to_string();
            return 0;
        }
        const chb::RunReport r = chb::run_experiment(sub, cfg, out_dir);
        std::cout << sub << " finished in " << r.wall_seconds << " s\n";
        for (const auto& [k, v] : r.metrics) std::cout << "  " << k << " = " << chb::format_double(v) << '\n';
        std::cout << "wrote";
        for (const auto& f : r.files) std::cout << ' ' << f;
        std::cout << " to " << out_dir << '\n';
    } catch (const chb::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
