#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "chbctl/config.hpp"
#include "chbctl/csv.hpp"
#include "chbctl/dynamics.hpp"
#include "chbctl/adjoint.hpp"

namespace chb {

/// steady, simulate, control, source-term, nonlinear, carleman, sweep
const std::vector<std::string>& experiment_names();

struct RunReport {
    std::string subcommand;
    std::vector<std::string> files;  // written into the output directory, manifest last
    std::map<std::string, double> metrics;
    double wall_seconds = 0.0;
};

/// Runs one subcommand with a resolved config and writes its CSV files plus
/// manifest.json into `out_dir` (created if missing).  CSV contents depend
/// only on the config, so reruns are byte-identical.
RunReport run_experiment(const std::string& subcommand, const Config& config, const std::filesystem::path& out_dir);

/// Field from a profile spec evaluated at xs:
///   zero | sine k amp | cosine k amp | random amp | csv PATH [COLUMN]
/// "sine k amp" is amp sin(k pi x).  "random amp" draws N(0,1) nodal values
/// from rng, normalized to a maximum modulus of amp.  A csv column must have
/// one row per x.
std::vector<double> profile_values(const std::string& spec, const std::vector<double>& xs, std::mt19937_64& rng);

/// Long-format tables shared by the subcommands.  Dirichlet fields are
/// written with their zero end values; states are written every `every`
/// steps plus the last one.
Table trajectory_table(const Grid& grid, const Trajectory& traj, int every = 1);
Table adjoint_table(const Grid& grid, const AdjointTrajectory& adj, int every = 1);
Table control_table(const Grid& grid, const ControlSignal& control, double dt, double t0 = 0.0, int every = 1);
Table snapshot_table(const Grid& grid, const CoupledState& y);

}  // namespace chb
