// cli.hpp - the `rixs` command-line driver as a callable library
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rixs::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,      // anything unclassified
    kUsage = 2,        // bad flags or config file
    kInput = 3,        // unreadable or malformed input files
    kPhysics = 4,      // invalid physical parameters (Gamma <= 0, dark ground state, ...)
    kSector = 5,       // (N_e, S_z) sector does not exist for the active space
    kConvergence = 6,  // numerical non-convergence
};

struct RunConfig {
    // inputs
    std::string fcidump;
    std::string dipole;
    std::string factors;
    std::string reference;
    std::string output_dir = "rixs-out";
    int n_elec = -1;  // -1: from FCIDUMP
    int two_sz = -1000;

    // physics (eV at the boundary)
    std::vector<double> omega_in_ev;
    double gamma_ev = 0.3;
    double eta_ev = 0.2;
    double window_ev = 50.0;
    std::vector<double> eps_in{1.0, 0.0, 0.0};
    std::vector<double> eps_out{1.0, 0.0, 0.0};
    bool full_dipole = false;
    std::vector<double> xas_range_ev;
    double xas_step_ev = 0.05;
    std::vector<double> loss_range_ev;
    double loss_step_ev = 0.02;
    int max_full_dim = 5000;
    int n_states = 8;

    // emulation
    int n_omega = 0;  // 0: from walk_calls(lambda, eps_omega)
    std::string window = "kaiser";
    double kaiser_beta = 13.0;
    long long shots = 2000;
    std::uint64_t seed = 7;
    std::string axis = "energy-loss";
    std::string prep = "exact";
    std::string degree_mode = "calibrated";
    double degree_epsilon = 1e-2;
    double lambda = 0.0;
    double energy_offset = 0.0;
    bool energy_offset_set = false;
    double bin_width_ev = 0.2;

    // estimation
    int aleph = 13;
    int beth = 13;
    int aleph_mu = 13;
    int n_t = 0;
    double rho = -1.0;  // < 0: default
    std::string bliss = "full";
    int bliss_evaluations = 120;
    int thc_restarts = 2;
    int n_a = 0;
    double sqrt_pr = 0.0;
    double eps_omega_ev = 0.2;
    std::string walk_model = "affine-thc";
    double t_w = 0.0;
    long long n_w = 0;
    double target_t_tot = 0.0;
    long long target_n_tot = 0;
};

// Runs the driver on an argument list (args[0] is the program name). Normal output goes to
// `out`, diagnostics to `err`. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rixs::cli
