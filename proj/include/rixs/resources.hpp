// resources.hpp - logical resource counts for the RIXS sampling algorithm
//
//   T_tot = ((2 K_A + 1) * 2 K_G + 2^n_omega) * T_W
//   n_tot = 2 N_a + max(n_omega, n_D + 4) + n_W
//
// The walk-operator cost (T_W, n_W) is a plugin.
#pragma once

#include <rixs/resolvent.hpp>

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace rixs::resources {

// N = ceil(pi lambda / (sqrt(2) eps)), lambda and eps in the same unit.
long long walk_calls(double lambda, double eps);
// ceil(log2 N)
int phase_bits(long long n_calls);

// 3 ceil(log2 N_a) + 2 aleph_mu + 2
int dipole_qubits(int n_a, int aleph_mu);

struct DipoleEncoding {
    int n_d = 0;
    double lambda_d = 0.0;  // sum of |eigenvalues| of the masked one-body dipole
    bool zero = false;      // lambda_d == 0: success probability undefined downstream
};
DipoleEncoding dipole_block_encoding(int n_a, int aleph_mu, const Eigen::MatrixXd& dipole);

struct CostModelParams {
    int aleph = 13;     // alias-sampling precision bits
    int beth = 13;      // Givens rotation precision bits
    int aleph_mu = 13;  // dipole coefficient bits
    int n_t = 0;        // THC rank; 0 means 3 N_a
    int n_a = 0;

    int rank() const { return n_t > 0 ? n_t : 3 * n_a; }
    void validate() const;
};

struct WalkCost {
    double toffoli = 0.0;  // T_W
    long long qubits = 0;  // n_W
};

struct WalkModel {
    std::string name;
    std::function<WalkCost(const CostModelParams&)> cost;
};

WalkModel user_supplied(double t_w, long long n_w);

// T_W = a N_T + b N_a beth + c 2^(ceil(log2 N_T^2)/2),  n_W = ceil(d N_a + e)
struct AffineThc {
    double a = 0.0, b = 2.0, c = 0.0, d = 0.0, e = 0.0;
    WalkCost operator()(const CostModelParams& p) const;
};

struct CalibrationAnchor {
    int n_a;
    double lambda;
    double t_tot;
    long long n_tot;
};
// Reference estimates for 16- and 30-orbital active spaces (sqrt(P_R) = 0.06, eps = 0.2 eV,
// Gamma = 0.3 eV, calibrated K_G, aleph = beth = aleph_mu = 13, N_T = 3 N_a).
std::vector<CalibrationAnchor> default_anchors();
// Solves (a, c) and (d, e) from two anchors with b held fixed.
AffineThc calibrate_affine_thc(const CalibrationAnchor& lo, const CalibrationAnchor& hi, double b = 2.0);
WalkModel affine_thc(const AffineThc& model);
WalkModel affine_thc();  // calibrated on default_anchors()

struct ResourceInputs {
    CostModelParams cost;
    double lambda = 0.0;     // Ha
    double eps_omega = 0.0;  // Ha
    double gamma = 0.0;      // Ha
    double p_r = 0.0;        // success probability in (0, 1]
    resolvent::DegreeMode degree = resolvent::DegreeMode::calibrated();
    double lambda_d = 0.0;   // optional, reported only
    long long shots = 2000;

    void validate() const;
};

struct ResourceReport {
    std::string walk_model;
    int n_a = 0;
    int n_t = 0;
    double lambda = 0.0;
    double eps_omega = 0.0;
    double gamma = 0.0;
    long long k_g = 0;
    double p_r = 0.0;
    int k_a = 0;
    long long n_calls = 0;
    int n_omega = 0;
    int n_d = 0;
    double lambda_d = 0.0;
    long long n_w = 0;
    double t_w = 0.0;
    long long n_tot = 0;
    double t_tot = 0.0;
    long long shots = 0;
    double prep_to_qpe_ratio = 0.0;  // (2 K_A + 1) 2 K_G / 2^n_omega
};

ResourceReport totals(const ResourceInputs& in, const WalkModel& walk);

// Inverts the totals for the walk cost given a target (T_tot, n_tot).
WalkCost back_solve(const ResourceInputs& in, double t_tot, long long n_tot);
WalkModel back_solve_model(const ResourceInputs& in, double t_tot, long long n_tot);

struct SystemSpec {
    std::string label;
    int n_e = 0;
    int n_a = 0;
    int two_sz = 1;
    ResourceInputs inputs;  // inputs.cost.n_a is overwritten with n_a
    WalkModel walk;         // empty cost function: use the table-wide model
};

struct TableRow {
    SystemSpec system;
    unsigned __int128 fci_dimension = 0;
    ResourceReport report;
};

std::vector<TableRow> table_report(const std::vector<SystemSpec>& systems, const WalkModel& walk);

std::string format_sig(double x, int digits = 3);
std::string to_string(unsigned __int128 x);

void write_report_text(std::ostream& out, const ResourceReport& r);
void write_report_json(std::ostream& out, const ResourceReport& r);
void write_table_text(std::ostream& out, const std::vector<TableRow>& rows);
void write_table_json(std::ostream& out, const std::vector<TableRow>& rows);

} // namespace rixs::resources
