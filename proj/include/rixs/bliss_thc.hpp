// bliss_thc.hpp - block-invariant symmetry shift, THC factorization and the LCU 1-norm
//
//   H_B = H - a1 N - a2 N^2 - 1/2 sum_pq beta_pq (E_pq (N - N_e) + h.c.)
//
// agrees with H on the N_e-electron sector up to the constant -a1 N_e - a2 N_e^2.
// The two-body part of H_B is approximated by
//   V~_pqrs ~ sum_{mu,nu} zeta_{mu nu} u_mu,p u_mu,q u_nu,r u_nu,s
// with unit vectors u_mu (one per THC rank).
#pragma once

#include <rixs/integrals.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace rixs::bliss {

struct BlissParams {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    Eigen::MatrixXd beta;  // symmetric n x n

    static BlissParams zero(int n_orb) { return {0.0, 0.0, Eigen::MatrixXd::Zero(n_orb, n_orb)}; }
    void validate(int n_orb) const;
};

struct ShiftedTensors {
    Eigen::MatrixXd h;
    qchem::TwoBodyTensor v;
    double constant = 0.0;
};

ShiftedTensors apply_bliss(const qchem::IntegralSet& ints, const BlissParams& params, int n_elec);

// Integral set carrying the shifted tensors, ready for fock::build_hamiltonian.
qchem::IntegralSet shifted_integrals(const qchem::IntegralSet& ints, const BlissParams& params, int n_elec);

// kappa_pq = h~_pq - 1/2 sum_r V_prrq + sum_r V~_pqrr - a1 delta_pq + 2 N_e beta_pq
// (original V in the second term, shifted V~ in the third; a1 and beta enter again
// on top of what h~ already carries).
Eigen::MatrixXd kappa_matrix(const qchem::IntegralSet& original, const ShiftedTensors& shifted, const BlissParams& params,
                             int n_elec);

// Eigenvalues of kappa; throws std::logic_error if kappa is asymmetric beyond 1e-10.
Eigen::VectorXd one_body_eigenvalues(const Eigen::MatrixXd& kappa);

// lambda = sum |t_p| + 1/2 sum_{mu nu} |zeta_{mu nu}| - 1/4 sum_mu |zeta_{mu mu}|
double two_body_norm(const Eigen::MatrixXd& zeta);
double one_norm(const Eigen::VectorXd& t, const Eigen::MatrixXd& zeta);

struct ThcFactors {
    int rank = 0;
    Eigen::MatrixXd zeta;   // rank x rank, symmetric
    Eigen::MatrixXd u;      // n_orb x rank, unit columns
    Eigen::VectorXd t;      // eigenvalues of kappa (may be empty)
    BlissParams bliss;
    double residual = 0.0;  // ||V~ - THC||_F at fit time

    double lambda() const { return one_norm(t, zeta); }
};

// n^2 x n^2 matricization of sum zeta_{mu nu} chi^{mu nu}.
Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& u, const Eigen::MatrixXd& zeta);

struct ThcOptions {
    int restarts = 4;              // restart 0 is the deterministic init, the rest are perturbed
    int max_iterations = 3000;     // L-BFGS iterations for the unpenalized fit
    int penalty_iterations = 300;  // per rho stage; each step runs an inner lasso solve
    double gradient_tolerance = 1e-13;
    int rho_stages = 3;            // geometric anneal rho/10^(s-1) ... rho
    std::uint64_t seed = 0x7c0ffee;
};

struct ThcFit {
    ThcFactors factors;
    double residual = 0.0;
    double two_body_lambda = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Minimizes 1/2 ||V~ - sum zeta chi||_F^2 + rho * lambda_2(zeta) over zeta and the hyperspherical
// angles of the u vectors. `warm_start` (n x rank) replaces the deterministic init if given; with
// rho > 0 it skips the unpenalized fit and the anneal and polishes at rho directly.
ThcFit fit_thc(const qchem::TwoBodyTensor& v, int rank, double rho, const ThcOptions& options = {},
               const Eigen::MatrixXd* warm_start = nullptr);

double default_rho(const qchem::TwoBodyTensor& v);

enum class BlissMode { full, alpha_only, none };

struct BlissThcResult {
    BlissParams params;
    ThcFactors factors;
    double lambda = 0.0;
    double baseline_lambda = 0.0;     // alpha = beta = 0 fit with the same rank and options
    std::vector<double> history;      // best objective lambda after each outer iteration
    bool improved = false;
};

struct BlissSearchOptions {
    int max_evaluations = 200;
    int candidate_iterations = 60;  // penalized L-BFGS steps per trial point, warm from the baseline
    ThcOptions thc;
};

BlissThcResult optimize_bliss_thc(const qchem::IntegralSet& ints, int n_elec, int rank, double rho, BlissMode mode,
                                  const BlissSearchOptions& options = {});

void write_factors_json(std::ostream& out, const ThcFactors& f);
ThcFactors read_factors_json(std::istream& in);

} // namespace rixs::bliss
