// exact_spectra.hpp - eigensolvers and Kramers-Heisenberg XAS/RIXS spectra
//
// Energies, widths and frequencies passed in are Hartree. SpectrumResult reports
// its x axis in eV because that is what gets plotted and compared.
#pragma once

#include <rixs/fock.hpp>

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace rixs::spectra {

using fock::cplx;
using fock::SparseOperator;

struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;    // ascending, Hartree
    Eigen::MatrixXcd eigenvectors;  // orthonormal columns

    Eigen::Index size() const noexcept { return eigenvalues.size(); }
    double ground_energy() const { return eigenvalues(0); }
    Eigen::VectorXcd ground_state() const { return eigenvectors.col(0); }
    // True when every eigenpair of the operator is present.
    bool complete() const noexcept { return eigenvectors.rows() == eigenvectors.cols(); }
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (achieved residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

struct DiagonalizeOptions {
    enum class Mode { full, lowest_k };
    Mode mode = Mode::full;
    int k = 1;
    double tolerance = 1e-9;  // relative to ||H||
    int max_restarts = 200;
    std::uint64_t seed = 0x5eed;

    static DiagonalizeOptions full() { return {}; }
    static DiagonalizeOptions lowest(int k) {
        DiagonalizeOptions o;
        o.mode = Mode::lowest_k;
        o.k = k;
        return o;
    }
};

SpectralDecomposition diagonalize(const SparseOperator& op, const DiagonalizeOptions& opts = DiagonalizeOptions::full());
SpectralDecomposition diagonalize_dense(const Eigen::MatrixXcd& h);

struct Stick {
    double x_ev;
    double weight;
};

struct SpectrumMetadata {
    std::string kind;             // "xas", "rixs", "rixs-qpe", ...
    std::string lineshape = "lorentzian";
    double omega_in_ev = 0.0;
    double gamma_ev = 0.0;
    double eta_ev = 0.0;          // width of the declared lineshape (eV)
    Eigen::Vector3d eps_in = Eigen::Vector3d::UnitX();
    Eigen::Vector3d eps_out = Eigen::Vector3d::UnitX();
};

struct SpectrumResult {
    std::vector<Stick> sticks;
    Eigen::VectorXd grid_ev;
    Eigen::VectorXd intensity;
    SpectrumMetadata meta;

    double total_weight() const;
};

// Unit-area Lorentzian, half width at half maximum `width`.
inline double lorentzian(double x, double x0, double width) {
    constexpr double inv_pi = 0.318309886183790671537767526745;
    const double dx = x - x0;
    return inv_pi * width / (dx * dx + width * width);
}

Eigen::VectorXd broaden(const std::vector<Stick>& sticks, const Eigen::VectorXd& grid_ev, double width_ev);

// Sticks closer than tol_ev are merged by weight sum at the first stick's position.
std::vector<Stick> merge_degenerate(std::vector<Stick> sticks, double tol_ev);

Eigen::VectorXd uniform_grid(double lo, double hi, double step);

SpectrumResult xas_spectrum(const SpectralDecomposition& decomp, const SparseOperator& dipole,
                            const Eigen::VectorXd& grid_ev, double gamma);

struct RixsAmplitude {
    Eigen::Index final_state;
    double energy_loss;  // E_f - E_0, Hartree
    cplx amplitude;      // W_f0
};

inline constexpr double kNoWindow = std::numeric_limits<double>::infinity();

// W_f0 = sum_n <f|D_out†|n><n|D_in|0> / (omega_in - (E_n - E_0) + i gamma), intermediate
// states restricted to |(E_n - E_0) - omega_in| <= window.
std::vector<RixsAmplitude> rixs_amplitudes(const SpectralDecomposition& decomp, const SparseOperator& d_in,
                                           const SparseOperator& d_out, double omega_in, double gamma,
                                           double window = kNoWindow);

SpectrumResult rixs_spectrum(const std::vector<RixsAmplitude>& amplitudes, double eta, const Eigen::VectorXd& grid_ev);

} // namespace rixs::spectra
