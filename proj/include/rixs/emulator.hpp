// emulator.hpp - matrix-scale emulation of RIXS-state preparation and windowed walk-QPE sampling
#pragma once

#include <rixs/exact_spectra.hpp>
#include <rixs/fock.hpp>
#include <rixs/resolvent.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rixs::emulator {

using fock::cplx;
using fock::SparseOperator;
using spectra::SpectralDecomposition;
using spectra::SpectrumResult;

struct GroundState {
    double energy;
    Eigen::VectorXcd vector;

    static GroundState from(const SpectralDecomposition& d) { return {d.ground_energy(), d.ground_state()}; }
};

class DarkStateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PrepMethod {
    enum class Kind { exact, chebyshev };
    Kind kind = Kind::exact;
    int degree = 0;
    double lambda = 1.0;
    // The walk operator encodes H - energy_offset; lambda bounds that operator.
    double energy_offset = 0.0;

    static PrepMethod exact() { return {}; }
    static PrepMethod chebyshev(int degree, double lambda, double energy_offset = 0.0) {
        return {Kind::chebyshev, degree, lambda, energy_offset};
    }
};

struct RixsState {
    Eigen::VectorXcd vector;  // normalized, or zero when vanishing
    double norm = 0.0;        // |R| = ||D_out† G D_in |E_0>||
    double dipole_norm = 0.0; // |D_in| = ||D_in |E_0>||
    double gamma = 0.0;
    bool vanishing = false;

    Eigen::VectorXcd unnormalized() const { return norm * vector; }
};

RixsState prepare_rixs_state(const SparseOperator& h, const GroundState& ground, const SparseOperator& d_in,
                             const SparseOperator& d_out, double omega_in, double gamma, const PrepMethod& method);

// P_R = (gamma |R| / (lambda_D |D_in|))^2
double success_probability(const RixsState& state, double lambda_d);

// K_A = floor(pi / (4 asin sqrt(P_R)))
int amplification_rounds(double p_r);

enum class WindowKind { uniform, kaiser };
// energy_loss: lambda cos(theta) + offset - E_0.  e0_plus: E_0 + lambda cos(theta), the sign-flipped variant.
enum class AxisConvention { energy_loss, e0_plus };

struct QpeModel {
    int n_omega = 10;
    WindowKind window = WindowKind::kaiser;
    double kaiser_beta = 13.0;
    double lambda = 1.0;
    double e0 = 0.0;
    double energy_offset = 0.0;
    AxisConvention axis = AxisConvention::energy_loss;

    std::size_t bins() const { return std::size_t{1} << n_omega; }
    void validate() const;
};

// Unit-norm register amplitudes for the chosen window.
Eigen::VectorXd window_amplitudes(const QpeModel& model);

// Phase of bin j folded into [0, pi].
double bin_theta(const QpeModel& model, std::size_t bin);
// Energy-loss (Hartree) assigned to bin j under the model's axis convention.
double bin_energy_loss(const QpeModel& model, std::size_t bin);

// Leakage kernel of one eigenphase theta over all bins (sums to 1).
Eigen::VectorXd leakage_kernel(const QpeModel& model, double theta);

// Measurement distribution over 2^n_omega bins for eigenstates with the given weights
// |c_f|^2 (summing to 1) and energies E_f (Hartree).
Eigen::VectorXd qpe_distribution(const QpeModel& model, const Eigen::VectorXd& weights, const Eigen::VectorXd& energies);

// Weights |<E_f|R>|^2 of a prepared state in the eigenbasis.
Eigen::VectorXd eigenbasis_weights(const RixsState& state, const SpectralDecomposition& decomp);

struct QpeSample {
    std::size_t shot;
    std::size_t bin;
    double theta;
    double omega_ev;
};

struct SampledSpectrum {
    SpectrumResult spectrum;          // histogram at bin_width_ev (probability per bin)
    std::vector<QpeSample> samples;   // empty in analytic mode
    Eigen::VectorXd distribution;     // analytic bin distribution
};

// Deterministic sampler: mt19937_64 with an explicit 53-bit uniform, so streams do not
// depend on the standard library's distribution implementations.
class SampleStream {
public:
    explicit SampleStream(std::uint64_t seed);
    double uniform();
    // Inverse-CDF draw from a cumulative distribution whose last entry is the total.
    std::size_t draw(const std::vector<double>& cumulative);

private:
    std::mt19937_64 engine_;
};

SampledSpectrum sample_spectrum(const QpeModel& model, const RixsState& state, const SpectralDecomposition& decomp,
                                std::size_t shots, std::uint64_t seed, double bin_width_ev = 0.2);

// Infinite-shot limit: the analytic distribution pushed through the axis map.
SampledSpectrum analytic_spectrum(const QpeModel& model, const RixsState& state, const SpectralDecomposition& decomp,
                                  double bin_width_ev = 0.2);

void write_samples_csv(std::ostream& out, const std::vector<QpeSample>& samples);

// Histogram helpers on an axis aligned to multiples of width.
struct Histogram {
    long first_index = 0;
    double width = 0.2;
    Eigen::VectorXd mass;  // probability per bin

    double center(Eigen::Index i) const { return (static_cast<double>(first_index + i) + 0.5) * width; }
};
Histogram histogram(const std::vector<double>& x, const std::vector<double>& weights, double width);
// Two histograms on a common index range.
void align(Histogram& a, Histogram& b);

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
// E[TV(empirical, p)] for `shots` multinomial draws, exact per-bin binomial mean absolute deviation.
double expected_multinomial_tv(const Eigen::VectorXd& p, std::size_t shots);

struct ReferenceSpectrum {
    Eigen::VectorXd omega_ev;
    Eigen::VectorXd intensity;  // normalized to unit sum
};
ReferenceSpectrum read_reference_csv(std::istream& in);

struct ReconstructionResult {
    Histogram reference;
    Histogram sampled;
    double tv = 0.0;
    double expected_tv = 0.0;
};

// Draws `shots` samples from a reference spectrum and compares the binned reconstruction.
ReconstructionResult reconstruct_reference(const ReferenceSpectrum& ref, std::size_t shots, std::uint64_t seed,
                                           double bin_width_ev = 0.2);

} // namespace rixs::emulator
