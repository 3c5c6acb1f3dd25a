#include <rixs/emulator.hpp>
#include <rixs/units.hpp>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace rixs::emulator {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXcd solve_resolvent_exact(const SparseOperator& h, double shift, double gamma, const Eigen::VectorXcd& rhs) {
    // ((omega + E_0 + i Gamma) - H) x = rhs
    const Eigen::Index n = h.dimension();
    Eigen::SparseMatrix<cplx> a = -Eigen::SparseMatrix<cplx>(h.matrix());
    Eigen::SparseMatrix<cplx> id(n, n);
    id.setIdentity();
    a += cplx(shift, gamma) * id;
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw std::runtime_error("prepare_rixs_state: resolvent factorization failed");
    Eigen::VectorXcd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw std::runtime_error("prepare_rixs_state: resolvent solve failed");
    return x;
}

SparseOperator shifted(const SparseOperator& h, double offset) {
    if (offset == 0.0) return h;
    fock::SparseMatrix m = h.matrix();
    fock::SparseMatrix id(m.rows(), m.cols());
    id.setIdentity();
    m -= cplx(offset, 0.0) * id;
    return SparseOperator(std::move(m), h.hermitian());
}

double log_binomial(std::size_t n, std::size_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

// De Moivre: E|X - np| = 2 v C(n,v) p^v (1-p)^(n-v+1), v = floor(np) + 1.
double binomial_mean_abs_deviation(std::size_t n, double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    const auto v = static_cast<std::size_t>(std::floor(static_cast<double>(n) * p)) + 1;
    if (v > n) return 0.0;
    const double lg = log_binomial(n, v) + static_cast<double>(v) * std::log(p) +
                      static_cast<double>(n - v + 1) * std::log1p(-p);
    return 2.0 * static_cast<double>(v) * std::exp(lg);
}

std::vector<double> cumulative(const Eigen::VectorXd& p) {
    std::vector<double> c(static_cast<std::size_t>(p.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        acc += p(i);
        c[static_cast<std::size_t>(i)] = acc;
    }
    return c;
}

SpectrumResult histogram_spectrum(const std::vector<spectra::Stick>& sticks, double width_ev) {
    std::vector<double> x, w;
    for (const auto& s : sticks) {
        x.push_back(s.x_ev);
        w.push_back(s.weight);
    }
    const Histogram hist = histogram(x, w, width_ev);
    SpectrumResult r;
    r.sticks = sticks;
    r.grid_ev.resize(hist.mass.size());
    for (Eigen::Index i = 0; i < hist.mass.size(); ++i) r.grid_ev(i) = hist.center(i);
    r.intensity = hist.mass;
    r.meta.kind = "rixs-qpe";
    r.meta.lineshape = "histogram";
    r.meta.eta_ev = width_ev;
    return r;
}

Eigen::VectorXd checked_weights(const RixsState& state, const SpectralDecomposition& decomp) {
    if (state.vanishing) throw std::invalid_argument("sample_spectrum: RIXS state vanishes, nothing to sample");
    if (!decomp.complete()) throw std::invalid_argument("sample_spectrum: needs a complete eigendecomposition");
    return eigenbasis_weights(state, decomp);
}

} // namespace

RixsState prepare_rixs_state(const SparseOperator& h, const GroundState& ground, const SparseOperator& d_in,
                             const SparseOperator& d_out, double omega_in, double gamma, const PrepMethod& method) {
    if (!(gamma > 0.0)) throw std::invalid_argument("prepare_rixs_state: gamma must be positive");
    if (h.dimension() != ground.vector.size() || d_in.dimension() != h.dimension() || d_out.dimension() != h.dimension())
        throw std::invalid_argument("prepare_rixs_state: dimension mismatch");
    const Eigen::VectorXcd excited = d_in.apply(ground.vector);
    RixsState s;
    s.gamma = gamma;
    s.dipole_norm = excited.norm();
    if (s.dipole_norm == 0.0) throw DarkStateError("prepare_rixs_state: dark ground state (D_in|E_0> = 0)");

    Eigen::VectorXcd g;
    if (method.kind == PrepMethod::Kind::exact) {
        g = solve_resolvent_exact(h, omega_in + ground.energy, gamma, excited);
    } else {
        const auto r = resolvent::expand(method.lambda, omega_in, gamma, ground.energy - method.energy_offset, method.degree);
        g = resolvent::apply(r, shifted(h, method.energy_offset), excited) / gamma;
    }
    const Eigen::VectorXcd rixs = d_out.apply_adjoint(g);
    s.norm = rixs.norm();
    if (s.norm == 0.0) {
        s.vanishing = true;
        s.vector = Eigen::VectorXcd::Zero(rixs.size());
    } else {
        s.vector = rixs / s.norm;
    }
    return s;
}

double success_probability(const RixsState& state, double lambda_d) {
    if (!(state.dipole_norm > 0.0)) throw std::invalid_argument("success_probability: |D_in| must be positive");
    if (!(lambda_d > 0.0)) throw std::invalid_argument("success_probability: lambda_D must be positive");
    const double amp = state.gamma * state.norm / (lambda_d * state.dipole_norm);
    const double p = amp * amp;
    if (p > 1.0 + 1e-12)
        throw std::logic_error("success_probability: P_R = " + std::to_string(p) + " > 1; lambda_D does not bound D_out");
    return p;
}

int amplification_rounds(double p_r) {
    if (!(p_r > 0.0 && p_r <= 1.0)) throw std::invalid_argument("amplification_rounds: P_R must lie in (0, 1]");
    return static_cast<int>(std::floor(kPi / (4.0 * std::asin(std::sqrt(p_r)))));
}

void QpeModel::validate() const {
    if (n_omega < 1 || n_omega > 30) throw std::invalid_argument("QpeModel: n_omega must be in [1, 30]");
    if (window == WindowKind::kaiser && !(kaiser_beta > 0.0)) throw std::invalid_argument("QpeModel: Kaiser beta must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("QpeModel: lambda must be positive");
}

Eigen::VectorXd window_amplitudes(const QpeModel& model) {
    model.validate();
    const auto m = static_cast<Eigen::Index>(model.bins());
    Eigen::VectorXd w(m);
    if (model.window == WindowKind::uniform || m == 1) {
        w.setConstant(1.0);
    } else {
        for (Eigen::Index k = 0; k < m; ++k) {
            const double t = 2.0 * static_cast<double>(k) / static_cast<double>(m - 1) - 1.0;
            w(k) = std::cyl_bessel_i(0.0, model.kaiser_beta * std::sqrt(std::max(0.0, 1.0 - t * t)));
        }
    }
    return w / w.norm();
}

double bin_theta(const QpeModel& model, std::size_t bin) {
    const double phi = 2.0 * kPi * static_cast<double>(bin) / static_cast<double>(model.bins());
    return phi <= kPi ? phi : 2.0 * kPi - phi;
}

double bin_energy_loss(const QpeModel& model, std::size_t bin) {
    const double c = model.lambda * std::cos(bin_theta(model, bin));
    if (model.axis == AxisConvention::e0_plus) return model.e0 + c;
    return c + model.energy_offset - model.e0;
}

namespace {

// Kernel for a precomputed register window (ignored for the uniform case).
Eigen::VectorXd kernel_with(const QpeModel& model, const Eigen::VectorXd& w, Eigen::FFT<double>& fft, double theta) {
    const std::size_t m = model.bins();
    const double md = static_cast<double>(m);
    Eigen::VectorXd p(static_cast<Eigen::Index>(m));
    if (model.window == WindowKind::uniform) {
        // Fejer kernel sin^2(M d/2) / (M^2 sin^2(d/2))
        for (std::size_t j = 0; j < m; ++j) {
            const double d = theta - 2.0 * kPi * static_cast<double>(j) / md;
            const double den = std::sin(0.5 * d);
            const double num = std::sin(0.5 * md * d);
            p(static_cast<Eigen::Index>(j)) = std::abs(den) < 1e-15 ? 1.0 : (num * num) / (md * md * den * den);
        }
        return p;
    }
    std::vector<cplx> in(m), out;
    for (std::size_t k = 0; k < m; ++k) in[k] = w(static_cast<Eigen::Index>(k)) * std::polar(1.0, theta * static_cast<double>(k));
    fft.fwd(out, in);
    for (std::size_t j = 0; j < m; ++j) p(static_cast<Eigen::Index>(j)) = std::norm(out[j]) / md;
    return p;
}

} // namespace

Eigen::VectorXd leakage_kernel(const QpeModel& model, double theta) {
    model.validate();
    Eigen::FFT<double> fft;
    return kernel_with(model, window_amplitudes(model), fft, theta);
}

Eigen::VectorXd qpe_distribution(const QpeModel& model, const Eigen::VectorXd& weights, const Eigen::VectorXd& energies) {
    model.validate();
    if (weights.size() != energies.size()) throw std::invalid_argument("qpe_distribution: weights/energies size mismatch");
    if (std::abs(weights.sum() - 1.0) > 1e-10 || (weights.array() < 0.0).any())
        throw std::invalid_argument("qpe_distribution: weights must be non-negative and sum to 1");
    Eigen::VectorXd dist = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.bins()));
    const Eigen::VectorXd w = window_amplitudes(model);
    Eigen::FFT<double> fft;
    for (Eigen::Index f = 0; f < energies.size(); ++f) {
        const double x = (energies(f) - model.energy_offset) / model.lambda;
        if (std::abs(x) > 1.0 + 1e-12)
            throw std::invalid_argument("qpe_distribution: |E_f| = " + std::to_string(std::abs(energies(f) - model.energy_offset)) +
                                        " exceeds lambda = " + std::to_string(model.lambda));
        if (weights(f) == 0.0) continue;
        dist += weights(f) * kernel_with(model, w, fft, std::acos(std::clamp(x, -1.0, 1.0)));
    }
    return dist;
}

Eigen::VectorXd eigenbasis_weights(const RixsState& state, const SpectralDecomposition& decomp) {
    return (decomp.eigenvectors.adjoint() * state.vector).cwiseAbs2();
}

SampleStream::SampleStream(std::uint64_t seed) : engine_(seed) {}

double SampleStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t SampleStream::draw(const std::vector<double>& cum) {
    const double u = uniform() * cum.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cum.begin());
    if (i >= cum.size()) i = cum.size() - 1;
    return i;
}

SampledSpectrum sample_spectrum(const QpeModel& model, const RixsState& state, const SpectralDecomposition& decomp,
                                std::size_t shots, std::uint64_t seed, double bin_width_ev) {
    if (shots < 1) throw std::invalid_argument("sample_spectrum: shots must be >= 1");
    SampledSpectrum out;
    out.distribution = qpe_distribution(model, checked_weights(state, decomp), decomp.eigenvalues);
    const auto cum = cumulative(out.distribution);
    SampleStream stream(seed);
    std::map<std::size_t, std::size_t> counts;
    out.samples.reserve(shots);
    for (std::size_t s = 0; s < shots; ++s) {
        const std::size_t bin = stream.draw(cum);
        ++counts[bin];
        out.samples.push_back({s, bin, bin_theta(model, bin), hartree_to_ev(bin_energy_loss(model, bin))});
    }
    std::vector<spectra::Stick> sticks;
    for (const auto& [bin, c] : counts)
        sticks.push_back({hartree_to_ev(bin_energy_loss(model, bin)), static_cast<double>(c) / static_cast<double>(shots)});
    out.spectrum = histogram_spectrum(spectra::merge_degenerate(std::move(sticks), 1e-12), bin_width_ev);
    return out;
}

SampledSpectrum analytic_spectrum(const QpeModel& model, const RixsState& state, const SpectralDecomposition& decomp,
                                  double bin_width_ev) {
    SampledSpectrum out;
    out.distribution = qpe_distribution(model, checked_weights(state, decomp), decomp.eigenvalues);
    std::vector<spectra::Stick> sticks;
    for (Eigen::Index j = 0; j < out.distribution.size(); ++j)
        if (out.distribution(j) > 0.0)
            sticks.push_back({hartree_to_ev(bin_energy_loss(model, static_cast<std::size_t>(j))), out.distribution(j)});
    out.spectrum = histogram_spectrum(spectra::merge_degenerate(std::move(sticks), 1e-12), bin_width_ev);
    return out;
}

void write_samples_csv(std::ostream& out, const std::vector<QpeSample>& samples) {
    const auto prec = out.precision(17);
    out << "shot_index,bin,theta,omega_eV\n";
    for (const auto& s : samples) out << s.shot << ',' << s.bin << ',' << s.theta << ',' << s.omega_ev << '\n';
    out.precision(prec);
}

Histogram histogram(const std::vector<double>& x, const std::vector<double>& weights, double width) {
    if (!(width > 0.0)) throw std::invalid_argument("histogram: width must be positive");
    if (x.size() != weights.size()) throw std::invalid_argument("histogram: size mismatch");
    Histogram h;
    h.width = width;
    if (x.empty()) {
        h.mass = Eigen::VectorXd::Zero(0);
        return h;
    }
    std::vector<long> idx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) idx[i] = static_cast<long>(std::floor(x[i] / width));
    const auto [lo, hi] = std::minmax_element(idx.begin(), idx.end());
    h.first_index = *lo;
    h.mass = Eigen::VectorXd::Zero(*hi - *lo + 1);
    for (std::size_t i = 0; i < x.size(); ++i) h.mass(idx[i] - h.first_index) += weights[i];
    return h;
}

void align(Histogram& a, Histogram& b) {
    if (a.width != b.width) throw std::invalid_argument("align: histogram widths differ");
    auto last = [](const Histogram& h) { return h.first_index + static_cast<long>(h.mass.size()) - 1; };
    const long lo = std::min(a.mass.size() ? a.first_index : b.first_index, b.mass.size() ? b.first_index : a.first_index);
    const long hi = std::max(a.mass.size() ? last(a) : last(b), b.mass.size() ? last(b) : last(a));
    for (Histogram* h : {&a, &b}) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(std::max(0L, hi - lo + 1));
        if (h->mass.size()) m.segment(h->first_index - lo, h->mass.size()) = h->mass;
        h->mass = m;
        h->first_index = lo;
    }
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    if (p.size() != q.size()) throw std::invalid_argument("total_variation: size mismatch");
    return 0.5 * (p - q).cwiseAbs().sum();
}

double expected_multinomial_tv(const Eigen::VectorXd& p, std::size_t shots) {
    if (shots < 1) throw std::invalid_argument("expected_multinomial_tv: shots must be >= 1");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) acc += binomial_mean_abs_deviation(shots, p(i));
    return 0.5 * acc / static_cast<double>(shots);
}

ReferenceSpectrum read_reference_csv(std::istream& in) {
    std::vector<double> x, y;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double a = 0.0, b = 0.0;
        if (!(ls >> a >> b)) {
            if (x.empty() && lineno == 1) continue;  // header
            throw std::invalid_argument("reference spectrum line " + std::to_string(lineno) + ": expected omega_eV,intensity");
        }
        if (b < 0.0) throw std::invalid_argument("reference spectrum line " + std::to_string(lineno) + ": negative intensity");
        x.push_back(a);
        y.push_back(b);
    }
    if (x.empty()) throw std::invalid_argument("reference spectrum: no data rows");
    ReferenceSpectrum r;
    r.omega_ev = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    r.intensity = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    const double total = r.intensity.sum();
    if (!(total > 0.0)) throw std::invalid_argument("reference spectrum: total intensity is zero");
    r.intensity /= total;
    return r;
}

ReconstructionResult reconstruct_reference(const ReferenceSpectrum& ref, std::size_t shots, std::uint64_t seed,
                                           double bin_width_ev) {
    if (shots < 1) throw std::invalid_argument("reconstruct_reference: shots must be >= 1");
    const std::vector<double> xs(ref.omega_ev.data(), ref.omega_ev.data() + ref.omega_ev.size());
    const std::vector<double> ws(ref.intensity.data(), ref.intensity.data() + ref.intensity.size());
    ReconstructionResult r;
    r.reference = histogram(xs, ws, bin_width_ev);
    const auto cum = cumulative(ref.intensity);
    SampleStream stream(seed);
    std::vector<double> sx(shots), sw(shots, 1.0 / static_cast<double>(shots));
    for (std::size_t s = 0; s < shots; ++s) sx[s] = xs[stream.draw(cum)];
    r.sampled = histogram(sx, sw, bin_width_ev);
    align(r.reference, r.sampled);
    r.tv = total_variation(r.reference.mass, r.sampled.mass);
    r.expected_tv = expected_multinomial_tv(r.reference.mass, shots);
    return r;
}

} // namespace rixs::emulator
