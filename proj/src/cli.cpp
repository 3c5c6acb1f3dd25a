#include <rixs/bliss_thc.hpp>
#include <rixs/cli.hpp>
#include <rixs/emulator.hpp>
#include <rixs/exact_spectra.hpp>
#include <rixs/fock.hpp>
#include <rixs/integrals.hpp>
#include <rixs/resolvent.hpp>
#include <rixs/resources.hpp>
#include <rixs/spectrum_io.hpp>
#include <rixs/units.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace rixs::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct CliError : std::runtime_error {
    CliError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
    int code;
};

const std::vector<std::string> kCommands{"parse-check", "ground-state", "xas",     "rixs-exact",
                                         "rixs-qpe",    "bliss-thc",    "estimate"};

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::string sci(double x, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*e", digits, x);
    return buf;
}

void kv(std::ostream& out, const std::string& key, const std::string& value) {
    out << "  " << std::left << std::setw(24) << key << std::right << value << '\n';
}

Eigen::Vector3d polarization(const std::vector<double>& v, const char* name) {
    if (v.size() != 3) throw CliError(kUsage, std::string(name) + " needs three components");
    const Eigen::Vector3d p(v[0], v[1], v[2]);
    if (!p.allFinite() || p.norm() == 0.0) throw CliError(kPhysics, std::string(name) + " must be a nonzero vector");
    return p;
}

void validate(const RunConfig& c) {
    auto physics = [](bool ok, const std::string& what) {
        if (!ok) throw CliError(kPhysics, what);
    };
    physics(c.gamma_ev > 0.0, "gamma must be positive");
    physics(c.eta_ev > 0.0, "eta must be positive");
    physics(c.window_ev >= 0.0, "intermediate-state window must be non-negative");
    physics(c.shots >= 1, "shots must be >= 1");
    physics(c.n_omega >= 0 && c.n_omega <= 24, "n-omega must lie in [1, 24] (0 selects it from the target accuracy)");
    physics(c.kaiser_beta > 0.0, "kaiser-beta must be positive");
    physics(c.bin_width_ev > 0.0, "bin-width must be positive");
    physics(c.xas_step_ev > 0.0 && c.loss_step_ev > 0.0, "grid steps must be positive");
    physics(c.eps_omega_ev > 0.0, "eps-omega must be positive");
    physics(c.lambda >= 0.0, "lambda must be positive");
    physics(c.sqrt_pr >= 0.0 && c.sqrt_pr <= 1.0, "sqrt-pr must lie in (0, 1]");
    physics(c.degree_epsilon > 0.0 && c.degree_epsilon < 1.0, "degree-epsilon must lie in (0, 1)");
    for (double w : c.omega_in_ev) physics(w > 0.0, "omega-in must be positive");
    polarization(c.eps_in, "eps-in");
    polarization(c.eps_out, "eps-out");
    for (const auto* r : {&c.xas_range_ev, &c.loss_range_ev})
        if (!r->empty() && (r->size() != 2 || !((*r)[1] > (*r)[0]))) throw CliError(kUsage, "ranges need two values lo,hi with hi > lo");
    if (c.aleph < 1 || c.beth < 1 || c.aleph_mu < 1 || c.n_t < 0) throw CliError(kUsage, "precision bits must be >= 1, n-t >= 0");
}

std::string omega_tag(double w) { return fixed(w, 2); }

class Session {
public:
    Session(const RunConfig& cfg, std::ostream& out) : cfg_(cfg), out_(out) {}

    json run(const std::string& cmd) {
        results_ = json::object();
        if (cmd == "parse-check") parse_check();
        else if (cmd == "ground-state") ground_state();
        else if (cmd == "xas") xas();
        else if (cmd == "rixs-exact") rixs_exact();
        else if (cmd == "rixs-qpe") rixs_qpe();
        else if (cmd == "bliss-thc") bliss_thc();
        else if (cmd == "estimate") estimate();
        else throw CliError(kUsage, "unknown command " + cmd);
        return results_;
    }

    const std::vector<std::string>& files() const { return files_; }

private:
    const RunConfig& cfg_;
    std::ostream& out_;
    json results_;
    std::vector<std::string> files_;
    std::vector<std::string> warnings_;

    std::optional<qchem::IntegralSet> ints_;
    std::unique_ptr<fock::ManyBodyBasis> basis_;
    std::optional<fock::SparseOperator> h_;
    std::optional<spectra::SpectralDecomposition> decomp_;
    std::optional<bliss::BlissThcResult> bliss_;
    std::optional<std::vector<double>> omegas_;

    // ---- lazily built state ---------------------------------------------------------

    const qchem::IntegralSet& ints() {
        if (ints_) return *ints_;
        if (cfg_.fcidump.empty()) throw CliError(kUsage, "an FCIDUMP file is required (--fcidump)");
        try {
            qchem::IntegralSet s = qchem::read_fcidump_file(cfg_.fcidump, &warnings_);
            if (!cfg_.dipole.empty()) s = qchem::read_dipole_file(cfg_.dipole, s);
            ints_ = std::move(s);
        } catch (const std::exception& e) {
            throw CliError(kInput, e.what());
        }
        return *ints_;
    }

    int n_elec() { return cfg_.n_elec >= 0 ? cfg_.n_elec : ints().n_elec; }
    int two_sz() { return cfg_.two_sz != -1000 ? cfg_.two_sz : ints().two_sz; }

    void check_sector() {
        const int n = ints().n_orb, ne = n_elec(), sz = two_sz();
        const int up2 = ne + sz;
        if (ne < 0 || up2 % 2 != 0 || up2 < 0 || up2 / 2 > n || ne - up2 / 2 < 0 || ne - up2 / 2 > n)
            throw CliError(kSector, "no determinants with N_e=" + std::to_string(ne) + ", 2S_z=" + std::to_string(sz) +
                                        " in " + std::to_string(n) + " orbitals");
    }

    const fock::ManyBodyBasis& basis() {
        if (basis_) return *basis_;
        check_sector();
        try {
            basis_ = std::make_unique<fock::ManyBodyBasis>(ints().n_orb, n_elec(), two_sz());
        } catch (const std::exception& e) {
            throw CliError(kSector, e.what());
        }
        return *basis_;
    }

    const fock::SparseOperator& hamiltonian() {
        if (!h_) h_ = fock::build_hamiltonian(ints(), basis());
        return *h_;
    }

    const spectra::SpectralDecomposition& decomposition(bool need_full) {
        const auto dim = static_cast<long long>(basis().dimension());
        if (decomp_ && (decomp_->complete() || !need_full)) return *decomp_;
        if (dim > cfg_.max_full_dim) {
            if (need_full)
                throw CliError(kUsage, "spectra need a full diagonalization; dimension " + std::to_string(dim) +
                                           " exceeds --max-full-dim " + std::to_string(cfg_.max_full_dim));
            decomp_ = spectra::diagonalize(hamiltonian(), spectra::DiagonalizeOptions::lowest(cfg_.n_states));
        } else {
            decomp_ = spectra::diagonalize(hamiltonian(), spectra::DiagonalizeOptions::full());
        }
        return *decomp_;
    }

    fock::SparseOperator dipole(const std::vector<double>& eps, const char* name) {
        if (!ints().has_dipole) throw CliError(kUsage, "dipole integrals are required (--dipole)");
        const Eigen::Vector3d p = polarization(eps, name);
        try {
            return cfg_.full_dipole ? fock::build_full_dipole(ints(), basis(), p) : fock::build_cvs_dipole(ints(), basis(), p);
        } catch (const std::invalid_argument& e) {
            throw CliError(kPhysics, e.what());
        }
    }

    double lambda_d() {
        const Eigen::MatrixXd m = fock::contracted_dipole(ints(), polarization(cfg_.eps_out, "eps-out"), !cfg_.full_dipole);
        return resources::dipole_block_encoding(ints().n_orb, cfg_.aleph_mu, m).lambda_d;
    }

    spectra::SpectrumResult xas_sticks() {
        const auto& d = decomposition(true);
        return spectra::xas_spectrum(d, dipole(cfg_.eps_in, "eps-in"), Eigen::VectorXd::Zero(1), ev_to_hartree(cfg_.gamma_ev));
    }

    const std::vector<double>& omegas() {
        if (omegas_) return *omegas_;
        if (!cfg_.omega_in_ev.empty()) {
            omegas_ = cfg_.omega_in_ev;
        } else {
            const auto r = xas_sticks();
            const auto it = std::max_element(r.sticks.begin(), r.sticks.end(),
                                             [](const spectra::Stick& a, const spectra::Stick& b) { return a.weight < b.weight; });
            if (it == r.sticks.end() || it->weight <= 0.0) throw CliError(kPhysics, "no absorption lines to pick omega-in from");
            omegas_ = std::vector<double>{std::round(it->x_ev * 100.0) / 100.0};
        }
        return *omegas_;
    }

    std::string path(const std::string& name) {
        const fs::path p = fs::path(cfg_.output_dir) / name;
        files_.push_back(p.string());
        return p.string();
    }

    std::ofstream open(const std::string& name) {
        std::ofstream f(path(name));
        if (!f) throw CliError(kFailure, "cannot write " + name + " in " + cfg_.output_dir);
        return f;
    }

    static Eigen::VectorXd auto_grid(const std::vector<spectra::Stick>& sticks, const std::vector<double>& range, double step,
                                     double pad_lo, double pad_hi, double floor_lo) {
        if (range.size() == 2) return spectra::uniform_grid(range[0], range[1], step);
        double top = 0.0;
        for (const auto& s : sticks) top = std::max(top, s.weight);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& s : sticks)
            if (s.weight >= 1e-3 * top && top > 0.0) {
                lo = std::min(lo, s.x_ev);
                hi = std::max(hi, s.x_ev);
            }
        if (!std::isfinite(lo)) lo = hi = 0.0;
        lo = std::min(std::floor(lo - pad_lo), floor_lo);
        hi = std::ceil(hi + pad_hi);
        return spectra::uniform_grid(lo, hi, step);
    }

    static void top_lines(std::ostream& out, const std::vector<spectra::Stick>& sticks, std::size_t count, const char* what) {
        std::vector<spectra::Stick> s = sticks;
        std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
        if (s.size() > count) s.resize(count);
        std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.x_ev < b.x_ev; });
        out << "  strongest " << what << " (eV, weight):\n";
        for (const auto& x : s)
            if (x.weight > 0.0) out << "    " << std::setw(12) << fixed(x.x_ev, 4) << "  " << sci(x.weight, 4) << '\n';
    }

    // ---- commands -------------------------------------------------------------------

    void parse_check() {
        const auto& s = ints();
        out_ << "== parse-check ==\n";
        kv(out_, "fcidump", cfg_.fcidump);
        kv(out_, "n_orb", std::to_string(s.n_orb));
        kv(out_, "n_elec", std::to_string(n_elec()));
        kv(out_, "2S_z", std::to_string(two_sz()));
        kv(out_, "e_frozen (Ha)", fixed(s.e_frozen, 10));
        long nz_h = (s.h.array() != 0.0).count();
        long nz_v = (s.v.matrix().array() != 0.0).count();
        kv(out_, "h nonzeros", std::to_string(nz_h));
        kv(out_, "V nonzeros (dense)", std::to_string(nz_v));
        kv(out_, "V symmetry defect", sci(s.v.symmetry_defect(), 2));
        kv(out_, "dipole", s.has_dipole ? cfg_.dipole : "none");
        std::string core;
        for (int c : s.core_orbitals) core += (core.empty() ? "" : " ") + std::to_string(c + 1);
        kv(out_, "core orbitals", core.empty() ? "none" : core);
        check_sector();
        const auto dim = fock::sector_dimension(s.n_orb, n_elec(), two_sz());
        kv(out_, "sector dimension", resources::to_string(dim));
        for (const auto& w : warnings_) kv(out_, "warning", w);
        results_["n_orb"] = s.n_orb;
        results_["n_elec"] = n_elec();
        results_["two_sz"] = two_sz();
        results_["e_frozen"] = s.e_frozen;
        results_["has_dipole"] = s.has_dipole;
        results_["core_orbitals"] = s.core_orbitals;
        results_["sector_dimension"] = resources::to_string(dim);
        results_["warnings"] = warnings_;
    }

    void ground_state() {
        const auto& d = decomposition(false);
        out_ << "== ground-state ==\n";
        kv(out_, "sector dimension", std::to_string(basis().dimension()));
        kv(out_, "solver", d.complete() ? "full" : "lowest-" + std::to_string(d.size()));
        kv(out_, "E_0 (Ha)", fixed(d.ground_energy(), 10));
        const auto n_op = fock::build_number_operator(basis());
        const Eigen::VectorXcd g = d.ground_state();
        kv(out_, "<N>", fixed(g.dot(n_op.apply(g)).real(), 8));
        out_ << "  lowest states (E Ha, E - E_0 eV):\n";
        const Eigen::Index show = std::min<Eigen::Index>(d.size(), cfg_.n_states);
        json levels = json::array();
        for (Eigen::Index i = 0; i < show; ++i) {
            out_ << "    " << std::setw(4) << i << "  " << std::setw(18) << fixed(d.eigenvalues(i), 10) << "  "
                 << std::setw(12) << fixed(hartree_to_ev(d.eigenvalues(i) - d.ground_energy()), 6) << '\n';
            levels.push_back(d.eigenvalues(i));
        }
        results_["dimension"] = basis().dimension();
        results_["e0"] = d.ground_energy();
        results_["energies"] = levels;
    }

    void xas() {
        const auto& d = decomposition(true);
        const auto sticks = xas_sticks();
        const Eigen::VectorXd grid = auto_grid(sticks.sticks, cfg_.xas_range_ev, cfg_.xas_step_ev, 5.0, 5.0,
                                               std::numeric_limits<double>::infinity());
        auto r = spectra::xas_spectrum(d, dipole(cfg_.eps_in, "eps-in"), grid, ev_to_hartree(cfg_.gamma_ev));
        r.meta.eps_in = polarization(cfg_.eps_in, "eps-in");
        r.meta.eps_out = r.meta.eps_in;
        {
            auto f = open("xas.csv");
            spectra::write_spectrum_csv(f, r);
        }
        {
            auto f = open("xas.json");
            spectra::write_spectrum_json(f, r);
        }
        out_ << "== xas ==\n";
        kv(out_, "gamma (eV)", fixed(cfg_.gamma_ev, 3));
        kv(out_, "grid (eV)", fixed(grid(0), 2) + " .. " + fixed(grid(grid.size() - 1), 2) + " (" +
                                  std::to_string(grid.size()) + " points)");
        kv(out_, "total weight", sci(r.total_weight(), 6));
        top_lines(out_, r.sticks, 5, "absorption lines");
        results_["total_weight"] = r.total_weight();
        results_["grid_points"] = grid.size();
    }

    void rixs_exact() {
        const auto& d = decomposition(true);
        const auto d_in = dipole(cfg_.eps_in, "eps-in");
        const auto d_out = dipole(cfg_.eps_out, "eps-out");
        out_ << "== rixs-exact ==\n";
        kv(out_, "gamma (eV)", fixed(cfg_.gamma_ev, 3));
        kv(out_, "eta (eV)", fixed(cfg_.eta_ev, 3));
        kv(out_, "window (eV)", fixed(cfg_.window_ev, 2));
        std::vector<spectra::SpectrumResult> all;
        json per = json::array();
        for (double w : omegas()) {
            const auto amps = spectra::rixs_amplitudes(d, d_in, d_out, ev_to_hartree(w), ev_to_hartree(cfg_.gamma_ev),
                                                       ev_to_hartree(cfg_.window_ev));
            auto probe = spectra::rixs_spectrum(amps, ev_to_hartree(cfg_.eta_ev), Eigen::VectorXd::Zero(1));
            const Eigen::VectorXd grid = auto_grid(probe.sticks, cfg_.loss_range_ev, cfg_.loss_step_ev, 2.0, 5.0, -2.0);
            auto r = spectra::rixs_spectrum(amps, ev_to_hartree(cfg_.eta_ev), grid);
            r.meta.omega_in_ev = w;
            r.meta.gamma_ev = cfg_.gamma_ev;
            r.meta.eps_in = polarization(cfg_.eps_in, "eps-in");
            r.meta.eps_out = polarization(cfg_.eps_out, "eps-out");
            auto f = open("rixs-exact-" + omega_tag(w) + ".csv");
            spectra::write_spectrum_csv(f, r);
            out_ << "  omega_in " << fixed(w, 2) << " eV: total weight " << sci(r.total_weight(), 6) << '\n';
            top_lines(out_, r.sticks, 5, "loss lines");
            per.push_back({{"omega_in_eV", w}, {"total_weight", r.total_weight()}});
            all.push_back(std::move(r));
        }
        auto f = open("rixs-exact.json");
        spectra::write_spectra_json(f, all);
        results_["spectra"] = per;
    }

    struct QpeSetup {
        double lambda;
        double offset;
        std::string lambda_source;
        int n_omega;
    };

    QpeSetup qpe_setup(const spectra::SpectralDecomposition& d) {
        QpeSetup s;
        const double lo = d.eigenvalues(0), hi = d.eigenvalues(d.size() - 1);
        s.offset = cfg_.energy_offset_set ? cfg_.energy_offset : 0.5 * (lo + hi);
        if (cfg_.lambda > 0.0) {
            s.lambda = cfg_.lambda;
            s.lambda_source = "flag";
        } else if (!cfg_.factors.empty()) {
            s.lambda = load_factors().lambda();
            s.lambda_source = "factors";
        } else {
            s.lambda = std::max(hi - s.offset, s.offset - lo) * (1.0 + 1e-9);
            s.lambda_source = "spectral half-width";
        }
        if (std::max(hi - s.offset, s.offset - lo) > s.lambda)
            throw CliError(kPhysics, "lambda = " + fixed(s.lambda, 6) + " Ha does not bound the spectrum around offset " +
                                         fixed(s.offset, 6));
        s.n_omega = cfg_.n_omega > 0
                        ? cfg_.n_omega
                        : std::min(20, resources::phase_bits(resources::walk_calls(s.lambda, ev_to_hartree(cfg_.eps_omega_ev))));
        return s;
    }

    bliss::ThcFactors load_factors() {
        std::ifstream f(cfg_.factors);
        if (!f) throw CliError(kInput, "cannot open factors file '" + cfg_.factors + "'");
        try {
            return bliss::read_factors_json(f);
        } catch (const std::exception& e) {
            throw CliError(kInput, e.what());
        }
    }

    void rixs_qpe() {
        const auto& d = decomposition(true);
        const auto d_in = dipole(cfg_.eps_in, "eps-in");
        const auto d_out = dipole(cfg_.eps_out, "eps-out");
        const QpeSetup q = qpe_setup(d);
        const double gamma = ev_to_hartree(cfg_.gamma_ev);
        const double ld = lambda_d();

        emulator::PrepMethod method = emulator::PrepMethod::exact();
        long long degree = 0;
        if (cfg_.prep == "chebyshev") {
            const auto mode = cfg_.degree_mode == "analytic" ? resolvent::DegreeMode::analytic(cfg_.degree_epsilon)
                                                             : resolvent::DegreeMode::calibrated();
            try {
                degree = resolvent::select_degree(q.lambda, gamma, mode);
            } catch (const std::invalid_argument& e) {
                throw CliError(kPhysics, e.what());
            }
            method = emulator::PrepMethod::chebyshev(static_cast<int>(degree), q.lambda, q.offset);
        }
        emulator::QpeModel model;
        model.n_omega = q.n_omega;
        model.window = cfg_.window == "uniform" ? emulator::WindowKind::uniform : emulator::WindowKind::kaiser;
        model.kaiser_beta = cfg_.kaiser_beta;
        model.lambda = q.lambda;
        model.e0 = d.ground_energy();
        model.energy_offset = q.offset;
        model.axis = cfg_.axis == "e0-plus" ? emulator::AxisConvention::e0_plus : emulator::AxisConvention::energy_loss;

        out_ << "== rixs-qpe ==\n";
        kv(out_, "state preparation", cfg_.prep + (degree ? " (K_G = " + std::to_string(degree) + ")" : ""));
        kv(out_, "lambda (Ha)", fixed(q.lambda, 8) + " [" + q.lambda_source + "]");
        kv(out_, "energy offset (Ha)", fixed(q.offset, 8));
        kv(out_, "n_omega", std::to_string(q.n_omega));
        kv(out_, "window", cfg_.window + (cfg_.window == "kaiser" ? " beta=" + fixed(cfg_.kaiser_beta, 2) : ""));
        kv(out_, "shots", std::to_string(cfg_.shots));
        kv(out_, "lambda_D", fixed(ld, 8));

        std::optional<emulator::ReferenceSpectrum> reference;
        if (!cfg_.reference.empty()) {
            std::ifstream f(cfg_.reference);
            if (!f) throw CliError(kInput, "cannot open reference spectrum '" + cfg_.reference + "'");
            try {
                reference = emulator::read_reference_csv(f);
            } catch (const std::exception& e) {
                throw CliError(kInput, e.what());
            }
        }

        json per = json::array();
        const auto& ws = omegas();
        for (std::size_t i = 0; i < ws.size(); ++i) {
            const double w = ws[i];
            emulator::RixsState state;
            try {
                state = emulator::prepare_rixs_state(hamiltonian(), emulator::GroundState::from(d), d_in, d_out,
                                                     ev_to_hartree(w), gamma, method);
            } catch (const emulator::DarkStateError& e) {
                throw CliError(kPhysics, e.what());
            } catch (const resolvent::SpectralBoundError& e) {
                throw CliError(kPhysics, e.what());
            }
            if (state.vanishing) throw CliError(kPhysics, "RIXS state vanishes at omega_in " + fixed(w, 2) + " eV");
            const double p_r = emulator::success_probability(state, ld);
            const std::uint64_t seed = cfg_.seed + i;
            const auto sampled = emulator::sample_spectrum(model, state, d, static_cast<std::size_t>(cfg_.shots), seed,
                                                           cfg_.bin_width_ev);
            auto spec = sampled.spectrum;
            spec.meta.omega_in_ev = w;
            spec.meta.gamma_ev = cfg_.gamma_ev;
            spec.meta.eps_in = polarization(cfg_.eps_in, "eps-in");
            spec.meta.eps_out = polarization(cfg_.eps_out, "eps-out");
            {
                auto f = open("rixs-qpe-" + omega_tag(w) + ".csv");
                spectra::write_spectrum_csv(f, spec);
            }
            {
                auto f = open("rixs-qpe-" + omega_tag(w) + "-samples.csv");
                emulator::write_samples_csv(f, sampled.samples);
            }
            {
                auto f = open("rixs-qpe-" + omega_tag(w) + ".json");
                spectra::write_spectrum_json(f, spec);
            }
            // exact sticks of the same (unwindowed) state, binned like the samples
            const auto amps = spectra::rixs_amplitudes(d, d_in, d_out, ev_to_hartree(w), gamma);
            std::vector<double> ex, ew;
            double total = 0.0;
            for (const auto& a : amps) total += std::norm(a.amplitude);
            for (const auto& a : amps) {
                ex.push_back(hartree_to_ev(a.energy_loss));
                ew.push_back(std::norm(a.amplitude) / total);
            }
            std::vector<double> sx, sw;
            for (const auto& s : spec.sticks) {
                sx.push_back(s.x_ev);
                sw.push_back(s.weight);
            }
            auto h_exact = emulator::histogram(ex, ew, cfg_.bin_width_ev);
            auto h_sampled = emulator::histogram(sx, sw, cfg_.bin_width_ev);
            emulator::align(h_exact, h_sampled);
            const double tv = emulator::total_variation(h_exact.mass, h_sampled.mass);

            out_ << "  omega_in " << fixed(w, 2) << " eV (seed " << seed << ")\n";
            kv(out_, "  |R|", sci(state.norm, 8));
            kv(out_, "  |D_in E_0|", sci(state.dipole_norm, 8));
            kv(out_, "  sqrt(P_R)", fixed(std::sqrt(p_r), 8));
            kv(out_, "  K_A", std::to_string(p_r > 0.0 ? emulator::amplification_rounds(p_r) : -1));
            kv(out_, "  TV vs exact sticks", fixed(tv, 6));
            top_lines(out_, spec.sticks, 5, "sampled loss values");
            json entry{{"omega_in_eV", w},   {"seed", seed},          {"norm", state.norm},
                       {"dipole_norm", state.dipole_norm}, {"p_r", p_r}, {"tv_exact", tv}};
            if (reference) {
                const auto rec = emulator::reconstruct_reference(*reference, static_cast<std::size_t>(cfg_.shots), seed,
                                                                 cfg_.bin_width_ev);
                kv(out_, "  reference TV", fixed(rec.tv, 6) + " (expected " + fixed(rec.expected_tv, 6) + ")");
                entry["reference_tv"] = rec.tv;
                entry["reference_expected_tv"] = rec.expected_tv;
            }
            per.push_back(entry);
        }
        results_["lambda"] = q.lambda;
        results_["lambda_source"] = q.lambda_source;
        results_["energy_offset"] = q.offset;
        results_["n_omega"] = q.n_omega;
        results_["lambda_d"] = ld;
        results_["runs"] = per;
    }

    const bliss::BlissThcResult& bliss_fit() {
        if (bliss_) return *bliss_;
        const auto& s = ints();
        const int rank = cfg_.n_t > 0 ? cfg_.n_t : 3 * s.n_orb;
        const double rho = cfg_.rho >= 0.0 ? cfg_.rho : bliss::default_rho(s.v);
        const auto mode = cfg_.bliss == "none" ? bliss::BlissMode::none
                          : cfg_.bliss == "alpha" ? bliss::BlissMode::alpha_only
                                                  : bliss::BlissMode::full;
        bliss::BlissSearchOptions opts;
        opts.max_evaluations = cfg_.bliss_evaluations;
        opts.thc.restarts = cfg_.thc_restarts;
        opts.thc.seed = cfg_.seed;
        bliss_ = bliss::optimize_bliss_thc(s, n_elec(), rank, rho, mode, opts);
        return *bliss_;
    }

    void bliss_thc() {
        const auto& r = bliss_fit();
        const double rho = cfg_.rho >= 0.0 ? cfg_.rho : bliss::default_rho(ints().v);
        {
            auto f = open("bliss-thc-factors.json");
            bliss::write_factors_json(f, r.factors);
        }
        out_ << "== bliss-thc ==\n";
        kv(out_, "mode", cfg_.bliss);
        kv(out_, "N_T", std::to_string(r.factors.rank));
        kv(out_, "rho", sci(rho, 4));
        kv(out_, "lambda (alpha=beta=0)", fixed(r.baseline_lambda, 6));
        kv(out_, "lambda (optimized)", fixed(r.lambda, 6));
        kv(out_, "alpha1, alpha2", fixed(r.params.alpha1, 6) + ", " + fixed(r.params.alpha2, 6));
        kv(out_, "max |beta|", fixed(r.params.beta.size() ? r.params.beta.cwiseAbs().maxCoeff() : 0.0, 6));
        kv(out_, "THC residual", sci(r.factors.residual, 4));
        results_["n_t"] = r.factors.rank;
        results_["rho"] = rho;
        results_["baseline_lambda"] = r.baseline_lambda;
        results_["lambda"] = r.lambda;
        results_["alpha1"] = r.params.alpha1;
        results_["alpha2"] = r.params.alpha2;
        results_["residual"] = r.factors.residual;
    }

    void estimate() {
        resources::ResourceInputs in;
        in.cost.aleph = cfg_.aleph;
        in.cost.beth = cfg_.beth;
        in.cost.aleph_mu = cfg_.aleph_mu;
        in.cost.n_t = cfg_.n_t;
        in.eps_omega = ev_to_hartree(cfg_.eps_omega_ev);
        in.gamma = ev_to_hartree(cfg_.gamma_ev);
        in.shots = cfg_.shots;
        in.degree = cfg_.degree_mode == "analytic" ? resolvent::DegreeMode::analytic(cfg_.degree_epsilon)
                                                   : resolvent::DegreeMode::calibrated();
        std::string lambda_source = "flag";
        if (cfg_.lambda > 0.0) {
            in.lambda = cfg_.lambda;
        } else if (!cfg_.factors.empty()) {
            in.lambda = load_factors().lambda();
            lambda_source = "factors";
        } else if (!cfg_.fcidump.empty()) {
            in.lambda = bliss_fit().lambda;
            lambda_source = "bliss-thc fit";
        } else {
            throw CliError(kUsage, "estimate needs --lambda, --factors or --fcidump");
        }
        std::string pr_source = "flag";
        if (cfg_.sqrt_pr > 0.0) {
            in.p_r = cfg_.sqrt_pr * cfg_.sqrt_pr;
        } else if (!cfg_.fcidump.empty()) {
            const auto& d = decomposition(true);
            const auto state = emulator::prepare_rixs_state(hamiltonian(), emulator::GroundState::from(d),
                                                            dipole(cfg_.eps_in, "eps-in"), dipole(cfg_.eps_out, "eps-out"),
                                                            ev_to_hartree(omegas().front()), in.gamma,
                                                            emulator::PrepMethod::exact());
            in.p_r = emulator::success_probability(state, lambda_d());
            in.lambda_d = lambda_d();
            pr_source = "exact preparation at " + fixed(omegas().front(), 2) + " eV";
        } else {
            throw CliError(kUsage, "estimate needs --sqrt-pr or an FCIDUMP to compute it");
        }
        if (!(in.p_r > 0.0)) throw CliError(kPhysics, "success probability is zero");
        in.cost.n_a = cfg_.n_a > 0 ? cfg_.n_a : (!cfg_.fcidump.empty() ? ints().n_orb : 0);

        out_ << "== estimate ==\n";
        kv(out_, "lambda source", lambda_source);
        kv(out_, "P_R source", pr_source);
        if (in.cost.n_a == 0) {
            // qubit and Toffoli totals need N_a; report what does not
            const long long n = resources::walk_calls(in.lambda, in.eps_omega);
            const long long kg = resolvent::select_degree(in.lambda, in.gamma, in.degree);
            const int ka = emulator::amplification_rounds(in.p_r);
            const int nw = resources::phase_bits(n);
            kv(out_, "lambda (Ha)", resources::format_sig(in.lambda, 5));
            kv(out_, "K_G", std::to_string(kg));
            kv(out_, "sqrt(P_R)", resources::format_sig(std::sqrt(in.p_r)));
            kv(out_, "K_A", std::to_string(ka));
            kv(out_, "walk calls N", std::to_string(n));
            kv(out_, "n_omega", std::to_string(nw));
            kv(out_, "totals", "need --n-a");
            results_ = {{"lambda", in.lambda}, {"k_g", kg}, {"p_r", in.p_r}, {"k_a", ka}, {"walk_calls", n}, {"n_omega", nw}};
            return;
        }
        resources::WalkModel walk;
        if (cfg_.walk_model == "user") {
            walk = resources::user_supplied(cfg_.t_w, cfg_.n_w);
        } else if (cfg_.walk_model == "back-solve") {
            walk = resources::back_solve_model(in, cfg_.target_t_tot, cfg_.target_n_tot);
        } else {
            walk = resources::affine_thc();
        }
        const auto report = resources::totals(in, walk);
        std::ostringstream text;
        resources::write_report_text(text, report);
        std::istringstream lines(text.str());
        for (std::string line; std::getline(lines, line);) out_ << "  " << line << '\n';
        {
            auto f = open("estimate.json");
            resources::write_report_json(f, report);
        }
        std::ostringstream js;
        resources::write_report_json(js, report);
        results_ = json::parse(js.str())["report"];
    }
};

void write_summary(const RunConfig& cfg, const std::string& command, int code, const std::string& error, const json& results,
                   const std::vector<std::string>& files, std::ostream& err) {
    json j;
    j["command"] = command;
    j["status"] = code == kOk ? "ok" : "error";
    j["exit_code"] = code;
    if (!error.empty()) j["error"] = error;
    j["outputs"] = files;
    j["results"] = results;
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    std::ofstream f(fs::path(cfg.output_dir) / (command + ".summary.json"));
    if (!f) {
        err << "warning: cannot write summary to " << cfg.output_dir << '\n';
        return;
    }
    f << j.dump(2) << '\n';
}

int classify(const std::exception& e) {
    if (auto* c = dynamic_cast<const CliError*>(&e)) return c->code;
    if (dynamic_cast<const spectra::ConvergenceError*>(&e)) return kConvergence;
    if (dynamic_cast<const qchem::ParseError*>(&e)) return kInput;
    if (dynamic_cast<const emulator::DarkStateError*>(&e)) return kPhysics;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return kPhysics;
    return kFailure;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Exact and quantum-emulated X-ray spectra for active-space Hamiltonians"};
    app.name(args.empty() ? "rixs" : fs::path(args[0]).filename().string());
    app.set_config("--config", "", "Flat key=value configuration file (flags override it)");
    std::string dump_config;
    app.add_option("--dump-config", dump_config, "Write the effective configuration to this file")->configurable(false);

    app.add_option("--fcidump", cfg.fcidump, "FCIDUMP integral file");
    app.add_option("--dipole", cfg.dipole, "Dipole sidecar file");
    app.add_option("--factors", cfg.factors, "THC factor JSON (provides lambda)");
    app.add_option("--reference", cfg.reference, "Reference spectrum CSV (omega_eV,intensity)");
    app.add_option("--output-dir", cfg.output_dir, "Directory for CSV/JSON outputs")->capture_default_str();
    app.add_option("--nelec", cfg.n_elec, "Override the electron count");
    app.add_option("--ms2", cfg.two_sz, "Override 2*S_z");

    app.add_option("--omega-in", cfg.omega_in_ev, "Incident energies in eV (repeatable); default: strongest XAS line");
    app.add_option("--gamma", cfg.gamma_ev, "Intermediate-state broadening Gamma (eV)")->capture_default_str();
    app.add_option("--eta", cfg.eta_ev, "Final-state broadening eta (eV)")->capture_default_str();
    app.add_option("--window", cfg.window_ev, "Intermediate-state energy window (eV)")->capture_default_str();
    app.add_option("--eps-in", cfg.eps_in, "Incident polarization x,y,z")->delimiter(',')->expected(3)->capture_default_str();
    app.add_option("--eps-out", cfg.eps_out, "Scattered polarization x,y,z")->delimiter(',')->expected(3)->capture_default_str();
    app.add_flag("--full-dipole", cfg.full_dipole, "Use the full dipole instead of the core-valence blocks");
    app.add_option("--xas-range", cfg.xas_range_ev, "XAS grid lo,hi (eV)")->delimiter(',')->expected(2);
    app.add_option("--xas-step", cfg.xas_step_ev, "XAS grid step (eV)")->capture_default_str();
    app.add_option("--loss-range", cfg.loss_range_ev, "Energy-loss grid lo,hi (eV)")->delimiter(',')->expected(2);
    app.add_option("--loss-step", cfg.loss_step_ev, "Energy-loss grid step (eV)")->capture_default_str();
    app.add_option("--max-full-dim", cfg.max_full_dim, "Largest sector diagonalized densely")->capture_default_str();
    app.add_option("--n-states", cfg.n_states, "States reported / computed iteratively")->capture_default_str();

    app.add_option("--n-omega", cfg.n_omega, "Phase register bits (0: from eps-omega)")->capture_default_str();
    app.add_option("--qpe-window", cfg.window, "QPE register window")
        ->check(CLI::IsMember({"kaiser", "uniform"}))
        ->capture_default_str();
    app.add_option("--kaiser-beta", cfg.kaiser_beta, "Kaiser window shape")->capture_default_str();
    app.add_option("--shots", cfg.shots, "QPE samples per incident energy")->capture_default_str();
    app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    app.add_option("--axis", cfg.axis, "Bin-to-energy mapping")
        ->check(CLI::IsMember({"energy-loss", "e0-plus"}))
        ->capture_default_str();
    app.add_option("--prep", cfg.prep, "RIXS state preparation")->check(CLI::IsMember({"exact", "chebyshev"}))->capture_default_str();
    app.add_option("--degree-mode", cfg.degree_mode, "Chebyshev degree rule")
        ->check(CLI::IsMember({"calibrated", "analytic"}))
        ->capture_default_str();
    app.add_option("--degree-epsilon", cfg.degree_epsilon, "Target error for the analytic degree rule")->capture_default_str();
    app.add_option("--lambda", cfg.lambda, "Walk-operator 1-norm lambda (Ha)");
    app.add_option("--energy-offset", cfg.energy_offset, "Identity shift removed before block encoding (Ha)");
    app.add_option("--bin-width", cfg.bin_width_ev, "Histogram bin width (eV)")->capture_default_str();

    app.add_option("--aleph", cfg.aleph, "Alias-sampling precision bits")->capture_default_str();
    app.add_option("--beth", cfg.beth, "Givens rotation precision bits")->capture_default_str();
    app.add_option("--aleph-mu", cfg.aleph_mu, "Dipole coefficient bits")->capture_default_str();
    app.add_option("--n-t", cfg.n_t, "THC rank (0: 3 N_a)")->capture_default_str();
    app.add_option("--rho", cfg.rho, "1-norm penalty (negative: 1e-4 ||V||_F)")->capture_default_str();
    app.add_option("--bliss", cfg.bliss, "BLISS parameters to optimize")
        ->check(CLI::IsMember({"full", "alpha", "none"}))
        ->capture_default_str();
    app.add_option("--bliss-evaluations", cfg.bliss_evaluations, "BLISS search budget (THC refits)")->capture_default_str();
    app.add_option("--thc-restarts", cfg.thc_restarts, "THC restarts")->capture_default_str();
    app.add_option("--n-a", cfg.n_a, "Active orbitals for estimates (default: from FCIDUMP)");
    app.add_option("--sqrt-pr", cfg.sqrt_pr, "sqrt of the success probability");
    app.add_option("--eps-omega", cfg.eps_omega_ev, "Target energy accuracy (eV)")->capture_default_str();
    app.add_option("--walk-model", cfg.walk_model, "Walk-operator cost model")
        ->check(CLI::IsMember({"affine-thc", "user", "back-solve"}))
        ->capture_default_str();
    app.add_option("--t-w", cfg.t_w, "User-supplied walk Toffolis");
    app.add_option("--n-w", cfg.n_w, "User-supplied walk qubits");
    app.add_option("--target-t-tot", cfg.target_t_tot, "Back-solve target Toffoli total");
    app.add_option("--target-n-tot", cfg.target_n_tot, "Back-solve target qubit total");

    std::vector<CLI::App*> subs;
    for (const auto& c : kCommands) subs.push_back(app.add_subcommand(c)->fallthrough());
    auto* full = app.add_subcommand("full-run", "Run every stage in order")->fallthrough();
    subs[0]->description("Parse and validate the integral files");
    subs[1]->description("Ground state of the (N_e, S_z) sector");
    subs[2]->description("Core-level absorption spectrum");
    subs[3]->description("Kramers-Heisenberg RIXS spectra");
    subs[4]->description("RIXS spectra from emulated phase-estimation sampling");
    subs[5]->description("BLISS shift and THC factorization; writes factor JSON");
    subs[6]->description("Logical qubit and Toffoli estimates");
    app.require_subcommand(1, 1);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    cfg.energy_offset_set = app.count("--energy-offset") > 0;

    std::string command;
    for (auto* s : app.get_subcommands()) command = s->get_name();

    if (!dump_config.empty()) {
        std::ofstream f(dump_config);
        if (!f) {
            err << "error: cannot write " << dump_config << '\n';
            return kUsage;
        }
        // unset optional values come out as key="" which does not parse back
        std::istringstream dumped(app.config_to_str(true, false));
        for (std::string line; std::getline(dumped, line);)
            if (line.size() < 3 || line.compare(line.size() - 3, 3, "=\"\"") != 0) f << line << '\n';
    }

    const std::vector<std::string> steps = command == "full-run" ? kCommands : std::vector<std::string>{command};
    (void)full;
    Session session(cfg, out);
    json all = json::object();
    try {
        validate(cfg);
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        if (ec) throw CliError(kFailure, "cannot create output directory " + cfg.output_dir + ": " + ec.message());
        for (const auto& step : steps) {
            const std::size_t before = session.files().size();
            json results = session.run(step);
            if (command == "full-run") {
                const std::vector<std::string> mine(session.files().begin() + static_cast<std::ptrdiff_t>(before), session.files().end());
                write_summary(cfg, step, kOk, "", results, mine, err);
            }
            all[step] = results;
        }
    } catch (const std::exception& e) {
        const int code = classify(e);
        err << "error: " << e.what() << '\n';
        write_summary(cfg, command, code, e.what(), all, session.files(), err);
        return code;
    }
    write_summary(cfg, command, kOk, "", command == "full-run" ? all : all[command], session.files(), err);
    return kOk;
}

} // namespace rixs::cli
