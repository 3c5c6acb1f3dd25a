#include <rixs/exact_spectra.hpp>
#include <rixs/units.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace rixs::spectra {

namespace {

constexpr double kDegenerateTolHa = 1e-8;

void require_hermitian(const SparseOperator& op) {
    double scale = 1.0;
    const auto& m = op.matrix();
    for (Eigen::Index k = 0; k < m.outerSize(); ++k)
        for (fock::SparseMatrix::InnerIterator it(m, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    if (op.hermiticity_defect() > 1e-10 * scale) throw std::invalid_argument("diagonalize: operator is not hermitian");
}

// Orthonormalize the columns of W against Q (two passes of classical Gram-Schmidt) and
// among themselves; columns that collapse are dropped.
Eigen::MatrixXcd orthonormal_complement(const Eigen::MatrixXcd& Q, Eigen::MatrixXcd W) {
    for (int pass = 0; pass < 2; ++pass)
        if (Q.cols() > 0) W -= Q * (Q.adjoint() * W);
    Eigen::MatrixXcd out(W.rows(), 0);
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
        Eigen::VectorXcd w = W.col(j);
        const double before = w.norm();
        for (int pass = 0; pass < 2; ++pass) {
            if (Q.cols() > 0) w -= Q * (Q.adjoint() * w);
            if (out.cols() > 0) w -= out * (out.adjoint() * w);
        }
        const double after = w.norm();
        if (after <= 1e-10 * std::max(before, 1e-300) || after < 1e-14) continue;
        out.conservativeResize(Eigen::NoChange, out.cols() + 1);
        out.col(out.cols() - 1) = w / after;
    }
    return out;
}

// Block Krylov eigensolver: Rayleigh-Ritz on a growing subspace expanded by
// the residual block, restarted from the lowest Ritz vectors. Block size > 1 captures
// degenerate multiplets that a single-vector Lanczos would miss.
SpectralDecomposition lowest_eigenpairs(const fock::SparseMatrix& A, int k, double rel_tol, int max_restarts,
                                        std::uint64_t seed) {
    const Eigen::Index n = A.rows();
    const Eigen::Index block = std::min<Eigen::Index>(n, k + 2);
    const Eigen::Index max_basis = std::min<Eigen::Index>(n, std::max<Eigen::Index>(20 * block, 60));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXcd X(n, block);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < block; ++j) X(i, j) = cplx(gauss(rng), 0.0);

    double best_residual = std::numeric_limits<double>::infinity();
    double norm_est = 0.0;
    for (int restart = 0; restart <= max_restarts; ++restart) {
        Eigen::MatrixXcd Q = orthonormal_complement(Eigen::MatrixXcd(n, 0), X);
        Eigen::MatrixXcd AQ = A * Q;
        while (true) {
            Eigen::MatrixXcd T = Q.adjoint() * AQ;
            T = 0.5 * (T + T.adjoint()).eval();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(T);
            const auto& theta = es.eigenvalues();
            norm_est = std::max({norm_est, std::abs(theta(0)), std::abs(theta(theta.size() - 1))});
            const Eigen::Index nk = std::min<Eigen::Index>(k, theta.size());
            const Eigen::Index nb = std::min<Eigen::Index>(block, theta.size());
            Eigen::MatrixXcd S = es.eigenvectors().leftCols(nb);
            Eigen::MatrixXcd Y = Q * S;
            Eigen::MatrixXcd R = AQ * S - Y * theta.head(nb).asDiagonal();
            double worst = 0.0;
            for (Eigen::Index j = 0; j < nk; ++j) worst = std::max(worst, R.col(j).norm());
            best_residual = std::min(best_residual, worst);
            const double tol = rel_tol * std::max(norm_est, 1.0);
            if ((worst <= tol && nk == k) || Q.cols() == n) {
                SpectralDecomposition d;
                d.eigenvalues = theta.head(nk);
                d.eigenvectors = Y.leftCols(nk);
                return d;
            }
            if (Q.cols() + nb > max_basis) {
                X = Y;
                break;
            }
            Eigen::MatrixXcd W = orthonormal_complement(Q, R);
            if (W.cols() == 0) {
                // Invariant subspace reached before k pairs converged; inject fresh directions.
                Eigen::MatrixXcd fresh(n, nb);
                for (Eigen::Index i = 0; i < n; ++i)
                    for (Eigen::Index j = 0; j < nb; ++j) fresh(i, j) = cplx(gauss(rng), 0.0);
                W = orthonormal_complement(Q, fresh);
                if (W.cols() == 0) {
                    X = Y;
                    break;
                }
            }
            const Eigen::Index old = Q.cols();
            Q.conservativeResize(Eigen::NoChange, old + W.cols());
            Q.rightCols(W.cols()) = W;
            AQ.conservativeResize(Eigen::NoChange, old + W.cols());
            AQ.rightCols(W.cols()) = A * W;
        }
    }
    throw ConvergenceError("diagonalize: lowest_k did not converge", best_residual);
}

} // namespace

SpectralDecomposition diagonalize_dense(const Eigen::MatrixXcd& h) {
    if (h.rows() != h.cols()) throw std::invalid_argument("diagonalize: matrix must be square");
    const double scale = std::max(1.0, h.size() ? h.cwiseAbs().maxCoeff() : 0.0);
    if (h.size() && (h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument("diagonalize: operator is not hermitian");
    SpectralDecomposition d;
    if (h.imag().isZero(0.0)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.real());
        if (es.info() != Eigen::Success) throw std::runtime_error("diagonalize: dense eigensolver failed");
        d.eigenvalues = es.eigenvalues();
        d.eigenvectors = es.eigenvectors().cast<cplx>();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        if (es.info() != Eigen::Success) throw std::runtime_error("diagonalize: dense eigensolver failed");
        d.eigenvalues = es.eigenvalues();
        d.eigenvectors = es.eigenvectors();
    }
    return d;
}

SpectralDecomposition diagonalize(const SparseOperator& op, const DiagonalizeOptions& opts) {
    require_hermitian(op);
    const Eigen::Index n = op.dimension();
    if (n == 0) throw std::invalid_argument("diagonalize: empty operator");
    if (opts.mode == DiagonalizeOptions::Mode::full) return diagonalize_dense(op.dense());
    if (opts.k < 1) throw std::invalid_argument("diagonalize: lowest_k needs k >= 1");
    if (opts.k >= n) return diagonalize_dense(op.dense());
    return lowest_eigenpairs(op.matrix(), opts.k, opts.tolerance, opts.max_restarts, opts.seed);
}

double SpectrumResult::total_weight() const {
    double w = 0.0;
    for (const auto& s : sticks) w += s.weight;
    return w;
}

Eigen::VectorXd broaden(const std::vector<Stick>& sticks, const Eigen::VectorXd& grid_ev, double width_ev) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid_ev.size());
    for (const auto& s : sticks) {
        if (s.weight == 0.0) continue;
        for (Eigen::Index i = 0; i < grid_ev.size(); ++i) out(i) += s.weight * lorentzian(grid_ev(i), s.x_ev, width_ev);
    }
    return out;
}

std::vector<Stick> merge_degenerate(std::vector<Stick> sticks, double tol_ev) {
    std::stable_sort(sticks.begin(), sticks.end(), [](const Stick& a, const Stick& b) { return a.x_ev < b.x_ev; });
    std::vector<Stick> out;
    for (const auto& s : sticks) {
        if (!out.empty() && s.x_ev - out.back().x_ev <= tol_ev) out.back().weight += s.weight;
        else out.push_back(s);
    }
    return out;
}

Eigen::VectorXd uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo)) throw std::invalid_argument("uniform_grid: need hi > lo and step > 0");
    const auto n = static_cast<Eigen::Index>(std::floor((hi - lo) / step + 1e-9)) + 1;
    return Eigen::VectorXd::LinSpaced(n, lo, lo + step * static_cast<double>(n - 1));
}

SpectrumResult xas_spectrum(const SpectralDecomposition& decomp, const SparseOperator& dipole,
                            const Eigen::VectorXd& grid_ev, double gamma) {
    if (grid_ev.size() == 0) throw std::invalid_argument("xas_spectrum: empty grid");
    if (!(gamma > 0.0)) throw std::invalid_argument("xas_spectrum: gamma must be positive");
    const double e0 = decomp.ground_energy();
    const Eigen::VectorXcd moments = decomp.eigenvectors.adjoint() * dipole.apply(decomp.ground_state());
    std::vector<Stick> sticks;
    sticks.reserve(moments.size());
    for (Eigen::Index n = 0; n < moments.size(); ++n)
        sticks.push_back({hartree_to_ev(decomp.eigenvalues(n) - e0), std::norm(moments(n))});
    SpectrumResult r;
    r.sticks = merge_degenerate(std::move(sticks), hartree_to_ev(kDegenerateTolHa));
    r.grid_ev = grid_ev;
    r.intensity = broaden(r.sticks, grid_ev, hartree_to_ev(gamma));
    r.meta.kind = "xas";
    r.meta.gamma_ev = hartree_to_ev(gamma);
    r.meta.eta_ev = r.meta.gamma_ev;
    return r;
}

std::vector<RixsAmplitude> rixs_amplitudes(const SpectralDecomposition& decomp, const SparseOperator& d_in,
                                           const SparseOperator& d_out, double omega_in, double gamma, double window) {
    if (!(omega_in > 0.0)) throw std::invalid_argument("rixs_amplitudes: omega_in must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("rixs_amplitudes: gamma must be positive");
    if (!(window >= 0.0)) throw std::invalid_argument("rixs_amplitudes: window must be non-negative");
    const double e0 = decomp.ground_energy();
    const auto& V = decomp.eigenvectors;
    Eigen::VectorXcd c = V.adjoint() * d_in.apply(decomp.ground_state());
    for (Eigen::Index n = 0; n < c.size(); ++n) {
        const double excitation = decomp.eigenvalues(n) - e0;
        if (std::abs(excitation - omega_in) > window) c(n) = 0.0;
        else c(n) /= cplx(omega_in - excitation, gamma);
    }
    const Eigen::VectorXcd w = V.adjoint() * d_out.apply_adjoint(V * c);
    std::vector<RixsAmplitude> out;
    out.reserve(w.size());
    for (Eigen::Index f = 0; f < w.size(); ++f) out.push_back({f, decomp.eigenvalues(f) - e0, w(f)});
    return out;
}

SpectrumResult rixs_spectrum(const std::vector<RixsAmplitude>& amplitudes, double eta, const Eigen::VectorXd& grid_ev) {
    if (grid_ev.size() == 0) throw std::invalid_argument("rixs_spectrum: empty grid");
    if (!(eta > 0.0)) throw std::invalid_argument("rixs_spectrum: eta must be positive");
    std::vector<Stick> sticks;
    sticks.reserve(amplitudes.size());
    for (const auto& a : amplitudes) sticks.push_back({hartree_to_ev(a.energy_loss), std::norm(a.amplitude)});
    SpectrumResult r;
    r.sticks = merge_degenerate(std::move(sticks), hartree_to_ev(kDegenerateTolHa));
    r.grid_ev = grid_ev;
    r.intensity = broaden(r.sticks, grid_ev, hartree_to_ev(eta));
    r.meta.kind = "rixs";
    r.meta.eta_ev = hartree_to_ev(eta);
    return r;
}

} // namespace rixs::spectra
