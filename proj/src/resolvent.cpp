#include <rixs/resolvent.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

namespace rixs::resolvent {

namespace {

double log_in(double x, LogBase base) {
    switch (base) {
    case LogBase::natural: return std::log(x);
    case LogBase::base10: return std::log10(x);
    case LogBase::base2: return std::log2(x);
    }
    return std::log(x);
}

// Extreme Ritz values of a hermitian operator from a fully reorthogonalized Lanczos run,
// widened by the Ritz residuals.
double krylov_radius_estimate(const fock::SparseMatrix& A) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = std::min<Eigen::Index>(n, 80);
    std::mt19937_64 rng(0xb0bd);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXcd Q(n, m);
    Eigen::VectorXcd q(n);
    for (Eigen::Index i = 0; i < n; ++i) q(i) = cplx(gauss(rng), 0.0);
    q.normalize();
    Eigen::VectorXd alpha(m), beta(m);
    Eigen::Index used = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        Q.col(j) = q;
        Eigen::VectorXcd w = A * q;
        alpha(j) = (q.adjoint() * w)(0).real();
        for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).adjoint() * w);
        beta(j) = w.norm();
        used = j + 1;
        if (beta(j) < 1e-12) break;
        q = w / beta(j);
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(used, used);
    for (Eigen::Index j = 0; j < used; ++j) {
        T(j, j) = alpha(j);
        if (j + 1 < used) T(j, j + 1) = T(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const double tail = beta(used - 1);
    const double r_lo = tail * std::abs(es.eigenvectors()(used - 1, 0));
    const double r_hi = tail * std::abs(es.eigenvectors()(used - 1, used - 1));
    return std::max(std::abs(es.eigenvalues()(0)) + r_lo, std::abs(es.eigenvalues()(used - 1)) + r_hi);
}

} // namespace

long long select_degree(double lambda, double gamma, const DegreeMode& mode) {
    if (!(gamma > 0.0)) throw std::invalid_argument("select_degree: gamma must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("select_degree: lambda must be positive");
    if (mode.kind == DegreeMode::Kind::calibrated) {
        if (lambda < 1.0)
            throw std::invalid_argument("select_degree: calibrated mode is fitted for lambda >= 1 Ha (got " +
                                        std::to_string(lambda) + "); use analytic mode");
        return static_cast<long long>(std::ceil(lambda * (472.0 + 91.0 * log_in(lambda, mode.log_base))));
    }
    if (!(mode.epsilon > 0.0 && mode.epsilon < 1.0)) throw std::invalid_argument("select_degree: epsilon must be in (0,1)");
    const double ratio = lambda / gamma;
    return static_cast<long long>(std::ceil(ratio * (std::log(2.0 / mode.epsilon) + std::log(ratio))));
}

cplx ChebyshevResolvent::evaluate(double x) const {
    cplx b1 = 0.0, b2 = 0.0;
    for (int k = degree; k >= 1; --k) {
        const cplx b0 = coefficients(k) + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return coefficients(0) + x * b1 - b2;
}

ChebyshevResolvent expand(double lambda, double omega_in, double gamma, double e0, int degree) {
    if (degree <= 0) throw std::invalid_argument("expand: degree must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("expand: gamma must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("expand: lambda must be positive");
    ChebyshevResolvent r;
    r.degree = degree;
    r.lambda = lambda;
    r.omega_in = omega_in;
    r.gamma = gamma;
    r.e0 = e0;
    // Discrete cosine quadrature at 4(K+1) Chebyshev nodes.
    const long nodes = 4L * (degree + 1);
    r.coefficients = Eigen::VectorXcd::Zero(degree + 1);
    for (long j = 0; j < nodes; ++j) {
        const double theta = std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(nodes);
        const double x = std::cos(theta);
        const cplx fx = r.target(x);
        // cos(k theta) via rotation to avoid K*N calls to cos
        const cplx step(std::cos(theta), std::sin(theta));
        cplx rot(1.0, 0.0);
        for (int k = 0; k <= degree; ++k) {
            r.coefficients(k) += fx * rot.real();
            rot *= step;
        }
    }
    r.coefficients *= 2.0 / static_cast<double>(nodes);
    r.coefficients(0) *= 0.5;
    return r;
}

double max_expansion_error(const ChebyshevResolvent& r, int points) {
    double worst = 0.0;
    for (int i = 0; i < points; ++i) {
        const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points - 1);
        worst = std::max(worst, std::abs(r.target(x) - r.evaluate(x)));
    }
    return worst;
}

double spectral_radius_bound(const fock::SparseOperator& h, double lambda) {
    const auto& m = h.matrix();
    double gersh = 0.0;
    for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
        double row = 0.0;
        for (fock::SparseMatrix::InnerIterator it(m, k); it; ++it) row += std::abs(it.value());
        gersh = std::max(gersh, row);
    }
    if (gersh <= lambda) return gersh;
    if (h.dimension() <= 1500) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense(), Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    }
    return std::min(gersh, krylov_radius_estimate(m));
}

Eigen::VectorXcd apply(const ChebyshevResolvent& r, const fock::SparseOperator& h, const Eigen::VectorXcd& v) {
    if (h.dimension() != v.size()) throw std::invalid_argument("apply: dimension mismatch");
    const double radius = spectral_radius_bound(h, r.lambda);
    if (radius > r.lambda * (1.0 + 1e-12))
        throw SpectralBoundError("apply: ||H|| ~ " + std::to_string(radius) + " exceeds lambda = " +
                                 std::to_string(r.lambda));
    const auto& H = h.matrix();
    Eigen::VectorXcd t_prev = v;
    Eigen::VectorXcd acc = r.coefficients(0) * v;
    if (r.degree == 0) return acc;
    Eigen::VectorXcd t_cur = (H * v) / r.lambda;
    acc += r.coefficients(1) * t_cur;
    Eigen::VectorXcd t_next(v.size());
    const double two_over = 2.0 / r.lambda;
    for (int k = 2; k <= r.degree; ++k) {
        t_next.noalias() = H * t_cur;
        t_next = two_over * t_next - t_prev;
        acc += r.coefficients(k) * t_next;
        t_prev.swap(t_cur);
        t_cur.swap(t_next);
    }
    return acc;
}

Realizability gqsp_realizable(const ChebyshevResolvent& r, int points) {
    double worst = 0.0;
    for (int i = 0; i < points; ++i) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(points);
        // sum_k c~_k e^{ik theta} with symmetric c~ collapses to sum_k c_k cos(k theta)
        worst = std::max(worst, std::abs(r.evaluate(std::cos(theta))));
    }
    return {worst <= 1.0 + 1e-9, worst};
}

void write_coefficients_csv(std::ostream& out, const ChebyshevResolvent& r) {
    const auto prec = out.precision(17);
    out << "k,re,im\n";
    for (int k = 0; k <= r.degree; ++k) out << k << ',' << r.coefficients(k).real() << ',' << r.coefficients(k).imag() << '\n';
    out.precision(prec);
}

} // namespace rixs::resolvent
