// resolvent.hpp - Chebyshev expansion of the rescaled Green's function Gamma*G(omega, Gamma)
//
// The target on the rescaled axis x = E/lambda is
//     f(x) = Gamma / (omega_in - (lambda*x - E_0) + i*Gamma),
// which satisfies |f| <= 1, so its polynomial approximation is a candidate for GQSP.
#pragma once

#include <rixs/fock.hpp>

#include <Eigen/Dense>

#include <complex>
#include <iosfwd>
#include <stdexcept>

namespace rixs::resolvent {

using fock::cplx;

enum class LogBase { natural, base10, base2 };

struct DegreeMode {
    enum class Kind { calibrated, analytic };
    Kind kind = Kind::calibrated;
    double epsilon = 1e-2;        // analytic mode only
    LogBase log_base = LogBase::natural;  // calibrated mode only

    static DegreeMode calibrated(LogBase base = LogBase::natural) { return {Kind::calibrated, 1e-2, base}; }
    static DegreeMode analytic(double eps) { return {Kind::analytic, eps, LogBase::natural}; }
};

// calibrated: ceil(lambda * (472 + 91 log(lambda))), fitted at Gamma = 0.3 eV, valid for lambda >= 1 Ha.
// analytic:   ceil((lambda/Gamma) * (ln(2/eps) + ln(lambda/Gamma))), from the Bernstein-ellipse bound.
long long select_degree(double lambda, double gamma, const DegreeMode& mode);

class SpectralBoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChebyshevResolvent {
    int degree = 0;
    Eigen::VectorXcd coefficients;  // c_0 .. c_degree
    double lambda = 1.0;
    double omega_in = 0.0;
    double gamma = 0.0;
    double e0 = 0.0;

    cplx target(double x) const { return gamma / cplx(omega_in - (lambda * x - e0), gamma); }
    // Clenshaw evaluation of sum_k c_k T_k(x).
    cplx evaluate(double x) const;
};

ChebyshevResolvent expand(double lambda, double omega_in, double gamma, double e0, int degree);

// max |f - poly| over `points` uniform nodes of [-1, 1].
double max_expansion_error(const ChebyshevResolvent& r, int points = 10001);

// Upper bound on the spectral radius of a hermitian operator. Gershgorin first; if that is
// not tight enough against `lambda`, refined by a Krylov estimate.
double spectral_radius_bound(const fock::SparseOperator& h, double lambda);

// sum_k c_k T_k(H/lambda) v by the three-term recurrence. Throws SpectralBoundError when
// ||H|| > lambda.
Eigen::VectorXcd apply(const ChebyshevResolvent& r, const fock::SparseOperator& h, const Eigen::VectorXcd& v);

// Same recurrence on a dense matrix; used by the dense cross-checks.
template <typename Derived>
Eigen::Matrix<cplx, Eigen::Dynamic, 1> apply_dense(const ChebyshevResolvent& r, const Eigen::MatrixBase<Derived>& h,
                                                   const Eigen::VectorXcd& v) {
    Eigen::VectorXcd t_prev = v;
    Eigen::VectorXcd acc = r.coefficients(0) * v;
    if (r.degree == 0) return acc;
    Eigen::VectorXcd t_cur = (h * v) / r.lambda;
    acc += r.coefficients(1) * t_cur;
    for (int k = 2; k <= r.degree; ++k) {
        Eigen::VectorXcd t_next = 2.0 * (h * t_cur) / r.lambda - t_prev;
        acc += r.coefficients(k) * t_next;
        t_prev.swap(t_cur);
        t_cur.swap(t_next);
    }
    return acc;
}

struct Realizability {
    bool realizable;
    double max_modulus;
};

// Evaluates P(e^{i theta}) = sum_{k=-K}^{K} c~_k e^{ik theta}, c~_0 = c_0, c~_{+-k} = c_k/2,
// on a uniform theta grid and checks max |P| <= 1 + 1e-9.
Realizability gqsp_realizable(const ChebyshevResolvent& r, int points = 10001);

// CSV dump "k,re,im" for external angle-finding tools.
void write_coefficients_csv(std::ostream& out, const ChebyshevResolvent& r);

} // namespace rixs::resolvent
