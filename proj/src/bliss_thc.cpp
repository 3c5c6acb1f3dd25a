#include <rixs/bliss_thc.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace rixs::bliss {

namespace {

Eigen::VectorXd vec_identity(int n) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n * n);
    for (int p = 0; p < n; ++p) d(p * n + p) = 1.0;
    return d;
}

Eigen::VectorXd vec_of(const Eigen::MatrixXd& m) {
    const auto n = m.rows();
    Eigen::VectorXd v(n * n);
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q) v(p * n + q) = m(p, q);
    return v;
}

// ---- hyperspherical parameterization --------------------------------------------------

// u_k = sin(phi_0)...sin(phi_{k-1}) cos(phi_k), last component without the cosine.
Eigen::VectorXd unit_from_angles(const Eigen::VectorXd& phi) {
    const auto n = phi.size() + 1;
    Eigen::VectorXd u(n);
    double prod = 1.0;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        u(k) = prod * std::cos(phi(k));
        prod *= std::sin(phi(k));
    }
    u(n - 1) = prod;
    return u;
}

// Column j holds du/dphi_j.
Eigen::MatrixXd unit_jacobian(const Eigen::VectorXd& phi) {
    const auto m = phi.size();
    const auto n = m + 1;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double prod = 1.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k < j) {
                prod *= std::sin(phi(k));
                continue;
            }
            if (k == j) {
                J(k, j) = -prod * std::sin(phi(k));
                prod *= std::cos(phi(k));
                continue;
            }
            J(k, j) = k + 1 < n ? prod * std::cos(phi(k)) : prod;
            if (k + 1 < n) prod *= std::sin(phi(k));
        }
    }
    return J;
}

Eigen::VectorXd angles_from_unit(const Eigen::VectorXd& u) {
    const auto n = u.size();
    Eigen::VectorXd phi(n - 1);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        if (k + 2 == n) phi(k) = std::atan2(u(n - 1), u(n - 2));
        else phi(k) = std::atan2(u.tail(n - k - 1).norm(), u(k));
    }
    return phi;
}

// ---- THC objective --------------------------------------------------------------------

struct Problem {
    const Eigen::MatrixXd& v;
    int n;
    int rank;
    double rho;
};

Eigen::MatrixXd units_of(const Problem& pb, const Eigen::VectorXd& x) {
    Eigen::MatrixXd u(pb.n, pb.rank);
    const int m = pb.n - 1;
    for (int mu = 0; mu < pb.rank; ++mu) u.col(mu) = unit_from_angles(x.segment(mu * m, m));
    return u;
}

Eigen::MatrixXd projector_matrix(const Eigen::MatrixXd& u) {
    const auto n = u.rows();
    Eigen::MatrixXd a(n * n, u.cols());
    for (Eigen::Index mu = 0; mu < u.cols(); ++mu)
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = 0; q < n; ++q) a(p * n + q, mu) = u(p, mu) * u(q, mu);
    return a;
}

// Per-entry L1 weights reproducing 1/2 sum |z| - 1/4 sum |z_diag| on a symmetric matrix.
double entry_weight(Eigen::Index i, Eigen::Index j) { return i == j ? 0.25 : 0.5; }

Eigen::MatrixXd least_squares_zeta(const Eigen::MatrixXd& a, const Eigen::MatrixXd& v) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    const Eigen::MatrixXd ap = cod.pseudoInverse();
    Eigen::MatrixXd z = ap * v * ap.transpose();
    return 0.5 * (z + z.transpose());
}

// FISTA on 1/2||V - A Z A^T||^2 + rho * weighted |Z|.
Eigen::MatrixXd lasso_zeta(const Eigen::MatrixXd& a, const Eigen::MatrixXd& v, double rho, Eigen::MatrixXd z) {
    const Eigen::MatrixXd g = a.transpose() * a;
    const Eigen::MatrixXd b = a.transpose() * v * a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    if (!(top > 0.0)) return Eigen::MatrixXd::Zero(z.rows(), z.cols());
    const double step = 1.0 / (top * top);
    Eigen::MatrixXd y = z, z_prev = z;
    double t = 1.0;
    for (int it = 0; it < 150; ++it) {
        Eigen::MatrixXd grad = g * y * g - b;
        Eigen::MatrixXd next = y - step * grad;
        for (Eigen::Index i = 0; i < next.rows(); ++i)
            for (Eigen::Index j = 0; j < next.cols(); ++j) {
                const double thr = step * rho * entry_weight(i, j);
                const double x = next(i, j);
                next(i, j) = x > thr ? x - thr : (x < -thr ? x + thr : 0.0);
            }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = next + ((t - 1.0) / t_next) * (next - z_prev);
        const double change = (next - z_prev).norm();
        z_prev = next;
        t = t_next;
        if (change <= 1e-11 * (1.0 + next.norm())) break;
    }
    return 0.5 * (z_prev + z_prev.transpose());
}

struct Evaluation {
    double f = 0.0;
    double residual = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd zeta;
};

Evaluation evaluate(const Problem& pb, const Eigen::VectorXd& x, bool want_grad, const Eigen::MatrixXd* zeta_warm) {
    const Eigen::MatrixXd u = units_of(pb, x);
    const Eigen::MatrixXd a = projector_matrix(u);
    Evaluation e;
    if (pb.rho > 0.0 && zeta_warm) e.zeta = lasso_zeta(a, pb.v, pb.rho, *zeta_warm);
    else if (pb.rho > 0.0) e.zeta = lasso_zeta(a, pb.v, pb.rho, least_squares_zeta(a, pb.v));
    else e.zeta = least_squares_zeta(a, pb.v);
    const Eigen::MatrixXd r = pb.v - a * e.zeta * a.transpose();
    e.residual = r.norm();
    e.f = 0.5 * e.residual * e.residual + pb.rho * two_body_norm(e.zeta);
    if (!want_grad) return e;
    // dF/dA = -2 R A Z (zeta is optimal for A, so its own variation drops out)
    const Eigen::MatrixXd da = -2.0 * r * a * e.zeta;
    const int m = pb.n - 1;
    e.grad.resize(x.size());
    for (int mu = 0; mu < pb.rank; ++mu) {
        Eigen::MatrixXd gm(pb.n, pb.n);
        for (int p = 0; p < pb.n; ++p)
            for (int q = 0; q < pb.n; ++q) gm(p, q) = 0.5 * da(p * pb.n + q, mu);
        const Eigen::VectorXd du = (gm + gm.transpose()) * u.col(mu);
        e.grad.segment(mu * m, m) = unit_jacobian(x.segment(mu * m, m)).transpose() * du;
    }
    return e;
}

struct Minimized {
    Eigen::VectorXd x;
    Evaluation eval;
    bool converged = false;
    int iterations = 0;
};

Minimized lbfgs(const Problem& pb, Eigen::VectorXd x, int max_iterations, double gtol) {
    constexpr int memory = 12;
    std::deque<Eigen::VectorXd> s_hist, y_hist;
    Minimized out;
    Evaluation cur = evaluate(pb, x, true, nullptr);
    const double scale = std::max(1.0, pb.v.norm());
    int stalls = 0;
    int it = 0;
    for (; it < max_iterations; ++it) {
        if (cur.grad.size() == 0 || cur.grad.lpNorm<Eigen::Infinity>() <= gtol * scale || cur.residual <= 1e-14 * scale) {
            out.converged = true;
            break;
        }
        // two-loop recursion
        Eigen::VectorXd q = cur.grad;
        std::vector<double> alphas(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            const double rho_i = 1.0 / y_hist[i].dot(s_hist[i]);
            alphas[i] = rho_i * s_hist[i].dot(q);
            q -= alphas[i] * y_hist[i];
        }
        if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double rho_i = 1.0 / y_hist[i].dot(s_hist[i]);
            const double beta = rho_i * y_hist[i].dot(q);
            q += (alphas[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd dir = -q;
        double slope = dir.dot(cur.grad);
        if (!(slope < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            dir = -cur.grad;
            slope = dir.dot(cur.grad);
        }
        double step = s_hist.empty() ? std::min(1.0, 1.0 / cur.grad.norm()) : 1.0;
        bool accepted = false;
        Evaluation next;
        Eigen::VectorXd x_next;
        for (int bt = 0; bt < 50; ++bt) {
            x_next = x + step * dir;
            next = evaluate(pb, x_next, true, &cur.zeta);
            if (next.f <= cur.f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (s_hist.empty()) break;
            s_hist.clear();
            y_hist.clear();
            continue;
        }
        const Eigen::VectorXd s = x_next - x;
        const Eigen::VectorXd y = next.grad - cur.grad;
        if (y.dot(s) > 1e-300) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            if (static_cast<int>(s_hist.size()) > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        const double decrease = cur.f - next.f;
        stalls = decrease <= 1e-16 * std::max(std::abs(cur.f), 1e-300) ? stalls + 1 : 0;
        x = x_next;
        cur = std::move(next);
        if (stalls >= 8) break;
    }
    out.x = x;
    out.eval = cur;
    out.iterations = it;
    return out;
}

// Simultaneous diagonalization: contracting q and s of V with random vectors gives
// M(x, y) = U D_x Z D_y U^T, and M(x, y) M(x', y)^+ = U D_x D_x'^-1 U^+.
bool jennrich_init(const Eigen::MatrixXd& v, int n, int rank, std::mt19937_64& rng, Eigen::MatrixXd& u) {
    std::normal_distribution<double> gauss;
    Eigen::VectorXd x(n), x2(n), y(n);
    for (int i = 0; i < n; ++i) {
        x(i) = gauss(rng);
        x2(i) = gauss(rng);
        y(i) = gauss(rng);
    }
    auto contract = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q)
                for (int r = 0; r < n; ++r)
                    for (int s = 0; s < n; ++s) m(p, r) += v(p * n + q, r * n + s) * a(q) * b(s);
        return m;
    };
    const Eigen::MatrixXd m1 = contract(x, y), m2 = contract(x2, y);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m2, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0 || sv(rank - 1) <= 1e-10 * sv(0)) return false;
    const Eigen::MatrixXd left = svd.matrixU().leftCols(rank);
    const Eigen::MatrixXd right = svd.matrixV().leftCols(rank);
    const Eigen::MatrixXd r1 = left.transpose() * m1 * right;
    const Eigen::MatrixXd r2 = left.transpose() * m2 * right;
    Eigen::EigenSolver<Eigen::MatrixXd> es(r1 * r2.inverse());
    if (es.info() != Eigen::Success) return false;
    u.resize(n, rank);
    for (int mu = 0; mu < rank; ++mu) {
        Eigen::VectorXd col = (left * es.eigenvectors().col(mu)).real();
        const double nrm = col.norm();
        if (!(nrm > 1e-12)) return false;
        u.col(mu) = col / nrm;
    }
    return true;
}

// Leading eigenvectors of the reshaped leading eigenvectors of V.
Eigen::MatrixXd spectral_init(const Eigen::MatrixXd& v, int n, int rank, std::mt19937_64& rng) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (v + v.transpose()));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(v.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });
    std::vector<std::vector<Eigen::VectorXd>> pools;
    for (Eigen::Index k : order) {
        if (std::abs(es.eigenvalues()(k)) <= 1e-12 * std::max(1.0, std::abs(es.eigenvalues()(order[0])))) break;
        Eigen::MatrixXd m(n, n);
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) m(p, q) = es.eigenvectors()(p * n + q, k);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> inner(0.5 * (m + m.transpose()));
        std::vector<Eigen::Index> io(static_cast<std::size_t>(n));
        std::iota(io.begin(), io.end(), 0);
        std::stable_sort(io.begin(), io.end(), [&](Eigen::Index a, Eigen::Index b) {
            return std::abs(inner.eigenvalues()(a)) > std::abs(inner.eigenvalues()(b));
        });
        std::vector<Eigen::VectorXd> pool;
        for (Eigen::Index j : io) pool.push_back(inner.eigenvectors().col(j));
        pools.push_back(std::move(pool));
    }
    Eigen::MatrixXd u(n, rank);
    int filled = 0;
    for (int level = 0; level < n && filled < rank; ++level)
        for (const auto& pool : pools) {
            if (filled == rank) break;
            u.col(filled++) = pool[static_cast<std::size_t>(level)];
        }
    std::normal_distribution<double> gauss;
    for (; filled < rank; ++filled) {
        Eigen::VectorXd r(n);
        for (int i = 0; i < n; ++i) r(i) = gauss(rng);
        u.col(filled) = r.normalized();
    }
    return u;
}

Eigen::VectorXd pack(const Eigen::MatrixXd& u) {
    const auto n = u.rows();
    Eigen::VectorXd x((n - 1) * u.cols());
    for (Eigen::Index mu = 0; mu < u.cols(); ++mu) x.segment(mu * (n - 1), n - 1) = angles_from_unit(u.col(mu));
    return x;
}

// ---- Nelder-Mead ---------------------------------------------------------------------

template <typename F>
std::pair<Eigen::VectorXd, double> nelder_mead(F&& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& steps,
                                              int max_evals, std::vector<double>& history) {
    const auto d = x0.size();
    std::vector<Eigen::VectorXd> pts{x0};
    std::vector<double> vals{f(x0)};
    int evals = 1;
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::VectorXd p = x0;
        p(i) += steps(i);
        pts.push_back(p);
        vals.push_back(f(p));
        ++evals;
    }
    auto order = [&] {
        std::vector<std::size_t> idx(pts.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<Eigen::VectorXd> p2;
        std::vector<double> v2;
        for (auto i : idx) {
            p2.push_back(pts[i]);
            v2.push_back(vals[i]);
        }
        pts.swap(p2);
        vals.swap(v2);
    };
    order();
    history.push_back(vals.front());
    while (evals < max_evals) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
        for (Eigen::Index i = 0; i < d; ++i) c += pts[static_cast<std::size_t>(i)];
        c /= static_cast<double>(d);
        const Eigen::VectorXd& worst = pts.back();
        const Eigen::VectorXd xr = c + (c - worst);
        const double fr = f(xr);
        ++evals;
        if (fr < vals.front()) {
            const Eigen::VectorXd xe = c + 2.0 * (c - worst);
            const double fe = f(xe);
            ++evals;
            if (fe < fr) {
                pts.back() = xe;
                vals.back() = fe;
            } else {
                pts.back() = xr;
                vals.back() = fr;
            }
        } else if (fr < vals[vals.size() - 2]) {
            pts.back() = xr;
            vals.back() = fr;
        } else {
            const bool outside = fr < vals.back();
            const Eigen::VectorXd xc = outside ? Eigen::VectorXd(c + 0.5 * (xr - c)) : Eigen::VectorXd(c + 0.5 * (worst - c));
            const double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, vals.back())) {
                pts.back() = xc;
                vals.back() = fc;
            } else {
                for (std::size_t i = 1; i < pts.size() && evals < max_evals; ++i) {
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
                    vals[i] = f(pts[i]);
                    ++evals;
                }
            }
        }
        order();
        history.push_back(vals.front());
        if (std::abs(vals.back() - vals.front()) <= 1e-12 * std::max(1.0, std::abs(vals.front()))) break;
    }
    return {pts.front(), vals.front()};
}

} // namespace

void BlissParams::validate(int n_orb) const {
    if (beta.rows() != n_orb || beta.cols() != n_orb) throw std::invalid_argument("BlissParams: beta must be n x n");
    if ((beta - beta.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw std::invalid_argument("BlissParams: beta must be symmetric");
    if (!std::isfinite(alpha1) || !std::isfinite(alpha2)) throw std::invalid_argument("BlissParams: non-finite alpha");
}

ShiftedTensors apply_bliss(const qchem::IntegralSet& ints, const BlissParams& params, int n_elec) {
    const int n = ints.n_orb;
    params.validate(n);
    ShiftedTensors out;
    out.h = ints.h - params.alpha1 * Eigen::MatrixXd::Identity(n, n) + static_cast<double>(n_elec) * params.beta;
    out.v = ints.v;
    const Eigen::VectorXd d = vec_identity(n);
    const Eigen::VectorXd b = vec_of(params.beta);
    out.v.matrix() -= 2.0 * params.alpha2 * d * d.transpose() + b * d.transpose() + d * b.transpose();
    out.constant = ints.e_frozen;
    return out;
}

qchem::IntegralSet shifted_integrals(const qchem::IntegralSet& ints, const BlissParams& params, int n_elec) {
    const ShiftedTensors s = apply_bliss(ints, params, n_elec);
    qchem::IntegralSet out = ints;
    out.h = s.h;
    out.v = s.v;
    out.e_frozen = s.constant;
    return out;
}

Eigen::MatrixXd kappa_matrix(const qchem::IntegralSet& original, const ShiftedTensors& shifted, const BlissParams& params,
                             int n_elec) {
    const int n = original.n_orb;
    Eigen::MatrixXd k = shifted.h - params.alpha1 * Eigen::MatrixXd::Identity(n, n) + 2.0 * n_elec * params.beta;
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
            for (int r = 0; r < n; ++r) k(p, q) += -0.5 * original.v(p, r, r, q) + shifted.v(p, q, r, r);
    return k;
}

Eigen::VectorXd one_body_eigenvalues(const Eigen::MatrixXd& kappa) {
    if (kappa.size() && (kappa - kappa.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::logic_error("kappa is not symmetric; the shifted tensors are inconsistent");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kappa, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

double two_body_norm(const Eigen::MatrixXd& zeta) {
    return 0.5 * zeta.cwiseAbs().sum() - 0.25 * zeta.diagonal().cwiseAbs().sum();
}

double one_norm(const Eigen::VectorXd& t, const Eigen::MatrixXd& zeta) { return t.cwiseAbs().sum() + two_body_norm(zeta); }

Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& u, const Eigen::MatrixXd& zeta) {
    const Eigen::MatrixXd a = projector_matrix(u);
    return a * zeta * a.transpose();
}

double default_rho(const qchem::TwoBodyTensor& v) { return 1e-4 * v.matrix().norm(); }

ThcFit fit_thc(const qchem::TwoBodyTensor& v, int rank, double rho, const ThcOptions& options,
               const Eigen::MatrixXd* warm_start) {
    if (rank < 1) throw std::invalid_argument("fit_thc: rank must be >= 1");
    if (!(rho >= 0.0)) throw std::invalid_argument("fit_thc: rho must be >= 0");
    const int n = v.n_orb();
    if (n < 1) throw std::invalid_argument("fit_thc: empty tensor");
    std::mt19937_64 rng(options.seed);

    Eigen::MatrixXd u0;
    if (warm_start) {
        if (warm_start->rows() != n || warm_start->cols() != rank) throw std::invalid_argument("fit_thc: warm start shape");
        u0 = warm_start->colwise().normalized();
    } else if (!(rank <= n && jennrich_init(v.matrix(), n, rank, rng, u0))) {
        u0 = spectral_init(v.matrix(), n, rank, rng);
    }

    Problem pb{v.matrix(), n, rank, 0.0};
    Minimized best;
    best.eval.f = std::numeric_limits<double>::infinity();
    const Eigen::VectorXd x0 = pack(u0);
    std::normal_distribution<double> gauss;
    // a warm start under a penalty is assumed to come from an earlier penalized fit
    const bool direct = warm_start && rho > 0.0;
    for (int r = 0; r <= std::max(0, options.restarts) && !direct; ++r) {
        Eigen::VectorXd x = x0;
        if (r > 0)
            for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += 0.25 * r * gauss(rng);
        Minimized m = lbfgs(pb, x, options.max_iterations, options.gradient_tolerance);
        if (m.eval.f < best.eval.f) best = std::move(m);
        if (best.eval.residual <= 1e-13 * std::max(1.0, v.matrix().norm())) break;
    }
    if (rho > 0.0) {
        const int stages = direct ? 1 : std::max(1, options.rho_stages);
        const Eigen::VectorXd start = direct ? x0 : best.x;
        for (int s = 1; s <= stages; ++s) {
            pb.rho = rho * std::pow(10.0, static_cast<double>(s - stages));
            best = lbfgs(pb, s == 1 ? start : best.x, options.penalty_iterations, options.gradient_tolerance);
        }
    }

    ThcFit fit;
    fit.factors.rank = rank;
    fit.factors.u = units_of(pb, best.x);
    fit.factors.zeta = best.eval.zeta;
    fit.factors.residual = best.eval.residual;
    fit.residual = best.eval.residual;
    fit.two_body_lambda = two_body_norm(best.eval.zeta);
    fit.converged = best.converged;
    fit.iterations = best.iterations;
    return fit;
}

BlissThcResult optimize_bliss_thc(const qchem::IntegralSet& ints, int n_elec, int rank, double rho, BlissMode mode,
                                  const BlissSearchOptions& options) {
    const int n = ints.n_orb;
    const double rho_eff = rho > 0.0 ? rho : std::max(default_rho(ints.v), 1e-300);

    struct Candidate {
        BlissParams params;
        ThcFit fit;
        Eigen::VectorXd t;
        double lambda;
        double objective;
    };
    auto run = [&](const BlissParams& params, const Eigen::MatrixXd* warm, const ThcOptions& thc) {
        const ShiftedTensors s = apply_bliss(ints, params, n_elec);
        Candidate c{params, fit_thc(s.v, rank, rho, thc, warm), one_body_eigenvalues(kappa_matrix(ints, s, params, n_elec)),
                    0.0, 0.0};
        c.lambda = one_norm(c.t, c.fit.factors.zeta);
        c.objective = c.lambda + 0.5 * c.fit.residual * c.fit.residual / rho_eff;
        return c;
    };

    const Candidate base = run(BlissParams::zero(n), nullptr, options.thc);
    BlissThcResult out;
    out.baseline_lambda = base.lambda;
    Candidate chosen = base;

    if (mode != BlissMode::none) {
        const Eigen::MatrixXd warm = base.fit.factors.u;
        ThcOptions thc = options.thc;
        thc.restarts = 0;
        thc.penalty_iterations = std::max(1, options.candidate_iterations);
        const int nb = mode == BlissMode::full ? n * (n + 1) / 2 : 0;
        auto unpack = [&](const Eigen::VectorXd& x) {
            BlissParams p = BlissParams::zero(n);
            p.alpha1 = x(0);
            p.alpha2 = x(1);
            int k = 2;
            for (int i = 0; i < n && nb; ++i)
                for (int j = i; j < n; ++j) p.beta(i, j) = p.beta(j, i) = x(k++);
            return p;
        };
        Candidate best = base;
        auto objective = [&](const Eigen::VectorXd& x) {
            Candidate c = run(unpack(x), &warm, thc);
            if (c.objective < best.objective) best = c;
            return c.objective;
        };
        const double h_scale = std::max(ints.h.cwiseAbs().maxCoeff(), 1e-3);
        const double v_scale = std::max(ints.v.matrix().cwiseAbs().maxCoeff(), 1e-3);
        Eigen::VectorXd steps(2 + nb);
        steps(0) = 0.1 * h_scale;
        steps(1) = 0.02 * v_scale;
        for (int i = 0; i < nb; ++i) steps(2 + i) = 0.02 * h_scale;
        nelder_mead(objective, Eigen::VectorXd::Zero(2 + nb), steps, options.max_evaluations, out.history);
        if (best.lambda <= base.lambda && best.objective <= base.objective) chosen = best;
    }

    out.params = chosen.params;
    out.factors = chosen.fit.factors;
    out.factors.t = chosen.t;
    out.factors.bliss = chosen.params;
    out.lambda = chosen.lambda;
    out.improved = chosen.lambda < base.lambda;
    return out;
}

void write_factors_json(std::ostream& out, const ThcFactors& f) {
    using nlohmann::json;
    auto rows = [](const Eigen::MatrixXd& m) {
        json a = json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            json r = json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
            a.push_back(r);
        }
        return a;
    };
    json j;
    j["format"] = "rixs-thc-factors";
    j["version"] = 1;
    j["n_orb"] = f.u.rows();
    j["rank"] = f.rank;
    j["zeta"] = rows(f.zeta);
    j["u"] = rows(f.u.transpose());
    j["t"] = std::vector<double>(f.t.data(), f.t.data() + f.t.size());
    j["alpha1"] = f.bliss.alpha1;
    j["alpha2"] = f.bliss.alpha2;
    j["beta"] = rows(f.bliss.beta.size() ? f.bliss.beta : Eigen::MatrixXd::Zero(f.u.rows(), f.u.rows()));
    j["residual"] = f.residual;
    j["lambda"] = f.lambda();
    out << j.dump(2) << '\n';
}

ThcFactors read_factors_json(std::istream& in) {
    using nlohmann::json;
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("factors JSON: ") + e.what());
    }
    auto matrix = [&](const char* key, Eigen::Index rows, Eigen::Index cols) {
        if (!j.contains(key) || !j[key].is_array() || static_cast<Eigen::Index>(j[key].size()) != rows)
            throw std::invalid_argument(std::string("factors JSON: bad '") + key + "'");
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto& r = j[key][static_cast<std::size_t>(i)];
            if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
                throw std::invalid_argument(std::string("factors JSON: bad row in '") + key + "'");
            for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
        }
        return m;
    };
    try {
        ThcFactors f;
        const int n = j.at("n_orb").get<int>();
        f.rank = j.at("rank").get<int>();
        if (n < 1 || f.rank < 1) throw std::invalid_argument("factors JSON: n_orb and rank must be positive");
        f.zeta = matrix("zeta", f.rank, f.rank);
        f.u = matrix("u", f.rank, n).transpose();
        const auto t = j.value("t", std::vector<double>{});
        f.t = Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
        f.bliss.alpha1 = j.value("alpha1", 0.0);
        f.bliss.alpha2 = j.value("alpha2", 0.0);
        f.bliss.beta = j.contains("beta") ? matrix("beta", n, n) : Eigen::MatrixXd::Zero(n, n);
        f.residual = j.value("residual", 0.0);
        if ((f.zeta - f.zeta.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("factors JSON: zeta is not symmetric");
        for (int mu = 0; mu < f.rank; ++mu)
            if (std::abs(f.u.col(mu).norm() - 1.0) > 1e-12)
                throw std::invalid_argument("factors JSON: u vector " + std::to_string(mu) + " is not unit norm");
        return f;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("factors JSON: ") + e.what());
    }
}

} // namespace rixs::bliss
