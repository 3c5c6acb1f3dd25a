#include <doctest.h>

#include <rixs/bliss_thc.hpp>
#include <rixs/fock.hpp>

#include "oracles/dense_fock.hpp"
#include "oracles/random_instance.hpp"

#include <random>
#include <sstream>

using namespace rixs;
using namespace rixs::bliss;

namespace {

BlissParams random_params(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    BlissParams p;
    p.alpha1 = u(rng);
    p.alpha2 = 0.3 * u(rng);
    p.beta = oracle::random_symmetric(n, rng, 0.4);
    return p;
}

Eigen::MatrixXd random_units(int n, int rank, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd u(n, rank);
    for (auto& x : u.reshaped()) x = g(rng);
    return u.colwise().normalized();
}

qchem::TwoBodyTensor tensor_from(const Eigen::MatrixXd& m, int n) {
    qchem::TwoBodyTensor v(n);
    v.matrix() = m;
    return v;
}

double lambda_at(const qchem::IntegralSet& ints, const BlissParams& p, int ne, int rank, const ThcOptions& o) {
    const auto s = apply_bliss(ints, p, ne);
    const auto fit = fit_thc(s.v, rank, 0.0, o);
    return one_norm(one_body_eigenvalues(kappa_matrix(ints, s, p, ne)), fit.factors.zeta);
}

} // namespace

TEST_CASE("zero shift leaves the tensors alone") {
    const auto ints = oracle::random_integrals(3, 2, 0, 4);
    const auto s = apply_bliss(ints, BlissParams::zero(3), 2);
    CHECK(s.h == ints.h);
    CHECK(s.v.matrix() == ints.v.matrix());
    CHECK(s.constant == ints.e_frozen);
}

TEST_CASE("shifted hamiltonian differs by a constant on the sector") {
    std::mt19937_64 rng(17);
    struct Case {
        int n, ne, sz;
    };
    for (const Case c : {Case{3, 2, 0}, Case{4, 4, 0}, Case{4, 5, 1}, Case{3, 6, 0}}) {
        CAPTURE(c.n);
        CAPTURE(c.ne);
        const auto ints = oracle::random_integrals(c.n, c.ne, c.sz, 100 + c.n + c.ne);
        const auto basis = fock::build_basis(c.n, c.ne, c.sz);
        const auto h = fock::build_hamiltonian(ints, basis);
        for (int trial = 0; trial < 4; ++trial) {
            const auto p = random_params(c.n, rng);
            const auto hb = fock::build_hamiltonian(shifted_integrals(ints, p, c.ne), basis);
            const double shift = -p.alpha1 * c.ne - p.alpha2 * c.ne * c.ne;
            const fock::SparseMatrix diff = hb.matrix() - h.matrix();
            const Eigen::MatrixXcd expected = shift * Eigen::MatrixXcd::Identity(h.dimension(), h.dimension());
            CHECK((Eigen::MatrixXcd(diff) - expected).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SUBCASE("alpha2 = 1 with two electrons shifts by -4") {
        const auto ints = oracle::random_integrals(2, 2, 0, 1);
        BlissParams p = BlissParams::zero(2);
        p.alpha2 = 1.0;
        const auto basis = fock::build_basis(2, 2, 0);
        const Eigen::MatrixXcd d = fock::build_hamiltonian(shifted_integrals(ints, p, 2), basis).dense() -
                                   fock::build_hamiltonian(ints, basis).dense();
        CHECK((d + 4.0 * Eigen::MatrixXcd::Identity(d.rows(), d.cols())).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("shifted tensors equal the operator form off the target sector") {
    // H_B = H - a1 N - a2 N^2 - 1/2 sum beta_pq (E_pq (N - Ne) + (N - Ne) E_qp), built by brute force
    std::mt19937_64 rng(23);
    const int n = 3, ne = 2;
    const auto ints = oracle::random_integrals(n, ne, 0, 77);
    const oracle::FockSpace fs(n);
    const Eigen::MatrixXd h = fs.hamiltonian(ints);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(fs.dim(), fs.dim());
    const Eigen::MatrixXd num = fs.one_body(Eigen::MatrixXd::Identity(n, n));
    for (int trial = 0; trial < 3; ++trial) {
        const auto p = random_params(n, rng);
        Eigen::MatrixXd hb = h - p.alpha1 * num - p.alpha2 * num * num;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const Eigen::MatrixXd e = fs.excitation(a, b);
                hb -= 0.5 * p.beta(a, b) * (e * (num - ne * id) + (num - ne * id) * e.transpose());
            }
        for (auto [ne2, sz] : {std::pair{2, 0}, std::pair{3, 1}, std::pair{4, 0}, std::pair{1, -1}}) {
            CAPTURE(ne2);
            const auto basis = fock::build_basis(n, ne2, sz);
            const Eigen::MatrixXd ref = fs.restrict(hb, basis);
            const auto got = fock::build_hamiltonian(shifted_integrals(ints, p, ne), basis);
            CHECK((got.dense() - ref.cast<fock::cplx>()).cwiseAbs().maxCoeff() < 1e-11);
        }
    }
}

TEST_CASE("kappa") {
    SUBCASE("no two-body part gives h") {
        auto ints = oracle::random_integrals(3, 2, 0, 6);
        ints.v = qchem::TwoBodyTensor(3);
        const auto p = BlissParams::zero(3);
        CHECK((kappa_matrix(ints, apply_bliss(ints, p, 2), p, 2) - ints.h).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("two orbitals with pair-diagonal V by hand") {
        auto ints = qchem::IntegralSet::zeros(2, 2, 0);
        ints.h << -1.0, 0.2, 0.2, 0.5;
        const double a = 0.8, b = 0.6, c = 0.3;
        ints.v.set(0, 0, 0, 0, a);
        ints.v.set(1, 1, 1, 1, b);
        ints.v.set(0, 0, 1, 1, c);
        const auto p = BlissParams::zero(2);
        Eigen::Matrix2d expected;
        expected << -1.0 + a / 2 + c, 0.2, 0.2, 0.5 + b / 2 + c;
        CHECK((kappa_matrix(ints, apply_bliss(ints, p, 2), p, 2) - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("dependence on the shift parameters") {
        // by hand: kappa(p) - kappa(0) = -2 a1 I + 3 Ne beta - 2 a2 n I - n beta - tr(beta) I
        std::mt19937_64 rng(8);
        const int n = 4, ne = 3;
        const auto ints = oracle::random_integrals(n, ne, 1, 12);
        const auto p = random_params(n, rng);
        const auto z = BlissParams::zero(n);
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
        const Eigen::MatrixXd expected = -2.0 * p.alpha1 * id + 3.0 * ne * p.beta - 2.0 * p.alpha2 * n * id -
                                         n * p.beta - p.beta.trace() * id;
        const Eigen::MatrixXd got =
            kappa_matrix(ints, apply_bliss(ints, p, ne), p, ne) - kappa_matrix(ints, apply_bliss(ints, z, ne), z, ne);
        CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("eigenvalues sum to the trace") {
        std::mt19937_64 rng(9);
        const auto ints = oracle::random_integrals(5, 4, 0, 13);
        const auto p = random_params(5, rng);
        const Eigen::MatrixXd k = kappa_matrix(ints, apply_bliss(ints, p, 4), p, 4);
        CHECK(one_body_eigenvalues(k).sum() == doctest::Approx(k.trace()).epsilon(1e-12));
    }
    SUBCASE("asymmetric kappa is a logic error") {
        Eigen::Matrix2d k;
        k << 1.0, 0.5, 0.4, 1.0;
        CHECK_THROWS_AS(one_body_eigenvalues(k), std::logic_error);
    }
}

TEST_CASE("one-norm") {
    CHECK(one_norm(Eigen::Vector2d(1.0, -1.0), Eigen::MatrixXd::Zero(2, 2)) == 2.0);
    CHECK(one_norm(Eigen::VectorXd(), Eigen::MatrixXd::Identity(2, 2)) == 0.5);
    Eigen::Matrix2d z;
    z << 1.0, -2.0, -2.0, 3.0;
    // 1/2 * 8 - 1/4 * 4
    CHECK(two_body_norm(z) == 3.0);
}

TEST_CASE("reconstruct has the eight-fold symmetry") {
    std::mt19937_64 rng(3);
    const int n = 3, rank = 4;
    const Eigen::MatrixXd u = random_units(n, rank, rng);
    const Eigen::MatrixXd zeta = oracle::random_symmetric(rank, rng);
    CHECK(tensor_from(reconstruct(u, zeta), n).symmetry_defect() < 1e-15);
}

TEST_CASE("thc fit") {
    SUBCASE("planted rank-2 factorization is recovered") {
        std::mt19937_64 rng(31);
        const int n = 4, rank = 2;
        const Eigen::MatrixXd u = random_units(n, rank, rng);
        Eigen::MatrixXd zeta(2, 2);
        zeta << 1.3, 0.4, 0.4, -0.7;
        const auto v = tensor_from(reconstruct(u, zeta), n);
        const auto fit = fit_thc(v, rank, 0.0);
        CHECK(fit.residual < 1e-8);
        CHECK(fit.two_body_lambda <= two_body_norm(zeta) + 1e-6);
        CHECK((fit.factors.u.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK((fit.factors.zeta - fit.factors.zeta.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("rank n^2 represents a generic three-orbital tensor") {
        const auto ints = oracle::random_integrals(3, 2, 0, 41);
        const auto fit = fit_thc(ints.v, 9, 0.0);
        CHECK(fit.residual < 1e-6);
    }
    SUBCASE("a penalty trades residual for a smaller norm") {
        const auto ints = oracle::random_integrals(3, 2, 0, 42);
        const auto free = fit_thc(ints.v, 4, 0.0);
        const auto pen = fit_thc(ints.v, 4, 0.05);
        CHECK(pen.residual >= free.residual - 1e-9);
        CHECK(pen.two_body_lambda <= free.two_body_lambda + 1e-9);
    }
    SUBCASE("bad arguments") {
        const auto ints = oracle::random_integrals(2, 2, 0, 1);
        CHECK_THROWS_AS(fit_thc(ints.v, 0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(fit_thc(ints.v, 2, -1.0), std::invalid_argument);
        const Eigen::MatrixXd wrong = Eigen::MatrixXd::Ones(3, 2);
        CHECK_THROWS_AS(fit_thc(ints.v, 2, 0.0, {}, &wrong), std::invalid_argument);
    }
}

TEST_CASE("shift search never increases lambda") {
    SUBCASE("random instances") {
        BlissSearchOptions o;
        o.max_evaluations = 40;
        o.candidate_iterations = 20;
        o.thc.restarts = 1;
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto ints = oracle::random_integrals(3, 2, 0, seed);
            for (auto mode : {BlissMode::full, BlissMode::alpha_only, BlissMode::none}) {
                const auto r = optimize_bliss_thc(ints, 2, 4, 1e-3, mode, o);
                CHECK(r.lambda <= r.baseline_lambda + 1e-12);
                CHECK(r.factors.lambda() == doctest::Approx(r.lambda).epsilon(1e-12));
                if (mode == BlissMode::none) CHECK(r.lambda == r.baseline_lambda);
            }
        }
    }
    SUBCASE("a uniform one-body offset is removed by alpha") {
        auto ints = qchem::IntegralSet::zeros(2, 2, 0);
        ints.h << 3.0, 0.1, 0.1, 3.4;
        ints.v.set(0, 0, 0, 0, 0.2);
        ints.v.set(1, 1, 1, 1, 0.25);
        ints.v.set(0, 0, 1, 1, 0.1);
        ints.v.set(0, 1, 0, 1, 0.05);
        ThcOptions thc;
        thc.restarts = 1;
        // alpha1 grid at alpha2 = 0, beta = 0
        double grid_best = std::numeric_limits<double>::infinity();
        for (double a1 = 0.0; a1 <= 4.0; a1 += 0.05) {
            BlissParams p = BlissParams::zero(2);
            p.alpha1 = a1;
            grid_best = std::min(grid_best, lambda_at(ints, p, 2, 3, thc));
        }
        BlissSearchOptions o;
        o.max_evaluations = 200;
        o.thc = thc;
        const auto r = optimize_bliss_thc(ints, 2, 3, 0.0, BlissMode::alpha_only, o);
        CHECK(r.improved);
        CHECK(r.lambda < 0.5 * r.baseline_lambda);
        CHECK(r.lambda <= grid_best + 1e-3);
    }
}

TEST_CASE("factor JSON") {
    std::mt19937_64 rng(5);
    ThcFactors f;
    f.rank = 3;
    f.u = random_units(4, 3, rng);
    f.zeta = oracle::random_symmetric(3, rng);
    f.t = Eigen::Vector4d(0.1, -0.2, 0.3, 1.5);
    f.bliss = random_params(4, rng);
    f.residual = 2e-5;
    std::stringstream buf;
    write_factors_json(buf, f);
    const auto g = read_factors_json(buf);
    CHECK(g.rank == 3);
    CHECK((g.u - f.u).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((g.zeta - f.zeta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.lambda() == f.lambda());
    CHECK(g.bliss.alpha1 == f.bliss.alpha1);
    CHECK((g.bliss.beta - f.bliss.beta).cwiseAbs().maxCoeff() == 0.0);

    std::istringstream garbage("{\"n_orb\": 2}");
    CHECK_THROWS_AS(read_factors_json(garbage), std::invalid_argument);
    std::istringstream not_json("zeta");
    CHECK_THROWS_AS(read_factors_json(not_json), std::invalid_argument);
}
