// Brute-force second quantization on the full Fock space of 2n spin-orbitals.
// Operators are Kronecker products of 2x2 blocks (Jordan-Wigner strings), so nothing
// here shares code with the bitmask assembly under test. Mode k is bit k of the state
// index; up orbitals are modes 0..n-1, down orbitals n..2n-1.
#pragma once

#include <rixs/fock.hpp>
#include <rixs/integrals.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <vector>

namespace oracle {

inline Eigen::MatrixXd annihilator(int mode, int n_modes) {
    Eigen::Matrix2d lower;  // |0><1|
    lower << 0, 1, 0, 0;
    const Eigen::Matrix2d z = Eigen::Vector2d(1, -1).asDiagonal();
    const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
    // most significant factor first: modes n_modes-1 ... 0
    Eigen::MatrixXd op = Eigen::MatrixXd::Identity(1, 1);
    for (int k = n_modes - 1; k >= 0; --k) {
        const Eigen::Matrix2d& f = k > mode ? id : (k == mode ? lower : z);
        op = Eigen::kroneckerProduct(op, f).eval();
    }
    return op;
}

struct FockSpace {
    int n_orb;
    std::vector<Eigen::MatrixXd> a;  // annihilators, one per mode

    explicit FockSpace(int n) : n_orb(n) {
        for (int k = 0; k < 2 * n; ++k) a.push_back(annihilator(k, 2 * n));
    }
    Eigen::Index dim() const { return Eigen::Index{1} << (2 * n_orb); }

    // E_pq = sum_sigma a+_{p sigma} a_{q sigma}
    Eigen::MatrixXd excitation(int p, int q) const {
        return a[p].transpose() * a[q] + a[n_orb + p].transpose() * a[n_orb + q];
    }

    Eigen::MatrixXd one_body(const Eigen::MatrixXd& o) const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
        for (int p = 0; p < n_orb; ++p)
            for (int q = 0; q < n_orb; ++q)
                if (o(p, q) != 0.0) m += o(p, q) * excitation(p, q);
        return m;
    }

    Eigen::MatrixXd hamiltonian(const rixs::qchem::IntegralSet& ints) const {
        Eigen::MatrixXd m = ints.e_frozen * Eigen::MatrixXd::Identity(dim(), dim()) + one_body(ints.h);
        std::vector<Eigen::MatrixXd> e;
        for (int p = 0; p < n_orb; ++p)
            for (int q = 0; q < n_orb; ++q) e.push_back(excitation(p, q));
        for (int p = 0; p < n_orb; ++p)
            for (int q = 0; q < n_orb; ++q)
                for (int r = 0; r < n_orb; ++r)
                    for (int s = 0; s < n_orb; ++s) {
                        const double v = ints.v(p, q, r, s);
                        if (v != 0.0) m += 0.5 * v * e[p * n_orb + q] * e[r * n_orb + s];
                    }
        return m;
    }

    // Restriction to the sector in the basis ordering of the code under test.
    Eigen::MatrixXd restrict(const Eigen::MatrixXd& full, const rixs::fock::ManyBodyBasis& basis) const {
        const auto d = static_cast<Eigen::Index>(basis.dimension());
        std::vector<Eigen::Index> idx(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            const auto det = basis[static_cast<std::size_t>(i)];
            idx[i] = static_cast<Eigen::Index>(det.up) | (static_cast<Eigen::Index>(det.down) << n_orb);
        }
        Eigen::MatrixXd out(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) out(i, j) = full(idx[i], idx[j]);
        return out;
    }
};

} // namespace oracle
