// Seeded random integral sets and hermitian matrices for tests.
#pragma once

#include <rixs/integrals.hpp>

#include <Eigen/Dense>

#include <complex>
#include <random>

namespace oracle {

inline Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = g(rng);
    return 0.5 * (m + m.transpose());
}

// Random 8-fold symmetric V, dipoles on all three axes, orbital 0 tagged core.
inline rixs::qchem::IntegralSet random_integrals(int n_orb, int n_elec, int two_sz, std::uint64_t seed,
                                                 double v_scale = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    auto ints = rixs::qchem::IntegralSet::zeros(n_orb, n_elec, two_sz);
    ints.e_frozen = 3.0 * g(rng);
    ints.h = random_symmetric(n_orb, rng);
    for (int p = 0; p < n_orb; ++p)
        for (int q = 0; q < n_orb; ++q)
            for (int r = 0; r < n_orb; ++r)
                for (int s = 0; s < n_orb; ++s) ints.v.matrix()(p * n_orb + q, r * n_orb + s) = v_scale * g(rng);
    ints.v.symmetrize();
    ints.has_dipole = true;
    for (auto& d : ints.dipole) d = random_symmetric(n_orb, rng, 0.2);
    ints.core_orbitals = {0};
    return ints;
}

// Hermitian matrix with prescribed spectrum and a random unitary eigenbasis.
inline Eigen::MatrixXcd random_hermitian(const Eigen::VectorXd& spectrum, std::mt19937_64& rng) {
    const auto n = spectrum.size();
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXcd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = {g(rng), g(rng)};
    const Eigen::MatrixXcd q = Eigen::HouseholderQR<Eigen::MatrixXcd>(m).householderQ();
    Eigen::MatrixXcd h = q * spectrum.asDiagonal() * q.adjoint();
    return 0.5 * (h + h.adjoint());
}

} // namespace oracle
