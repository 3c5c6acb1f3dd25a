// fock.hpp - fixed-(N_e, S_z) determinant basis and sparse second-quantized operators
//
// Sign convention: spin-orbitals are ordered up before down, orbital index ascending
// within each spin. A determinant with combined occupation mask m is
// c†_{i1} c†_{i2} ... c†_{ik} |vac> with i1 < i2 < ... < ik, so c_j acting on it
// picks up (-1)^(number of occupied spin-orbitals below j).
#pragma once

#include <rixs/integrals.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <vector>

namespace rixs::fock {

using cplx = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

struct Determinant {
    std::uint32_t up = 0;
    std::uint32_t down = 0;
    friend bool operator==(const Determinant&, const Determinant&) = default;
};

// Exact sector dimension C(n_orb, n_up) * C(n_orb, n_down), no basis materialization.
// Valid for n_orb <= 64.
unsigned __int128 sector_dimension(int n_orb, int n_elec, int two_sz);
double sector_dimension_approx(int n_orb, int n_elec, int two_sz);

class ManyBodyBasis {
public:
    ManyBodyBasis(int n_orb, int n_elec, int two_sz);

    int n_orb() const noexcept { return n_orb_; }
    int n_up() const noexcept { return n_up_; }
    int n_down() const noexcept { return n_down_; }
    int n_elec() const noexcept { return n_up_ + n_down_; }
    std::size_t dimension() const noexcept { return up_strings_.size() * down_strings_.size(); }

    Determinant operator[](std::size_t i) const {
        return {up_strings_[i / down_strings_.size()], down_strings_[i % down_strings_.size()]};
    }

    // Returns false if the determinant lies outside this sector.
    bool index_of(const Determinant& d, std::size_t& index) const;

    const std::vector<std::uint32_t>& up_strings() const noexcept { return up_strings_; }
    const std::vector<std::uint32_t>& down_strings() const noexcept { return down_strings_; }

private:
    int n_orb_;
    int n_up_;
    int n_down_;
    std::vector<std::uint32_t> up_strings_;
    std::vector<std::uint32_t> down_strings_;
    std::unordered_map<std::uint32_t, std::size_t> up_index_;
    std::unordered_map<std::uint32_t, std::size_t> down_index_;
};

inline ManyBodyBasis build_basis(int n_orb, int n_elec, int two_sz) { return ManyBodyBasis(n_orb, n_elec, two_sz); }

class SparseOperator {
public:
    SparseOperator() = default;
    SparseOperator(SparseMatrix m, bool hermitian);

    Eigen::Index dimension() const noexcept { return matrix_.rows(); }
    bool hermitian() const noexcept { return hermitian_; }
    const SparseMatrix& matrix() const noexcept { return matrix_; }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const { return matrix_ * v; }
    Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& v) const { return matrix_.adjoint() * v; }

    Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(matrix_); }

    // max |A - A†|
    double hermiticity_defect() const;

private:
    SparseMatrix matrix_;
    bool hermitian_ = false;
};

// H = e_frozen + sum h_pq E_pq + 1/2 sum V_pqrs E_pq E_rs with E_pq = sum_sigma c†_{p sigma} c_{q sigma}.
// The two-body product is taken verbatim (not normal ordered).
SparseOperator build_hamiltonian(const qchem::IntegralSet& ints, const ManyBodyBasis& basis);

// sum_pq o_pq E_pq for a real one-body matrix o.
SparseOperator build_one_body(const Eigen::MatrixXd& o, const ManyBodyBasis& basis);

// Polarization-contracted dipole matrix sum_a eps_a d^a, optionally restricted to core<->valence blocks.
Eigen::MatrixXd contracted_dipole(const qchem::IntegralSet& ints, const Eigen::Vector3d& polarization, bool cvs);

SparseOperator build_cvs_dipole(const qchem::IntegralSet& ints, const ManyBodyBasis& basis,
                                const Eigen::Vector3d& polarization);
SparseOperator build_full_dipole(const qchem::IntegralSet& ints, const ManyBodyBasis& basis,
                                 const Eigen::Vector3d& polarization);

SparseOperator build_number_operator(const ManyBodyBasis& basis);

// Debug dump: one "row col re im" line per stored entry.
void write_operator_text(std::ostream& out, const SparseOperator& op);

} // namespace rixs::fock
