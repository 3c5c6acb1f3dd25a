// integrals.hpp - active-space integral container and FCIDUMP / dipole sidecar I/O
#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace rixs::qchem {

// Two-electron integrals V_pqrs in chemists' notation, stored as the n^2 x n^2
// matricization V(pq, rs). The 8-fold symmetric orbit is written on every set().
class TwoBodyTensor {
public:
    TwoBodyTensor() = default;
    explicit TwoBodyTensor(int n_orb) : n_(n_orb), data_(Eigen::MatrixXd::Zero(n_orb * n_orb, n_orb * n_orb)) {}

    int n_orb() const noexcept { return n_; }

    double operator()(int p, int q, int r, int s) const { return data_(p * n_ + q, r * n_ + s); }

    // Writes value into all 8 symmetry-equivalent slots.
    void set(int p, int q, int r, int s, double value);

    const Eigen::MatrixXd& matrix() const noexcept { return data_; }
    Eigen::MatrixXd& matrix() noexcept { return data_; }

    // Largest violation of V_pqrs = V_qprs = V_pqsr = V_rspq.
    double symmetry_defect() const;

    // Averages over each symmetry orbit; idempotent.
    void symmetrize();

private:
    int n_ = 0;
    Eigen::MatrixXd data_;
};

struct IntegralSet {
    int n_orb = 0;
    int n_elec = 0;
    int two_sz = 0;
    double e_frozen = 0.0;
    Eigen::MatrixXd h;
    TwoBodyTensor v;
    bool has_dipole = false;
    std::array<Eigen::MatrixXd, 3> dipole;  // x, y, z
    std::vector<int> core_orbitals;         // 0-based, sorted, unique

    static IntegralSet zeros(int n_orb, int n_elec, int two_sz);

    // Throws std::invalid_argument naming the first violated invariant.
    void validate() const;
};

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

// Standard FCIDUMP: &FCI NORB=..,NELEC=..,MS2=.. namelist, then "value p q r s" records.
// ORBSYM/ISYM are accepted and ignored; a note is appended to warnings if given.
IntegralSet parse_fcidump(std::istream& in, std::vector<std::string>* warnings = nullptr);

// Sidecar grammar (one record per line, '#' starts a comment):
//   NORB <n>           (also NORB=<n>)
//   CORE p1 p2 ...     (1-based orbital indices)
//   <axis> value p q   (axis in {x,y,z}, 1-based indices)
IntegralSet parse_dipole_sidecar(std::istream& in, const IntegralSet& base);

void write_fcidump(std::ostream& out, const IntegralSet& ints);
void write_dipole_sidecar(std::ostream& out, const IntegralSet& ints);

IntegralSet read_fcidump_file(const std::string& path, std::vector<std::string>* warnings = nullptr);
IntegralSet read_dipole_file(const std::string& path, const IntegralSet& base);

} // namespace rixs::qchem
