#include <rixs/fock.hpp>

#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rixs::fock {

namespace {

constexpr double kDropTol = 1e-14;

void sector_occupations(int n_orb, int n_elec, int two_sz, int& n_up, int& n_down) {
    if (n_orb < 1) throw std::invalid_argument("basis: n_orb must be >= 1");
    if ((n_elec + two_sz) % 2 != 0)
        throw std::invalid_argument("basis: n_elec + 2*S_z must be even (n_elec=" + std::to_string(n_elec) +
                                    ", 2S_z=" + std::to_string(two_sz) + ")");
    n_up = (n_elec + two_sz) / 2;
    n_down = (n_elec - two_sz) / 2;
    if (n_up < 0 || n_down < 0 || n_up > n_orb || n_down > n_orb)
        throw std::invalid_argument("basis: infeasible sector (n_up=" + std::to_string(n_up) +
                                    ", n_down=" + std::to_string(n_down) + ", n_orb=" + std::to_string(n_orb) + ")");
}

unsigned __int128 binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    return r;
}

std::vector<std::uint32_t> strings_with_popcount(int n, int k) {
    std::vector<std::uint32_t> out;
    if (k == 0) {
        out.push_back(0);
        return out;
    }
    const std::uint64_t limit = std::uint64_t{1} << n;
    std::uint64_t v = (std::uint64_t{1} << k) - 1;
    while (v < limit) {
        out.push_back(static_cast<std::uint32_t>(v));
        // Gosper's hack: next larger integer with the same popcount
        const std::uint64_t c = v & (~v + 1);
        const std::uint64_t r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    return out;
}

// Result of applying E_pq restricted to one spin to a combined occupation mask.
struct Excitation {
    std::uint64_t mask;
    double sign;
};

inline bool apply_hop(std::uint64_t m, int a, int b, Excitation& out) {
    const std::uint64_t bb = std::uint64_t{1} << b;
    if (!(m & bb)) return false;
    const int s1 = std::popcount(m & (bb - 1));
    const std::uint64_t m1 = m ^ bb;
    const std::uint64_t ba = std::uint64_t{1} << a;
    if (m1 & ba) return false;
    const int s2 = std::popcount(m1 & (ba - 1));
    out.mask = m1 | ba;
    out.sign = ((s1 + s2) & 1) ? -1.0 : 1.0;
    return true;
}

class Assembler {
public:
    explicit Assembler(const ManyBodyBasis& b) : basis_(b), scratch_(b.dimension(), 0.0), touched_flag_(b.dimension(), 0) {}

    std::uint64_t combined(std::size_t i) const {
        const auto d = basis_[i];
        return std::uint64_t{d.up} | (std::uint64_t{d.down} << basis_.n_orb());
    }

    std::size_t index(std::uint64_t m) const {
        const int n = basis_.n_orb();
        const Determinant d{static_cast<std::uint32_t>(m & ((std::uint64_t{1} << n) - 1)),
                            static_cast<std::uint32_t>(m >> n)};
        std::size_t idx = 0;
        if (!basis_.index_of(d, idx)) throw std::logic_error("fock: excitation left the sector");
        return idx;
    }

    // E_pq |m> = sum over spins, appended to out with prefactor.
    template <typename Fn>
    void for_each_hop(std::uint64_t m, int p, int q, Fn&& fn) const {
        const int n = basis_.n_orb();
        Excitation e{};
        for (int sigma = 0; sigma < 2; ++sigma)
            if (apply_hop(m, p + sigma * n, q + sigma * n, e)) fn(e);
    }

    void add(std::size_t row, double value) {
        if (!touched_flag_[row]) {
            touched_flag_[row] = 1;
            touched_.push_back(row);
        }
        scratch_[row] += value;
    }

    void flush_column(std::size_t col, std::vector<Eigen::Triplet<cplx>>& trip) {
        for (auto row : touched_) {
            if (std::abs(scratch_[row]) > kDropTol) trip.emplace_back(row, col, cplx(scratch_[row], 0.0));
            scratch_[row] = 0.0;
            touched_flag_[row] = 0;
        }
        touched_.clear();
    }

private:
    const ManyBodyBasis& basis_;
    std::vector<double> scratch_;
    std::vector<char> touched_flag_;
    std::vector<std::size_t> touched_;
};

SparseOperator from_triplets(std::size_t dim, const std::vector<Eigen::Triplet<cplx>>& trip, bool hermitian) {
    SparseMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return SparseOperator(std::move(m), hermitian);
}

} // namespace

unsigned __int128 sector_dimension(int n_orb, int n_elec, int two_sz) {
    int n_up = 0, n_down = 0;
    sector_occupations(n_orb, n_elec, two_sz, n_up, n_down);
    if (n_orb > 64) throw std::invalid_argument("sector_dimension: n_orb > 64 not supported");
    return binomial(n_orb, n_up) * binomial(n_orb, n_down);
}

double sector_dimension_approx(int n_orb, int n_elec, int two_sz) {
    return static_cast<double>(sector_dimension(n_orb, n_elec, two_sz));
}

ManyBodyBasis::ManyBodyBasis(int n_orb, int n_elec, int two_sz) : n_orb_(n_orb) {
    sector_occupations(n_orb, n_elec, two_sz, n_up_, n_down_);
    if (n_orb > 32) throw std::invalid_argument("basis: materialized bases support n_orb <= 32");
    up_strings_ = strings_with_popcount(n_orb, n_up_);
    down_strings_ = strings_with_popcount(n_orb, n_down_);
    for (std::size_t i = 0; i < up_strings_.size(); ++i) up_index_.emplace(up_strings_[i], i);
    for (std::size_t i = 0; i < down_strings_.size(); ++i) down_index_.emplace(down_strings_[i], i);
}

bool ManyBodyBasis::index_of(const Determinant& d, std::size_t& index) const {
    auto iu = up_index_.find(d.up);
    auto id = down_index_.find(d.down);
    if (iu == up_index_.end() || id == down_index_.end()) return false;
    index = iu->second * down_strings_.size() + id->second;
    return true;
}

SparseOperator::SparseOperator(SparseMatrix m, bool hermitian) : matrix_(std::move(m)), hermitian_(hermitian) {
    if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("SparseOperator: matrix must be square");
}

double SparseOperator::hermiticity_defect() const {
    SparseMatrix diff = matrix_ - SparseMatrix(matrix_.adjoint());
    double worst = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    return worst;
}

SparseOperator build_hamiltonian(const qchem::IntegralSet& ints, const ManyBodyBasis& basis) {
    if (ints.n_orb != basis.n_orb()) throw std::invalid_argument("build_hamiltonian: basis/integral orbital count mismatch");
    const int n = basis.n_orb();
    const std::size_t dim = basis.dimension();
    Assembler as(basis);
    std::vector<Eigen::Triplet<cplx>> trip;
    const auto& V = ints.v;
    for (std::size_t col = 0; col < dim; ++col) {
        const std::uint64_t m = as.combined(col);
        as.add(col, ints.e_frozen);
        for (int r = 0; r < n; ++r)
            for (int s = 0; s < n; ++s) {
                as.for_each_hop(m, r, s, [&](const Excitation& e1) {
                    const double hrs = ints.h(r, s);
                    if (hrs != 0.0) as.add(as.index(e1.mask), hrs * e1.sign);
                    for (int p = 0; p < n; ++p)
                        for (int q = 0; q < n; ++q) {
                            const double vpqrs = V(p, q, r, s);
                            if (vpqrs == 0.0) continue;
                            as.for_each_hop(e1.mask, p, q, [&](const Excitation& e2) {
                                as.add(as.index(e2.mask), 0.5 * vpqrs * e1.sign * e2.sign);
                            });
                        }
                });
            }
        as.flush_column(col, trip);
    }
    return from_triplets(dim, trip, true);
}

SparseOperator build_one_body(const Eigen::MatrixXd& o, const ManyBodyBasis& basis) {
    const int n = basis.n_orb();
    if (o.rows() != n || o.cols() != n) throw std::invalid_argument("build_one_body: matrix shape mismatch");
    const std::size_t dim = basis.dimension();
    Assembler as(basis);
    std::vector<Eigen::Triplet<cplx>> trip;
    for (std::size_t col = 0; col < dim; ++col) {
        const std::uint64_t m = as.combined(col);
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) {
                if (o(p, q) == 0.0) continue;
                as.for_each_hop(m, p, q, [&](const Excitation& e) { as.add(as.index(e.mask), o(p, q) * e.sign); });
            }
        as.flush_column(col, trip);
    }
    const bool herm = (o - o.transpose()).cwiseAbs().maxCoeff() <= 1e-12;
    return from_triplets(dim, trip, herm);
}

Eigen::MatrixXd contracted_dipole(const qchem::IntegralSet& ints, const Eigen::Vector3d& polarization, bool cvs) {
    if (!polarization.allFinite() || polarization.isZero(0.0))
        throw std::invalid_argument("dipole: polarization must be finite and nonzero");
    if (!ints.has_dipole) throw std::invalid_argument("dipole: integral set carries no dipole integrals");
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(ints.n_orb, ints.n_orb);
    for (int a = 0; a < 3; ++a)
        if (polarization[a] != 0.0) d += polarization[a] * ints.dipole[a];
    if (!cvs) return d;
    if (ints.core_orbitals.empty())
        throw std::invalid_argument("dipole: core-valence mode needs at least one CORE orbital; use the full dipole instead");
    std::vector<bool> is_core(ints.n_orb, false);
    for (int c : ints.core_orbitals) is_core[c] = true;
    for (int p = 0; p < ints.n_orb; ++p)
        for (int q = 0; q < ints.n_orb; ++q)
            if (is_core[p] == is_core[q]) d(p, q) = 0.0;
    return d;
}

SparseOperator build_cvs_dipole(const qchem::IntegralSet& ints, const ManyBodyBasis& basis,
                                const Eigen::Vector3d& polarization) {
    return build_one_body(contracted_dipole(ints, polarization, true), basis);
}

SparseOperator build_full_dipole(const qchem::IntegralSet& ints, const ManyBodyBasis& basis,
                                 const Eigen::Vector3d& polarization) {
    return build_one_body(contracted_dipole(ints, polarization, false), basis);
}

SparseOperator build_number_operator(const ManyBodyBasis& basis) {
    const auto dim = static_cast<Eigen::Index>(basis.dimension());
    SparseMatrix m(dim, dim);
    m.reserve(Eigen::VectorXi::Constant(dim, 1));
    for (Eigen::Index i = 0; i < dim; ++i) m.insert(i, i) = cplx(basis.n_elec(), 0.0);
    m.makeCompressed();
    return SparseOperator(std::move(m), true);
}

void write_operator_text(std::ostream& out, const SparseOperator& op) {
    const auto prec = out.precision(17);
    const auto& m = op.matrix();
    for (Eigen::Index k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it)
            out << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
    out.precision(prec);
}

} // namespace rixs::fock
