#include <rixs/emulator.hpp>
#include <rixs/fock.hpp>
#include <rixs/resources.hpp>
#include <rixs/units.hpp>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rixs::resources {

namespace {

int ceil_log2(long long x) {
    int bits = 0;
    while ((1LL << bits) < x) ++bits;
    return bits;
}

double qrom_term(int n_t) {
    const long long sq = static_cast<long long>(n_t) * n_t;
    return std::exp2(0.5 * ceil_log2(sq));
}

nlohmann::ordered_json report_json(const ResourceReport& r) {
    nlohmann::ordered_json j;
    j["walk_model"] = r.walk_model;
    j["n_a"] = r.n_a;
    j["n_t"] = r.n_t;
    j["lambda"] = r.lambda;
    j["eps_omega_Ha"] = r.eps_omega;
    j["gamma_Ha"] = r.gamma;
    j["k_g"] = r.k_g;
    j["p_r"] = r.p_r;
    j["sqrt_p_r"] = std::sqrt(r.p_r);
    j["k_a"] = r.k_a;
    j["walk_calls"] = r.n_calls;
    j["n_omega"] = r.n_omega;
    j["n_d"] = r.n_d;
    j["lambda_d"] = r.lambda_d;
    j["n_w"] = r.n_w;
    j["t_w"] = r.t_w;
    j["n_tot"] = r.n_tot;
    j["t_tot"] = r.t_tot;
    j["shots"] = r.shots;
    j["prep_to_qpe_ratio"] = r.prep_to_qpe_ratio;
    return j;
}

} // namespace

long long walk_calls(double lambda, double eps) {
    if (!(lambda > 0.0) || !(eps > 0.0)) throw std::invalid_argument("walk_calls: lambda and eps must be positive");
    return static_cast<long long>(std::ceil(std::numbers::pi * lambda / (std::numbers::sqrt2 * eps)));
}

int phase_bits(long long n_calls) {
    if (n_calls < 1) throw std::invalid_argument("phase_bits: need N >= 1");
    return ceil_log2(n_calls);
}

int dipole_qubits(int n_a, int aleph_mu) {
    if (n_a < 1 || aleph_mu < 1) throw std::invalid_argument("dipole_qubits: N_a and aleph_mu must be >= 1");
    return 3 * ceil_log2(n_a) + 2 * aleph_mu + 2;
}

DipoleEncoding dipole_block_encoding(int n_a, int aleph_mu, const Eigen::MatrixXd& dipole) {
    if (dipole.rows() != dipole.cols()) throw std::invalid_argument("dipole_block_encoding: matrix must be square");
    if (dipole.size() && (dipole - dipole.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("dipole_block_encoding: matrix must be symmetric");
    DipoleEncoding out;
    out.n_d = dipole_qubits(n_a, aleph_mu);
    if (dipole.size()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dipole, Eigen::EigenvaluesOnly);
        out.lambda_d = es.eigenvalues().cwiseAbs().sum();
    }
    out.zero = out.lambda_d == 0.0;
    return out;
}

void CostModelParams::validate() const {
    if (aleph < 1 || beth < 1 || aleph_mu < 1) throw std::invalid_argument("cost model: precision bits must be >= 1");
    if (n_a < 1) throw std::invalid_argument("cost model: N_a must be >= 1");
    if (n_t < 0) throw std::invalid_argument("cost model: N_T must be >= 1");
}

WalkModel user_supplied(double t_w, long long n_w) {
    if (!(t_w > 0.0) || n_w < 0) throw std::invalid_argument("user-supplied walk cost: need T_W > 0 and n_W >= 0");
    return {"user-supplied", [t_w, n_w](const CostModelParams&) { return WalkCost{t_w, n_w}; }};
}

WalkCost AffineThc::operator()(const CostModelParams& p) const {
    const int nt = p.rank();
    WalkCost w;
    w.toffoli = std::ceil(a * nt + b * p.n_a * p.beth + c * qrom_term(nt));
    w.qubits = static_cast<long long>(std::ceil(d * p.n_a + e - 1e-9));
    return w;
}

std::vector<CalibrationAnchor> default_anchors() {
    return {{16, 105.37, 1.38e10, 351}, {30, 205.65, 5.25e10, 570}};
}

namespace {

ResourceInputs anchor_inputs(const CalibrationAnchor& a) {
    ResourceInputs in;
    in.cost.n_a = a.n_a;
    in.lambda = a.lambda;
    in.eps_omega = ev_to_hartree(0.2);
    in.gamma = ev_to_hartree(0.3);
    in.p_r = 0.06 * 0.06;
    return in;
}

} // namespace

AffineThc calibrate_affine_thc(const CalibrationAnchor& lo, const CalibrationAnchor& hi, double b) {
    if (lo.n_a == hi.n_a) throw std::invalid_argument("calibrate_affine_thc: anchors need distinct N_a");
    const WalkCost w1 = back_solve(anchor_inputs(lo), lo.t_tot, lo.n_tot);
    const WalkCost w2 = back_solve(anchor_inputs(hi), hi.t_tot, hi.n_tot);
    CostModelParams p1, p2;
    p1.n_a = lo.n_a;
    p2.n_a = hi.n_a;
    Eigen::Matrix2d m;
    m << p1.rank(), qrom_term(p1.rank()), p2.rank(), qrom_term(p2.rank());
    const Eigen::Vector2d rhs(w1.toffoli - b * p1.n_a * p1.beth, w2.toffoli - b * p2.n_a * p2.beth);
    const Eigen::Vector2d ac = m.fullPivLu().solve(rhs);
    AffineThc model;
    model.a = ac(0);
    model.b = b;
    model.c = ac(1);
    model.d = static_cast<double>(w2.qubits - w1.qubits) / (hi.n_a - lo.n_a);
    model.e = static_cast<double>(w1.qubits) - model.d * lo.n_a;
    return model;
}

WalkModel affine_thc(const AffineThc& model) {
    return {"affine-THC", [model](const CostModelParams& p) { return model(p); }};
}

WalkModel affine_thc() {
    const auto anchors = default_anchors();
    return affine_thc(calibrate_affine_thc(anchors.front(), anchors.back()));
}

void ResourceInputs::validate() const {
    cost.validate();
    if (!(lambda > 0.0)) throw std::invalid_argument("resources: lambda must be positive");
    if (!(eps_omega > 0.0)) throw std::invalid_argument("resources: target accuracy must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("resources: Gamma must be positive");
    if (!(p_r > 0.0 && p_r <= 1.0)) throw std::invalid_argument("resources: P_R must lie in (0, 1]");
    if (shots < 1) throw std::invalid_argument("resources: shots must be >= 1");
}

namespace {

struct Skeleton {
    long long k_g;
    int k_a;
    long long n_calls;
    int n_omega;
    int n_d;
    double walk_factor;  // (2 K_A + 1) 2 K_G + 2^n_omega
    long long fixed_qubits;
};

Skeleton skeleton(const ResourceInputs& in) {
    in.validate();
    Skeleton s;
    s.k_g = resolvent::select_degree(in.lambda, in.gamma, in.degree);
    s.k_a = emulator::amplification_rounds(in.p_r);
    s.n_calls = walk_calls(in.lambda, in.eps_omega);
    s.n_omega = phase_bits(s.n_calls);
    s.n_d = dipole_qubits(in.cost.n_a, in.cost.aleph_mu);
    s.walk_factor = static_cast<double>(2 * s.k_a + 1) * 2.0 * static_cast<double>(s.k_g) + std::exp2(s.n_omega);
    s.fixed_qubits = 2LL * in.cost.n_a + std::max(s.n_omega, s.n_d + 4);
    return s;
}

} // namespace

ResourceReport totals(const ResourceInputs& in, const WalkModel& walk) {
    if (!walk.cost) throw std::invalid_argument("resources: no walk cost model");
    const Skeleton s = skeleton(in);
    WalkCost w;
    try {
        w = walk.cost(in.cost);
    } catch (const std::exception& e) {
        throw std::runtime_error("walk cost model '" + walk.name + "' failed: " + e.what());
    }
    if (!(w.toffoli > 0.0) || w.qubits < 0) throw std::runtime_error("walk cost model '" + walk.name + "' returned invalid cost");
    ResourceReport r;
    r.walk_model = walk.name;
    r.n_a = in.cost.n_a;
    r.n_t = in.cost.rank();
    r.lambda = in.lambda;
    r.eps_omega = in.eps_omega;
    r.gamma = in.gamma;
    r.k_g = s.k_g;
    r.p_r = in.p_r;
    r.k_a = s.k_a;
    r.n_calls = s.n_calls;
    r.n_omega = s.n_omega;
    r.n_d = s.n_d;
    r.lambda_d = in.lambda_d;
    r.n_w = w.qubits;
    r.t_w = w.toffoli;
    r.t_tot = ((2.0 * r.k_a + 1.0) * 2.0 * static_cast<double>(r.k_g) + std::exp2(r.n_omega)) * r.t_w;
    r.n_tot = 2LL * r.n_a + std::max(r.n_omega, r.n_d + 4) + r.n_w;
    r.shots = in.shots;
    r.prep_to_qpe_ratio = (2.0 * r.k_a + 1.0) * 2.0 * static_cast<double>(r.k_g) / std::exp2(r.n_omega);
    return r;
}

WalkCost back_solve(const ResourceInputs& in, double t_tot, long long n_tot) {
    const Skeleton s = skeleton(in);
    WalkCost w;
    w.toffoli = t_tot / s.walk_factor;
    w.qubits = n_tot - s.fixed_qubits;
    if (!(w.toffoli > 0.0) || w.qubits < 0) throw std::invalid_argument("back_solve: target totals are below the fixed overhead");
    return w;
}

WalkModel back_solve_model(const ResourceInputs& in, double t_tot, long long n_tot) {
    const WalkCost w = back_solve(in, t_tot, n_tot);
    return {"back-solve", [w](const CostModelParams&) { return w; }};
}

std::vector<TableRow> table_report(const std::vector<SystemSpec>& systems, const WalkModel& walk) {
    if (systems.empty()) throw std::invalid_argument("table_report: no systems");
    std::vector<TableRow> rows;
    for (const auto& sys : systems) {
        TableRow row;
        row.system = sys;
        row.system.inputs.cost.n_a = sys.n_a;
        row.fci_dimension = fock::sector_dimension(sys.n_a, sys.n_e, sys.two_sz);
        row.report = totals(row.system.inputs, sys.walk.cost ? sys.walk : walk);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_sig(double x, int digits) {
    if (x == 0.0) return "0";
    if (std::abs(x) < 1e5 && x == std::floor(x)) {
        std::ostringstream s;
        s << static_cast<long long>(x);
        return s.str();
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

std::string to_string(unsigned __int128 x) {
    if (x == 0) return "0";
    std::string s;
    while (x > 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(x % 10)));
        x /= 10;
    }
    std::reverse(s.begin(), s.end());
    return s;
}

void write_report_text(std::ostream& out, const ResourceReport& r) {
    auto line = [&](const char* key, const std::string& value) { out << std::left << std::setw(24) << key << value << '\n'; };
    line("walk model", r.walk_model);
    line("N_a", std::to_string(r.n_a));
    line("N_T", std::to_string(r.n_t));
    line("lambda (Ha)", format_sig(r.lambda, 5));
    line("eps_omega (eV)", format_sig(hartree_to_ev(r.eps_omega)));
    line("Gamma (eV)", format_sig(hartree_to_ev(r.gamma)));
    line("K_G", std::to_string(r.k_g));
    line("sqrt(P_R)", format_sig(std::sqrt(r.p_r)));
    line("K_A", std::to_string(r.k_a));
    line("walk calls N", std::to_string(r.n_calls));
    line("n_omega", std::to_string(r.n_omega));
    line("n_D", std::to_string(r.n_d));
    if (r.lambda_d > 0.0) line("lambda_D", format_sig(r.lambda_d, 5));
    line("T_W", format_sig(r.t_w, 5));
    line("n_W", std::to_string(r.n_w));
    line("logical qubits", std::to_string(r.n_tot));
    line("Toffoli gates", format_sig(r.t_tot));
    line("shots", std::to_string(r.shots));
    line("prep/QPE call ratio", format_sig(r.prep_to_qpe_ratio));
}

void write_report_json(std::ostream& out, const ResourceReport& r) {
    nlohmann::ordered_json j;
    j["schema"] = "rixs-resources";
    j["version"] = 1;
    j["report"] = report_json(r);
    out << j.dump(2) << '\n';
}

void write_table_text(std::ostream& out, const std::vector<TableRow>& rows) {
    const int w = 14;
    out << std::right << std::setw(6) << "N_e" << std::setw(6) << "N_a" << std::setw(w) << "FCI dim" << std::setw(w) << "1-norm"
        << std::setw(w) << "qubits" << std::setw(w) << "Toffolis" << std::setw(w) << "shots" << '\n';
    for (const auto& r : rows)
        out << std::setw(6) << r.system.n_e << std::setw(6) << r.system.n_a
            << std::setw(w) << format_sig(static_cast<double>(r.fci_dimension)) << std::setw(w) << format_sig(r.report.lambda, 5)
            << std::setw(w) << r.report.n_tot << std::setw(w) << format_sig(r.report.t_tot) << std::setw(w) << r.report.shots
            << '\n';
}

void write_table_json(std::ostream& out, const std::vector<TableRow>& rows) {
    nlohmann::ordered_json j;
    j["schema"] = "rixs-resource-table";
    j["version"] = 1;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["label"] = r.system.label;
        row["n_e"] = r.system.n_e;
        row["n_a"] = r.system.n_a;
        row["two_sz"] = r.system.two_sz;
        row["fci_dimension"] = to_string(r.fci_dimension);
        row["report"] = report_json(r.report);
        j["rows"].push_back(row);
    }
    out << j.dump(2) << '\n';
}

} // namespace rixs::resources
