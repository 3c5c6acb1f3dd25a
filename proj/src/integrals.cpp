#include <rixs/integrals.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace rixs::qchem {

namespace {

constexpr double kDuplicateTol = 1e-10;
constexpr double kSymmetryTol = 1e-12;

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string tok; is >> tok;) out.push_back(tok);
    return out;
}

bool parse_double(std::string tok, double& out) {
    // Fortran writers emit 1.0D-03
    for (auto& c : tok)
        if (c == 'D' || c == 'd') c = 'E';
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

bool parse_int(const std::string& tok, int& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::array<int, 4> two_body_key(int p, int q, int r, int s) {
    std::array<int, 2> a{std::max(p, q), std::min(p, q)};
    std::array<int, 2> b{std::max(r, s), std::min(r, s)};
    if (a < b) std::swap(a, b);
    return {a[0], a[1], b[0], b[1]};
}

struct Header {
    int norb = -1;
    int nelec = -1;
    int ms2 = 0;
    bool saw_orbsym = false;
};

Header parse_header(const std::string& text, int line) {
    std::string body = text;
    const std::string up = upper(body);
    const auto fci = up.find("&FCI");
    if (fci == std::string::npos) throw ParseError(line, "FCIDUMP header must start with &FCI");
    body = body.substr(fci + 4);
    std::string norm;
    for (char c : body) {
        if (c == ',') norm += ' ';
        else if (c == '=') norm += " = ";
        else norm += c;
    }
    auto tokens = split_ws(norm);
    // strip terminators
    std::vector<std::string> toks;
    for (auto& t : tokens) {
        auto u = upper(t);
        if (u == "&END" || u == "/" || u == "$END" || u == "&") continue;
        toks.push_back(t);
    }
    Header h;
    std::size_t i = 0;
    while (i < toks.size()) {
        if (i + 1 >= toks.size() || toks[i + 1] != "=")
            throw ParseError(line, "malformed header near '" + toks[i] + "'");
        const std::string key = upper(toks[i]);
        i += 2;
        std::vector<std::string> vals;
        while (i < toks.size() && !(i + 1 < toks.size() && toks[i + 1] == "=")) vals.push_back(toks[i++]);
        if (vals.empty()) throw ParseError(line, "header key " + key + " has no value");
        auto single_int = [&](int& dst) {
            if (vals.size() != 1 || !parse_int(vals[0], dst))
                throw ParseError(line, "header key " + key + " expects one integer");
        };
        if (key == "NORB") single_int(h.norb);
        else if (key == "NELEC") single_int(h.nelec);
        else if (key == "MS2") single_int(h.ms2);
        else if (key == "ORBSYM") h.saw_orbsym = true;
        else if (key == "UHF") {
            if (upper(vals[0]).find("T") != std::string::npos) throw ParseError(line, "UHF FCIDUMP files are not supported");
        }
        // ISYM and other keys carry no information we use
    }
    if (h.norb < 1) throw ParseError(line, "header lacks a positive NORB");
    if (h.nelec < 0) throw ParseError(line, "header lacks NELEC");
    return h;
}

} // namespace

void TwoBodyTensor::set(int p, int q, int r, int s, double value) {
    const int n = n_;
    auto put = [&](int a, int b, int c, int d) { data_(a * n + b, c * n + d) = value; };
    put(p, q, r, s);
    put(q, p, r, s);
    put(p, q, s, r);
    put(q, p, s, r);
    put(r, s, p, q);
    put(s, r, p, q);
    put(r, s, q, p);
    put(s, r, q, p);
}

double TwoBodyTensor::symmetry_defect() const {
    double worst = 0.0;
    for (int p = 0; p < n_; ++p)
        for (int q = 0; q < n_; ++q)
            for (int r = 0; r < n_; ++r)
                for (int s = 0; s < n_; ++s) {
                    const double v = (*this)(p, q, r, s);
                    worst = std::max({worst, std::abs(v - (*this)(q, p, r, s)), std::abs(v - (*this)(p, q, s, r)),
                                      std::abs(v - (*this)(r, s, p, q))});
                }
    return worst;
}

void TwoBodyTensor::symmetrize() {
    TwoBodyTensor out(n_);
    for (int p = 0; p < n_; ++p)
        for (int q = 0; q <= p; ++q)
            for (int r = 0; r < n_; ++r)
                for (int s = 0; s <= r; ++s) {
                    if (p * n_ + q < r * n_ + s) continue;
                    const double avg = ((*this)(p, q, r, s) + (*this)(q, p, r, s) + (*this)(p, q, s, r) +
                                        (*this)(q, p, s, r) + (*this)(r, s, p, q) + (*this)(s, r, p, q) +
                                        (*this)(r, s, q, p) + (*this)(s, r, q, p)) /
                                       8.0;
                    out.set(p, q, r, s, avg);
                }
    *this = std::move(out);
}

IntegralSet IntegralSet::zeros(int n_orb, int n_elec, int two_sz) {
    IntegralSet s;
    s.n_orb = n_orb;
    s.n_elec = n_elec;
    s.two_sz = two_sz;
    s.h = Eigen::MatrixXd::Zero(n_orb, n_orb);
    s.v = TwoBodyTensor(n_orb);
    for (auto& d : s.dipole) d = Eigen::MatrixXd::Zero(n_orb, n_orb);
    return s;
}

void IntegralSet::validate() const {
    if (n_orb < 1) throw std::invalid_argument("IntegralSet: n_orb must be >= 1");
    if (n_elec < 1 || n_elec > 2 * n_orb)
        throw std::invalid_argument("IntegralSet: need 1 <= n_elec <= 2*n_orb, got n_elec=" + std::to_string(n_elec));
    if (std::abs(two_sz) > n_elec || (n_elec + two_sz) % 2 != 0)
        throw std::invalid_argument("IntegralSet: 2*S_z=" + std::to_string(two_sz) + " incompatible with n_elec=" +
                                    std::to_string(n_elec));
    if (h.rows() != n_orb || h.cols() != n_orb) throw std::invalid_argument("IntegralSet: h has wrong shape");
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol)
        throw std::invalid_argument("IntegralSet: h is not symmetric");
    if (v.n_orb() != n_orb) throw std::invalid_argument("IntegralSet: v has wrong shape");
    if (v.symmetry_defect() > kSymmetryTol) throw std::invalid_argument("IntegralSet: v violates 8-fold symmetry");
    for (const auto& d : dipole) {
        if (d.size() == 0) continue;
        if (d.rows() != n_orb || d.cols() != n_orb) throw std::invalid_argument("IntegralSet: dipole has wrong shape");
        if ((d - d.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol)
            throw std::invalid_argument("IntegralSet: dipole matrix is not symmetric");
    }
    for (std::size_t i = 0; i < core_orbitals.size(); ++i) {
        if (core_orbitals[i] < 0 || core_orbitals[i] >= n_orb)
            throw std::invalid_argument("IntegralSet: core orbital index out of range");
        if (i > 0 && core_orbitals[i] <= core_orbitals[i - 1])
            throw std::invalid_argument("IntegralSet: core orbitals must be sorted and unique");
    }
}

IntegralSet parse_fcidump(std::istream& in, std::vector<std::string>* warnings) {
    std::string line;
    int lineno = 0;
    std::string header_text;
    bool header_done = false;
    int header_first_line = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() && header_text.empty()) continue;
        if (header_text.empty()) header_first_line = lineno;
        header_text += ' ';
        header_text += line;
        const std::string u = upper(t);
        if (u.find("&END") != std::string::npos || u == "/" || (!u.empty() && u.back() == '/') ||
            u.find("$END") != std::string::npos) {
            header_done = true;
            break;
        }
    }
    if (!header_done) throw ParseError(lineno, "unterminated FCIDUMP header (expected &END or /)");
    const Header hdr = parse_header(header_text, header_first_line);
    if (hdr.saw_orbsym && warnings) warnings->push_back("ORBSYM present; point-group labels are ignored");

    IntegralSet ints = IntegralSet::zeros(hdr.norb, hdr.nelec, hdr.ms2);
    std::map<std::array<int, 4>, double> seen2;
    std::map<std::array<int, 2>, double> seen1;
    bool have_scalar = false;
    auto check_dup = [&](auto& seen, const auto& key, double value) {
        auto [it, inserted] = seen.emplace(key, value);
        if (!inserted && std::abs(it->second - value) > kDuplicateTol)
            throw ParseError(lineno, "conflicting duplicate integral");
    };

    const int n = hdr.norb;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto toks = split_ws(t);
        if (toks.size() != 5) throw ParseError(lineno, "expected 'value p q r s', got " + std::to_string(toks.size()) + " fields");
        double value = 0.0;
        if (!parse_double(toks[0], value)) throw ParseError(lineno, "invalid numeric value '" + toks[0] + "'");
        std::array<int, 4> idx{};
        for (int k = 0; k < 4; ++k) {
            if (!parse_int(toks[k + 1], idx[k])) throw ParseError(lineno, "invalid index '" + toks[k + 1] + "'");
            if (idx[k] < 0 || idx[k] > n) throw ParseError(lineno, "index " + toks[k + 1] + " out of range 0.." + std::to_string(n));
        }
        const auto [p, q, r, s] = idx;
        if (p == 0 && q == 0 && r == 0 && s == 0) {
            if (have_scalar && std::abs(ints.e_frozen - value) > kDuplicateTol)
                throw ParseError(lineno, "conflicting duplicate scalar record");
            ints.e_frozen = value;
            have_scalar = true;
        } else if (p > 0 && q > 0 && r == 0 && s == 0) {
            check_dup(seen1, std::array<int, 2>{std::max(p, q), std::min(p, q)}, value);
            ints.h(p - 1, q - 1) = value;
            ints.h(q - 1, p - 1) = value;
        } else if (p > 0 && q == 0 && r == 0 && s == 0) {
            // orbital energy record; carries nothing the Hamiltonian needs
        } else if (p > 0 && q > 0 && r > 0 && s > 0) {
            check_dup(seen2, two_body_key(p, q, r, s), value);
            ints.v.set(p - 1, q - 1, r - 1, s - 1, value);
        } else {
            throw ParseError(lineno, "invalid index pattern");
        }
    }
    try {
        ints.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(header_first_line, e.what());
    }
    return ints;
}

IntegralSet parse_dipole_sidecar(std::istream& in, const IntegralSet& base) {
    IntegralSet out = base;
    for (auto& d : out.dipole) d = Eigen::MatrixXd::Zero(base.n_orb, base.n_orb);
    out.core_orbitals.clear();
    std::map<std::array<int, 3>, double> seen;
    std::string line;
    int lineno = 0;
    bool have_norb = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = line;
        if (auto hash = t.find('#'); hash != std::string::npos) t = t.substr(0, hash);
        t = trim(t);
        if (t.empty()) continue;
        auto toks = split_ws(t);
        std::string key = upper(toks[0]);
        if (key.rfind("NORB", 0) == 0) {
            std::string val;
            if (key.size() > 5 && key[4] == '=') val = key.substr(5);
            else if (toks.size() == 2) val = toks[1];
            else if (toks.size() == 3 && toks[1] == "=") val = toks[2];
            int norb = 0;
            if (val.empty() || !parse_int(val, norb)) throw ParseError(lineno, "malformed NORB record");
            if (norb != base.n_orb)
                throw ParseError(lineno, "sidecar NORB=" + std::to_string(norb) + " does not match FCIDUMP NORB=" +
                                             std::to_string(base.n_orb));
            have_norb = true;
            continue;
        }
        if (!have_norb) throw ParseError(lineno, "sidecar must declare NORB before other records");
        if (key == "CORE") {
            if (toks.size() < 2) throw ParseError(lineno, "CORE record needs at least one index");
            for (std::size_t k = 1; k < toks.size(); ++k) {
                int c = 0;
                if (!parse_int(toks[k], c)) throw ParseError(lineno, "invalid core index '" + toks[k] + "'");
                if (c < 1 || c > base.n_orb) throw ParseError(lineno, "core index " + toks[k] + " out of range");
                out.core_orbitals.push_back(c - 1);
            }
            continue;
        }
        int axis = -1;
        if (key == "X") axis = 0;
        else if (key == "Y") axis = 1;
        else if (key == "Z") axis = 2;
        else throw ParseError(lineno, "invalid axis token '" + toks[0] + "'");
        if (toks.size() != 4) throw ParseError(lineno, "expected 'axis value p q'");
        double value = 0.0;
        int p = 0, q = 0;
        if (!parse_double(toks[1], value)) throw ParseError(lineno, "invalid numeric value '" + toks[1] + "'");
        if (!parse_int(toks[2], p) || !parse_int(toks[3], q)) throw ParseError(lineno, "invalid orbital index");
        if (p < 1 || p > base.n_orb || q < 1 || q > base.n_orb) throw ParseError(lineno, "orbital index out of range");
        auto [it, inserted] = seen.emplace(std::array<int, 3>{axis, std::max(p, q), std::min(p, q)}, value);
        if (!inserted && std::abs(it->second - value) > kDuplicateTol)
            throw ParseError(lineno, "conflicting duplicate dipole entry");
        out.dipole[axis](p - 1, q - 1) = value;
        out.dipole[axis](q - 1, p - 1) = value;
    }
    if (!have_norb) throw ParseError(lineno, "sidecar lacks a NORB record");
    std::sort(out.core_orbitals.begin(), out.core_orbitals.end());
    out.core_orbitals.erase(std::unique(out.core_orbitals.begin(), out.core_orbitals.end()), out.core_orbitals.end());
    out.has_dipole = true;
    return out;
}

namespace {

std::string fmt_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%23.14E", v);
    return buf;
}

} // namespace

void write_fcidump(std::ostream& out, const IntegralSet& ints) {
    const int n = ints.n_orb;
    out << "&FCI NORB=" << n << ",NELEC=" << ints.n_elec << ",MS2=" << ints.two_sz << ",\n&END\n";
    for (int p = 0; p < n; ++p)
        for (int q = 0; q <= p; ++q)
            for (int r = 0; r < n; ++r)
                for (int s = 0; s <= r; ++s) {
                    if (p * n + q < r * n + s) continue;
                    const double v = ints.v(p, q, r, s);
                    if (v == 0.0) continue;
                    out << fmt_value(v) << ' ' << p + 1 << ' ' << q + 1 << ' ' << r + 1 << ' ' << s + 1 << '\n';
                }
    for (int p = 0; p < n; ++p)
        for (int q = 0; q <= p; ++q) {
            const double v = ints.h(p, q);
            if (v == 0.0) continue;
            out << fmt_value(v) << ' ' << p + 1 << ' ' << q + 1 << " 0 0\n";
        }
    out << fmt_value(ints.e_frozen) << " 0 0 0 0\n";
}

void write_dipole_sidecar(std::ostream& out, const IntegralSet& ints) {
    out << "NORB " << ints.n_orb << '\n';
    if (!ints.core_orbitals.empty()) {
        out << "CORE";
        for (int c : ints.core_orbitals) out << ' ' << c + 1;
        out << '\n';
    }
    static constexpr const char* axes[] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        const auto& d = ints.dipole[a];
        if (d.size() == 0) continue;
        for (int p = 0; p < ints.n_orb; ++p)
            for (int q = p; q < ints.n_orb; ++q)
                if (d(p, q) != 0.0) out << axes[a] << ' ' << fmt_value(d(p, q)) << ' ' << p + 1 << ' ' << q + 1 << '\n';
    }
}

IntegralSet read_fcidump_file(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open FCIDUMP file '" + path + "'");
    return parse_fcidump(f, warnings);
}

IntegralSet read_dipole_file(const std::string& path, const IntegralSet& base) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open dipole sidecar '" + path + "'");
    return parse_dipole_sidecar(f, base);
}

} // namespace rixs::qchem
