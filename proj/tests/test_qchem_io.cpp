#include <doctest.h>

#include <rixs/integrals.hpp>

#include "oracles/random_instance.hpp"

#include <sstream>

using namespace rixs::qchem;

namespace {

const char* kTwoOrbital =
    " &FCI NORB=2,NELEC=2,MS2=0,\n"
    "  ORBSYM=1,1,\n"
    "  ISYM=1,\n"
    " &END\n"
    "  1.0  1 1 0 0\n"
    "  0.25 1 1 1 1\n"
    " -3.5  0 0 0 0\n";

IntegralSet parse(const std::string& s, std::vector<std::string>* w = nullptr) {
    std::istringstream in(s);
    return parse_fcidump(in, w);
}

int failing_line(const std::string& s) {
    try {
        parse(s);
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

} // namespace

TEST_CASE("fcidump: minimal two-orbital file") {
    std::vector<std::string> warnings;
    const auto ints = parse(kTwoOrbital, &warnings);
    CHECK(ints.n_orb == 2);
    CHECK(ints.n_elec == 2);
    CHECK(ints.two_sz == 0);
    CHECK(ints.h(0, 0) == 1.0);
    CHECK(ints.v(0, 0, 0, 0) == 0.25);
    CHECK(ints.e_frozen == -3.5);
    CHECK(ints.h(1, 1) == 0.0);
    CHECK_FALSE(ints.has_dipole);
    CHECK_FALSE(warnings.empty());  // ORBSYM ignored
}

TEST_CASE("fcidump: one record fills the whole symmetry orbit") {
    const auto ints = parse(" &FCI NORB=2,NELEC=2,MS2=0 &END\n 0.5 1 2 1 2\n");
    for (auto [p, q, r, s] : {std::array{0, 1, 0, 1}, {1, 0, 0, 1}, {0, 1, 1, 0}, {1, 0, 1, 0}})
        CHECK(ints.v(p, q, r, s) == 0.5);
    CHECK(ints.v(0, 0, 1, 1) == 0.0);
    CHECK(ints.v.symmetry_defect() == 0.0);
}

TEST_CASE("fcidump: conflicting duplicates are rejected with the line number") {
    const std::string s = " &FCI NORB=2,NELEC=2,MS2=0 &END\n 0.5 1 1 1 1\n 0.7 1 1 1 1\n";
    CHECK(failing_line(s) == 3);
    // a consistent repeat (in another slot of the orbit) is fine
    CHECK_NOTHROW(parse(" &FCI NORB=2,NELEC=2,MS2=0 &END\n 0.5 1 2 1 2\n 0.5 2 1 2 1\n"));
}

TEST_CASE("fcidump: malformed input") {
    CHECK(failing_line(" NORB=2 &END\n") == 1);
    CHECK(failing_line(" &FCI NORB=2,NELEC=2,MS2=0 &END\n 0.5 1 3 0 0\n") == 2);
    CHECK(failing_line(" &FCI NORB=2,NELEC=2,MS2=0 &END\n 0.5 1 1 0\n") == 2);
    CHECK(failing_line(" &FCI NORB=2,NELEC=2,MS2=0 &END\n abc 1 1 0 0\n") == 2);
    CHECK(failing_line(" &FCI NORB=2,NELEC=2,MS2=0\n 0.5 1 1 0 0\n") > 0);  // never closed
    CHECK(failing_line(" &FCI NELEC=2 &END\n") > 0);
    // header invariants: NELEC > 2 NORB
    CHECK_THROWS(parse(" &FCI NORB=1,NELEC=3,MS2=1 &END\n"));
}

TEST_CASE("fcidump: grammar mutations of a valid file are rejected") {
    const std::string good = kTwoOrbital;
    REQUIRE_NOTHROW(parse(good));
    const std::vector<std::pair<std::string, std::string>> edits = {
        {"&FCI", "&FIC"}, {"1 1 1 1", "1 1 1"}, {"0.25", "0.2.5"}, {"1 1 0 0", "1 9 0 0"}, {"-3.5", "-3.5x"},
        {"NORB=2", "NORB=x"}, {"1 1 1 1", "1 1 1 1 1"}, {"&END", ""},
    };
    for (const auto& [from, to] : edits) {
        std::string bad = good;
        bad.replace(bad.find(from), from.size(), to);
        CAPTURE(bad);
        CHECK_THROWS_AS(parse(bad), ParseError);
    }
}

TEST_CASE("fcidump: write/parse round trip") {
    SUBCASE("two orbitals") {
        const auto a = parse(kTwoOrbital);
        std::stringstream buf;
        write_fcidump(buf, a);
        const auto b = parse_fcidump(buf);
        CHECK(b.h == a.h);
        CHECK(b.v.matrix() == a.v.matrix());
        CHECK(b.e_frozen == a.e_frozen);
    }
    SUBCASE("random four orbitals") {
        const auto a = oracle::random_integrals(4, 4, 0, 11);
        std::stringstream buf;
        write_fcidump(buf, a);
        const auto b = parse_fcidump(buf);
        CHECK((b.h - a.h).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((b.v.matrix() - a.v.matrix()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(b.e_frozen - a.e_frozen) < 1e-12);
    }
    SUBCASE("no two-electron block") {
        auto a = parse(" &FCI NORB=2,NELEC=2,MS2=0 &END\n 1.0 1 1 0 0\n -0.5 2 1 0 0\n 2.0 0 0 0 0\n");
        std::stringstream buf;
        write_fcidump(buf, a);
        std::string line;
        int records = 0;
        bool past_header = false;
        while (std::getline(buf, line)) {
            if (past_header && !line.empty()) ++records;
            if (line.find("&END") != std::string::npos || line == " /") past_header = true;
        }
        CHECK(records == 3);  // two h entries and the scalar
    }
}

TEST_CASE("symmetrize is idempotent") {
    auto ints = oracle::random_integrals(3, 2, 0, 5);
    const Eigen::MatrixXd once = ints.v.matrix();
    ints.v.symmetrize();
    CHECK((ints.v.matrix() - once).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("dipole sidecar") {
    auto base = IntegralSet::zeros(8, 11, 1);
    SUBCASE("core tags and symmetric fill") {
        std::istringstream in("# comment\nNORB 8\nCORE 1\nx 0.3 1 2\nz -0.1 3 3\n");
        const auto ints = parse_dipole_sidecar(in, base);
        CHECK(ints.has_dipole);
        CHECK(ints.core_orbitals == std::vector<int>{0});
        CHECK(ints.dipole[0](0, 1) == 0.3);
        CHECK(ints.dipole[0](1, 0) == 0.3);
        CHECK(ints.dipole[2](2, 2) == -0.1);
        CHECK(ints.dipole[1].isZero());
    }
    SUBCASE("orbital count mismatch") {
        std::istringstream in("NORB 9\nCORE 1\n");
        CHECK_THROWS_AS(parse_dipole_sidecar(in, base), ParseError);
    }
    SUBCASE("bad axis") {
        std::istringstream in("NORB 8\nw 0.3 1 2\n");
        CHECK_THROWS_AS(parse_dipole_sidecar(in, base), ParseError);
    }
    SUBCASE("core index out of range") {
        std::istringstream in("NORB 8\nCORE 9\n");
        CHECK_THROWS_AS(parse_dipole_sidecar(in, base), ParseError);
    }
    SUBCASE("round trip") {
        auto a = oracle::random_integrals(4, 4, 0, 3);
        std::stringstream buf;
        write_dipole_sidecar(buf, a);
        const auto b = parse_dipole_sidecar(buf, IntegralSet::zeros(4, 4, 0));
        for (int k = 0; k < 3; ++k) CHECK((b.dipole[k] - a.dipole[k]).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(b.core_orbitals == a.core_orbitals);
    }
}

TEST_CASE("integral set invariants") {
    CHECK_THROWS_AS(IntegralSet::zeros(2, 0, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(IntegralSet::zeros(2, 2, 1).validate(), std::invalid_argument);  // parity
    CHECK_THROWS_AS(IntegralSet::zeros(2, 2, 4).validate(), std::invalid_argument);
    auto ints = IntegralSet::zeros(2, 2, 0);
    CHECK_NOTHROW(ints.validate());
    ints.h(0, 1) = 1.0;
    CHECK_THROWS_AS(ints.validate(), std::invalid_argument);
}
