#include <doctest.h>

#include <rixs/resources.hpp>
#include <rixs/units.hpp>

#include <json.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace rixs;
using namespace rixs::resources;

namespace {

struct PublishedRow {
    int n_e, n_a;
    double fci, lambda;
    long long qubits;
    double toffolis;
};

// N_e, N_a, FCI dimension, lambda, logical qubits, Toffolis for the sixteen- to thirty-orbital series
const PublishedRow kRows[] = {
    {15, 16, 1.5e8, 105.37, 351, 1.38e10},  {19, 18, 2.1e9, 117.46, 384, 1.68e10},
    {19, 20, 3.1e10, 125.51, 414, 2.00e10}, {21, 22, 4.6e11, 141.43, 449, 2.55e10},
    {21, 24, 4.9e12, 148.47, 479, 2.93e10}, {21, 26, 4.1e13, 166.23, 509, 3.59e10},
    {23, 28, 6.5e14, 160.45, 539, 3.72e10}, {27, 30, 1.7e16, 205.65, 570, 5.25e10},
};

ResourceInputs reference_inputs(int n_a, double lambda) {
    ResourceInputs in;
    in.cost.n_a = n_a;
    in.lambda = lambda;
    in.eps_omega = ev_to_hartree(0.2);
    in.gamma = ev_to_hartree(0.3);
    in.p_r = 0.06 * 0.06;
    return in;
}

std::vector<SystemSpec> reference_systems() {
    std::vector<SystemSpec> out;
    for (const auto& r : kRows) {
        SystemSpec s;
        s.label = "N_a=" + std::to_string(r.n_a);
        s.n_e = r.n_e;
        s.n_a = r.n_a;
        s.two_sz = 1;
        s.inputs = reference_inputs(r.n_a, r.lambda);
        out.push_back(s);
    }
    return out;
}

} // namespace

TEST_CASE("walk calls and phase register") {
    const double eps = ev_to_hartree(0.2);
    CHECK(walk_calls(105.37, eps) == 31848);
    CHECK(phase_bits(walk_calls(105.37, eps)) == 15);
    CHECK(static_cast<double>(walk_calls(1000.0, eps)) / 1000.0 >= 302.0);
    CHECK(static_cast<double>(walk_calls(1000.0, eps)) / 1000.0 <= 304.0);
    CHECK(walk_calls(0.5, 0.5) == 3);  // ceil(pi / sqrt 2)
    CHECK(phase_bits(1) == 0);
    CHECK(phase_bits(2) == 1);
    CHECK(phase_bits(1024) == 10);
    CHECK(phase_bits(1025) == 11);
    CHECK_THROWS_AS(walk_calls(0.0, eps), std::invalid_argument);
    CHECK_THROWS_AS(walk_calls(1.0, -eps), std::invalid_argument);
}

TEST_CASE("dipole register") {
    CHECK(dipole_qubits(16, 13) == 40);
    CHECK(dipole_qubits(30, 13) == 43);
    CHECK(dipole_qubits(1, 1) == 4);
    Eigen::Matrix2d d;
    d << 0.0, 0.5, 0.5, 0.0;
    const auto enc = dipole_block_encoding(16, 13, d);
    CHECK(enc.n_d == 40);
    CHECK(enc.lambda_d == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(enc.zero);
    CHECK(dipole_block_encoding(4, 13, Eigen::Matrix2d::Zero()).zero);
    CHECK(dipole_block_encoding(4, 13, Eigen::Vector2d(-2.0, 0.5).asDiagonal().toDenseMatrix()).lambda_d ==
          doctest::Approx(2.5));
    d(0, 1) = 0.7;
    CHECK_THROWS_AS(dipole_block_encoding(4, 13, d), std::invalid_argument);
}

TEST_CASE("totals follow the composition formulas exactly") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        ResourceInputs in;
        in.cost.n_a = 2 + static_cast<int>(40 * u(rng));
        in.lambda = 1.0 + 300.0 * u(rng);
        in.eps_omega = ev_to_hartree(0.05 + u(rng));
        in.gamma = ev_to_hartree(0.1 + u(rng));
        in.p_r = 1e-4 + (1.0 - 1e-4) * u(rng);
        const double t_w = 100.0 + 1e4 * u(rng);
        const long long n_w = static_cast<long long>(500 * u(rng));
        const auto r = totals(in, user_supplied(t_w, n_w));
        CAPTURE(i);
        CHECK(r.k_g == resolvent::select_degree(in.lambda, in.gamma, in.degree));
        CHECK(r.n_calls == walk_calls(in.lambda, in.eps_omega));
        CHECK(r.t_tot == ((2.0 * r.k_a + 1.0) * 2.0 * static_cast<double>(r.k_g) + std::exp2(r.n_omega)) * t_w);
        CHECK(r.n_tot == 2LL * in.cost.n_a + std::max(r.n_omega, r.n_d + 4) + n_w);
        CHECK(r.n_d == dipole_qubits(in.cost.n_a, 13));
    }
}

TEST_CASE("totals: limits and linearity") {
    auto in = reference_inputs(16, 105.37);
    SUBCASE("certain success needs no amplification") {
        in.p_r = 1.0;
        const auto r = totals(in, user_supplied(1000.0, 10));
        CHECK(r.k_a == 0);
        CHECK(r.t_tot == (2.0 * static_cast<double>(r.k_g) + std::exp2(r.n_omega)) * 1000.0);
    }
    SUBCASE("Toffolis scale linearly with T_W") {
        const auto a = totals(in, user_supplied(1000.0, 10));
        const auto b = totals(in, user_supplied(3000.0, 10));
        CHECK(b.t_tot == 3.0 * a.t_tot);
        CHECK(b.n_tot == a.n_tot);
    }
    SUBCASE("reference inputs") {
        const auto r = totals(in, user_supplied(1000.0, 0));
        CHECK(r.k_a == 13);
        CHECK(r.n_omega == 15);
        CHECK(r.k_g == 94394);
        CHECK(r.n_t == 48);
        CHECK(r.n_tot == 32 + std::max(15, 44));
    }
    SUBCASE("validation") {
        in.p_r = 0.0;
        CHECK_THROWS_AS(totals(in, user_supplied(1.0, 0)), std::invalid_argument);
        in.p_r = 1.5;
        CHECK_THROWS_AS(totals(in, user_supplied(1.0, 0)), std::invalid_argument);
        in = reference_inputs(0, 1.0);
        CHECK_THROWS_AS(totals(in, user_supplied(1.0, 0)), std::invalid_argument);
        CHECK_THROWS_AS(totals(reference_inputs(4, 1.0), WalkModel{}), std::invalid_argument);
        CHECK_THROWS_AS(user_supplied(0.0, 1), std::invalid_argument);
    }
    SUBCASE("a failing plugin is reported") {
        const WalkModel bad{"bad", [](const CostModelParams&) -> WalkCost { throw std::runtime_error("nope"); }};
        CHECK_THROWS_AS(totals(in, bad), std::runtime_error);
        const WalkModel negative{"negative", [](const CostModelParams&) { return WalkCost{-1.0, 0}; }};
        CHECK_THROWS_AS(totals(in, negative), std::runtime_error);
    }
}

TEST_CASE("back-solve inverts totals") {
    for (const auto& row : kRows) {
        const auto in = reference_inputs(row.n_a, row.lambda);
        const WalkCost w = back_solve(in, row.toffolis, row.qubits);
        const auto r = totals(in, user_supplied(w.toffoli, w.qubits));
        CHECK(r.t_tot == doctest::Approx(row.toffolis).epsilon(1e-12));
        CHECK(r.n_tot == row.qubits);
    }
    CHECK_THROWS_AS(back_solve(reference_inputs(16, 105.37), 1.0, 1), std::invalid_argument);

    SUBCASE("back-solved walk cost grows with the active space") {
        double prev_t = 0.0;
        long long prev_n = -1;
        for (const auto& row : kRows) {
            const WalkCost w = back_solve(reference_inputs(row.n_a, row.lambda), row.toffolis, row.qubits);
            CHECK(w.toffoli > prev_t);
            CHECK(w.qubits > prev_n);
            prev_t = w.toffoli;
            prev_n = w.qubits;
        }
    }
}

TEST_CASE("affine THC model") {
    const auto anchors = default_anchors();
    const AffineThc m = calibrate_affine_thc(anchors.front(), anchors.back());
    CHECK(m.b == 2.0);
    SUBCASE("reproduces its anchors") {
        const WalkModel walk = affine_thc(m);
        for (const auto& a : anchors) {
            const auto r = totals(reference_inputs(a.n_a, a.lambda), walk);
            CHECK(r.t_tot == doctest::Approx(a.t_tot).epsilon(1e-3));
            CHECK(std::llabs(r.n_tot - a.n_tot) <= 1);
        }
    }
    SUBCASE("stays within a factor two of every row") {
        auto rows = table_report(reference_systems(), affine_thc());
        REQUIRE(rows.size() == 8);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CAPTURE(kRows[i].n_a);
            const double rt = rows[i].report.t_tot / kRows[i].toffolis;
            const double rq = static_cast<double>(rows[i].report.n_tot) / static_cast<double>(kRows[i].qubits);
            CHECK(rt > 0.5);
            CHECK(rt < 2.0);
            CHECK(rq > 0.5);
            CHECK(rq < 2.0);
        }
    }
    CHECK_THROWS_AS(calibrate_affine_thc(anchors.front(), anchors.front()), std::invalid_argument);
}

TEST_CASE("table") {
    const auto rows = table_report(reference_systems(), affine_thc());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CAPTURE(kRows[i].n_a);
        CHECK(format_sig(static_cast<double>(rows[i].fci_dimension), 2) == format_sig(kRows[i].fci, 2));
        CHECK(rows[i].report.n_a == kRows[i].n_a);
    }
    CHECK(to_string(rows.front().fci_dimension) == "147232800");  // C(16,8) C(16,7)
    CHECK_THROWS_AS(table_report({}, affine_thc()), std::invalid_argument);

    std::ostringstream text;
    write_table_text(text, rows);
    CHECK(text.str().find("1.47e+08") != std::string::npos);

    std::ostringstream js;
    write_table_json(js, rows);
    const auto j = nlohmann::json::parse(js.str());
    CHECK(j["rows"].size() == 8);
    CHECK(j["rows"][7]["fci_dimension"] == to_string(rows.back().fci_dimension));
    CHECK(j["rows"][0]["report"]["n_omega"] == 15);
}

TEST_CASE("formatting") {
    CHECK(format_sig(0.0) == "0");
    CHECK(format_sig(351.0) == "351");
    CHECK(format_sig(1.38e10) == "1.38e+10");
    CHECK(format_sig(105.37, 5) == "105.37");
    CHECK(format_sig(0.000123456, 2) == "0.00012");
    CHECK(to_string(0) == "0");
    const unsigned __int128 big = static_cast<unsigned __int128>(1) << 100;
    CHECK(to_string(big) == "1267650600228229401496703205376");

    std::ostringstream text, js;
    const auto r = totals(reference_inputs(16, 105.37), user_supplied(2690.0, 141));
    write_report_text(text, r);
    CHECK(text.str().find("K_A                     13") != std::string::npos);
    write_report_json(js, r);
    const auto j = nlohmann::json::parse(js.str());
    CHECK(j["schema"] == "rixs-resources");
    CHECK(j["report"]["k_a"] == 13);
    CHECK(j["report"]["walk_calls"] == 31848);
}
