#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "cellhiggs/fixtures.hpp"
#include "cellhiggs/higgs_field.hpp"
#include "oracles.hpp"

using namespace cellhiggs;
using Catch::Approx;

namespace {

EquivariantMap solved(const std::string& name, int k)
{
    auto fc = fixture_case(name);
    return solve_harmonic(subdivide(fc.fixture.mesh, k), fc.presentation, fc.rep, {}).first;
}

double worst_form_entry(const HiggsPair& hp)
{
    double w = 0.0;
    for (const auto& f : hp.forms)
        for (const Mat* m : {&f.conn1, &f.conn2, &f.psi1, &f.psi2})
            w = std::max(w, frob(*m));
    return w;
}

}  // namespace

TEST_CASE("constant map gives the zero pair")
{
    auto hp = extract_higgs_pair(solved("torus_unitary", 2));
    CHECK(worst_form_entry(hp) <= 1e-12);
    const auto res = hitchin_residuals(hp);
    CHECK(res.mu1.max <= 1e-12);
    CHECK(res.mu2.max <= 1e-12);
    CHECK(res.mu3.max <= 1e-12);
    CHECK(weighted_norm(hp, 0.5).l2_1_delta <= 1e-12);
}

TEST_CASE("abelian torus reproduces the scalar oracle edge by edge")
{
    for (int k : {1, 2}) {
        auto map = solved("torus_abelian", k);
        const auto f = oracle::scalar_potential(map);
        auto hp = extract_higgs_pair(map);
        const auto& fine = hp.mesh.mesh;
        double worst = 0.0;
        for (int e = 0; e < fine.edge_count(); ++e) {
            const int p = fine.edge(e)[0], q = fine.edge(e)[1];
            // u = diag(e^F, e^-F) along the edge: psi = 1/2 dF diag(1, -1)
            Mat expect = Mat::Zero(2, 2);
            const double jump = oracle::scalar_jump(map, f, p, q);
            expect(0, 0) = 0.5 * jump;
            expect(1, 1) = -0.5 * jump;
            worst = std::max(worst, frob(hp.psi(p, q) - expect));
        }
        CHECK(worst <= 1e-8);
        for (const auto& tf : hp.forms) {
            CHECK(frob(tf.conn1) <= 1e-10);
            CHECK(frob(tf.conn2) <= 1e-10);
        }
    }
}

TEST_CASE("forms are traceless with the right symmetry")
{
    for (const auto& name : {"torus_abelian", "glued_tori_abelian", "genus2_irreducible"}) {
        auto hp = extract_higgs_pair(solved(name, 1));
        for (const auto& tf : hp.forms) {
            CHECK(std::abs(tf.psi1.trace()) <= 1e-10);
            CHECK(std::abs(tf.conn2.trace()) <= 1e-10);
            CHECK(frob(tf.psi1 - tf.psi1.adjoint()) == 0.0);
            CHECK(frob(tf.psi2 - tf.psi2.adjoint()) == 0.0);
            CHECK(frob(tf.conn1 + tf.conn1.adjoint()) == 0.0);
        }
    }
}

TEST_CASE("polar split recomposes the edge transport")
{
    // edge transports stay near the identity; far rotations in rank 3 can have
    // a principal log with trace 2 pi i, which the traceless projection drops
    std::mt19937 rng(3);
    for (int i = 0; i < 20; ++i) {
        const Mat m = oracle::random_positive_sl(rng, 3, 0.4) * oracle::random_su(rng, 3, 0.3);
        const auto s = split_transport(m);
        const Mat back = Mat(Eigen::MatrixXcd(s.psi).exp()) * Mat(Eigen::MatrixXcd(s.conn).exp());
        CHECK(frob(back - m) <= 1e-12);
    }
}

TEST_CASE("cell transports are flat around every refined triangle")
{
    auto hp = extract_higgs_pair(solved("genus2_irreducible", 1));
    const auto& rm = hp.mesh;
    double worst = 0.0;
    for (int t = 0; t < rm.mesh.triangle_count(); ++t) {
        const int c = rm.triangle_cell[t];
        const int s0 = hp.slot_of_corner(t, 0), s1 = hp.slot_of_corner(t, 1), s2 = hp.slot_of_corner(t, 2);
        const Mat loop = hp.cell_transport(c, s0, s1) * hp.cell_transport(c, s1, s2) * hp.cell_transport(c, s2, s0);
        worst = std::max(worst, frob(loop - identity(2)));
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("residuals vanish on the abelian fixtures")
{
    for (const auto& name : {"torus_abelian", "glued_tori_abelian"}) {
        const auto res = hitchin_residuals(extract_higgs_pair(solved(name, 1)));
        CHECK(res.mu1.max <= 1e-8);
        CHECK(res.mu2.max <= 1e-8);
        // co-differential sits at the solver's stopping floor
        CHECK(res.mu3.max <= 1e-7);
    }
}

TEST_CASE("genus two residuals shrink under refinement")
{
    const auto r1 = hitchin_residuals(extract_higgs_pair(solved("genus2_irreducible", 1)));
    const auto r2 = hitchin_residuals(extract_higgs_pair(solved("genus2_irreducible", 2)));
    CHECK(r2.mu1.l2 <= 0.7 * r1.mu1.l2);
    CHECK(r2.mu2.l2 <= 0.7 * r1.mu2.l2);
    CHECK(r1.mu1.l2 > 0.0);
}

TEST_CASE("unitary gauge leaves residuals unchanged and conjugates psi")
{
    auto hp = extract_higgs_pair(solved("genus2_irreducible", 1));
    const auto base = hitchin_residuals(hp);
    std::mt19937 rng(11);
    std::vector<Mat> gauge;
    for (int p = 0; p < hp.mesh.mesh.vertex_count(); ++p)
        gauge.push_back(oracle::random_su(rng, 2));
    const auto g = apply_gauge(hp, gauge);
    const auto res = hitchin_residuals(g);
    CHECK(std::abs(res.mu1.l2 - base.mu1.l2) <= 1e-8);
    CHECK(std::abs(res.mu2.l2 - base.mu2.l2) <= 1e-8);
    CHECK(std::abs(res.mu3.max - base.mu3.max) <= 1e-8);
    double worst = 0.0;
    const auto& fine = hp.mesh.mesh;
    for (int e = 0; e < fine.edge_count(); ++e) {
        const int p = fine.edge(e)[0], q = fine.edge(e)[1];
        const Mat expect = gauge[p].inverse() * hp.psi(p, q) * gauge[p];
        worst = std::max(worst, frob(g.psi(p, q) - expect));
    }
    CHECK(worst <= 1e-10);
    CHECK(std::abs(weighted_norm(g, 0.5).l2_delta - weighted_norm(hp, 0.5).l2_delta) <= 1e-10);
}

TEST_CASE("non-unitary gauge breaks the co-differential")
{
    auto hp = extract_higgs_pair(solved("torus_abelian", 1));
    const double before = hitchin_residuals(hp).mu3.max;
    std::mt19937 rng(5);
    std::vector<Mat> gauge;
    for (int p = 0; p < hp.mesh.mesh.vertex_count(); ++p)
        gauge.push_back(oracle::random_positive_sl(rng, 2, 0.3));
    const double after = hitchin_residuals(apply_gauge(hp, gauge)).mu3.max;
    CHECK(after >= 10.0 * std::max(before, 1e-9));
}

TEST_CASE("identity gauge is a no-op and bad gauges are rejected")
{
    auto hp = extract_higgs_pair(solved("genus2_irreducible", 1));
    const int nv = hp.mesh.mesh.vertex_count();
    const auto same = apply_gauge(hp, std::vector<Mat>(nv, identity(2)));
    CHECK(worst_form_entry(same) == Approx(worst_form_entry(hp)).margin(1e-14));
    CHECK_THROWS_AS(apply_gauge(hp, std::vector<Mat>(nv - 1, identity(2))), DomainError);
    CHECK_THROWS_AS(apply_gauge(hp, std::vector<Mat>(nv, 2.0 * identity(2))), DomainError);
    // -I has determinant one but puts the polar factor on the branch cut
    std::vector<Mat> cut(nv, identity(2));
    cut[0] = -identity(2);
    try {
        apply_gauge(hp, cut);
        FAIL("expected a branch failure");
    } catch (const NumericError& err) {
        CHECK(std::string(err.what()).find("triangle") != std::string::npos);
    }
}

TEST_CASE("flat trivialization")
{
    auto hp = extract_higgs_pair(solved("torus_abelian", 2));
    const auto tr = trivialize_flat(hp, 0);
    CHECK(frob(tr.gauge[0] - identity(2)) == 0.0);
    const auto g = apply_gauge(hp, tr.gauge);
    const auto& fine = hp.mesh.mesh;
    for (int q = 0; q < fine.vertex_count(); ++q)
        if (tr.parent[q] >= 0)
            CHECK(frob(g.transport(tr.parent[q], q) - identity(2)) <= 1e-10);

    // idempotent: a second pass finds nothing left to remove
    const auto again = trivialize_flat(g, 0);
    for (const auto& v : again.gauge)
        CHECK(frob(v - identity(2)) <= 1e-10);

    // off-tree edges carry loop holonomies diag(e^m, e^-m) of the abelian representation
    bool saw_winding = false;
    for (int e = 0; e < fine.edge_count(); ++e) {
        const int p = fine.edge(e)[0], q = fine.edge(e)[1];
        if (tr.parent[q] == p || tr.parent[p] == q)
            continue;
        const double trace = g.transport(p, q).trace().real();
        const double m = std::acosh(std::max(1.0, trace / 2.0));
        CHECK(std::abs(trace - 2.0 * std::cosh(std::round(m))) <= 1e-8);
        saw_winding = saw_winding || std::round(m) >= 1.0;
    }
    CHECK(saw_winding);
}

TEST_CASE("weighted norms")
{
    SECTION("closed form on the abelian torus")
    {
        // |du|^2 = 4 |psi|^2 for u = exp(2 psi), so the unweighted L2 mass is E / 4
        const double energy = 16.0 * std::sqrt(3.0) / 3.0;
        for (int k : {1, 2}) {
            const auto n0 = weighted_norm(extract_higgs_pair(solved("torus_abelian", k)), 0.0);
            CHECK(n0.l2_delta * n0.l2_delta == Approx(energy / 4.0).epsilon(1e-8));
        }
    }
    SECTION("monotone in delta")
    {
        auto hp = extract_higgs_pair(solved("genus2_irreducible", 1));
        const double a = weighted_norm(hp, 0.0).l2_delta;
        const double b = weighted_norm(hp, 0.25).l2_delta;
        const double c = weighted_norm(hp, 0.5).l2_delta;
        CHECK(a < b);
        CHECK(b < c);
        CHECK(weighted_norm(hp, 0.25).l2_1_delta >= b);
    }
    SECTION("quadratic in psi")
    {
        auto hp = extract_higgs_pair(solved("genus2_irreducible", 1));
        const double base = weighted_norm(hp, 0.5).l2_delta;
        for (auto& tf : hp.forms) {
            tf.psi1 *= 3.0;
            tf.psi2 *= 3.0;
        }
        const double scaled = weighted_norm(hp, 0.5).l2_delta;
        CHECK(scaled * scaled == Approx(9.0 * base * base).epsilon(1e-12));
    }
    SECTION("per-vertex masses stay inside the total")
    {
        auto hp = extract_higgs_pair(solved("genus2_irreducible", 1));
        const auto n = weighted_norm(hp, 0.5);
        double sum = 0.0;
        for (double m : n.per_vertex) {
            CHECK(m >= 0.0);
            sum += m;
        }
        CHECK(sum <= n.l2_delta * n.l2_delta * (1 + 1e-12));
    }
}

TEST_CASE("text dump lists every triangle")
{
    auto hp = extract_higgs_pair(solved("torus_abelian", 1));
    std::ostringstream os;
    write_higgs_pair(os, hp);
    std::istringstream is(os.str());
    std::string line;
    int headers = 0, lines = 0;
    while (std::getline(is, line)) {
        ++lines;
        if (line.rfind("T ", 0) == 0)
            ++headers;
    }
    CHECK(headers == hp.mesh.mesh.triangle_count());
    CHECK(lines > headers);
}
