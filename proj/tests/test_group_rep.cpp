#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "cellhiggs/fixtures.hpp"
#include "cellhiggs/group_rep.hpp"

using namespace cellhiggs;
using Catch::Approx;

namespace {

Mat random_unimodular(std::mt19937_64& rng, int r)
{
    std::normal_distribution<double> nd;
    Mat g(r, r);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
            g(i, j) = cplx(nd(rng), nd(rng));
    return unimodular_rescale(g);
}

std::size_t reduced_word_count(int gens, int maxlen)
{
    std::size_t total = 1, layer = 2 * gens;
    for (int k = 1; k <= maxlen; ++k) {
        total += layer;
        layer *= 2 * gens - 1;
    }
    return total;
}

// Winding number in the i-direction of a generator loop on the 3x3 torus.
int i_winding(const Presentation& p, const Fixture& fx, int g)
{
    auto loop = p.generator_loop(fx.mesh, g);
    int total = 0;
    for (std::size_t k = 0; k + 1 < loop.size(); ++k)
        total += detail::step((*fx.sheets[0].coords[loop[k]])[0], (*fx.sheets[0].coords[loop[k + 1]])[0]);
    return total / 3;
}

}  // namespace

TEST_CASE("presentation sizes match E - V + 1")
{
    auto torus = torus_fixture().mesh;
    auto p = edge_presentation(torus, 0);
    CHECK(p.generator_count() == 19);
    CHECK(p.relators.size() == 18);

    auto sphere = sphere_fixture().mesh;
    auto ps = edge_presentation(sphere, 0);
    CHECK(ps.generator_count() == 3);
    CHECK(ps.relators.size() == 4);
    CHECK(first_betti_number(ps) == 0);

    auto glued = glued_tori_fixture().mesh;
    CHECK(edge_presentation(glued, 0).generator_count() == glued.edge_count() - glued.vertex_count() + 1);
    CHECK(edge_presentation(glued, 0).generator_count() == 37);
}

TEST_CASE("first Betti numbers of the fixtures")
{
    CHECK(first_betti_number(edge_presentation(torus_fixture().mesh, 0)) == 2);
    CHECK(first_betti_number(edge_presentation(genus2_fixture().mesh, 0)) == 4);
    CHECK(first_betti_number(edge_presentation(sphere_fixture().mesh, 0)) == 0);
    // two tori sharing one essential circle: 2 + 2 - 1
    CHECK(first_betti_number(edge_presentation(glued_tori_fixture().mesh, 0)) == 3);
}

TEST_CASE("presentation is deterministic and its tree spans")
{
    auto m = genus2_fixture().mesh;
    auto a = edge_presentation(m, 0);
    auto b = edge_presentation(m, 0);
    CHECK(a.generator_edge == b.generator_edge);
    CHECK(a.relators == b.relators);
    int tree_edges = 0;
    for (char c : a.in_tree)
        tree_edges += c;
    CHECK(tree_edges == m.vertex_count() - 1);
    for (int v = 0; v < m.vertex_count(); ++v)
        CHECK(a.tree_path(v).front() == 0);
    CHECK_THROWS_AS(edge_presentation(m, 99), DomainError);
}

TEST_CASE("disconnected complex has no presentation")
{
    auto m = ComplexMesh::build({0, 1, 2, 3, 4, 5}, {{0, 1, 2}, {3, 4, 5}});
    CHECK_THROWS_AS(edge_presentation(m, 0), DomainError);
}

TEST_CASE("identity representation validates with zero residuals")
{
    auto p = edge_presentation(torus_fixture().mesh, 0);
    auto rep = trivial_representation(p);
    CHECK(rep.max_relator_residual() == 0.0);
}

TEST_CASE("abelian torus representation evaluates in closed form")
{
    auto fc = fixture_case("torus_abelian");
    CHECK(fc.rep.max_relator_residual() <= 1e-12);
    for (int g = 0; g < fc.presentation.generator_count(); ++g) {
        const int n = i_winding(fc.presentation, fc.fixture, g);
        Mat expect = Mat::Zero(2, 2);
        expect(0, 0) = std::exp(double(n));
        expect(1, 1) = std::exp(-double(n));
        CHECK(frob(fc.rep.images[g] - expect) <= 1e-12 * std::exp(std::abs(double(n))));
    }
}

TEST_CASE("determinant and relator violations are rejected")
{
    auto p = edge_presentation(torus_fixture().mesh, 0);
    auto text = save_representation(trivial_representation(p));
    Representation bad = parse_representation(text);
    bad.images[3] *= std::sqrt(2.0);
    try {
        validate_representation(bad, p);
        FAIL("expected a determinant violation");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("determinant") != std::string::npos);
    }

    // a unimodular image that breaks relators
    Representation broken = parse_representation(text);
    broken.images[0] = (Mat(2, 2) << 1.0, 1.0, 0.0, 1.0).finished();
    CHECK_THROWS_AS(validate_representation(broken, p), DomainError);

    // wrong count
    Representation short_rep = parse_representation(text);
    short_rep.images.pop_back();
    CHECK_THROWS_AS(validate_representation(short_rep, p), DomainError);
}

TEST_CASE("representation files round trip bit for bit")
{
    auto fc = fixture_case("genus2_irreducible");
    auto text = save_representation(fc.rep);
    auto back = load_representation(text, fc.presentation);
    REQUIRE(back.generator_count() == fc.rep.generator_count());
    for (int g = 0; g < back.generator_count(); ++g)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                CHECK(back.images[g](i, j).real() == fc.rep.images[g](i, j).real());
                CHECK(back.images[g](i, j).imag() == fc.rep.images[g](i, j).imag());
            }
    CHECK(save_representation(back) == text);
}

TEST_CASE("representation parser reports malformed input")
{
    CHECK_THROWS_AS(parse_representation(""), ParseError);
    CHECK_THROWS_AS(parse_representation("rep r 2 n 1\ng 0\n1 0 0 0\n"), ParseError);
    CHECK_THROWS_AS(parse_representation("rep r 2 n 1\ng 1\n1 0 0 0\n0 0 1 0\n"), ParseError);
    CHECK_THROWS_AS(parse_representation("rep r 2 n 1\ng 0\n1 0 0 0 9\n0 0 1 0\n"), ParseError);
    auto ok = parse_representation("rep r 2 n 1\n# comment\ng 0\n1 0 0 0\n0 0 1 0\n");
    CHECK(ok.images[0] == identity(2));
}

TEST_CASE("irreducibility by Burnside span")
{
    auto p = edge_presentation(torus_fixture().mesh, 0);
    auto id = irreducibility(trivial_representation(p));
    CHECK_FALSE(id.irreducible);
    CHECK(id.span_dimension == 1);

    auto ab = irreducibility(fixture_case("torus_abelian").rep);
    CHECK_FALSE(ab.irreducible);
    CHECK(ab.span_dimension <= 2);

    auto g2 = irreducibility(fixture_case("genus2_irreducible").rep);
    CHECK(g2.irreducible);
    CHECK(g2.span_dimension == 4);
}

TEST_CASE("unipotent pair on the genus-2 surface is irreducible")
{
    auto fx = genus2_fixture();
    auto p = edge_presentation(fx.mesh, 0);
    const Mat n_up = (Mat(2, 2) << 0.0, 1.0, 0.0, 0.0).finished();
    const Mat n_lo = (Mat(2, 2) << 0.0, 0.0, 1.0, 0.0).finished();
    auto rep = rep_from_cocycle(fx.mesh, p, 2, sheet_cocycle(fx, {{1.0, 0.0, n_up}, {1.0, 0.0, n_lo}}));
    auto res = irreducibility(rep);
    CHECK(res.irreducible);
    CHECK(res.span_dimension == 4);

    // Oracle: brute-force span of all products of length <= 3 by LU rank.
    std::vector<Mat> words{identity(2)};
    std::vector<Mat> frontier{identity(2)};
    for (int len = 1; len <= 3; ++len) {
        std::vector<Mat> next;
        for (const auto& f : frontier)
            for (int c = 0; c < 2 * rep.generator_count(); ++c)
                next.push_back(f * rep.image(c));
        words.insert(words.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    Eigen::MatrixXcd stack(4, static_cast<Eigen::Index>(words.size()));
    for (std::size_t k = 0; k < words.size(); ++k)
        stack.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXcd>(words[k].data(), 4);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(stack);
    CHECK(lu.rank() == 4);
}

TEST_CASE("irreducibility is conjugation invariant")
{
    std::mt19937_64 rng(7);
    auto irr = fixture_case("genus2_irreducible").rep;
    auto red = fixture_case("torus_abelian").rep;
    for (int trial = 0; trial < 20; ++trial) {
        Mat g = random_unimodular(rng, 2);
        CHECK(irreducibility(conjugate(irr, g)).irreducible);
        CHECK_FALSE(irreducibility(conjugate(red, g)).irreducible);
    }
}

TEST_CASE("trace fingerprints")
{
    auto p = edge_presentation(torus_fixture().mesh, 0);
    auto triv = word_trace_fingerprint(trivial_representation(p), 2);
    CHECK(triv.size() == reduced_word_count(19, 2));
    for (auto t : triv.traces)
        CHECK(t == cplx(2.0, 0.0));

    auto fc = fixture_case("torus_abelian");
    auto fp = word_trace_fingerprint(fc.rep, 1);
    CHECK(fp.traces[0] == cplx(2.0, 0.0));
    bool found = false;
    for (std::size_t i = 0; i < fp.size(); ++i) {
        auto w = fp.word(i);
        if (w.size() == 1 && i_winding(fc.presentation, fc.fixture, letter_generator(w[0])) == 1 &&
            !letter_inverse(w[0])) {
            CHECK(fp.traces[i].real() == Approx(3.0861612696).epsilon(1e-10));
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("fingerprint enumeration is lexicographic and freely reduced")
{
    auto fc = fixture_case("genus2_irreducible");
    auto fp = word_trace_fingerprint(fc.rep, 2);
    CHECK(fp.size() == reduced_word_count(fc.rep.generator_count(), 2));
    for (std::size_t i = 1; i < fp.size(); ++i) {
        CHECK(fp.word(i - 1) < fp.word(i));
        auto w = fp.word(i);
        for (std::size_t k = 1; k < w.size(); ++k)
            CHECK(w[k] != letter_inverse_code(w[k - 1]));
        CHECK(std::abs(fp.traces[i] - fc.rep.evaluate(w).trace()) <= 1e-12 * std::max(1.0, std::abs(fp.traces[i])));
    }
}

TEST_CASE("fingerprints are conjugation invariant and thread independent")
{
    std::mt19937_64 rng(11);
    auto fc = fixture_case("genus2_irreducible");
    auto base = word_trace_fingerprint(fc.rep, 2);
    for (int trial = 0; trial < 20; ++trial) {
        auto conj = word_trace_fingerprint(conjugate(fc.rep, random_unimodular(rng, 2)), 2);
        CHECK(fingerprint_distance(base, conj).max_deviation <= 1e-9);
        CHECK(conjugacy_compare(base, conj, 1e-8));
    }
    auto threaded = word_trace_fingerprint(fc.rep, 2, 4);
    CHECK(threaded.traces == base.traces);
    CHECK(threaded.letters == base.letters);
    CHECK(conjugacy_compare(base, base, 0.0));
}

TEST_CASE("distinct representations are separated")
{
    auto fc = fixture_case("torus_abelian");
    auto a = word_trace_fingerprint(fc.rep, 2);
    auto b = word_trace_fingerprint(trivial_representation(fc.presentation), 2);
    CHECK_FALSE(conjugacy_compare(a, b, 1e-2));
    auto d = fingerprint_distance(a, b);
    CHECK(d.max_deviation > 1.0);
    CHECK(!d.worst_word.empty());

    auto short_fp = word_trace_fingerprint(fc.rep, 1);
    CHECK_THROWS_AS(fingerprint_distance(a, short_fp), DomainError);
}
