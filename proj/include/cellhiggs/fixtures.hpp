/**
 * Built-in complexes and representations used by the tests, the acceptance
 * suite and the `fixture` subcommand.
 *
 * Every surface here is assembled from copies ("sheets") of the 3x3 torus
 * lattice, so each vertex carries lattice coordinates (i, j) in Z/3 on every
 * sheet it belongs to.  Flat cocycles are then written as
 *     T_ab = exp((alpha * di + beta * dj + phi(b) - phi(a)) X)
 * with di, dj the lattice step from a to b.  Triangle products telescope to
 * the identity, so every induced representation satisfies its relators
 * exactly.
 */
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "cellhiggs/complex_core.hpp"
#include "cellhiggs/group_rep.hpp"

namespace cellhiggs {

struct Sheet
{
    std::vector<std::optional<std::array<int, 2>>> coords;  // per vertex index
    std::vector<double> potential;                          // phi per vertex index
};

struct Fixture
{
    std::string name;
    ComplexMesh mesh;
    std::vector<Sheet> sheets;
};

namespace detail {

inline int torus_id(int i, int j) { return 3 * ((i % 3 + 3) % 3) + ((j % 3 + 3) % 3); }

inline std::vector<std::array<int, 6>> torus_triangles()
{
    std::vector<std::array<int, 6>> out;  // (i0,j0,i1,j1,i2,j2)
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            out.push_back({i, j, i + 1, j, i, j + 1});
            out.push_back({i + 1, j, i + 1, j + 1, i, j + 1});
        }
    return out;
}

/// Lattice step in {-1, 0, 1} from coordinate x to y on Z/3.
inline int step(int x, int y) { return ((y - x + 4) % 3) - 1; }

inline Sheet make_sheet(int nv, const std::vector<std::pair<int, std::array<int, 2>>>& members)
{
    Sheet s;
    s.coords.assign(nv, std::nullopt);
    s.potential.assign(nv, 0.0);
    for (const auto& [v, c] : members)
        s.coords[v] = c;
    return s;
}

}  // namespace detail

inline Fixture torus_fixture()
{
    std::vector<VertexId> ids;
    std::vector<std::pair<int, std::array<int, 2>>> members;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            ids.push_back(detail::torus_id(i, j));
            members.push_back({detail::torus_id(i, j), {i, j}});
        }
    std::vector<std::array<VertexId, 3>> tris;
    for (const auto& t : detail::torus_triangles())
        tris.push_back({VertexId(detail::torus_id(t[0], t[1])), VertexId(detail::torus_id(t[2], t[3])),
                        VertexId(detail::torus_id(t[4], t[5]))});
    Fixture f{"torus", ComplexMesh::build(ids, tris), {}};
    f.sheets.push_back(detail::make_sheet(9, members));
    return f;
}

/**
 * Two 3x3 tori identified along the cycle j = 0. The second torus keeps
 * ids 0, 3, 6 on that cycle and numbers its other vertices 9..14.
 */
inline Fixture glued_tori_fixture()
{
    auto id_b = [](int i, int j) {
        i = (i % 3 + 3) % 3;
        j = (j % 3 + 3) % 3;
        return j == 0 ? 3 * i : 9 + 2 * i + (j - 1);
    };
    std::vector<VertexId> ids;
    for (int v = 0; v < 15; ++v)
        ids.push_back(VertexId(v));
    std::vector<std::array<VertexId, 3>> tris;
    std::vector<std::pair<int, std::array<int, 2>>> ma, mb;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            ma.push_back({detail::torus_id(i, j), {i, j}});
            mb.push_back({id_b(i, j), {i, j}});
        }
    for (const auto& t : detail::torus_triangles())
        tris.push_back({VertexId(detail::torus_id(t[0], t[1])), VertexId(detail::torus_id(t[2], t[3])),
                        VertexId(detail::torus_id(t[4], t[5]))});
    for (const auto& t : detail::torus_triangles())
        tris.push_back({VertexId(id_b(t[0], t[1])), VertexId(id_b(t[2], t[3])), VertexId(id_b(t[4], t[5]))});
    Fixture f{"glued_tori", ComplexMesh::build(ids, tris), {}};
    f.sheets.push_back(detail::make_sheet(15, ma));
    f.sheets.push_back(detail::make_sheet(15, mb));
    return f;
}

/**
 * Connected sum of two 3x3 tori: the triangle (0,0),(1,0),(0,1) is removed
 * from both and the resulting boundary circles are identified.  The second
 * torus is reversed so the surface stays oriented.
 *
 * The potential phi = -1 at lattice point (1,0) makes every edge of the
 * removed triangle carry exponent 0, so the two sheets agree on the seam.
 */
inline Fixture genus2_fixture()
{
    auto removed = [](int i, int j) { return (i == 0 && j == 0) || (i == 1 && j == 0) || (i == 0 && j == 1); };
    auto id_b = [&](int i, int j) {
        i = (i % 3 + 3) % 3;
        j = (j % 3 + 3) % 3;
        if (removed(i, j))
            return detail::torus_id(i, j);
        int next = 9;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                if (removed(a, b))
                    continue;
                if (a == i && b == j)
                    return next;
                ++next;
            }
        return -1;
    };
    auto is_removed_triangle = [](const std::array<int, 6>& t) { return t[0] == 0 && t[1] == 0 && t[2] == 1 && t[3] == 0; };

    std::vector<VertexId> ids;
    for (int v = 0; v < 15; ++v)
        ids.push_back(VertexId(v));
    std::vector<std::array<VertexId, 3>> tris;
    for (const auto& t : detail::torus_triangles())
        if (!is_removed_triangle(t))
            tris.push_back({VertexId(detail::torus_id(t[0], t[1])), VertexId(detail::torus_id(t[2], t[3])),
                            VertexId(detail::torus_id(t[4], t[5]))});
    for (const auto& t : detail::torus_triangles())
        if (!is_removed_triangle(t))
            tris.push_back({VertexId(id_b(t[0], t[1])), VertexId(id_b(t[4], t[5])), VertexId(id_b(t[2], t[3]))});

    std::vector<std::pair<int, std::array<int, 2>>> ma, mb;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            ma.push_back({detail::torus_id(i, j), {i, j}});
            mb.push_back({id_b(i, j), {i, j}});
        }
    Fixture f{"genus2", ComplexMesh::build(ids, tris), {}};
    f.sheets.push_back(detail::make_sheet(15, ma));
    f.sheets.push_back(detail::make_sheet(15, mb));
    f.sheets[0].potential[detail::torus_id(1, 0)] = -1.0;
    f.sheets[1].potential[detail::torus_id(1, 0)] = -1.0;
    return f;
}

/// Boundary of the tetrahedron: the simplest triangulated sphere.
inline Fixture sphere_fixture()
{
    Fixture f{"sphere", ComplexMesh::build({0, 1, 2, 3}, {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}}), {}};
    return f;
}

inline Fixture single_triangle_fixture()
{
    return Fixture{"triangle", ComplexMesh::build({0, 1, 2}, {{0, 1, 2}}), {}};
}

inline std::vector<std::string> fixture_names() { return {"torus", "glued_tori", "genus2", "sphere", "triangle"}; }

inline Fixture fixture_by_name(const std::string& name)
{
    if (name == "torus")
        return torus_fixture();
    if (name == "glued_tori")
        return glued_tori_fixture();
    if (name == "genus2")
        return genus2_fixture();
    if (name == "sphere")
        return sphere_fixture();
    if (name == "triangle")
        return single_triangle_fixture();
    throw ConfigError("unknown fixture '" + name + "'");
}

// ---------------------------------------------------------------------------
// Cocycles

struct SheetForm
{
    double alpha = 0.0;  // coefficient of the i-step
    double beta = 0.0;   // coefficient of the j-step
    Mat generator;       // X in sl(r)
};

/**
 * Flat cocycle from one exponential form per sheet. An edge is evaluated on
 * the first sheet containing both endpoints; seams shared by several sheets
 * must agree there, which the fixtures above guarantee.
 */
inline EdgeCocycle sheet_cocycle(const Fixture& fx, std::vector<SheetForm> forms)
{
    if (forms.size() != fx.sheets.size())
        throw ConfigError("one form per sheet required");
    return [fx, forms](int a, int b) -> Mat {
        for (std::size_t s = 0; s < fx.sheets.size(); ++s) {
            const auto& sh = fx.sheets[s];
            if (!sh.coords[a] || !sh.coords[b])
                continue;
            const auto ca = *sh.coords[a], cb = *sh.coords[b];
            const double c = forms[s].alpha * detail::step(ca[0], cb[0]) + forms[s].beta * detail::step(ca[1], cb[1]) +
                             sh.potential[b] - sh.potential[a];
            const Mat x = c * forms[s].generator;
            return x.exp();
        }
        throw DomainError("edge lies on no fixture sheet");
    };
}

inline Mat pauli_z() { return (Mat(2, 2) << 1.0, 0.0, 0.0, -1.0).finished(); }
inline Mat pauli_x() { return (Mat(2, 2) << 0.0, 1.0, 1.0, 0.0).finished(); }

inline Representation trivial_representation(const Presentation& pres, int rank = 2)
{
    Representation rep;
    rep.rank = rank;
    rep.images.assign(pres.generator_count(), identity(rank));
    validate_representation(rep, pres);
    return rep;
}

struct FixtureCase
{
    Fixture fixture;
    Presentation presentation;
    Representation rep;
    std::string rep_name;
};

/// Names of the shipped (complex, representation) pairs.
inline std::vector<std::string> case_names()
{
    return {"torus_unitary", "torus_abelian", "glued_tori_abelian", "genus2_irreducible", "sphere_trivial"};
}

inline FixtureCase fixture_case(const std::string& name)
{
    FixtureCase fc;
    fc.rep_name = name;
    auto finish = [&](Fixture f, std::vector<SheetForm> forms) {
        fc.fixture = std::move(f);
        fc.presentation = edge_presentation(fc.fixture.mesh, 0);
        fc.rep = rep_from_cocycle(fc.fixture.mesh, fc.presentation, 2, sheet_cocycle(fc.fixture, std::move(forms)));
    };
    const cplx i1(0.0, 1.0);
    if (name == "torus_unitary") {
        // rho(a) = diag(e^{0.7 i}, e^{-0.7 i}), rho(b) = diag(e^{0.4 i}, e^{-0.4 i})
        finish(torus_fixture(), {{0.7 / 3.0, 0.4 / 3.0, i1 * pauli_z()}});
    } else if (name == "torus_abelian") {
        // rho(a) = diag(e, 1/e), rho(b) = I
        finish(torus_fixture(), {{1.0 / 3.0, 0.0, pauli_z()}});
    } else if (name == "glued_tori_abelian") {
        finish(glued_tori_fixture(), {{1.0 / 3.0, 0.0, pauli_z()}, {1.0 / 3.0, 0.0, pauli_z()}});
    } else if (name == "genus2_irreducible") {
        finish(genus2_fixture(), {{1.0, 0.0, 0.5 * pauli_z()}, {1.0, 0.0, 0.5 * pauli_x()}});
    } else if (name == "sphere_trivial") {
        fc.fixture = sphere_fixture();
        fc.presentation = edge_presentation(fc.fixture.mesh, 0);
        fc.rep = trivial_representation(fc.presentation);
    } else {
        throw ConfigError("unknown fixture case '" + name + "'");
    }
    return fc;
}

}  // namespace cellhiggs
