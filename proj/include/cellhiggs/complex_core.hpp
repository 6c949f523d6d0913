/**
 * Closed two-dimensional simplicial complexes with the equilateral metric.
 *
 * Every triangle is a unit-side equilateral triangle and every edge has
 * length one. Orientation lives on triangles (stored vertex order); edges
 * are unordered pairs, so non-orientable and non-manifold complexes are
 * represented without special cases.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cellhiggs/error.hpp"

namespace cellhiggs {

using VertexId = std::uint64_t;

/// Distance from a vertex of a unit equilateral triangle to the opposite side.
inline constexpr double kStarInradius = 0.86602540378443864676;  // sqrt(3)/2

class ComplexMesh
{
  public:
    ComplexMesh() = default;

    /**
     * Builds the incidence structure. Vertex ids must be unique; triangles
     * refer to ids. Throws DomainError on degenerate or duplicate triangles
     * and on undeclared vertices.
     */
    static ComplexMesh build(std::vector<VertexId> ids, const std::vector<std::array<VertexId, 3>>& tris)
    {
        ComplexMesh m;
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            throw DomainError("duplicate vertex id");
        m.ids_ = std::move(ids);

        std::set<std::array<int, 3>> seen;
        for (const auto& t : tris) {
            std::array<int, 3> idx{};
            for (int k = 0; k < 3; ++k) {
                idx[k] = m.index_of(t[k]);
                if (idx[k] < 0)
                    throw DomainError("triangle uses undeclared vertex " + std::to_string(t[k]));
            }
            if (idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2])
                throw DomainError("degenerate triangle with repeated vertex");
            auto key = idx;
            std::sort(key.begin(), key.end());
            if (!seen.insert(key).second)
                throw DomainError("duplicate triangle");
            m.triangles_.push_back(idx);
        }
        m.derive_incidence();
        return m;
    }

    int vertex_count() const { return static_cast<int>(ids_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    int triangle_count() const { return static_cast<int>(triangles_.size()); }

    const std::vector<VertexId>& vertex_ids() const { return ids_; }
    VertexId id(int v) const { return ids_.at(v); }

    /// Index of a vertex id, or -1.
    int index_of(VertexId id) const
    {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
        if (it == ids_.end() || *it != id)
            return -1;
        return static_cast<int>(it - ids_.begin());
    }

    const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
    const std::array<int, 3>& triangle(int t) const { return triangles_.at(t); }
    /// Edges as (a, b) with a < b, sorted lexicographically.
    const std::vector<std::array<int, 2>>& edges() const { return edges_; }
    const std::array<int, 2>& edge(int e) const { return edges_.at(e); }

    const std::vector<int>& edge_triangles(int e) const { return edge_triangles_.at(e); }
    const std::vector<int>& vertex_edges(int v) const { return vertex_edges_.at(v); }
    const std::vector<int>& vertex_triangles(int v) const { return vertex_triangles_.at(v); }

    /// Edge index of {a, b}, or -1.
    int find_edge(int a, int b) const
    {
        if (a > b)
            std::swap(a, b);
        auto it = edge_lookup_.find({a, b});
        return it == edge_lookup_.end() ? -1 : it->second;
    }

    /// Vertex of edge e different from v.
    int other_end(int e, int v) const
    {
        const auto& ed = edges_.at(e);
        return ed[0] == v ? ed[1] : ed[0];
    }

    int euler_characteristic() const { return vertex_count() - edge_count() + triangle_count(); }

  private:
    void derive_incidence()
    {
        std::map<std::pair<int, int>, std::vector<int>> incid;
        for (int t = 0; t < triangle_count(); ++t) {
            const auto& tri = triangles_[t];
            for (int k = 0; k < 3; ++k) {
                int a = tri[k], b = tri[(k + 1) % 3];
                if (a > b)
                    std::swap(a, b);
                incid[{a, b}].push_back(t);
            }
        }
        edges_.clear();
        edge_triangles_.clear();
        for (auto& [key, ts] : incid) {
            edge_lookup_[key] = static_cast<int>(edges_.size());
            edges_.push_back({key.first, key.second});
            edge_triangles_.push_back(ts);
        }
        vertex_edges_.assign(ids_.size(), {});
        vertex_triangles_.assign(ids_.size(), {});
        for (int e = 0; e < edge_count(); ++e) {
            vertex_edges_[edges_[e][0]].push_back(e);
            vertex_edges_[edges_[e][1]].push_back(e);
        }
        for (int t = 0; t < triangle_count(); ++t)
            for (int v : triangles_[t])
                vertex_triangles_[v].push_back(t);
    }

    std::vector<VertexId> ids_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<std::array<int, 2>> edges_;
    std::map<std::pair<int, int>, int> edge_lookup_;
    std::vector<std::vector<int>> edge_triangles_;
    std::vector<std::vector<int>> vertex_edges_;
    std::vector<std::vector<int>> vertex_triangles_;
};

// ---------------------------------------------------------------------------
// Complex file format

inline ComplexMesh parse_complex(std::string_view text)
{
    std::vector<VertexId> ids;
    std::set<VertexId> declared;
    std::vector<std::array<VertexId, 3>> tris;
    std::set<std::array<VertexId, 3>> seen;

    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    auto parse_id = [&](std::istringstream& ls) -> VertexId {
        std::string tok;
        if (!(ls >> tok))
            throw ParseError(lineno, "missing vertex id");
        if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; }))
            throw ParseError(lineno, "vertex id must be an unsigned integer: '" + tok + "'");
        try {
            return static_cast<VertexId>(std::stoull(tok));
        } catch (const std::exception&) {
            throw ParseError(lineno, "vertex id out of range: '" + tok + "'");
        }
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::string rec;
        if (!(ls >> rec))
            continue;
        if (rec == "v") {
            VertexId id = parse_id(ls);
            if (!declared.insert(id).second)
                throw ParseError(lineno, "duplicate vertex " + std::to_string(id));
            ids.push_back(id);
        } else if (rec == "t") {
            std::array<VertexId, 3> t{parse_id(ls), parse_id(ls), parse_id(ls)};
            for (VertexId id : t)
                if (!declared.count(id))
                    throw ParseError(lineno, "vertex " + std::to_string(id) + " used before declaration");
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
                throw ParseError(lineno, "degenerate triangle with repeated vertex");
            auto key = t;
            std::sort(key.begin(), key.end());
            if (!seen.insert(key).second)
                throw ParseError(lineno, "duplicate triangle");
            tris.push_back(t);
        } else {
            throw ParseError(lineno, "unknown record '" + rec + "'");
        }
        std::string extra;
        if (ls >> extra)
            throw ParseError(lineno, "trailing token '" + extra + "'");
    }
    return ComplexMesh::build(std::move(ids), tris);
}

inline ComplexMesh read_complex_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot open complex file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_complex(ss.str());
}

inline std::string write_complex(const ComplexMesh& m, const std::string& comment = {})
{
    std::ostringstream out;
    if (!comment.empty())
        out << "# " << comment << "\n";
    for (VertexId id : m.vertex_ids())
        out << "v " << id << "\n";
    for (const auto& t : m.triangles())
        out << "t " << m.id(t[0]) << " " << m.id(t[1]) << " " << m.id(t[2]) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Admissibility

struct AdmissibilityWitness
{
    std::string condition;  // homogeneity | boundary | chainability | connectivity
    std::string detail;
    std::vector<VertexId> cell;  // vertex ids of the offending cell
};

struct AdmissibilityReport
{
    bool pass = true;
    std::vector<AdmissibilityWitness> failures;
};

namespace detail {

/// Connected components of an undirected graph given as an edge list.
inline std::vector<int> components(int n, const std::vector<std::array<int, 2>>& arcs, int* count = nullptr)
{
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& a : arcs) {
        int x = find(a[0]), y = find(a[1]);
        if (x != y)
            parent[std::max(x, y)] = std::min(x, y);
    }
    std::vector<int> label(n, -1);
    int c = 0;
    for (int i = 0; i < n; ++i) {
        int root = find(i);
        if (label[root] < 0)
            label[root] = c++;
        label[i] = label[root];
    }
    if (count)
        *count = c;
    return label;
}

}  // namespace detail

/// Checks homogeneity, absence of boundary, local chainability and connectivity.
inline AdmissibilityReport validate_admissible(const ComplexMesh& m)
{
    AdmissibilityReport rep;
    auto fail = [&](std::string cond, std::string detail, std::vector<VertexId> cell) {
        rep.pass = false;
        rep.failures.push_back({std::move(cond), std::move(detail), std::move(cell)});
    };

    if (m.triangle_count() == 0)
        fail("homogeneity", "complex has no triangles", {});
    for (int v = 0; v < m.vertex_count(); ++v)
        if (m.vertex_triangles(v).empty())
            fail("homogeneity", "vertex not in the closure of any triangle", {m.id(v)});

    for (int e = 0; e < m.edge_count(); ++e)
        if (m.edge_triangles(e).size() < 2)
            fail("boundary", "edge lies in exactly one triangle", {m.id(m.edge(e)[0]), m.id(m.edge(e)[1])});

    for (int v = 0; v < m.vertex_count(); ++v) {
        const auto& ts = m.vertex_triangles(v);
        if (ts.size() < 2)
            continue;
        std::vector<std::array<int, 2>> arcs;
        for (int e : m.vertex_edges(v)) {
            std::vector<int> local;
            for (int t : m.edge_triangles(e))
                local.push_back(static_cast<int>(std::find(ts.begin(), ts.end(), t) - ts.begin()));
            for (std::size_t i = 1; i < local.size(); ++i)
                arcs.push_back({local[0], local[i]});
        }
        int ncomp = 0;
        detail::components(static_cast<int>(ts.size()), arcs, &ncomp);
        if (ncomp > 1)
            fail("chainability",
                 "incident triangles split into " + std::to_string(ncomp) + " edge-connected groups",
                 {m.id(v)});
    }

    int ncomp = 0;
    detail::components(m.vertex_count(), m.edges(), &ncomp);
    if (ncomp > 1)
        fail("connectivity", "complex has " + std::to_string(ncomp) + " connected components", {});
    return rep;
}

// ---------------------------------------------------------------------------
// Vertex links

struct LinkGraph
{
    int vertex = -1;
    std::vector<int> nodes;                 // neighbouring vertex per incident edge
    std::vector<int> node_edge;             // the incident edge itself
    std::vector<std::array<int, 2>> arcs;   // node indices, one per triangle corner
    std::vector<int> arc_triangle;

    int node_count() const { return static_cast<int>(nodes.size()); }

    int degree(int node) const
    {
        int d = 0;
        for (const auto& a : arcs)
            d += (a[0] == node) + (a[1] == node);
        return d;
    }

    int component_count() const
    {
        int c = 0;
        detail::components(node_count(), arcs, &c);
        return c;
    }

    /// True when the link is one cycle through every node.
    bool is_single_cycle() const
    {
        if (node_count() < 3 || arcs.size() != nodes.size() || component_count() != 1)
            return false;
        for (int i = 0; i < node_count(); ++i)
            if (degree(i) != 2)
                return false;
        return true;
    }
};

inline LinkGraph vertex_link(const ComplexMesh& m, int v)
{
    if (v < 0 || v >= m.vertex_count())
        throw DomainError("unknown vertex index " + std::to_string(v));
    LinkGraph g;
    g.vertex = v;
    std::map<int, int> node_of;
    for (int e : m.vertex_edges(v)) {
        node_of[m.other_end(e, v)] = static_cast<int>(g.nodes.size());
        g.nodes.push_back(m.other_end(e, v));
        g.node_edge.push_back(e);
    }
    for (int t : m.vertex_triangles(v)) {
        std::array<int, 2> ab{};
        int k = 0;
        for (int w : m.triangle(t))
            if (w != v)
                ab[k++] = node_of.at(w);
        g.arcs.push_back(ab);
        g.arc_triangle.push_back(t);
    }
    return g;
}

struct LinkSpectrum
{
    std::vector<std::vector<double>> component_spectra;  // ascending per component
    std::vector<double> eigenvalues;                     // all, ascending
    int zero_multiplicity = 0;
    double lambda_comb = 0.0;  // smallest positive eigenvalue over components
};

/// Unit-weight graph Laplacian of an arbitrary (multi)graph.
inline Eigen::MatrixXd graph_laplacian(int n, const std::vector<std::array<int, 2>>& arcs)
{
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& a : arcs) {
        lap(a[0], a[0]) += 1.0;
        lap(a[1], a[1]) += 1.0;
        lap(a[0], a[1]) -= 1.0;
        lap(a[1], a[0]) -= 1.0;
    }
    return lap;
}

/**
 * Spectrum of the link Laplacian, computed per connected component. The
 * zero eigenvalue of each component is snapped to exactly 0 when it lies
 * below 1e-12 times the component's spectral radius.
 */
inline LinkSpectrum link_spectrum(const LinkGraph& link)
{
    if (link.node_count() == 0)
        throw DomainError("empty link");
    int ncomp = 0;
    auto label = detail::components(link.node_count(), link.arcs, &ncomp);
    LinkSpectrum out;
    out.lambda_comb = std::numeric_limits<double>::infinity();
    for (int c = 0; c < ncomp; ++c) {
        std::vector<int> local(link.node_count(), -1);
        int n = 0;
        for (int i = 0; i < link.node_count(); ++i)
            if (label[i] == c)
                local[i] = n++;
        std::vector<std::array<int, 2>> arcs;
        for (const auto& a : link.arcs)
            if (label[a[0]] == c)
                arcs.push_back({local[a[0]], local[a[1]]});
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(graph_laplacian(n, arcs), Eigen::EigenvaluesOnly);
        std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + n);
        const double scale = std::max(1.0, std::abs(ev.back()));
        for (double& x : ev)
            if (std::abs(x) < 1e-12 * scale)
                x = 0.0;
        for (double x : ev) {
            if (x == 0.0)
                ++out.zero_multiplicity;
            else
                out.lambda_comb = std::min(out.lambda_comb, x);
            out.eigenvalues.push_back(x);
        }
        out.component_spectra.push_back(std::move(ev));
    }
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
    if (!std::isfinite(out.lambda_comb))
        throw DomainError("link has no positive Laplacian eigenvalue");
    return out;
}

// ---------------------------------------------------------------------------
// Regular subdivision

/**
 * Result of k rounds of midpoint 4-to-1 subdivision, generated directly as
 * the order-n triangular lattice (n = 2^k) in each base triangle.
 *
 * Lattice point (a, b) of base triangle t = (t0, t1, t2) has barycentric
 * coordinates ((n-a-b)/n, a/n, b/n). Refined vertex indices are ordered:
 * base vertices, then edge-interior points by base edge, then face-interior
 * points by base triangle.
 */
struct RefinedMesh
{
    struct Provenance
    {
        int triangle = -1;  // base triangle carrying the vertex
        std::array<double, 3> bary{};
    };

    ComplexMesh base;
    int level = 0;
    int n = 1;  // subdivisions per base edge
    ComplexMesh mesh;
    std::vector<Provenance> provenance;
    std::vector<int> home;  // base vertex with the largest barycentric weight
    std::vector<std::vector<int>> lattice;  // lattice[t][lattice_slot(a,b)] -> refined vertex
    std::vector<int> triangle_cell;         // refined triangle -> base triangle
    std::vector<std::array<std::array<int, 2>, 3>> triangle_corners;  // lattice coords per corner

    double edge_length() const { return 1.0 / n; }
    double triangle_area() const { return std::sqrt(3.0) / 4.0 / (double(n) * n); }

    int lattice_slot(int a, int b) const { return a * (n + 1) + b; }
    int lattice_vertex(int t, int a, int b) const { return lattice.at(t).at(lattice_slot(a, b)); }

    /// Planar position of lattice point (a, b) with t0 at the origin and t1 at (1, 0).
    std::array<double, 2> position(int a, int b) const
    {
        return {(a + 0.5 * b) / n, (std::sqrt(3.0) / 2.0) * b / n};
    }

    /// Lattice coordinates of refined vertex v inside base triangle t, if present.
    bool locate(int t, int v, int& a, int& b) const
    {
        const auto& slots = lattice.at(t);
        for (int aa = 0; aa <= n; ++aa)
            for (int bb = 0; aa + bb <= n; ++bb)
                if (slots[lattice_slot(aa, bb)] == v) {
                    a = aa;
                    b = bb;
                    return true;
                }
        return false;
    }
};

inline RefinedMesh subdivide(const ComplexMesh& base, int k)
{
    if (k < 0 || k > 10)
        throw ConfigError("refinement level must lie in [0, 10]");
    RefinedMesh rm;
    rm.base = base;
    rm.level = k;
    rm.n = 1 << k;
    const int n = rm.n;

    const int nv_base = base.vertex_count();
    const int per_edge = n - 1;
    const int per_face = (n - 1) * (n - 2) / 2;
    const int nv = nv_base + base.edge_count() * per_edge + base.triangle_count() * per_face;
    rm.provenance.resize(nv);
    rm.home.resize(nv);

    auto face_slot = [n](int a, int b) {
        // interior points (a, b) with a, b >= 1 and a + b <= n - 1, row-major in a
        int idx = 0;
        for (int aa = 1; aa < a; ++aa)
            idx += n - 1 - aa;
        return idx + (b - 1);
    };

    rm.lattice.assign(base.triangle_count(), std::vector<int>((n + 1) * (n + 1), -1));
    for (int t = 0; t < base.triangle_count(); ++t) {
        const auto& tri = base.triangle(t);
        for (int a = 0; a <= n; ++a)
            for (int b = 0; a + b <= n; ++b) {
                const std::array<int, 3> w{n - a - b, a, b};
                int nz = (w[0] > 0) + (w[1] > 0) + (w[2] > 0);
                int v = -1;
                if (nz == 1) {
                    for (int c = 0; c < 3; ++c)
                        if (w[c] == n)
                            v = tri[c];
                } else if (nz == 2) {
                    int c0 = -1, c1 = -1;
                    for (int c = 0; c < 3; ++c)
                        if (w[c] > 0)
                            (c0 < 0 ? c0 : c1) = c;
                    int lo = tri[c0], hi = tri[c1], whi = w[c1];
                    if (lo > hi) {
                        std::swap(lo, hi);
                        whi = w[c0];
                    }
                    const int e = base.find_edge(lo, hi);
                    v = nv_base + e * per_edge + (whi - 1);
                } else {
                    v = nv_base + base.edge_count() * per_edge + t * per_face + face_slot(a, b);
                }
                rm.lattice[t][rm.lattice_slot(a, b)] = v;
                auto& prov = rm.provenance[v];
                if (prov.triangle < 0) {
                    prov.triangle = t;
                    prov.bary = {double(w[0]) / n, double(w[1]) / n, double(w[2]) / n};
                    // ties broken towards the smaller base vertex index; both
                    // candidates are shared by every triangle carrying v
                    int best = -1;
                    for (int c = 0; c < 3; ++c)
                        if (best < 0 || w[c] > w[best] || (w[c] == w[best] && tri[c] < tri[best]))
                            best = c;
                    rm.home[v] = tri[best];
                }
            }
    }

    std::vector<VertexId> ids(nv);
    std::iota(ids.begin(), ids.end(), VertexId{0});
    std::vector<std::array<VertexId, 3>> tris;
    tris.reserve(static_cast<std::size_t>(base.triangle_count()) * n * n);
    for (int t = 0; t < base.triangle_count(); ++t) {
        auto add = [&](std::array<int, 2> p, std::array<int, 2> q, std::array<int, 2> r) {
            tris.push_back({VertexId(rm.lattice_vertex(t, p[0], p[1])), VertexId(rm.lattice_vertex(t, q[0], q[1])),
                            VertexId(rm.lattice_vertex(t, r[0], r[1]))});
            rm.triangle_cell.push_back(t);
            rm.triangle_corners.push_back({p, q, r});
        };
        for (int a = 0; a < n; ++a)
            for (int b = 0; a + b < n; ++b) {
                add({a, b}, {a + 1, b}, {a, b + 1});
                if (a + b <= n - 2)
                    add({a + 1, b}, {a + 1, b + 1}, {a, b + 1});
            }
    }
    rm.mesh = ComplexMesh::build(std::move(ids), tris);
    return rm;
}

}  // namespace cellhiggs
