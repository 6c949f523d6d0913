/**
 * Higgs pairs extracted from an equivariant harmonic map.
 *
 * Each base triangle (cell) carries its own frame field g with g g* equal to
 * the map lifted into the cell's sheet.  Inside a cell the flat transport
 * along p -> q is M = g(p)^{-1} g(q).  Where cells meet, the frames differ
 * by unitary transition matrices, so the bundle data is a unitary cocycle
 * plus per-cell frames.  Every refined vertex also has a reference cell, and
 * vertex-level quantities are reported in that cell's frame.
 *
 * The Higgs field and connection come from the left polar decomposition
 * M = P W: psi = log P, A = log W.  Unlike the Hermitian/anti-Hermitian parts
 * of log M, this transforms exactly under unitary gauge.
 */
#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <ostream>
#include <vector>

#include "cellhiggs/harmonic_solver.hpp"

namespace cellhiggs {

/// Radius of the weighted neighbourhood of each base vertex (half the star inradius).
inline constexpr double kWeightRadius = 0.5 * kStarInradius;

struct EdgeSplit
{
    Mat psi;   // Hermitian traceless, at the tail of the edge
    Mat conn;  // anti-Hermitian traceless
};

inline EdgeSplit split_transport(const Mat& m)
{
    const Mat mm = m * m.adjoint();
    EdgeSplit s;
    s.psi = hermitian_part(traceless(0.5 * herm_log(mm)));
    s.conn = anti_hermitian_part(traceless(unitary_log(herm_inv_sqrt(mm) * m)));
    return s;
}

/// One-form components of a refined triangle along its edges corner0->corner1 and corner0->corner2.
struct TriangleForms
{
    Mat conn1, conn2, psi1, psi2;
};

struct HiggsPair
{
    RefinedMesh mesh;
    int rank = 0;
    std::vector<std::vector<Mat>> frames;  // [cell][lattice slot]
    std::vector<std::vector<Mat>> to_ref;  // [cell][lattice slot]: cell components -> reference components
    std::vector<int> ref_cell;             // per refined vertex
    std::vector<int> ref_slot;
    std::vector<int> edge_cell;            // per refined edge: cell used for its transport
    std::vector<std::array<int, 2>> edge_slots;
    std::vector<double> edge_weight;
    std::vector<TriangleForms> forms;      // per refined triangle

    int slot_of_corner(int t, int k) const
    {
        const auto& c = mesh.triangle_corners[t][k];
        return mesh.lattice_slot(c[0], c[1]);
    }

    /// Components at the lattice point sq carried to components at sp, inside one cell.
    Mat cell_transport(int cell, int sp, int sq) const
    {
        return frames[cell][sp].inverse() * frames[cell][sq];
    }

    /// Flat transport for the refined edge p - q in reference frames: components at q -> components at p.
    Mat transport(int p, int q) const
    {
        const int e = mesh.mesh.find_edge(p, q);
        if (e < 0)
            throw DomainError("transport requested along a non-edge");
        const int c = edge_cell[e];
        const bool fwd = mesh.mesh.edge(e)[0] == p;
        const int sp = edge_slots[e][fwd ? 0 : 1], sq = edge_slots[e][fwd ? 1 : 0];
        return to_ref[c][sp] * cell_transport(c, sp, sq) * to_ref[c][sq].inverse();
    }

    /// Higgs field of the edge p -> q at p, in the reference frame of p.
    Mat psi(int p, int q) const
    {
        const Mat m = transport(p, q);
        return hermitian_part(traceless(0.5 * herm_log(m * m.adjoint())));
    }
};

namespace detail {

inline void compute_forms(HiggsPair& hp)
{
    const auto& fine = hp.mesh.mesh;
    hp.forms.resize(fine.triangle_count());
    for (int t = 0; t < fine.triangle_count(); ++t) {
        const int c = hp.mesh.triangle_cell[t];
        const int s0 = hp.slot_of_corner(t, 0), s1 = hp.slot_of_corner(t, 1), s2 = hp.slot_of_corner(t, 2);
        try {
            const auto e1 = split_transport(hp.cell_transport(c, s0, s1));
            const auto e2 = split_transport(hp.cell_transport(c, s0, s2));
            hp.forms[t] = {e1.conn, e2.conn, e1.psi, e2.psi};
        } catch (const NumericError& err) {
            throw NumericError("triangle " + std::to_string(t) + ": " + err.what());
        }
    }
}

}  // namespace detail

inline HiggsPair extract_higgs_pair(const EquivariantMap& map)
{
    HiggsPair hp;
    hp.mesh = map.mesh;
    hp.rank = map.rank();
    hp.edge_weight = map.edge_weight;
    const auto& rm = hp.mesh;
    const auto& base = rm.base;
    const int n = rm.n;
    const int nv = rm.mesh.vertex_count();
    const int slots = (n + 1) * (n + 1);

    hp.ref_cell.resize(nv);
    hp.ref_slot.assign(nv, -1);
    for (int p = 0; p < nv; ++p)
        hp.ref_cell[p] = rm.provenance[p].triangle;

    // sheet change home(p) -> corner 0 of the cell, and the frames
    std::vector<std::vector<Mat>> lift(base.triangle_count(), std::vector<Mat>(slots));
    hp.frames.assign(base.triangle_count(), std::vector<Mat>(slots));
    for (int c = 0; c < base.triangle_count(); ++c) {
        const int t0 = base.triangle(c)[0];
        for (int a = 0; a <= n; ++a)
            for (int b = 0; a + b <= n; ++b) {
                const int s = rm.lattice_slot(a, b);
                const int p = rm.lattice[c][s];
                lift[c][s] = map.base_transition(t0, rm.home[p]);
                hp.frames[c][s] = herm_sqrt(act(lift[c][s], map.values[p]));
                if (c == hp.ref_cell[p])
                    hp.ref_slot[p] = s;
            }
    }

    hp.to_ref.assign(base.triangle_count(), std::vector<Mat>(slots));
    for (int c = 0; c < base.triangle_count(); ++c)
        for (int a = 0; a <= n; ++a)
            for (int b = 0; a + b <= n; ++b) {
                const int s = rm.lattice_slot(a, b);
                const int p = rm.lattice[c][s];
                const int rc = hp.ref_cell[p], rs = hp.ref_slot[p];
                const Mat k = lift[rc][rs] * lift[c][s].inverse();
                hp.to_ref[c][s] = hp.frames[rc][rs].inverse() * k * hp.frames[c][s];
            }

    const auto& fine = rm.mesh;
    hp.edge_cell.assign(fine.edge_count(), -1);
    hp.edge_slots.assign(fine.edge_count(), {-1, -1});
    for (int t = 0; t < fine.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k) {
            const int p = fine.triangle(t)[k], q = fine.triangle(t)[(k + 1) % 3];
            const int e = fine.find_edge(p, q);
            if (hp.edge_cell[e] >= 0)
                continue;
            hp.edge_cell[e] = rm.triangle_cell[t];
            const int sp = hp.slot_of_corner(t, k), sq = hp.slot_of_corner(t, (k + 1) % 3);
            hp.edge_slots[e] = fine.edge(e)[0] == p ? std::array<int, 2>{sp, sq} : std::array<int, 2>{sq, sp};
        }

    detail::compute_forms(hp);
    return hp;
}

// ---------------------------------------------------------------------------
// Hitchin residuals

struct ResidualAggregate
{
    double max = 0.0;
    double l2 = 0.0;
};

struct HitchinResiduals
{
    ResidualAggregate mu1, mu2, mu3;
    std::vector<double> mu1_density;  // per refined triangle
    std::vector<double> mu2_density;
    std::vector<double> mu3_density;  // per refined vertex
};

/**
 * Discrete residuals of F_A + psi^psi = 0, d_A psi = 0 and d_A^* psi = 0.
 *
 * Around a refined triangle with polar factors (P_i, W_i) on the edges
 * 0->1, 1->2, 2->0, let q_i be log P_i carried back to corner 0 by the
 * preceding W's.  Then
 *     mu1 = log(W_0 W_1 W_2) + 1/2 sum_{i<j} [q_i, q_j],   mu2 = sum q_i,
 * the anti-Hermitian and Hermitian parts of the second-order expansion of
 * the (trivial) flat holonomy; both are reported per unit area.  mu3 at a
 * refined vertex is sum_e w_e psi_e over the dual cell area, i.e. the
 * discrete co-differential, which vanishes exactly at a harmonic map.
 */
inline HitchinResiduals hitchin_residuals(const HiggsPair& hp)
{
    HitchinResiduals res;
    const auto& fine = hp.mesh.mesh;
    const double area = hp.mesh.triangle_area();
    res.mu1_density.resize(fine.triangle_count());
    res.mu2_density.resize(fine.triangle_count());
    for (int t = 0; t < fine.triangle_count(); ++t) {
        const int c = hp.mesh.triangle_cell[t];
        std::array<int, 3> s{};
        for (int k = 0; k < 3; ++k)
            s[k] = hp.slot_of_corner(t, k);
        std::array<Mat, 3> q;
        Mat carry = identity(hp.rank);
        for (int k = 0; k < 3; ++k) {
            const Mat m = hp.cell_transport(c, s[k], s[(k + 1) % 3]);
            const Mat mm = m * m.adjoint();
            q[k] = carry * hermitian_part(0.5 * herm_log(mm)) * carry.adjoint();
            carry = carry * herm_inv_sqrt(mm) * m;
        }
        Mat mu1 = anti_hermitian_part(unitary_log(carry));
        mu1 += 0.5 * (bracket(q[0], q[1]) + bracket(q[0], q[2]) + bracket(q[1], q[2]));
        const Mat mu2 = q[0] + q[1] + q[2];
        res.mu1_density[t] = frob(mu1) / area;
        res.mu2_density[t] = frob(mu2) / area;
    }

    res.mu3_density.resize(fine.vertex_count());
    double dual_total = 0.0;
    for (int p = 0; p < fine.vertex_count(); ++p) {
        Mat div = Mat::Zero(hp.rank, hp.rank);
        for (int e : fine.vertex_edges(p))
            div += hp.edge_weight[e] * hp.psi(p, fine.other_end(e, p));
        const double dual = area * static_cast<double>(fine.vertex_triangles(p).size()) / 3.0;
        res.mu3_density[p] = frob(div) / dual;
        res.mu3.l2 += dual * res.mu3_density[p] * res.mu3_density[p];
        res.mu3.max = std::max(res.mu3.max, res.mu3_density[p]);
        dual_total += dual;
    }
    res.mu3.l2 = std::sqrt(res.mu3.l2);
    for (int t = 0; t < fine.triangle_count(); ++t) {
        res.mu1.max = std::max(res.mu1.max, res.mu1_density[t]);
        res.mu2.max = std::max(res.mu2.max, res.mu2_density[t]);
        res.mu1.l2 += area * res.mu1_density[t] * res.mu1_density[t];
        res.mu2.l2 += area * res.mu2_density[t] * res.mu2_density[t];
    }
    res.mu1.l2 = std::sqrt(res.mu1.l2);
    res.mu2.l2 = std::sqrt(res.mu2.l2);
    return res;
}

// ---------------------------------------------------------------------------
// Weighted norms

struct WeightedNorms
{
    double delta = 0.0;
    double l2_delta = 0.0;         // psi in the r^{-delta} weighted L2 norm
    double l2_1_delta = 0.0;       // adds the finite-difference derivative of psi
    double conn_l2_1_delta = 0.0;  // the same seminorm for A, in the fixed trivialization
    std::vector<double> per_vertex;  // squared weighted L2 mass inside each base vertex neighbourhood
};

namespace detail {

/// Weight r^{-delta} near the corners of a cell, 1 elsewhere; also the base vertex owning the point (or -1).
inline double corner_weight(const RefinedMesh& rm, int cell, double x, double y, double delta, int* owner = nullptr)
{
    static const double corners[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.5, 0.86602540378443864676}};
    double best = 1e300;
    int bc = -1;
    for (int c = 0; c < 3; ++c) {
        const double r = std::hypot(x - corners[c][0], y - corners[c][1]);
        if (r < best) {
            best = r;
            bc = c;
        }
    }
    if (best >= kWeightRadius) {
        if (owner)
            *owner = -1;
        return 1.0;
    }
    if (owner)
        *owner = rm.base.triangle(cell)[bc];
    return std::pow(best, -delta);
}

/// Pointwise values (X(ex), X(ey)) of a one-form given on two edge vectors.
inline std::array<Mat, 2> planar_components(const std::array<double, 2>& e1, const std::array<double, 2>& e2,
                                            const Mat& x1, const Mat& x2)
{
    const double d = e1[0] * e2[1] - e1[1] * e2[0];
    return {Mat((e2[1] * x1 - e1[1] * x2) / d), Mat((-e2[0] * x1 + e1[0] * x2) / d)};
}

}  // namespace detail

/**
 * Weighted norms of the extracted pair.  The L2 part integrates |psi|^2 per
 * refined triangle with the weight taken at its barycentre.  The derivative
 * part compares the one-forms of every pair of triangles sharing an edge,
 * both expressed in the frame of the edge's first vertex: the jump divided
 * by the barycentre distance, squared, over the diamond around the edge.
 * Jumps only see derivatives across edges, which on average is half the
 * full gradient, hence the factor 2.
 */
inline WeightedNorms weighted_norm(const HiggsPair& hp, double delta)
{
    WeightedNorms out;
    out.delta = delta;
    const auto& rm = hp.mesh;
    const auto& fine = rm.mesh;
    const double area = rm.triangle_area();
    const double h = rm.edge_length();
    out.per_vertex.assign(rm.base.vertex_count(), 0.0);

    double l2 = 0.0;
    for (int t = 0; t < fine.triangle_count(); ++t) {
        std::array<std::array<double, 2>, 3> pos;
        for (int k = 0; k < 3; ++k)
            pos[k] = rm.position(rm.triangle_corners[t][k][0], rm.triangle_corners[t][k][1]);
        const std::array<double, 2> e1{pos[1][0] - pos[0][0], pos[1][1] - pos[0][1]};
        const std::array<double, 2> e2{pos[2][0] - pos[0][0], pos[2][1] - pos[0][1]};
        const auto comp = detail::planar_components(e1, e2, hp.forms[t].psi1, hp.forms[t].psi2);
        const double dens = comp[0].squaredNorm() + comp[1].squaredNorm();
        int owner = -1;
        const double w = detail::corner_weight(rm, rm.triangle_cell[t], (pos[0][0] + pos[1][0] + pos[2][0]) / 3.0,
                                               (pos[0][1] + pos[1][1] + pos[2][1]) / 3.0, delta, &owner);
        l2 += w * area * dens;
        if (owner >= 0)
            out.per_vertex[owner] += w * area * dens;
    }
    out.l2_delta = std::sqrt(l2);

    // derivative terms across refined edges
    const double diamond = h * h / (2.0 * std::sqrt(3.0));
    const double gap2 = h * h / 3.0;  // squared distance between adjacent barycentres
    const double s60 = std::sqrt(3.0) / 2.0;
    double dpsi = 0.0, dconn = 0.0;
    for (int e = 0; e < fine.edge_count(); ++e) {
        const auto& tris = fine.edge_triangles(e);
        if (tris.size() < 2)
            continue;
        const int p = fine.edge(e)[0], q = fine.edge(e)[1];
        // per triangle: (along-edge, normal) components in p's reference frame
        // for psi and A, with the normal oriented away from the triangle
        struct Side
        {
            Mat psi_t, psi_n, conn_t, conn_n;
        };
        std::vector<Side> sides;
        double mid_x = 0.0, mid_y = 0.0;
        int mid_cell = -1;
        for (int t : tris) {
            const int c = rm.triangle_cell[t];
            int kp = -1, kq = -1, ko = -1;
            for (int k = 0; k < 3; ++k) {
                const int v = fine.triangle(t)[k];
                (v == p ? kp : (v == q ? kq : ko)) = k;
            }
            const int sp = hp.slot_of_corner(t, kp), sq = hp.slot_of_corner(t, kq), so = hp.slot_of_corner(t, ko);
            const auto xq = split_transport(hp.cell_transport(c, sp, sq));
            const auto xo = split_transport(hp.cell_transport(c, sp, so));
            const Mat& u = hp.to_ref[c][sp];
            const Mat ui = u.inverse();
            Side sd;
            sd.psi_t = u * xq.psi * ui / h;
            sd.psi_n = u * (0.5 * xq.psi - xo.psi) * ui / (h * s60);
            sd.conn_t = u * xq.conn * ui / h;
            sd.conn_n = u * (0.5 * xq.conn - xo.conn) * ui / (h * s60);
            sides.push_back(sd);
            if (mid_cell < 0) {
                mid_cell = c;
                const auto a = rm.position(rm.triangle_corners[t][kp][0], rm.triangle_corners[t][kp][1]);
                const auto b = rm.position(rm.triangle_corners[t][kq][0], rm.triangle_corners[t][kq][1]);
                mid_x = 0.5 * (a[0] + b[0]);
                mid_y = 0.5 * (a[1] + b[1]);
            }
        }
        const double w = detail::corner_weight(rm, mid_cell, mid_x, mid_y, delta);
        const double pair_factor = 1.0 / static_cast<double>(sides.size() - 1);
        for (std::size_t i = 0; i < sides.size(); ++i)
            for (std::size_t j = i + 1; j < sides.size(); ++j) {
                // normals of the two sides point in opposite directions
                const double jp = (sides[i].psi_t - sides[j].psi_t).squaredNorm() +
                                  (sides[i].psi_n + sides[j].psi_n).squaredNorm();
                const double jc = (sides[i].conn_t - sides[j].conn_t).squaredNorm() +
                                  (sides[i].conn_n + sides[j].conn_n).squaredNorm();
                dpsi += pair_factor * w * diamond * 2.0 * jp / gap2;
                dconn += pair_factor * w * diamond * 2.0 * jc / gap2;
            }
    }
    out.l2_1_delta = std::sqrt(l2 + dpsi);
    double conn_l2 = 0.0;
    for (int t = 0; t < fine.triangle_count(); ++t) {
        std::array<std::array<double, 2>, 3> pos;
        for (int k = 0; k < 3; ++k)
            pos[k] = rm.position(rm.triangle_corners[t][k][0], rm.triangle_corners[t][k][1]);
        const std::array<double, 2> e1{pos[1][0] - pos[0][0], pos[1][1] - pos[0][1]};
        const std::array<double, 2> e2{pos[2][0] - pos[0][0], pos[2][1] - pos[0][1]};
        const auto comp = detail::planar_components(e1, e2, hp.forms[t].conn1, hp.forms[t].conn2);
        const double w = detail::corner_weight(rm, rm.triangle_cell[t], (pos[0][0] + pos[1][0] + pos[2][0]) / 3.0,
                                               (pos[0][1] + pos[1][1] + pos[2][1]) / 3.0, delta);
        conn_l2 += w * area * (comp[0].squaredNorm() + comp[1].squaredNorm());
    }
    out.conn_l2_1_delta = std::sqrt(conn_l2 + dconn);
    return out;
}

// ---------------------------------------------------------------------------
// Gauge action and flat trivialization

/**
 * Applies a gauge field given per refined vertex in reference frames.  In a
 * cell the same transformation reads U^{-1} v U with U = to_ref, which
 * leaves every unitary transition unchanged; transports become
 * v(p)^{-1} M v(q).
 */
inline HiggsPair apply_gauge(const HiggsPair& hp, const std::vector<Mat>& gauge)
{
    const auto& rm = hp.mesh;
    if (static_cast<int>(gauge.size()) != rm.mesh.vertex_count())
        throw DomainError("gauge field needs one matrix per refined vertex");
    for (const auto& v : gauge) {
        if (v.rows() != hp.rank || v.cols() != hp.rank || !all_finite(v))
            throw DomainError("gauge values must be finite rank-r matrices");
        if (std::abs(det(v) - 1.0) > 1e-8)
            throw DomainError("gauge values must be unimodular");
    }
    HiggsPair out = hp;
    const int n = rm.n;
    for (int c = 0; c < rm.base.triangle_count(); ++c)
        for (int a = 0; a <= n; ++a)
            for (int b = 0; a + b <= n; ++b) {
                const int s = rm.lattice_slot(a, b);
                const Mat& u = hp.to_ref[c][s];
                out.frames[c][s] = hp.frames[c][s] * (u.inverse() * gauge[rm.lattice[c][s]] * u);
            }
    detail::compute_forms(out);
    return out;
}

struct FlatTrivialization
{
    std::vector<Mat> gauge;   // per refined vertex
    std::vector<int> parent;  // breadth-first tree, -1 at the root
};

/// Spanning tree by breadth-first search over sorted neighbours.
inline std::vector<int> bfs_parents(const ComplexMesh& m, int root)
{
    std::vector<int> parent(m.vertex_count(), -2);
    parent[root] = -1;
    std::deque<int> queue{root};
    while (!queue.empty()) {
        const int p = queue.front();
        queue.pop_front();
        std::vector<int> nbrs;
        for (int e : m.vertex_edges(p))
            nbrs.push_back(m.other_end(e, p));
        std::sort(nbrs.begin(), nbrs.end());
        for (int q : nbrs)
            if (parent[q] == -2) {
                parent[q] = p;
                queue.push_back(q);
            }
    }
    for (int p : parent)
        if (p == -2)
            throw DomainError("refined mesh is disconnected");
    return parent;
}

/// Gauge with g(basepoint) = I making every tree-edge transport the identity.
inline FlatTrivialization trivialize_flat(const HiggsPair& hp, int basepoint)
{
    const auto& fine = hp.mesh.mesh;
    if (basepoint < 0 || basepoint >= fine.vertex_count())
        throw DomainError("basepoint is not a refined vertex");
    FlatTrivialization tr;
    tr.parent = bfs_parents(fine, basepoint);
    tr.gauge.assign(fine.vertex_count(), identity(hp.rank));
    // parents precede children in breadth-first order
    std::vector<int> order{basepoint};
    for (std::size_t i = 0; i < order.size(); ++i) {
        const int p = order[i];
        std::vector<int> kids;
        for (int e : fine.vertex_edges(p)) {
            const int q = fine.other_end(e, p);
            if (tr.parent[q] == p)
                kids.push_back(q);
        }
        std::sort(kids.begin(), kids.end());
        for (int q : kids) {
            tr.gauge[q] = hp.transport(q, p) * tr.gauge[p];
            order.push_back(q);
        }
    }
    return tr;
}

/// Text dump: per refined triangle `T <id>` and the matrices A1, A2, psi1, psi2.
inline void write_higgs_pair(std::ostream& out, const HiggsPair& hp)
{
    for (std::size_t t = 0; t < hp.forms.size(); ++t) {
        out << "T " << t << "\n";
        write_matrix(out, hp.forms[t].conn1);
        write_matrix(out, hp.forms[t].conn2);
        write_matrix(out, hp.forms[t].psi1);
        write_matrix(out, hp.forms[t].psi2);
    }
}

}  // namespace cellhiggs
