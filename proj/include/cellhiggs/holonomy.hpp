/**
 * Parallel transport, holonomy representations and round-trip checks.
 *
 * Convention: transport matrices act on column vectors of frame components
 * and carry the start of a path to its end, so a later segment multiplies
 * on the left.  Results are expressed in reference frames (see
 * higgs_field.hpp).
 *
 * Three backends:
 *   - combinatorial: product of the exact edge transports of the extracted
 *     flat connection.  It reproduces the input data up to round-off and
 *     certifies the algebra.
 *   - ode: RK4 integration of s' = -B(c') s where B is the Whitney
 *     interpolant of the edge logarithms.  Its tangential part is constant
 *     along each edge and integrates to that edge's logarithm, so this
 *     agrees with the combinatorial backend up to integration error.
 *   - ode_vertex: the same integration, but B is the least-squares form of
 *     each refined triangle averaged onto the vertices and interpolated
 *     linearly along each edge.  This samples the smooth connection rather
 *     than the cochain, so loop defects are genuine discretization errors
 *     that shrink with refinement.
 */
#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <mutex>
#include <thread>
#include <vector>

#include "cellhiggs/group_rep.hpp"
#include "cellhiggs/higgs_field.hpp"

namespace cellhiggs {

struct EdgePath
{
    std::vector<int> vertices;  // consecutive entries are joined by refined edges
    bool closed = false;

    int basepoint() const { return vertices.front(); }
    int edge_count() const { return static_cast<int>(vertices.size()) - 1; }

    EdgePath reversed() const
    {
        EdgePath r = *this;
        std::reverse(r.vertices.begin(), r.vertices.end());
        return r;
    }
};

/// Checks incidence and closure; throws DomainError.
inline void validate_path(const ComplexMesh& m, const EdgePath& path)
{
    if (path.vertices.empty())
        throw DomainError("empty path");
    for (int v : path.vertices)
        if (v < 0 || v >= m.vertex_count())
            throw DomainError("path vertex out of range");
    for (int i = 0; i + 1 < static_cast<int>(path.vertices.size()); ++i)
        if (m.find_edge(path.vertices[i], path.vertices[i + 1]) < 0)
            throw DomainError("consecutive path vertices are not adjacent");
    if (path.closed && path.vertices.front() != path.vertices.back())
        throw DomainError("closed path does not return to its basepoint");
}

inline EdgePath concatenate(const EdgePath& first, const EdgePath& second)
{
    if (first.vertices.back() != second.vertices.front())
        throw DomainError("paths do not meet");
    EdgePath out = first;
    out.vertices.insert(out.vertices.end(), second.vertices.begin() + 1, second.vertices.end());
    out.closed = out.vertices.front() == out.vertices.back() && out.vertices.size() > 1;
    return out;
}

enum class TransportMethod { combinatorial, ode, ode_vertex };

inline std::string method_name(TransportMethod m)
{
    switch (m) {
    case TransportMethod::ode: return "ode";
    case TransportMethod::ode_vertex: return "ode_vertex";
    default: return "combinatorial";
    }
}

inline TransportMethod parse_method(const std::string& s)
{
    if (s == "ode")
        return TransportMethod::ode;
    if (s == "ode_vertex")
        return TransportMethod::ode_vertex;
    if (s == "combinatorial")
        return TransportMethod::combinatorial;
    throw ConfigError("unknown transport method '" + s + "'");
}

struct HolonomyResult
{
    Mat matrix;
    EdgePath path;
    TransportMethod method = TransportMethod::combinatorial;
    int steps_per_edge = 0;
    double step_doubling_error = 0.0;  // ||result(N) - result(2N)||, ode only
    double det_deviation = 0.0;
};

/**
 * Fundamental solution of Phi' = -B(tau) Phi on [0, 1] with B linear in tau,
 * by classical RK4.
 */
inline Mat integrate_linear_form(const Mat& b0, const Mat& b1, int steps)
{
    const int r = static_cast<int>(b0.rows());
    Mat phi = identity(r);
    const double dt = 1.0 / steps;
    auto rhs = [&](double tau, const Mat& y) -> Mat { return -((1.0 - tau) * b0 + tau * b1) * y; };
    for (int i = 0; i < steps; ++i) {
        const double t = i * dt;
        const Mat k1 = rhs(t, phi);
        const Mat k2 = rhs(t + 0.5 * dt, phi + 0.5 * dt * k1);
        const Mat k3 = rhs(t + 0.5 * dt, phi + 0.5 * dt * k2);
        const Mat k4 = rhs(t + dt, phi + dt * k3);
        phi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return phi;
}

/**
 * Transport engine for one Higgs pair.  For ode_vertex it builds per-vertex
 * form samples on first use: in every cell, each refined triangle contributes the least-squares
 * linear form through its three edge logarithms B_k = log(g_k^{-1} g_{k+1}),
 *     L = 2 / (3 h^2) sum_k B_k (x) e_k,
 * which reproduces B_k exactly when the B_k sum to zero; a vertex sample
 * averages L over the cell's triangles at that vertex.  Near base vertices
 * the harmonic map can have order below one, so the form is unbounded and
 * ode_vertex converges only as fast as the map's local order allows.
 */
class Transporter
{
  public:
    explicit Transporter(const HiggsPair& hp) : hp_(hp) {}

    const HiggsPair& pair() const { return hp_; }

    /// Builds the vertex samples; called lazily by the ode_vertex backend.
    void build_samples() const
    {
        std::call_once(samples_once_, [this] { compute_samples(); });
    }

  private:
    void compute_samples() const
    {
        const auto& hp = hp_;
        const auto& rm = hp.mesh;
        const int slots = (rm.n + 1) * (rm.n + 1);
        const Mat zero = Mat::Zero(hp.rank, hp.rank);
        samples_.assign(rm.base.triangle_count(), std::vector<std::array<Mat, 2>>(slots, {zero, zero}));
        std::vector<std::vector<int>> count(rm.base.triangle_count(), std::vector<int>(slots, 0));
        const double h = rm.edge_length();
        const auto& fine = rm.mesh;
        for (int t = 0; t < fine.triangle_count(); ++t) {
            const int c = rm.triangle_cell[t];
            std::array<Mat, 2> form{zero, zero};
            for (int k = 0; k < 3; ++k) {
                const int sa = hp.slot_of_corner(t, k), sb = hp.slot_of_corner(t, (k + 1) % 3);
                Mat bk;
                try {
                    bk = principal_log(hp.cell_transport(c, sa, sb));
                } catch (const NumericError& err) {
                    throw NumericError("triangle " + std::to_string(t) + ": " + err.what());
                }
                const auto pa = position(t, k), pb = position(t, (k + 1) % 3);
                form[0] += bk * (pb[0] - pa[0]);
                form[1] += bk * (pb[1] - pa[1]);
            }
            for (auto& f : form)
                f *= 2.0 / (3.0 * h * h);
            for (int k = 0; k < 3; ++k) {
                const int s = hp.slot_of_corner(t, k);
                samples_[c][s][0] += form[0];
                samples_[c][s][1] += form[1];
                ++count[c][s];
            }
        }
        for (std::size_t c = 0; c < samples_.size(); ++c)
            for (std::size_t s = 0; s < samples_[c].size(); ++s)
                if (count[c][s] > 0)
                    for (auto& f : samples_[c][s])
                        f /= count[c][s];
    }

  public:
    /// Exact edge transport p -> q in reference frames.
    Mat edge_combinatorial(int p, int q) const { return hp_.transport(q, p); }

    /// RK4 edge transport p -> q in reference frames.
    Mat edge_ode(int p, int q, int steps, bool vertex_samples = false) const
    {
        const auto& fine = hp_.mesh.mesh;
        const int e = fine.find_edge(p, q);
        if (e < 0)
            throw DomainError("transport requested along a non-edge");
        const int c = hp_.edge_cell[e];
        const bool fwd = fine.edge(e)[0] == p;
        const int sp = hp_.edge_slots[e][fwd ? 0 : 1], sq = hp_.edge_slots[e][fwd ? 1 : 0];
        const auto xp = slot_position(sp), xq = slot_position(sq);
        const double dx = xq[0] - xp[0], dy = xq[1] - xp[1];
        Mat phi;
        if (vertex_samples) {
            build_samples();
            const Mat b0 = samples_[c][sp][0] * dx + samples_[c][sp][1] * dy;
            const Mat b1 = samples_[c][sq][0] * dx + samples_[c][sq][1] * dy;
            phi = integrate_linear_form(b0, b1, steps);
        } else {
            const Mat b = edge_log(c, sp, sq);
            phi = integrate_linear_form(b, b, steps);
        }
        return hp_.to_ref[c][sq] * phi * hp_.to_ref[c][sp].inverse();
    }

    HolonomyResult combinatorial(const EdgePath& path) const
    {
        validate_path(hp_.mesh.mesh, path);
        HolonomyResult res;
        res.path = path;
        res.method = TransportMethod::combinatorial;
        res.matrix = identity(hp_.rank);
        for (int i = 0; i < path.edge_count(); ++i)
            res.matrix = edge_combinatorial(path.vertices[i], path.vertices[i + 1]) * res.matrix;
        res.det_deviation = std::abs(det(res.matrix) - 1.0);
        return res;
    }

    HolonomyResult ode(const EdgePath& path, int steps_per_edge, bool vertex_samples = false) const
    {
        if (steps_per_edge < 1)
            throw ConfigError("steps per edge must be at least 1");
        validate_path(hp_.mesh.mesh, path);
        HolonomyResult res;
        res.path = path;
        res.method = vertex_samples ? TransportMethod::ode_vertex : TransportMethod::ode;
        res.steps_per_edge = steps_per_edge;
        Mat coarse = identity(hp_.rank), fine = identity(hp_.rank);
        for (int i = 0; i < path.edge_count(); ++i) {
            const int p = path.vertices[i], q = path.vertices[i + 1];
            coarse = edge_ode(p, q, steps_per_edge, vertex_samples) * coarse;
            fine = edge_ode(p, q, 2 * steps_per_edge, vertex_samples) * fine;
        }
        res.matrix = coarse;
        res.step_doubling_error = frob(coarse - fine);
        res.det_deviation = std::abs(det(coarse) - 1.0);
        return res;
    }

    HolonomyResult transport(const EdgePath& path, TransportMethod method, int steps_per_edge) const
    {
        switch (method) {
        case TransportMethod::ode: return ode(path, steps_per_edge);
        case TransportMethod::ode_vertex: return ode(path, steps_per_edge, true);
        default: return combinatorial(path);
        }
    }

  private:
    Mat edge_log(int c, int sp, int sq) const
    {
        try {
            return principal_log(hp_.cell_transport(c, sp, sq));
        } catch (const NumericError& err) {
            throw NumericError("edge log in cell " + std::to_string(c) + ": " + err.what());
        }
    }

    std::array<double, 2> position(int t, int k) const
    {
        const auto& c = hp_.mesh.triangle_corners[t][k];
        return hp_.mesh.position(c[0], c[1]);
    }

    std::array<double, 2> slot_position(int s) const
    {
        const int n1 = hp_.mesh.n + 1;
        return hp_.mesh.position(s / n1, s % n1);
    }

    const HiggsPair& hp_;
    mutable std::once_flag samples_once_;
    mutable std::vector<std::vector<std::array<Mat, 2>>> samples_;  // [cell][slot] planar components
};

inline HolonomyResult transport_ode(const HiggsPair& hp, const EdgePath& path, int steps_per_edge = 64)
{
    return Transporter(hp).ode(path, steps_per_edge);
}

inline HolonomyResult transport_combinatorial(const HiggsPair& hp, const EdgePath& path)
{
    return Transporter(hp).combinatorial(path);
}

// ---------------------------------------------------------------------------
// Paths on the refined mesh

/// Refined vertices along the base edge a -> b, both ends included.
inline std::vector<int> refine_base_edge(const RefinedMesh& rm, int a, int b)
{
    const int e = rm.base.find_edge(a, b);
    if (e < 0)
        throw DomainError("base vertices are not adjacent");
    const int nvb = rm.base.vertex_count();
    std::vector<int> out{a};
    for (int k = 1; k < rm.n; ++k) {
        // interior ids count up from the lower endpoint
        const int from_low = a < b ? k : rm.n - k;
        out.push_back(nvb + e * (rm.n - 1) + (from_low - 1));
    }
    out.push_back(b);
    return out;
}

/// Refined path following a closed walk of base vertices.
inline EdgePath refine_base_loop(const RefinedMesh& rm, const std::vector<int>& loop)
{
    EdgePath path;
    path.vertices.push_back(loop.front());
    for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
        const auto seg = refine_base_edge(rm, loop[i], loop[i + 1]);
        path.vertices.insert(path.vertices.end(), seg.begin() + 1, seg.end());
    }
    path.closed = path.vertices.front() == path.vertices.back() && path.vertices.size() > 1;
    return path;
}

inline EdgePath generator_path(const RefinedMesh& rm, const Presentation& pres, int g)
{
    return refine_base_loop(rm, pres.generator_loop(rm.base, g));
}

/**
 * Closed refined loops around base vertex v at combinatorial distance
 * m = round(fraction * n) (clamped to [1, max(1, n - 1)]), one per
 * fundamental cycle of the vertex link.  Inside a cell with corners
 * (v, x, y) the loop runs through the lattice points with weight n - m on v.
 */
inline std::vector<EdgePath> vertex_loops(const RefinedMesh& rm, int v, double fraction)
{
    const auto& base = rm.base;
    if (v < 0 || v >= base.vertex_count())
        throw DomainError("vertex loops need a base vertex");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw DomainError("loop radius fraction must lie in (0, 1]");
    const int n = rm.n;
    const int m = std::clamp(static_cast<int>(std::lround(fraction * n)), 1, std::max(1, n - 1));
    const auto link = vertex_link(base, v);

    // ring point on the edge v - w, and the ring segment through one cell
    auto ring_segment = [&](int arc, int from_node, int to_node) {
        const int t = link.arc_triangle[arc];
        const int cv = detail::corner_of(base, t, v);
        const int cx = detail::corner_of(base, t, link.nodes[from_node]);
        const int cy = detail::corner_of(base, t, link.nodes[to_node]);
        std::vector<int> seg;
        for (int j = 0; j <= m; ++j) {
            std::array<int, 3> w{};
            w[cv] = n - m;
            w[cx] = m - j;
            w[cy] = j;
            seg.push_back(rm.lattice_vertex(t, w[1], w[2]));
        }
        return seg;
    };

    // breadth-first tree on the link
    const int nn = link.node_count();
    std::vector<int> parent(nn, -2), parent_arc(nn, -1);
    std::vector<std::vector<std::pair<int, int>>> adj(nn);  // (neighbour node, arc)
    for (int a = 0; a < static_cast<int>(link.arcs.size()); ++a) {
        adj[link.arcs[a][0]].push_back({link.arcs[a][1], a});
        adj[link.arcs[a][1]].push_back({link.arcs[a][0], a});
    }
    for (auto& l : adj)
        std::sort(l.begin(), l.end());
    std::vector<char> tree_arc(link.arcs.size(), 0);
    for (int root = 0; root < nn; ++root) {
        if (parent[root] != -2)
            continue;
        parent[root] = -1;
        std::deque<int> queue{root};
        while (!queue.empty()) {
            const int x = queue.front();
            queue.pop_front();
            for (auto [y, a] : adj[x])
                if (parent[y] == -2) {
                    parent[y] = x;
                    parent_arc[y] = a;
                    tree_arc[a] = 1;
                    queue.push_back(y);
                }
        }
    }
    auto root_path = [&](int x) {  // node sequence root -> x, with arcs
        std::vector<std::pair<int, int>> steps;  // (node, arc used to reach it)
        for (int y = x; y >= 0; y = parent[y])
            steps.push_back({y, parent_arc[y]});
        std::reverse(steps.begin(), steps.end());
        return steps;
    };

    std::vector<EdgePath> loops;
    for (int a = 0; a < static_cast<int>(link.arcs.size()); ++a) {
        if (tree_arc[a])
            continue;
        const int x = link.arcs[a][0], y = link.arcs[a][1];
        // walk root -> x, arc a to y, then y -> root
        std::vector<std::pair<int, int>> walk = root_path(x);  // (node, arc into node)
        walk.push_back({y, a});
        auto back = root_path(y);
        for (int i = static_cast<int>(back.size()) - 2; i >= 0; --i)
            walk.push_back({back[i].first, back[i + 1].second});
        EdgePath path;
        for (std::size_t i = 1; i < walk.size(); ++i) {
            const auto seg = ring_segment(walk[i].second, walk[i - 1].first, walk[i].first);
            path.vertices.insert(path.vertices.end(), seg.begin() + (path.vertices.empty() ? 0 : 1), seg.end());
        }
        path.closed = true;
        loops.push_back(std::move(path));
    }
    return loops;
}

// ---------------------------------------------------------------------------
// Holonomy representation and checks

struct HolonomyRepresentation
{
    Representation rep;
    std::vector<HolonomyResult> loops;  // per generator
    double max_step_doubling_error = 0.0;
    double max_det_deviation = 0.0;
};

/**
 * Images of the generators: a generator loop crosses its edge against the
 * cocycle direction, so the transport around it is rho(g)^{-1} up to the
 * basepoint frame, and the image is its inverse.  Relator residuals are
 * recorded, not enforced.
 */
inline HolonomyRepresentation holonomy_rep(const HiggsPair& hp, const Presentation& pres,
                                           TransportMethod method = TransportMethod::ode, int steps_per_edge = 64,
                                           int threads = 1)
{
    const Transporter tr(hp);
    HolonomyRepresentation out;
    const int ng = pres.generator_count();
    out.loops.resize(ng);
    auto work = [&](int g) { out.loops[g] = tr.transport(generator_path(hp.mesh, pres, g), method, steps_per_edge); };
    if (threads <= 1 || ng <= 1) {
        for (int g = 0; g < ng; ++g)
            work(g);
    } else {
        std::vector<std::thread> pool;
        const int nt = std::min(threads, ng);
        for (int w = 0; w < nt; ++w)
            pool.emplace_back([&, w] {
                for (int g = w; g < ng; g += nt)
                    work(g);
            });
        for (auto& t : pool)
            t.join();
    }
    out.rep.rank = hp.rank;
    for (const auto& l : out.loops) {
        out.rep.images.push_back(l.matrix.inverse());
        out.max_step_doubling_error = std::max(out.max_step_doubling_error, l.step_doubling_error);
        out.max_det_deviation = std::max(out.max_det_deviation, l.det_deviation);
    }
    for (const auto& w : pres.relators)
        out.rep.relator_residuals.push_back(frob(out.rep.evaluate(w) - identity(hp.rank)));
    return out;
}

struct VertexLoopReport
{
    int vertex = -1;
    std::vector<HolonomyResult> loops;
    double max_deviation = 0.0;  // max ||hol - I||_F
};

inline VertexLoopReport vertex_loop_holonomy(const Transporter& tr, int v, double fraction,
                                             TransportMethod method = TransportMethod::ode, int steps_per_edge = 64)
{
    VertexLoopReport rep;
    rep.vertex = v;
    for (const auto& path : vertex_loops(tr.pair().mesh, v, fraction)) {
        rep.loops.push_back(tr.transport(path, method, steps_per_edge));
        rep.max_deviation = std::max(rep.max_deviation, frob(rep.loops.back().matrix - identity(tr.pair().rank)));
    }
    return rep;
}

inline VertexLoopReport vertex_loop_holonomy(const HiggsPair& hp, int v, double fraction,
                                             TransportMethod method = TransportMethod::ode, int steps_per_edge = 64)
{
    return vertex_loop_holonomy(Transporter(hp), v, fraction, method, steps_per_edge);
}

struct RoundTripReport
{
    bool pass = false;
    double max_deviation = 0.0;
    std::string worst_word;
    int maxlen = 0;
};

inline RoundTripReport roundtrip_check(const Representation& rho_in, const Representation& rho_out, int maxlen,
                                       double tol, int threads = 1)
{
    if (rho_in.rank != rho_out.rank || rho_in.generator_count() != rho_out.generator_count())
        throw DomainError("round trip compares representations of different shape");
    const auto a = word_trace_fingerprint(rho_in, maxlen, threads);
    const auto b = word_trace_fingerprint(rho_out, maxlen, threads);
    const auto d = fingerprint_distance(a, b);
    RoundTripReport rep;
    rep.maxlen = maxlen;
    rep.max_deviation = d.max_deviation;
    rep.worst_word = word_to_string(d.worst_word);
    rep.pass = d.max_deviation <= tol;
    return rep;
}

}  // namespace cellhiggs
