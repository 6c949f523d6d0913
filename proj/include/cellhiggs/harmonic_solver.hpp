/**
 * rho-equivariant discrete harmonic maps into SL(r,C)/SU(r).
 *
 * Only values on the refined quotient mesh are stored.  A neighbour q of p
 * is seen from p through the flat cocycle T_pq = T_{home(p), home(q)}, where
 * T_ab = rho(word crossed on the base edge a -> b); lifts are therefore
 * act(T_pq, u_q) and equivariance holds by construction.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "cellhiggs/complex_core.hpp"
#include "cellhiggs/group_rep.hpp"
#include "cellhiggs/symmetric_space.hpp"

namespace cellhiggs {

/// Cotangent weight of one equilateral corner: cot(60 deg) / 2.
inline const double kCornerWeight = 1.0 / (2.0 * std::sqrt(3.0));

struct EquivariantMap
{
    RefinedMesh mesh;
    Presentation pres;
    Representation rep;
    std::vector<SymPoint> values;          // per refined vertex
    std::vector<Mat> base_forward;         // per base edge, low -> high vertex index
    std::vector<Mat> base_backward;
    std::vector<double> edge_weight;       // per refined edge

    int rank() const { return rep.rank; }

    /// Flat cocycle on base vertices that are equal or adjacent.
    Mat base_transition(int a, int b) const
    {
        if (a == b)
            return identity(rank());
        const int e = mesh.base.find_edge(a, b);
        if (e < 0)
            throw DomainError("base vertices are not adjacent");
        return a < b ? base_forward[e] : base_backward[e];
    }

    /// Matrix carrying q's value into p's frame along the refined edge p - q.
    Mat transition(int p, int q) const { return base_transition(mesh.home[p], mesh.home[q]); }

    SymPoint lifted(int p, int q) const { return act(transition(p, q), values[q]); }
};

inline EquivariantMap make_equivariant_map(RefinedMesh mesh, Presentation pres, Representation rep)
{
    EquivariantMap m;
    m.mesh = std::move(mesh);
    m.pres = std::move(pres);
    m.rep = std::move(rep);
    const auto& base = m.mesh.base;
    for (int e = 0; e < base.edge_count(); ++e) {
        const auto& ed = base.edge(e);
        m.base_forward.push_back(m.rep.evaluate(m.pres.edge_word(base, ed[0], ed[1])));
        m.base_backward.push_back(m.rep.evaluate(m.pres.edge_word(base, ed[1], ed[0])));
    }
    const auto& fine = m.mesh.mesh;
    m.edge_weight.resize(fine.edge_count());
    for (int e = 0; e < fine.edge_count(); ++e)
        m.edge_weight[e] = kCornerWeight * static_cast<double>(fine.edge_triangles(e).size());
    m.values.assign(fine.vertex_count(), identity(m.rep.rank));
    return m;
}

inline double assemble_energy(const EquivariantMap& map)
{
    const auto& fine = map.mesh.mesh;
    double energy = 0.0;
    for (int e = 0; e < fine.edge_count(); ++e) {
        const auto& ed = fine.edge(e);
        energy += map.edge_weight[e] * distance_squared(map.values[ed[0]], map.lifted(ed[0], ed[1]));
    }
    return energy;
}

namespace detail {

struct LocalStencil
{
    std::vector<SymPoint> points;
    std::vector<double> weights;
};

inline LocalStencil stencil(const EquivariantMap& map, int p)
{
    LocalStencil s;
    const auto& fine = map.mesh.mesh;
    for (int e : fine.vertex_edges(p)) {
        s.points.push_back(map.lifted(p, fine.other_end(e, p)));
        s.weights.push_back(map.edge_weight[e]);
    }
    return s;
}

inline double local_objective(const LocalStencil& s, const SymPoint& x)
{
    return weighted_squared_distances(x, s.points, s.weights);
}

}  // namespace detail

struct SweepResult
{
    double energy_change = 0.0;  // sum of accepted local objective changes, <= 0
    double max_movement = 0.0;
    int rejected_updates = 0;  // local updates refused by the monotonicity guard
};

/**
 * One Gauss-Seidel pass in vertex order. Each value moves to the Karcher mean
 * of its pulled-back neighbours, which minimizes its local objective; an
 * update that would raise the objective (possible only through round-off)
 * is discarded so the recorded energy never increases.
 */
inline SweepResult relax_sweep(EquivariantMap& map)
{
    SweepResult res;
    const int nv = map.mesh.mesh.vertex_count();
    for (int p = 0; p < nv; ++p) {
        const auto s = detail::stencil(map, p);
        const SymPoint old = map.values[p];
        const SymPoint next = karcher_mean_detailed(s.points, s.weights, &old).mean;
        const double before = detail::local_objective(s, old);
        const double after = detail::local_objective(s, next);
        if (after > before) {
            ++res.rejected_updates;
            continue;
        }
        // each edge term at p appears once in the energy and once in the
        // local objective, so this is the exact energy change of the update
        res.energy_change += after - before;
        res.max_movement = std::max(res.max_movement, distance(old, next));
        map.values[p] = next;
    }
    return res;
}

struct SolveOptions
{
    int max_sweeps = 20000;
    double tol = 1e-10;
    std::optional<std::uint64_t> seed;  // random initialization when set
};

struct SolveDiagnostics
{
    // Entry 0 is the assembled initial energy; later entries subtract the
    // accepted local decreases, so the trace is monotone in floating point.
    std::vector<double> energy_trace;
    double final_energy = 0.0;           // reassembled from scratch at the end
    std::vector<double> movement_trace;  // per sweep
    double final_gradient_norm = 0.0;
    int sweeps = 0;
    bool converged = false;
    int rejected_updates = 0;
    std::vector<double> balancing;       // per base edge
};

/// Largest norm over vertices of the energy gradient -2 sum_q w log_p(u_q).
inline double gradient_norm(const EquivariantMap& map)
{
    double worst = 0.0;
    const auto& fine = map.mesh.mesh;
    for (int p = 0; p < fine.vertex_count(); ++p) {
        Mat g = Mat::Zero(map.rank(), map.rank());
        for (int e : fine.vertex_edges(p))
            g += map.edge_weight[e] * log_at(map.values[p], map.lifted(p, fine.other_end(e, p)));
        worst = std::max(worst, 2.0 * frob(g));
    }
    return worst;
}

/// Traceless Hermitian matrix with uniformly distributed norm in [0, 1).
inline SymTangent random_tangent(std::mt19937_64& rng, int r)
{
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    Mat m(r, r);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
            m(i, j) = cplx(nd(rng), nd(rng));
    SymTangent x = tangent_part(m);
    const double n = frob(x);
    return n > 0.0 ? SymTangent(x * (ud(rng) / n)) : x;
}

inline void initialize(EquivariantMap& map, const std::optional<std::uint64_t>& seed)
{
    const int r = map.rank();
    if (!seed) {
        map.values.assign(map.mesh.mesh.vertex_count(), identity(r));
        return;
    }
    std::mt19937_64 rng(*seed);
    for (auto& v : map.values)
        v = exp_at(identity(r), random_tangent(rng, r));
}

inline std::vector<double> balancing_residual(const EquivariantMap& map);

inline std::pair<EquivariantMap, SolveDiagnostics> solve_harmonic(const RefinedMesh& mesh, const Presentation& pres,
                                                                   const Representation& rep, const SolveOptions& opts)
{
    if (!(opts.tol > 0.0))
        throw ConfigError("solver tolerance must be positive");
    if (opts.max_sweeps < 1)
        throw ConfigError("at least one sweep is required");
    EquivariantMap map = make_equivariant_map(mesh, pres, rep);
    initialize(map, opts.seed);
    SolveDiagnostics diag;
    diag.energy_trace.push_back(assemble_energy(map));
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        const auto res = relax_sweep(map);
        diag.energy_trace.push_back(diag.energy_trace.back() + res.energy_change);
        diag.movement_trace.push_back(res.max_movement);
        diag.rejected_updates += res.rejected_updates;
        diag.sweeps = sweep + 1;
        if (res.max_movement <= opts.tol) {
            diag.converged = true;
            break;
        }
    }
    diag.final_energy = assemble_energy(map);
    diag.final_gradient_norm = gradient_norm(map);
    diag.balancing = balancing_residual(map);
    return {std::move(map), std::move(diag)};
}

// ---------------------------------------------------------------------------
// Balancing

/// Scale below which the one-sided normal derivatives count as round-off.
inline constexpr double kBalancingScaleFloor = 1e-3;

/**
 * Normalized balancing residual per base edge.
 *
 * At a refined vertex p inside a base edge, each incident cell sigma
 * contributes the one-sided normal derivative
 *     N_sigma = [log_p(s1) + log_p(s2) + (log_p(p+) + log_p(p-)) / 2] / (sqrt(3) h),
 * where s1, s2 are p's neighbours inside sigma and p+- its neighbours on
 * the edge.  Stationarity of the energy at p is exactly sum_sigma N_sigma = 0.
 * The local gradient scale is the same sum taken over the norms of the
 * individual log terms.  The reported value is the maximum over such p of
 * |sum N_sigma| / max(scale, floor); the floor keeps maps that are constant
 * up to round-off from producing 0/0 ratios.  Edges without interior
 * refined vertices (level 0) report 0.
 */
inline std::vector<double> balancing_residual(const EquivariantMap& map)
{
    const auto& rm = map.mesh;
    const auto& base = rm.base;
    const int n = rm.n;
    const double h = rm.edge_length();
    std::vector<double> out(base.edge_count(), 0.0);
    static const int dirs[6][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, -1}, {-1, 1}};

    for (int e = 0; e < base.edge_count(); ++e) {
        const auto& cells = base.edge_triangles(e);
        for (int k = 1; k < n; ++k) {
            const int p = base.vertex_count() + e * (n - 1) + (k - 1);
            Mat total = Mat::Zero(map.rank(), map.rank());
            double scale = 0.0;
            for (int sigma : cells) {
                const auto& tri = base.triangle(sigma);
                int a = 0, b = 0;
                if (!rm.locate(sigma, p, a, b))
                    throw DomainError("refined edge vertex missing from an incident cell");
                // corner of sigma opposite the base edge
                int opp = 0;
                for (int c = 0; c < 3; ++c)
                    if (tri[c] != base.edge(e)[0] && tri[c] != base.edge(e)[1])
                        opp = c;
                Mat inner = Mat::Zero(map.rank(), map.rank());
                Mat along = Mat::Zero(map.rank(), map.rank());
                double magnitude = 0.0;
                for (const auto& d : dirs) {
                    const int aa = a + d[0], bb = b + d[1];
                    if (aa < 0 || bb < 0 || aa + bb > n)
                        continue;
                    const int w_opp = opp == 0 ? n - aa - bb : (opp == 1 ? aa : bb);
                    const int q = rm.lattice_vertex(sigma, aa, bb);
                    const Mat l = log_at(map.values[p], map.lifted(p, q));
                    if (w_opp == 0) {
                        along += l;
                        magnitude += 0.5 * frob(l);
                    } else {
                        inner += l;
                        magnitude += frob(l);
                    }
                }
                total += (inner + 0.5 * along) / (std::sqrt(3.0) * h);
                scale += magnitude / (std::sqrt(3.0) * h);
            }
            out[e] = std::max(out[e], frob(total) / std::max(scale, kBalancingScaleFloor));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Order estimate

struct OrderSample
{
    double radius = 0.0;
    double ball_energy = 0.0;
    double boundary_integral = 0.0;
    double alpha = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;  // 0/0 quotient: map constant near the vertex
};

struct OrderProfile
{
    int vertex = -1;
    std::vector<OrderSample> samples;
    double two_lambda_comb = 0.0;
};

inline std::vector<double> default_order_radii()
{
    return {0.25 * kStarInradius, 0.5 * kStarInradius, 0.75 * kStarInradius};
}

namespace detail {

/// Corner index of base vertex v in triangle t.
inline int corner_of(const ComplexMesh& m, int t, int v)
{
    const auto& tri = m.triangle(t);
    for (int c = 0; c < 3; ++c)
        if (tri[c] == v)
            return c;
    return -1;
}

/// Lattice coordinates (a, b) of barycentric coordinates (l0, l1, l2).
inline std::array<double, 2> lattice_coords(int n, const std::array<double, 3>& bary)
{
    return {bary[1] * n, bary[2] * n};
}

/**
 * Barycentric interpolation of a per-vertex tangent field over the refined
 * triangle of cell t containing the lattice point (x, y).
 */
template <class F>
Mat interpolate_in_cell(const RefinedMesh& rm, int t, double x, double y, F&& field)
{
    const int n = rm.n;
    int a0 = std::clamp(static_cast<int>(std::floor(x)), 0, n - 1);
    int b0 = std::clamp(static_cast<int>(std::floor(y)), 0, n - 1 - a0);
    const double fa = x - a0, fb = y - b0;
    if (fa + fb <= 1.0 || a0 + b0 == n - 1) {
        return (1.0 - fa - fb) * field(rm.lattice_vertex(t, a0, b0)) + fa * field(rm.lattice_vertex(t, a0 + 1, b0)) +
               fb * field(rm.lattice_vertex(t, a0, b0 + 1));
    }
    return (1.0 - fb) * field(rm.lattice_vertex(t, a0 + 1, b0)) +
           (fa + fb - 1.0) * field(rm.lattice_vertex(t, a0 + 1, b0 + 1)) +
           (1.0 - fa) * field(rm.lattice_vertex(t, a0, b0 + 1));
}

}  // namespace detail

/**
 * Empirical order alpha(r) = r E(B_r(v)) / int_{dB_r} d^2(u, u(v)).
 *
 * The ball energy integrates each refined triangle's (constant) energy
 * density over its part inside the disk, estimated by an M x M barycentric
 * sub-grid.  The boundary integral samples the arc in every incident cell,
 * interpolating log_{u(v)} of the lifted values piecewise linearly.
 */
inline OrderProfile order_estimate(const EquivariantMap& map, int v, const std::vector<double>& radii,
                                   int subgrid = 32, int arc_samples = 128)
{
    const auto& rm = map.mesh;
    const auto& base = rm.base;
    if (v < 0 || v >= base.vertex_count())
        throw DomainError("order estimate needs a base vertex");
    OrderProfile prof;
    prof.vertex = v;
    prof.two_lambda_comb = 2.0 * link_spectrum(vertex_link(base, v)).lambda_comb;

    const double s60 = std::sqrt(3.0) / 2.0;
    const SymPoint& uv = map.values[v];
    auto lifted_log = [&](int q) -> Mat { return log_at(uv, act(map.base_transition(v, rm.home[q]), map.values[q])); };

    // Precompute energy density per refined triangle of the star.
    struct StarTriangle
    {
        int cell;
        int corner;
        double density;
        std::array<std::array<double, 2>, 3> pos;  // planar, v at the origin
    };
    std::vector<StarTriangle> star;
    const double area = rm.triangle_area();
    for (int t = 0; t < rm.mesh.triangle_count(); ++t) {
        const int cell = rm.triangle_cell[t];
        const int corner = detail::corner_of(base, cell, v);
        if (corner < 0)
            continue;
        const auto& tri = rm.mesh.triangle(t);
        double e = 0.0;
        for (int k = 0; k < 3; ++k) {
            const int p = tri[k], q = tri[(k + 1) % 3];
            e += kCornerWeight * distance_squared(map.values[p], map.lifted(p, q));
        }
        StarTriangle st{cell, corner, e / area, {}};
        for (int k = 0; k < 3; ++k) {
            const auto c = rm.triangle_corners[t][k];
            const double lb[3] = {double(rm.n - c[0] - c[1]) / rm.n, double(c[0]) / rm.n, double(c[1]) / rm.n};
            // coordinates along the two edges leaving v
            const int c1 = (corner + 1) % 3, c2 = (corner + 2) % 3;
            const double s = lb[c1], w = lb[c2];
            st.pos[k] = {s + 0.5 * w, s60 * w};
        }
        star.push_back(st);
    }

    for (double r : radii) {
        if (!(r > 0.0) || r > kStarInradius + 1e-12)
            throw DomainError("order-estimate radius outside the vertex star");
        OrderSample smp;
        smp.radius = r;
        // ball energy
        for (const auto& st : star) {
            int inside = 0;
            for (int i = 0; i < subgrid; ++i)
                for (int j = 0; i + j < subgrid; ++j)
                    for (int up = 0; up < 2; ++up) {
                        if (up && i + j + 1 >= subgrid)
                            continue;
                        // centroid of the sub-triangle in barycentric grid units
                        const double bi = up ? i + 2.0 / 3.0 : i + 1.0 / 3.0;
                        const double bj = up ? j + 2.0 / 3.0 : j + 1.0 / 3.0;
                        const double l1 = bi / subgrid, l2 = bj / subgrid, l0 = 1.0 - l1 - l2;
                        const double x = l0 * st.pos[0][0] + l1 * st.pos[1][0] + l2 * st.pos[2][0];
                        const double y = l0 * st.pos[0][1] + l1 * st.pos[1][1] + l2 * st.pos[2][1];
                        inside += x * x + y * y <= r * r;
                    }
            smp.ball_energy += st.density * area * inside / double(subgrid * subgrid);
        }
        // boundary integral, 60-degree arc per incident cell
        for (int cell : base.vertex_triangles(v)) {
            const int corner = detail::corner_of(base, cell, v);
            const int c1 = (corner + 1) % 3, c2 = (corner + 2) % 3;
            const double dtheta = (std::numbers::pi / 3.0) / arc_samples;
            for (int k = 0; k < arc_samples; ++k) {
                const double th = (k + 0.5) * dtheta;
                const double s = r * std::sin(std::numbers::pi / 3.0 - th) / s60;
                const double w = r * std::sin(th) / s60;
                std::array<double, 3> bary{};
                bary[corner] = 1.0 - s - w;
                bary[c1] = s;
                bary[c2] = w;
                const auto lc = detail::lattice_coords(rm.n, bary);
                const Mat xi = detail::interpolate_in_cell(rm, cell, lc[0], lc[1], lifted_log);
                const double d = frob(xi);
                smp.boundary_integral += d * d * r * dtheta;
            }
        }
        const double scale = std::max(1.0, smp.ball_energy);
        if (smp.boundary_integral <= 1e-24 * scale || smp.ball_energy <= 1e-24) {
            smp.degenerate = true;
        } else {
            smp.alpha = r * smp.ball_energy / smp.boundary_integral;
        }
        prof.samples.push_back(smp);
    }
    return prof;
}

}  // namespace cellhiggs
