// Acceptance run: one PASS/FAIL line per criterion.  Thresholds are the
// published ones; nothing here is tuned to make a line pass.  The exit code
// is 0 whenever every check ran to completion, so a FAIL line is a result,
// not a crash.

#include <chrono>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "cellhiggs/pipeline.hpp"
#include "oracles.hpp"

using namespace cellhiggs;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

int failures = 0;

void verdict(int id, bool pass, const std::string& what, const std::string& detail)
{
    std::printf("criterion %2d: %s  %s | %s\n", id, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

struct Solved
{
    EquivariantMap map;
    SolveDiagnostics diag;
    double seconds = 0.0;
};

// solves are shared between criteria; the key includes the seed
std::map<std::tuple<std::string, int, std::uint64_t>, Solved> cache;

const Solved& solve(const std::string& name, int k, std::optional<std::uint64_t> seed = std::nullopt)
{
    const auto key = std::make_tuple(name, k, seed ? *seed + 1 : 0);
    if (auto it = cache.find(key); it != cache.end())
        return it->second;
    const auto fc = fixture_case(name);
    SolveOptions opts;
    opts.tol = 1e-10;
    opts.seed = seed;
    const auto t0 = Clock::now();
    auto [map, diag] = solve_harmonic(subdivide(fc.fixture.mesh, k), fc.presentation, fc.rep, opts);
    Solved s{std::move(map), std::move(diag), seconds_since(t0)};
    return cache.emplace(key, std::move(s)).first->second;
}

double max_of(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v)
        m = std::max(m, x);
    return m;
}

// ---------------------------------------------------------------------------

void criterion1()
{
    const auto t0 = Clock::now();
    const auto fc = fixture_case("torus_unitary");
    const auto& s = solve("torus_unitary", 2);
    const auto hp = extract_higgs_pair(s.map);
    const auto res = hitchin_residuals(hp);
    const auto hol = holonomy_rep(hp, fc.presentation);
    const auto rt = roundtrip_check(fc.rep, hol.rep, 4, 1e-8);
    const double secs = seconds_since(t0);
    const double mu = std::max({res.mu1.max, res.mu2.max, res.mu3.max});
    const bool pass = s.diag.final_energy <= 1e-12 && mu <= 1e-10 && rt.pass && secs < 1.0;
    verdict(1, pass, "unitary torus gives the constant map",
            "E=" + sci(s.diag.final_energy) + " (<=1e-12), max mu=" + sci(mu) + " (<=1e-10), fingerprint=" +
                sci(rt.max_deviation) + " (<=1e-8, words<=4), time=" + sci(secs) + "s (<1)");
}

void criterion2()
{
    const auto t0 = Clock::now();
    const auto fc = fixture_case("torus_abelian");
    const auto& s = solve("torus_abelian", 2);
    const auto f = oracle::scalar_potential(s.map);
    double vertex = 0.0;
    const double s0 = std::log(s.map.values[0](0, 0).real());
    for (std::size_t p = 0; p < s.map.values.size(); ++p) {
        vertex = std::max(vertex, std::abs(std::log(s.map.values[p](0, 0).real()) - s0 - f(p)));
        vertex = std::max(vertex, std::abs(s.map.values[p](0, 1)));
    }
    const auto hp = extract_higgs_pair(s.map);
    double psi = 0.0;
    const auto& fine = hp.mesh.mesh;
    for (int e = 0; e < fine.edge_count(); ++e) {
        const int p = fine.edge(e)[0], q = fine.edge(e)[1];
        const double jump = oracle::scalar_jump(s.map, f, p, q);
        Mat expect = Mat::Zero(2, 2);
        expect(0, 0) = 0.5 * jump;
        expect(1, 1) = -0.5 * jump;
        psi = std::max(psi, frob(hp.psi(p, q) - expect));
    }
    const auto res = hitchin_residuals(hp);
    const double mu = std::max({res.mu1.max, res.mu2.max, res.mu3.max});
    const auto hol = holonomy_rep(hp, fc.presentation);
    const auto rt = roundtrip_check(fc.rep, hol.rep, 4, 1e-6);
    const double secs = seconds_since(t0);
    const bool pass = vertex <= 1e-6 && psi <= 1e-8 && mu <= 1e-8 && rt.pass && secs < 30.0;
    verdict(2, pass, "abelian torus matches the closed form at k=2",
            "vertex=" + sci(vertex) + " (<=1e-6), psi=" + sci(psi) + " (<=1e-8), max mu=" + sci(mu) +
                " (<=1e-8), fingerprint=" + sci(rt.max_deviation) + " (<=1e-6, words<=4), time=" + sci(secs) +
                "s (<30)");
}

void criterion3()
{
    const auto fc = fixture_case("genus2_irreducible");
    double dist[4] = {0, 0, 0, 0}, secs[4] = {0, 0, 0, 0};
    double vertex_sampled[4] = {0, 0, 0, 0};
    for (int k : {2, 3}) {
        const auto t0 = Clock::now();
        const auto& s = solve("genus2_irreducible", k);
        const auto hp = extract_higgs_pair(s.map);
        const auto hol = holonomy_rep(hp, fc.presentation);
        dist[k] = roundtrip_check(fc.rep, hol.rep, 2, 1e-2).max_deviation;
        secs[k] = s.seconds + seconds_since(t0);
        const auto smooth = holonomy_rep(hp, fc.presentation, TransportMethod::ode_vertex);
        vertex_sampled[k] = roundtrip_check(fc.rep, smooth.rep, 2, 1e-2).max_deviation;
    }
    const bool small = dist[3] <= 1e-2;
    const bool decreasing = dist[3] <= 0.7 * dist[2];
    const bool pass = small && decreasing && secs[3] <= 600.0;
    // the default ode backend integrates the Whitney form of the edge cochain,
    // so both distances sit at round-off and the decrease clause compares noise
    const std::string floor = dist[2] < 1e-9 ? " [round-off level; the decrease compares noise]" : "";
    verdict(3, pass, "genus-2 round trip",
            "fingerprint k=2 " + sci(dist[2]) + ", k=3 " + sci(dist[3]) + " (<=1e-2: " + (small ? "yes" : "no") +
                "; >=30% decrease: " + (decreasing ? "yes" : "no") + "), time k=3 " + sci(secs[3]) +
                "s (<=600); vertex-sampled transport k=2 " + sci(vertex_sampled[2]) + ", k=3 " +
                sci(vertex_sampled[3]) + floor);
}

void criterion4()
{
    // the cochain backends are flat by construction; the vertex-sampled
    // transport is the one that sees the smooth connection
    bool pass = true;
    std::string detail;
    for (const auto& name : case_names()) {
        const auto& s = solve(name, 3);
        const auto hp = extract_higgs_pair(s.map);
        const Transporter tr(hp);
        double dev = 0.0, cochain = 0.0;
        for (int v = 0; v < hp.mesh.base.vertex_count(); ++v) {
            dev = std::max(dev, vertex_loop_holonomy(tr, v, 0.5, TransportMethod::ode_vertex).max_deviation);
            cochain = std::max(cochain, vertex_loop_holonomy(tr, v, 0.5, TransportMethod::ode).max_deviation);
        }
        pass = pass && dev <= 1e-3;
        detail += name + " " + sci(dev) + " (ode " + sci(cochain) + "); ";
    }
    double g[4] = {0, 0, 0, 0};
    for (int k : {1, 2, 3}) {
        const auto hp = extract_higgs_pair(solve("genus2_irreducible", k).map);
        const Transporter tr(hp);
        for (int v = 0; v < hp.mesh.base.vertex_count(); ++v)
            g[k] = std::max(g[k], vertex_loop_holonomy(tr, v, 0.5, TransportMethod::ode_vertex).max_deviation);
    }
    const double c12 = g[2] / g[1], c23 = g[3] / g[2];
    pass = pass && c12 <= 0.7 && c23 <= 0.7;
    verdict(4, pass, "vertex loops (<=1e-3 at k=3, genus-2 contraction <=0.7)",
            detail + "genus-2 contraction " + sci(c12) + ", " + sci(c23));
}

void criterion5()
{
    bool pass = true;
    std::string detail;
    for (const auto& name : case_names()) {
        detail += name;
        for (int k : {1, 2, 3}) {
            const double b = max_of(solve(name, k).diag.balancing);
            pass = pass && b <= 1e-9;
            detail += " k" + std::to_string(k) + "=" + sci(b);
        }
        detail += "; ";
    }
    verdict(5, pass, "balancing residual <=1e-9 at tol 1e-10 on every base edge", detail);
}

void criterion6()
{
    std::mt19937 rng(2024);
    int violations = 0;
    double roundtrip = 0.0, isometry = 0.0;
    for (int r : {2, 3})
        for (int i = 0; i < 1000; ++i) {
            auto point = [&] { return exp_at(identity(r), oracle::random_traceless(rng, r, true, 0.7)); };
            const SymPoint a = point(), b = point(), x = point();
            const SymPoint m = midpoint(a, b);
            const double lhs = distance_squared(m, x);
            const double rhs = 0.5 * distance_squared(a, x) + 0.5 * distance_squared(b, x) - 0.25 * distance_squared(a, b);
            violations += lhs > rhs + 1e-9;
            roundtrip = std::max(roundtrip, frob(exp_at(a, log_at(a, b)) - b));
            const Mat g = oracle::random_positive_sl(rng, r, 0.5) * oracle::random_su(rng, r);
            isometry = std::max(isometry, std::abs(distance(act(g, a), act(g, b)) - distance(a, b)));
        }
    const bool pass = violations == 0 && roundtrip <= 1e-9 && isometry <= 1e-9;
    verdict(6, pass, "NPC geometry on 1000 triples in ranks 2 and 3",
            "semiparallelogram violations=" + std::to_string(violations) + ", exp/log=" + sci(roundtrip) +
                ", isometry=" + sci(isometry) + " (<=1e-9)");
}

void criterion7()
{
    const auto& a = solve("genus2_irreducible", 2, 1);
    const auto& b = solve("genus2_irreducible", 2, 2);
    double sup = 0.0;
    for (std::size_t i = 0; i < a.map.values.size(); ++i)
        sup = std::max(sup, distance(a.map.values[i], b.map.values[i]));
    verdict(7, sup <= 1e-4, "two seeded starts on genus 2 (k=2) agree", "sup distance=" + sci(sup) + " (<=1e-4)");
}

/// ODE holonomy with steps doubled until the step-doubling estimate is below target.
HolonomyRepresentation accurate_holonomy(const HiggsPair& hp, const Presentation& pres, int* steps)
{
    *steps = 64;
    auto h = holonomy_rep(hp, pres, TransportMethod::ode, *steps);
    while (h.max_step_doubling_error > 1e-9 && *steps < 8192) {
        *steps *= 2;
        h = holonomy_rep(hp, pres, TransportMethod::ode, *steps);
    }
    return h;
}

void criterion8()
{
    const auto fc = fixture_case("genus2_irreducible");
    const auto hp = extract_higgs_pair(solve("genus2_irreducible", 2).map);
    const int nv = hp.mesh.mesh.vertex_count();
    std::mt19937 rng(8);
    std::vector<Mat> unitary, positive;
    for (int p = 0; p < nv; ++p)
        unitary.push_back(oracle::random_su(rng, 2));
    for (int p = 0; p < nv; ++p)
        positive.push_back(oracle::random_positive_sl(rng, 2, 0.3));

    const auto r0 = hitchin_residuals(hp);
    const auto gu = apply_gauge(hp, unitary);
    const auto r1 = hitchin_residuals(gu);
    double dres = 0.0;
    for (auto [x, y] : {std::pair{r0.mu1, r1.mu1}, std::pair{r0.mu2, r1.mu2}, std::pair{r0.mu3, r1.mu3}})
        dres = std::max({dres, std::abs(x.max - y.max), std::abs(x.l2 - y.l2)});

    int s0 = 0, s1 = 0;
    const auto h0 = accurate_holonomy(hp, fc.presentation, &s0);
    const auto h1 = accurate_holonomy(gu, fc.presentation, &s1);
    const double dfp = roundtrip_check(h0.rep, h1.rep, 2, 1e-6).max_deviation;
    const auto d64 = roundtrip_check(holonomy_rep(hp, fc.presentation).rep,
                                     holonomy_rep(gu, fc.presentation).rep, 2, 1e-6)
                         .max_deviation;

    const double mu3 = hitchin_residuals(apply_gauge(hp, positive)).mu3.max;
    const double ratio = mu3 / r0.mu3.max;
    const bool pass = dres <= 1e-6 && dfp <= 1e-6 && ratio >= 10.0;
    verdict(8, pass, "gauge covariance on genus 2 (k=2)",
            "unitary: residual change=" + sci(dres) + ", fingerprint change=" + sci(dfp) + " (<=1e-6, " +
                std::to_string(std::max(s0, s1)) + " steps/edge; " + sci(d64) +
                " at 64); non-unitary mu3 ratio=" + sci(ratio) + " (>=10)");
}

void criterion9()
{
    const auto& fine = solve("torus_abelian", 3);
    double alpha_est = std::numeric_limits<double>::infinity(), worst_alpha = 0.0;
    std::string lambdas;
    for (int v = 0; v < fine.map.mesh.base.vertex_count(); ++v) {
        const auto prof = order_estimate(fine.map, v, default_order_radii());
        for (const auto& s : prof.samples)
            worst_alpha = std::max(worst_alpha, s.degenerate ? 1e300 : std::abs(s.alpha - 1.0));
        if (!prof.samples.front().degenerate)
            alpha_est = std::min(alpha_est, prof.samples.front().alpha);
        lambdas += (lambdas.empty() ? "" : ",") + sci(prof.two_lambda_comb);
    }
    bool bounded = true;
    std::string detail;
    for (double delta : {0.0, 0.5 * alpha_est}) {
        double lo = 1e300, hi = 0.0;
        detail += "delta=" + sci(delta) + ":";
        for (int k : {1, 2, 3}) {
            const double n = weighted_norm(extract_higgs_pair(solve("torus_abelian", k).map), delta).l2_1_delta;
            lo = std::min(lo, n);
            hi = std::max(hi, n);
            detail += " " + sci(n);
        }
        bounded = bounded && hi <= 1.05 * lo;
        detail += "; ";
    }
    const bool pass = bounded && worst_alpha <= 0.1;
    verdict(9, pass, "weighted norms on the abelian torus (k=1..3)",
            detail + "alpha_est=" + sci(alpha_est) + ", max |alpha(r)-1|=" + sci(worst_alpha) +
                " (<=0.1), 2*lambda_comb per vertex=" + lambdas);
}

void criterion10()
{
    const std::string dir = CELLHIGGS_FIXTURE_DIR;
    bool pass = true;
    std::string differing;
    for (const auto& command : command_names()) {
        RunConfig cfg;
        cfg.command = command;
        cfg.complex_path = dir + "/torus.complex";
        cfg.rep_path = dir + "/torus_abelian.rep";
        cfg.fixture = "torus_abelian";
        cfg.refine = 1;
        cfg.solver.seed = 5;
        cfg.threads = 2;
        std::string text[2];
        for (auto& t : text) {
            if (command == "fixture") {
                cfg.out_dir = (std::filesystem::temp_directory_path() / "cellhiggs_acceptance_fixture").string();
                std::ostringstream out, err;
                run(cfg, out, err);
                t = read_text_file(cfg.out_dir + "/report.txt") + read_text_file(cfg.out_dir + "/torus_abelian.rep");
            } else {
                std::ostringstream out, err;
                const int code = run(cfg, out, err);
                t = std::to_string(code) + out.str() + err.str();
            }
        }
        if (text[0] != text[1] || text[0].empty()) {
            pass = false;
            differing += command + " ";
        }
    }
    verdict(10, pass, "every subcommand is byte-identical across two runs",
            pass ? std::to_string(command_names().size()) + " subcommands compared" : "differs: " + differing);
}

}  // namespace

int main()
{
    const auto t0 = Clock::now();
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    std::printf("summary: %d of 10 criteria pass, %.1fs\n", 10 - failures, seconds_since(t0));
    return 0;
}
