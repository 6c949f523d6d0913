/**
 * Command orchestration behind the command-line tool: configuration,
 * subcommands, deterministic reports and plot tables.
 *
 * A report is a list of `key = value` lines in insertion order followed by
 * tab-separated tables.  Nothing time- or environment-dependent goes in, so
 * identical configurations give byte-identical files.
 */
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cellhiggs/complex_core.hpp"
#include "cellhiggs/error.hpp"
#include "cellhiggs/fixtures.hpp"
#include "cellhiggs/group_rep.hpp"
#include "cellhiggs/harmonic_solver.hpp"
#include "cellhiggs/higgs_field.hpp"
#include "cellhiggs/holonomy.hpp"

namespace cellhiggs {

inline constexpr int kMaxRefine = 5;

struct RunConfig
{
    std::string command;
    std::string complex_path;
    std::string rep_path;
    std::string fixture;  // name for the `fixture` command
    int refine = 1;
    SolveOptions solver;
    std::vector<double> deltas{0.0, 0.5};
    int steps_per_edge = 64;
    int maxlen = 2;
    std::string transport = "ode";
    std::string out_dir;
    int threads = 1;
};

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"validate", "presentation", "spectrum", "solve",  "extract",
                                                "holonomy", "roundtrip",    "report",   "fixture"};
    return names;
}

/// Throws ConfigError on any out-of-range option or missing input file.
inline void validate_config(const RunConfig& cfg)
{
    if (std::find(command_names().begin(), command_names().end(), cfg.command) == command_names().end())
        throw ConfigError("unknown command '" + cfg.command + "'");
    if (cfg.refine < 0 || cfg.refine > kMaxRefine)
        throw ConfigError("refinement level must lie in [0, " + std::to_string(kMaxRefine) + "]");
    if (!(cfg.solver.tol > 0.0) || !std::isfinite(cfg.solver.tol))
        throw ConfigError("tolerance must be positive");
    if (cfg.solver.max_sweeps < 1)
        throw ConfigError("max sweeps must be at least 1");
    if (cfg.steps_per_edge < 1)
        throw ConfigError("steps per edge must be at least 1");
    if (cfg.maxlen < 1)
        throw ConfigError("maxlen must be at least 1");
    if (cfg.threads < 1)
        throw ConfigError("threads must be at least 1");
    for (double d : cfg.deltas)
        if (!(d >= 0.0) || !std::isfinite(d))
            throw ConfigError("weights need delta >= 0");
    parse_method(cfg.transport);

    if (cfg.command == "fixture") {
        if (cfg.fixture.empty())
            throw ConfigError("fixture needs a name: one of " + [] {
                std::string s;
                for (const auto& n : case_names())
                    s += (s.empty() ? "" : ", ") + n;
                return s;
            }());
        if (cfg.out_dir.empty())
            throw ConfigError("fixture needs --out");
        return;
    }
    auto need = [&](const std::string& path, const char* flag) {
        if (path.empty())
            throw ConfigError(std::string("missing ") + flag);
        if (!std::filesystem::is_regular_file(path))
            throw ConfigError(std::string(flag) + " file '" + path + "' does not exist");
    };
    need(cfg.complex_path, "--complex");
    if (cfg.command != "validate" && cfg.command != "presentation" && cfg.command != "spectrum")
        need(cfg.rep_path, "--rep");
}

// ---------------------------------------------------------------------------
// Reports

inline std::string fmt(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    return format_real(x);
}

struct Table
{
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

    std::string tsv() const
    {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i)
                out += (i ? "\t" : "") + cells[i];
            out += '\n';
        };
        line(columns);
        for (const auto& r : rows)
            line(r);
        return out;
    }
};

class Report
{
  public:
    void set(const std::string& key, const std::string& value)
    {
        for (auto& kv : keys_)
            if (kv.first == key) {
                kv.second = value;
                return;
            }
        keys_.emplace_back(key, value);
    }
    void set(const std::string& key, double v) { set(key, fmt(v)); }
    void set(const std::string& key, int v) { set(key, std::to_string(v)); }
    void set(const std::string& key, bool v) { set(key, std::string(v ? "true" : "false")); }
    void set(const std::string& key, const char* v) { set(key, std::string(v)); }

    Table& table(const std::string& name, std::vector<std::string> columns)
    {
        tables_.push_back({name, std::move(columns), {}});
        return tables_.back();
    }

    const std::string* get(const std::string& key) const
    {
        for (const auto& kv : keys_)
            if (kv.first == key)
                return &kv.second;
        return nullptr;
    }

    const std::vector<Table>& tables() const { return tables_; }
    bool empty() const { return keys_.empty() && tables_.empty(); }

    std::string text() const
    {
        std::string out = "# cellhiggs report\n";
        for (const auto& [k, v] : keys_)
            out += k + " = " + v + "\n";
        for (const auto& t : tables_)
            out += "\n[" + t.name + "]\n" + t.tsv();
        return out;
    }

  private:
    std::vector<std::pair<std::string, std::string>> keys_;
    std::vector<Table> tables_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text) || !f.flush())
        throw ConfigError("cannot write '" + path.string() + "'");
}

/// Writes report.txt and one <table>.tsv per table into dir.
inline void emit_report(const Report& report, const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    write_file(std::filesystem::path(dir) / "report.txt", report.text());
    for (const auto& t : report.tables())
        write_file(std::filesystem::path(dir) / (t.name + ".tsv"), t.tsv());
}

// ---------------------------------------------------------------------------
// Stages

struct Inputs
{
    ComplexMesh mesh;
    Presentation pres;
    Representation rep;
};

namespace stage {

inline bool validate(const ComplexMesh& mesh, Report& rep)
{
    const auto adm = validate_admissible(mesh);
    rep.set("complex.vertices", mesh.vertex_count());
    rep.set("complex.edges", mesh.edge_count());
    rep.set("complex.triangles", mesh.triangle_count());
    rep.set("complex.admissible", adm.pass);
    rep.set("complex.failures", static_cast<int>(adm.failures.size()));
    auto& t = rep.table("admissibility", {"condition", "cell", "detail"});
    for (const auto& f : adm.failures) {
        std::string cell;
        for (VertexId v : f.cell)
            cell += (cell.empty() ? "" : ",") + std::to_string(v);
        t.add({f.condition, cell, f.detail});
    }
    return adm.pass;
}

inline void presentation(const ComplexMesh& mesh, const Presentation& pres, Report& rep)
{
    rep.set("presentation.basepoint", static_cast<int>(mesh.id(pres.basepoint)));
    rep.set("presentation.generators", pres.generator_count());
    rep.set("presentation.relators", static_cast<int>(pres.relators.size()));
    rep.set("presentation.first_betti", first_betti_number(pres));
    auto& g = rep.table("generators", {"generator", "edge", "from", "to"});
    for (int i = 0; i < pres.generator_count(); ++i) {
        const auto& e = mesh.edge(pres.generator_edge[i]);
        g.add({std::to_string(i), std::to_string(pres.generator_edge[i]), std::to_string(mesh.id(e[0])),
               std::to_string(mesh.id(e[1]))});
    }
    auto& r = rep.table("relators", {"relator", "word"});
    for (std::size_t i = 0; i < pres.relators.size(); ++i)
        r.add({std::to_string(i), word_to_string(pres.relators[i])});
}

inline double spectrum(const ComplexMesh& mesh, Report& rep)
{
    auto& t = rep.table("link_spectrum", {"vertex", "components", "zero_multiplicity", "lambda_comb", "eigenvalues"});
    double lam = std::numeric_limits<double>::infinity();
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        const auto s = link_spectrum(vertex_link(mesh, v));
        std::string ev;
        for (double x : s.eigenvalues)
            ev += (ev.empty() ? "" : ",") + fmt(x);
        t.add({std::to_string(mesh.id(v)), std::to_string(s.component_spectra.size()),
               std::to_string(s.zero_multiplicity), fmt(s.lambda_comb), ev});
        lam = std::min(lam, s.lambda_comb);
    }
    rep.set("lambda.comb", lam);
    return lam;
}

inline std::string map_text(const EquivariantMap& map)
{
    std::ostringstream out;
    for (std::size_t p = 0; p < map.values.size(); ++p) {
        out << "V " << p << "\n";
        write_matrix(out, map.values[p]);
    }
    return out.str();
}

inline EquivariantMap solve(const Inputs& in, const RunConfig& cfg, Report& rep, bool tables = true)
{
    auto [map, diag] = solve_harmonic(subdivide(in.mesh, cfg.refine), in.pres, in.rep, cfg.solver);
    rep.set("refine", cfg.refine);
    rep.set("refined.vertices", map.mesh.mesh.vertex_count());
    rep.set("refined.triangles", map.mesh.mesh.triangle_count());
    rep.set("solver.tol", cfg.solver.tol);
    rep.set("solver.max_sweeps", cfg.solver.max_sweeps);
    rep.set("solver.seed", cfg.solver.seed ? std::to_string(*cfg.solver.seed) : std::string("none"));
    rep.set("solver.sweeps", diag.sweeps);
    rep.set("solver.converged", diag.converged);
    rep.set("solver.rejected_updates", diag.rejected_updates);
    rep.set("solver.gradient_norm", diag.final_gradient_norm);
    rep.set("energy.initial", diag.energy_trace.front());
    rep.set("energy.final", diag.final_energy);
    double bal = 0.0;
    for (double b : diag.balancing)
        bal = std::max(bal, b);
    rep.set("balancing.max", bal);
    if (tables) {
        auto& et = rep.table("energy_trace", {"sweep", "energy", "movement"});
        for (std::size_t i = 0; i < diag.energy_trace.size(); ++i)
            et.add({std::to_string(i), fmt(diag.energy_trace[i]),
                    i == 0 ? std::string("nan") : fmt(diag.movement_trace[i - 1])});
        auto& bt = rep.table("balancing", {"edge", "from", "to", "incident_triangles", "residual"});
        for (int e = 0; e < in.mesh.edge_count(); ++e) {
            const auto& ed = in.mesh.edge(e);
            bt.add({std::to_string(e), std::to_string(in.mesh.id(ed[0])), std::to_string(in.mesh.id(ed[1])),
                    std::to_string(in.mesh.edge_triangles(e).size()), fmt(diag.balancing[e])});
        }
    }
    return std::move(map);
}

inline HitchinResiduals residuals(const HiggsPair& hp, Report& rep)
{
    const auto res = hitchin_residuals(hp);
    rep.set("residual.mu1", res.mu1.l2);
    rep.set("residual.mu2", res.mu2.l2);
    rep.set("residual.mu3", res.mu3.l2);
    rep.set("residual.mu1.max", res.mu1.max);
    rep.set("residual.mu2.max", res.mu2.max);
    rep.set("residual.mu3.max", res.mu3.max);
    return res;
}

inline void norms(const HiggsPair& hp, const std::vector<double>& deltas, Report& rep)
{
    auto& t = rep.table("weighted_norms", {"delta", "l2", "l2_1", "conn_l2_1"});
    for (double d : deltas) {
        const auto n = weighted_norm(hp, d);
        const std::string k = "norm.delta." + fmt(d);
        rep.set(k + ".l2", n.l2_delta);
        rep.set(k + ".l2_1", n.l2_1_delta);
        rep.set(k + ".conn_l2_1", n.conn_l2_1_delta);
        t.add({fmt(d), fmt(n.l2_delta), fmt(n.l2_1_delta), fmt(n.conn_l2_1_delta)});
    }
}

inline HolonomyRepresentation holonomy(const HiggsPair& hp, const Presentation& pres, const RunConfig& cfg,
                                       Report& rep)
{
    const auto method = parse_method(cfg.transport);
    const Transporter tr(hp);
    auto hol = holonomy_rep(hp, pres, method, cfg.steps_per_edge, cfg.threads);
    rep.set("holonomy.method", method_name(method));
    rep.set("holonomy.steps_per_edge", cfg.steps_per_edge);
    rep.set("holonomy.relator_residual.max", hol.rep.max_relator_residual());
    rep.set("holonomy.step_doubling_error.max", hol.max_step_doubling_error);
    rep.set("holonomy.det_deviation.max", hol.max_det_deviation);
    auto& rt = rep.table("relator_residuals", {"relator", "residual"});
    for (std::size_t i = 0; i < hol.rep.relator_residuals.size(); ++i)
        rt.add({std::to_string(i), fmt(hol.rep.relator_residuals[i])});

    // vertex loops: the cochain backends are flat by construction, the
    // vertex-sampled one measures the smooth connection
    auto& vt = rep.table("vertex_loops", {"vertex", "loops", "deviation", "deviation_ode_vertex"});
    double dev = 0.0, smooth = 0.0;
    for (int v = 0; v < hp.mesh.base.vertex_count(); ++v) {
        const auto a = vertex_loop_holonomy(tr, v, 0.5, method, cfg.steps_per_edge);
        const auto b = vertex_loop_holonomy(tr, v, 0.5, TransportMethod::ode_vertex, cfg.steps_per_edge);
        dev = std::max(dev, a.max_deviation);
        smooth = std::max(smooth, b.max_deviation);
        vt.add({std::to_string(hp.mesh.base.id(v)), std::to_string(a.loops.size()), fmt(a.max_deviation),
                fmt(b.max_deviation)});
    }
    rep.set("vertex_loop.max_deviation", dev);
    rep.set("vertex_loop.max_deviation.ode_vertex", smooth);
    return hol;
}

inline RoundTripReport roundtrip(const Representation& in, const Representation& out, const RunConfig& cfg,
                                 Report& rep)
{
    const auto rt = roundtrip_check(in, out, cfg.maxlen, std::numeric_limits<double>::infinity(), cfg.threads);
    rep.set("fingerprint.maxlen", cfg.maxlen);
    rep.set("fingerprint.distance", rt.max_deviation);
    rep.set("fingerprint.worst_word", rt.worst_word.empty() ? std::string("e") : rt.worst_word);
    return rt;
}

/// Order profile at every base vertex; alpha.estimate is the smallest radius sample, minimised over vertices.
inline void orders(const EquivariantMap& map, Report& rep)
{
    auto& t = rep.table("alpha_profile", {"vertex", "radius", "alpha", "degenerate", "two_lambda_comb"});
    double alpha = std::numeric_limits<double>::infinity();
    for (int v = 0; v < map.mesh.base.vertex_count(); ++v) {
        const auto prof = order_estimate(map, v, default_order_radii());
        bool first = true;
        for (const auto& s : prof.samples) {
            t.add({std::to_string(map.mesh.base.id(v)), fmt(s.radius), fmt(s.alpha), s.degenerate ? "1" : "0",
                   fmt(prof.two_lambda_comb)});
            if (first && !s.degenerate)
                alpha = std::min(alpha, s.alpha);
            first = false;
        }
    }
    rep.set("alpha.estimate", std::isfinite(alpha) ? alpha : std::numeric_limits<double>::quiet_NaN());
}

}  // namespace stage

inline Inputs load_inputs(const RunConfig& cfg, bool need_rep)
{
    Inputs in;
    in.mesh = read_complex_file(cfg.complex_path);
    const auto adm = validate_admissible(in.mesh);
    if (!adm.pass)
        throw DomainError("complex is not admissible: " + adm.failures.front().condition + " (" +
                          adm.failures.front().detail + ")");
    in.pres = edge_presentation(in.mesh, 0);
    if (need_rep)
        in.rep = load_representation(read_text_file(cfg.rep_path), in.pres);
    return in;
}

// ---------------------------------------------------------------------------
// Entry point

inline std::string error_kind_name(ErrorKind k)
{
    switch (k) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Config: return "config";
    default: return "numeric";
    }
}

/// Machine-readable error record in the report's key = value syntax.
inline std::string error_record(const RunConfig& cfg, ErrorKind kind, std::string message)
{
    for (char& c : message)
        if (c == '\n' || c == '\r')
            c = ' ';
    std::ostringstream out;
    out << "# cellhiggs error\n"
        << "error.code = " << static_cast<int>(kind) << "\n"
        << "error.kind = " << error_kind_name(kind) << "\n"
        << "error.command = " << (cfg.command.empty() ? "none" : cfg.command) << "\n"
        << "error.message = " << message << "\n";
    return out.str();
}

/// Runs the subcommand without catching module errors; returns the report.
inline Report execute(const RunConfig& cfg, bool* admissible = nullptr)
{
    validate_config(cfg);
    Report rep;
    rep.set("command", cfg.command);
    const std::string& c = cfg.command;

    if (c == "fixture") {
        const auto fc = fixture_case(cfg.fixture);
        std::filesystem::create_directories(cfg.out_dir);
        const auto dir = std::filesystem::path(cfg.out_dir);
        write_file(dir / (fc.fixture.name + ".complex"), write_complex(fc.fixture.mesh, fc.fixture.name));
        write_file(dir / (fc.rep_name + ".rep"), save_representation(fc.rep));
        rep.set("fixture.complex", fc.fixture.name + ".complex");
        rep.set("fixture.rep", fc.rep_name + ".rep");
        return rep;
    }
    if (c == "validate") {
        const auto mesh = read_complex_file(cfg.complex_path);
        const bool ok = stage::validate(mesh, rep);
        if (admissible)
            *admissible = ok;
        return rep;
    }

    const bool need_rep = c != "presentation" && c != "spectrum";
    const Inputs in = load_inputs(cfg, need_rep);
    if (c == "presentation") {
        stage::presentation(in.mesh, in.pres, rep);
        return rep;
    }
    if (c == "spectrum") {
        stage::spectrum(in.mesh, rep);
        return rep;
    }

    rep.set("representation.rank", in.rep.rank);
    rep.set("representation.relator_residual.max", in.rep.max_relator_residual());
    const auto out = std::filesystem::path(cfg.out_dir);
    const auto map = stage::solve(in, cfg, rep);
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(out);
        write_file(out / "map.txt", stage::map_text(map));
    }
    if (c == "solve")
        return rep;

    const auto hp = extract_higgs_pair(map);
    stage::residuals(hp, rep);
    if (c == "extract" || c == "report")
        stage::norms(hp, cfg.deltas, rep);
    if (c == "extract") {
        if (!cfg.out_dir.empty()) {
            std::ostringstream dump;
            write_higgs_pair(dump, hp);
            write_file(out / "higgs.txt", dump.str());
        }
        return rep;
    }

    const auto hol = stage::holonomy(hp, in.pres, cfg, rep);
    if (!cfg.out_dir.empty())
        write_file(out / "holonomy.rep", save_representation(hol.rep));
    if (c == "holonomy")
        return rep;

    stage::roundtrip(in.rep, hol.rep, cfg, rep);
    if (c == "roundtrip")
        return rep;

    // report: everything above plus spectra, order profiles and a refinement sweep
    stage::spectrum(in.mesh, rep);
    stage::orders(map, rep);
    auto& rt = rep.table("residual_refinement", {"refine", "energy", "mu1", "mu2", "mu3", "fingerprint_distance"});
    for (int k = 0; k <= cfg.refine; ++k) {
        Report scratch;
        RunConfig level = cfg;
        level.refine = k;
        const auto m = k == cfg.refine ? map : stage::solve(in, level, scratch, false);
        const auto h = k == cfg.refine ? hp : extract_higgs_pair(m);
        const auto res = stage::residuals(h, scratch);
        const auto hk = holonomy_rep(h, in.pres, parse_method(cfg.transport), cfg.steps_per_edge, cfg.threads);
        const auto d = roundtrip_check(in.rep, hk.rep, cfg.maxlen, 0.0, cfg.threads).max_deviation;
        rt.add({std::to_string(k), fmt(assemble_energy(m)), fmt(res.mu1.l2), fmt(res.mu2.l2), fmt(res.mu3.l2),
                fmt(d)});
    }
    return rep;
}

/**
 * Runs one subcommand.  The report goes to <out>/report.txt (and tables to
 * .tsv files) when an output directory is set, otherwise to `out`.  Module
 * errors become an error record on `err` and the documented exit code.
 */
inline int run(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    auto fail = [&](ErrorKind kind, const std::string& what) {
        const auto rec = error_record(cfg, kind, what);
        err << rec;
        if (!cfg.out_dir.empty()) {
            try {
                std::filesystem::create_directories(cfg.out_dir);
                write_file(std::filesystem::path(cfg.out_dir) / "error.txt", rec);
            } catch (...) {
            }
        }
        return static_cast<int>(kind);
    };
    try {
        bool admissible = true;
        const Report rep = execute(cfg, &admissible);
        if (cfg.out_dir.empty())
            out << rep.text();
        else
            emit_report(rep, cfg.out_dir);
        if (!admissible)
            return fail(ErrorKind::Domain, "complex is not admissible");
        return 0;
    } catch (const Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(ErrorKind::Config, e.what());
    } catch (const std::exception& e) {
        return fail(ErrorKind::Numeric, e.what());
    }
}

}  // namespace cellhiggs
