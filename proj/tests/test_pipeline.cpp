#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "cellhiggs/pipeline.hpp"

using namespace cellhiggs;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = CELLHIGGS_FIXTURE_DIR;

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("cellhiggs_test_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig config(const std::string& command, const std::string& complex, const std::string& rep = {})
{
    RunConfig cfg;
    cfg.command = command;
    cfg.complex_path = (kFixtures / complex).string();
    if (!rep.empty())
        cfg.rep_path = (kFixtures / rep).string();
    return cfg;
}

struct Outcome
{
    int code;
    std::string out, err;
};

Outcome run_captured(const RunConfig& cfg)
{
    std::ostringstream out, err;
    const int code = run(cfg, out, err);
    return {code, out.str(), err.str()};
}

std::string value(const std::string& report, const std::string& key)
{
    std::istringstream in(report);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(key + " = ", 0) == 0)
            return line.substr(key.size() + 3);
    return {};
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

}  // namespace

TEST_CASE("roundtrip on the abelian torus")
{
    auto cfg = config("roundtrip", "torus.complex", "torus_abelian.rep");
    cfg.refine = 2;
    const auto r = run_captured(cfg);
    REQUIRE(r.code == 0);
    CHECK(std::stod(value(r.out, "fingerprint.distance")) <= 1e-4);
    CHECK(r.err.empty());
}

TEST_CASE("exit codes and error records")
{
    SECTION("boundary complex fails validation")
    {
        const auto dir = scratch("boundary");
        fs::create_directories(dir);
        const auto file = dir / "tri.complex";
        write_file(file, "v 1\nv 2\nv 3\nt 1 2 3\n");
        RunConfig cfg;
        cfg.command = "validate";
        cfg.complex_path = file.string();
        const auto r = run_captured(cfg);
        CHECK(r.code == 1);
        CHECK(value(r.out, "complex.admissible") == "false");
        CHECK(r.out.find("boundary") != std::string::npos);
        CHECK(value(r.err, "error.kind") == "domain");
    }
    SECTION("non-positive tolerance")
    {
        auto cfg = config("solve", "torus.complex", "torus_abelian.rep");
        cfg.solver.tol = 0.0;
        const auto r = run_captured(cfg);
        CHECK(r.code == 2);
        CHECK(value(r.err, "error.code") == "2");
        CHECK(value(r.err, "error.kind") == "config");
    }
    SECTION("refinement out of range")
    {
        auto cfg = config("solve", "torus.complex", "torus_abelian.rep");
        cfg.refine = 6;
        CHECK(run_captured(cfg).code == 2);
    }
    SECTION("missing file")
    {
        auto cfg = config("solve", "torus.complex", "no_such.rep");
        CHECK(run_captured(cfg).code == 2);
    }
    SECTION("representation that breaks a relator")
    {
        const auto dir = scratch("badrep");
        fs::create_directories(dir);
        auto text = slurp(kFixtures / "torus_abelian.rep");
        // perturb the first image
        text.replace(text.find("g 0\n1 0"), 7, "g 0\n2 0");
        write_file(dir / "bad.rep", text);
        auto cfg = config("solve", "torus.complex");
        cfg.rep_path = (dir / "bad.rep").string();
        const auto r = run_captured(cfg);
        CHECK(r.code != 0);
        CHECK(r.code != 3);
    }
    SECTION("unknown command")
    {
        auto cfg = config("frobnicate", "torus.complex");
        CHECK(run_captured(cfg).code == 2);
    }
    SECTION("error record lands in the output directory")
    {
        auto cfg = config("solve", "torus.complex", "torus_abelian.rep");
        cfg.solver.max_sweeps = 0;
        cfg.out_dir = scratch("errdir").string();
        CHECK(run_captured(cfg).code == 2);
        CHECK(value(slurp(fs::path(cfg.out_dir) / "error.txt"), "error.kind") == "config");
    }
}

TEST_CASE("reports are deterministic")
{
    for (const std::string command : {"validate", "presentation", "spectrum", "solve", "extract", "holonomy",
                                      "roundtrip", "report"}) {
        auto cfg = config(command, "torus.complex", "torus_abelian.rep");
        cfg.refine = 1;
        cfg.solver.seed = 7;
        cfg.threads = 2;
        const auto a = scratch("det_a"), b = scratch("det_b");
        cfg.out_dir = a.string();
        REQUIRE(run_captured(cfg).code == 0);
        cfg.out_dir = b.string();
        REQUIRE(run_captured(cfg).code == 0);
        for (const auto& entry : fs::directory_iterator(a)) {
            INFO(command << " " << entry.path().filename());
            CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
        }
    }
}

TEST_CASE("report schema")
{
    auto cfg = config("report", "torus.complex", "torus_abelian.rep");
    cfg.refine = 1;
    cfg.out_dir = scratch("schema").string();
    REQUIRE(run_captured(cfg).code == 0);
    const auto text = slurp(fs::path(cfg.out_dir) / "report.txt");
    for (const auto& key : {"energy.final", "residual.mu1", "residual.mu2", "residual.mu3", "alpha.estimate",
                            "lambda.comb", "fingerprint.distance"})
        CHECK_FALSE(value(text, key).empty());
    for (const auto& table : {"energy_trace", "alpha_profile", "residual_refinement"})
        CHECK(fs::exists(fs::path(cfg.out_dir) / (std::string(table) + ".tsv")));
    // linear abelian map: order one, and the triangular link has 2 lambda = 2
    CHECK(std::abs(std::stod(value(text, "alpha.estimate")) - 1.0) <= 0.1);
    CHECK(std::stod(value(text, "lambda.comb")) == Catch::Approx(1.0));
}

TEST_CASE("empty report is header only")
{
    CHECK(Report{}.text() == "# cellhiggs report\n");
}

TEST_CASE("fixture command writes loadable files")
{
    for (const auto& name : case_names()) {
        RunConfig cfg;
        cfg.command = "fixture";
        cfg.fixture = name;
        cfg.out_dir = scratch("fixture").string();
        REQUIRE(run_captured(cfg).code == 0);
        const auto fc = fixture_case(name);
        const auto dir = fs::path(cfg.out_dir);
        const auto mesh = read_complex_file((dir / (fc.fixture.name + ".complex")).string());
        const auto pres = edge_presentation(mesh, 0);
        const auto rep = load_representation(slurp(dir / (name + ".rep")), pres);
        CHECK(rep.generator_count() == fc.rep.generator_count());
        // the shipped copies match the generators
        CHECK(slurp(dir / (name + ".rep")) == slurp(kFixtures / (name + ".rep")));
        CHECK(slurp(dir / (fc.fixture.name + ".complex")) == slurp(kFixtures / (fc.fixture.name + ".complex")));
    }
}
