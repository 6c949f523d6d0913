#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cellhiggs/symmetric_space.hpp"

using namespace cellhiggs;
using Catch::Approx;

namespace {

struct Sampler
{
    std::mt19937_64 rng;
    std::normal_distribution<double> nd;

    explicit Sampler(std::uint64_t seed) : rng(seed) {}

    Mat gaussian(int r)
    {
        Mat m(r, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
                m(i, j) = cplx(nd(rng), nd(rng));
        return m;
    }

    /// Traceless Hermitian with Frobenius norm `scale`.
    SymTangent tangent(int r, double scale)
    {
        SymTangent x = tangent_part(gaussian(r));
        return x * (scale / frob(x));
    }

    SymPoint point(int r, double spread = 1.5)
    {
        std::uniform_real_distribution<double> u(0.0, spread);
        return exp_at(identity(r), tangent(r, u(rng)));
    }

    Mat unimodular(int r) { return unimodular_rescale(gaussian(r)); }
};

Mat diag2(double a, double b)
{
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

// Independent oracle: exp of a Hermitian matrix by its Taylor series.
Mat taylor_exp(const Mat& x)
{
    Mat term = identity(static_cast<int>(x.rows()));
    Mat sum = term;
    for (int k = 1; k < 80; ++k) {
        term = term * x / double(k);
        sum += term;
    }
    return sum;
}

}  // namespace

TEST_CASE("closed-form diagonal cases")
{
    const double e = std::exp(1.0);
    CHECK(frob(exp_at(identity(2), Mat::Zero(2, 2)) - identity(2)) == 0.0);
    CHECK(frob(exp_at(identity(2), diag2(1, -1)) - diag2(e, 1 / e)) <= 1e-14);
    CHECK(frob(log_at(identity(2), diag2(e * e, 1 / (e * e))) - diag2(2, -2)) <= 1e-14);
    CHECK(distance(identity(2), diag2(e * e, 1 / (e * e))) == Approx(2 * std::sqrt(2.0)).epsilon(1e-14));
    CHECK(frob(act(diag2(3, 1.0 / 3), identity(2)) - diag2(9, 1.0 / 9)) <= 1e-13);

    auto mean = karcher_mean({diag2(e, 1 / e), identity(2)}, {1, 1});
    CHECK(frob(mean - diag2(std::sqrt(e), 1 / std::sqrt(e))) <= 1e-12);
}

TEST_CASE("exp agrees with a Taylor-series oracle")
{
    Sampler s(1);
    for (int r : {2, 3})
        for (int k = 0; k < 20; ++k) {
            auto x = s.tangent(r, 2.0);
            CHECK(frob(exp_at(identity(r), x) - taylor_exp(x)) <= 1e-10 * frob(taylor_exp(x)));
        }
}

TEST_CASE("exp and log invert each other")
{
    Sampler s(2);
    for (int r : {2, 3})
        for (int k = 0; k < 100; ++k) {
            auto h = s.point(r);
            auto p = s.point(r);
            CHECK(frob(exp_at(h, log_at(h, p)) - p) <= 1e-9);
            CHECK(frob(log_at(h, h)) <= 1e-12);
            auto xi = s.tangent(r, 4.0 * std::uniform_real_distribution<double>(0, 1)(s.rng));
            CHECK(frob(log_at(h, exp_at(h, xi)) - xi) <= 1e-9);
            CHECK(frob(log_at(identity(r), p)) == Approx(distance(identity(r), p)).margin(1e-10));
        }
}

TEST_CASE("distance is symmetric and invariant under the action")
{
    Sampler s(3);
    for (int r : {2, 3})
        for (int k = 0; k < 100; ++k) {
            auto a = s.point(r);
            auto b = s.point(r);
            auto g = s.unimodular(r);
            CHECK(distance(a, b) == Approx(distance(b, a)).margin(1e-10));
            CHECK(std::abs(distance(act(g, a), act(g, b)) - distance(a, b)) <= 1e-9);
            CHECK(distance(a, a) <= 1e-12);
        }
}

TEST_CASE("action is associative and rejects non-unimodular matrices")
{
    Sampler s(4);
    for (int k = 0; k < 50; ++k) {
        auto g1 = s.unimodular(2);
        auto g2 = s.unimodular(2);
        auto h = s.point(2);
        CHECK(frob(act(g1 * g2, h) - act(g1, act(g2, h))) <= 1e-10 * frob(act(g1 * g2, h)));
        CHECK(frob(act(identity(2), h) - h) <= 1e-14);
    }
    CHECK_THROWS_AS(act(2.0 * identity(2), identity(2)), DomainError);
}

TEST_CASE("semiparallelogram law holds")
{
    Sampler s(5);
    int violations = 0;
    for (int r : {2, 3})
        for (int k = 0; k < 1000; ++k) {
            auto x = s.point(r), y = s.point(r), z = s.point(r);
            auto m = midpoint(x, y);
            const double lhs = distance_squared(m, z);
            const double rhs = 0.5 * distance_squared(x, z) + 0.5 * distance_squared(y, z) - 0.25 * distance_squared(x, y);
            violations += lhs - rhs > 1e-9;
        }
    CHECK(violations == 0);
}

TEST_CASE("geodesics stay unimodular and commuting points stay diagonal")
{
    Sampler s(6);
    for (int k = 0; k < 50; ++k) {
        auto a = s.point(3), b = s.point(3);
        for (double t : {0.0, 0.25, 0.5, 0.75, 1.0})
            CHECK(std::abs(det(geodesic(a, b, t)) - 1.0) <= 1e-10);
        CHECK(frob(geodesic(a, b, 0.0) - a) <= 1e-12);
        CHECK(frob(geodesic(a, b, 1.0) - b) <= 1e-9);
    }
    auto g = geodesic(diag2(2, 0.5), diag2(0.25, 4), 0.3);
    CHECK(std::abs(g(0, 1)) <= 1e-12);
    CHECK(std::abs(g(1, 0)) <= 1e-12);
}

TEST_CASE("Karcher mean beats random trial points")
{
    Sampler s(7);
    std::uniform_real_distribution<double> wd(0.2, 2.0);
    for (int inst = 0; inst < 20; ++inst) {
        std::vector<SymPoint> pts;
        std::vector<double> w;
        for (int i = 0; i < 5; ++i) {
            pts.push_back(s.point(2));
            w.push_back(wd(s.rng));
        }
        auto objective = [&](const SymPoint& x) {
            double f = 0.0;
            for (int i = 0; i < 5; ++i)
                f += w[i] * distance_squared(x, pts[i]);
            return f;
        };
        const auto mean = karcher_mean(pts, w);
        const double best = objective(mean);
        int worse = 0;
        for (int trial = 0; trial < 1000; ++trial)
            worse += objective(s.point(2, 2.0)) < best - 1e-12;
        CHECK(worse == 0);
    }
    CHECK(frob(karcher_mean({diag2(2, 0.5)}, {1.0}) - diag2(2, 0.5)) <= 1e-14);
    CHECK_THROWS_AS(karcher_mean({}, {}), DomainError);
    CHECK_THROWS_AS(karcher_mean({identity(2)}, {0.0}), DomainError);
}

TEST_CASE("drift control renormalizes small determinant errors only")
{
    Mat h = identity(2) * (1.0 + 1e-8);
    auto fixed = normalize_point(h);
    CHECK(std::abs(det(fixed) - 1.0) <= 1e-14);
    CHECK_THROWS_AS(normalize_point(identity(2) * 1.01), NumericError);
    Mat bad = identity(2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(exp_at(bad, Mat::Zero(2, 2)), NumericError);
    CHECK_NOTHROW(check_point(diag2(2, 0.5)));
    CHECK_THROWS_AS(check_point(diag2(2, 2)), DomainError);
}
