/**
 * Geometry of Y = SL(r,C)/SU(r), modelled as Hermitian positive-definite
 * matrices of determinant one with the isometric action g.h = g h g*.
 *
 * Tangent vectors are traceless Hermitian matrices in the identity
 * identification: xi at h stands for h^{1/2} xi h^{1/2}.
 */
#pragma once

#include <cmath>
#include <vector>

#include "cellhiggs/matrix.hpp"

namespace cellhiggs {

using SymPoint = Mat;
using SymTangent = Mat;

namespace detail {
inline constexpr double kDetRenormLow = 1e-12;
inline constexpr double kDetRenormHigh = 1e-6;
}  // namespace detail

/**
 * Restores the SymPoint invariants after arithmetic: exact symmetrization,
 * then determinant renormalization when the drift is small but visible.
 * Larger drift means something upstream went wrong.
 */
inline SymPoint normalize_point(const Mat& m)
{
    if (!all_finite(m))
        throw NumericError("non-finite entries in a symmetric-space point");
    SymPoint h = hermitian_part(m);
    const int r = static_cast<int>(h.rows());
    const double d = det(h).real();
    const double drift = std::abs(d - 1.0);
    if (drift > detail::kDetRenormHigh)
        throw NumericError("determinant drift " + std::to_string(drift) + " beyond recoverable range");
    if (drift > detail::kDetRenormLow)
        h *= std::pow(d, -1.0 / r);
    return h;
}

/// Throws unless h is Hermitian positive definite with determinant one.
inline void check_point(const SymPoint& h)
{
    if (!all_finite(h))
        throw DomainError("non-finite entries in a symmetric-space point");
    if (frob(h - h.adjoint()) > 1e-12 * frob(h))
        throw DomainError("point is not Hermitian");
    const auto ev = hermitian_eigenvalues(h);
    if (!(ev(0) > 1e-13 * ev(ev.size() - 1)))
        throw DomainError("point is not positive definite");
    if (std::abs(det(h) - 1.0) > 1e-10)
        throw DomainError("point does not have determinant one");
}

/// Projects an arbitrary matrix to a traceless Hermitian tangent vector.
inline SymTangent tangent_part(const Mat& m) { return traceless(hermitian_part(m)); }

inline SymPoint exp_at(const SymPoint& h, const SymTangent& xi)
{
    if (!all_finite(h) || !all_finite(xi))
        throw NumericError("non-finite input to exp_at");
    const Mat s = herm_sqrt(h);
    return normalize_point(s * herm_exp(xi) * s);
}

inline SymTangent log_at(const SymPoint& h, const SymPoint& p)
{
    if (!all_finite(h) || !all_finite(p))
        throw NumericError("non-finite input to log_at");
    const Mat is = herm_inv_sqrt(h);
    return tangent_part(herm_log(is * p * is));
}

inline double distance(const SymPoint& h1, const SymPoint& h2)
{
    const Mat is = herm_inv_sqrt(h1);
    const auto ev = hermitian_eigenvalues(is * h2 * is);
    double s = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const double l = std::log(ev(i));
        s += l * l;
    }
    return std::sqrt(s);
}

inline double distance_squared(const SymPoint& h1, const SymPoint& h2)
{
    const double d = distance(h1, h2);
    return d * d;
}

/// sum_i w_i d(x, p_i)^2 with a single inverse square root of x.
inline double weighted_squared_distances(const SymPoint& x, const std::vector<SymPoint>& points,
                                         const std::vector<double>& weights)
{
    const Mat is = herm_inv_sqrt(x);
    double f = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto ev = hermitian_eigenvalues(is * points[i] * is);
        double s = 0.0;
        for (Eigen::Index k = 0; k < ev.size(); ++k) {
            const double l = std::log(ev(k));
            s += l * l;
        }
        f += weights[i] * s;
    }
    return f;
}

inline SymPoint act(const Mat& g, const SymPoint& h)
{
    if (std::abs(det(g) - 1.0) > 1e-8)
        throw DomainError("acting matrix is not unimodular");
    return normalize_point(g * h * g.adjoint());
}

/// Point at parameter t on the geodesic from a (t = 0) to b (t = 1).
inline SymPoint geodesic(const SymPoint& a, const SymPoint& b, double t)
{
    return exp_at(a, t * log_at(a, b));
}

inline SymPoint midpoint(const SymPoint& a, const SymPoint& b) { return geodesic(a, b, 0.5); }

struct KarcherResult
{
    SymPoint mean;
    int iterations = 0;
    double last_step = 0.0;
};

/**
 * Weighted Riemannian centre of mass by tangent averaging. Converges
 * because the target is nonpositively curved; the iteration count is only
 * a guard.
 */
inline KarcherResult karcher_mean_detailed(const std::vector<SymPoint>& points, const std::vector<double>& weights,
                                           const SymPoint* start = nullptr, double tol = 1e-12, int max_iter = 200)
{
    if (points.empty())
        throw DomainError("Karcher mean of an empty set");
    if (weights.size() != points.size())
        throw DomainError("Karcher mean needs one weight per point");
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0))
            throw DomainError("Karcher weights must be positive");
        wsum += w;
    }
    KarcherResult res;
    res.mean = start ? *start : points.front();
    for (int it = 0; it < max_iter; ++it) {
        const Mat is = herm_inv_sqrt(res.mean);
        Mat step = Mat::Zero(res.mean.rows(), res.mean.cols());
        for (std::size_t i = 0; i < points.size(); ++i)
            step += weights[i] * herm_log(is * points[i] * is);
        step = tangent_part(step / wsum);
        res.last_step = frob(step);
        res.iterations = it + 1;
        if (res.last_step <= tol)
            return res;
        res.mean = exp_at(res.mean, step);
    }
    throw NumericError("Karcher mean did not converge (last step " + std::to_string(res.last_step) + ")");
}

inline SymPoint karcher_mean(const std::vector<SymPoint>& points, const std::vector<double>& weights)
{
    return karcher_mean_detailed(points, weights).mean;
}

}  // namespace cellhiggs
