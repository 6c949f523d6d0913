/**
 * Small complex-matrix toolkit built on Eigen.
 *
 * Every matrix function here goes through a Hermitian (or normal) spectral
 * decomposition, so results are exact up to the conditioning of the
 * eigensolver.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "cellhiggs/error.hpp"

namespace cellhiggs {

using cplx = std::complex<double>;

/// Largest supported rank. Matrices live in fixed-capacity storage so the
/// inner loops never touch the heap.
inline constexpr int kMaxRank = 8;
using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxRank, kMaxRank>;

inline Mat identity(int r) { return Mat::Identity(r, r); }

inline double frob(const Mat& m) { return m.norm(); }

inline Mat hermitian_part(const Mat& m) { return 0.5 * (m + m.adjoint()); }

inline Mat anti_hermitian_part(const Mat& m) { return 0.5 * (m - m.adjoint()); }

inline bool all_finite(const Mat& m) { return m.allFinite(); }

/// Commutator [a, b] = ab - ba.
inline Mat bracket(const Mat& a, const Mat& b) { return a * b - b * a; }

/// Removes the trace part so the result lies in sl(r).
inline Mat traceless(const Mat& m)
{
    const auto r = m.rows();
    return m - (m.trace() / static_cast<double>(r)) * identity(static_cast<int>(r));
}

/**
 * Applies a real function to the spectrum of a Hermitian matrix.
 * The input is symmetrized first so round-off in the upper triangle is not
 * silently discarded by the eigensolver.
 */
namespace detail {

struct Eigen2
{
    double lo, hi;
    Eigen::Vector2cd vlo, vhi;  // orthonormal eigenvectors
};

/**
 * Closed-form spectral decomposition of a 2x2 Hermitian matrix
 * [[a, b], [conj(b), d]]. The eigenvector formula is chosen by the sign of
 * (a - d) so that no cancellation occurs when b is small.
 */
inline Eigen2 eigen2(const Mat& h)
{
    const double a = h(0, 0).real(), d = h(1, 1).real();
    const cplx b = 0.5 * (h(0, 1) + std::conj(h(1, 0)));
    const double m = 0.5 * (a + d), delta = 0.5 * (a - d);
    const double s = std::sqrt(delta * delta + std::norm(b));
    Eigen2 out{m - s, m + s, {}, {}};
    if (s == 0.0) {
        out.vhi << 1.0, 0.0;
        out.vlo << 0.0, 1.0;
        return out;
    }
    if (delta >= 0.0)
        out.vhi << s + delta, std::conj(b);
    else
        out.vhi << b, s - delta;
    out.vhi.normalize();
    out.vlo << -std::conj(out.vhi(1)), std::conj(out.vhi(0));
    return out;
}

}  // namespace detail

template <class F>
Mat hermitian_function(const Mat& h, F&& f)
{
    if (h.rows() == 2) {
        if (!h.allFinite())
            throw NumericError("Hermitian eigendecomposition failed");
        const auto e = detail::eigen2(h);
        const double flo = f(e.lo), fhi = f(e.hi);
        return flo * (e.vlo * e.vlo.adjoint()) + fhi * (e.vhi * e.vhi.adjoint());
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(h));
    if (es.info() != Eigen::Success)
        throw NumericError("Hermitian eigendecomposition failed");
    Eigen::VectorXd mapped = es.eigenvalues().unaryExpr(f);
    return es.eigenvectors() * mapped.asDiagonal() * es.eigenvectors().adjoint();
}

inline Eigen::VectorXd hermitian_eigenvalues(const Mat& h)
{
    if (h.rows() == 2) {
        const auto e = detail::eigen2(h);
        return Eigen::Vector2d(e.lo, e.hi);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(h), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline Mat herm_exp(const Mat& h)
{
    return hermitian_function(h, [](double x) { return std::exp(x); });
}

/// Logarithm of a Hermitian positive-definite matrix.
inline Mat herm_log(const Mat& h)
{
    return hermitian_function(h, [](double x) {
        if (!(x > 0.0))
            throw NumericError("logarithm of a matrix that is not positive definite");
        return std::log(x);
    });
}

inline Mat herm_sqrt(const Mat& h)
{
    return hermitian_function(h, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

inline Mat herm_inv_sqrt(const Mat& h)
{
    return hermitian_function(h, [](double x) {
        if (!(x > 0.0))
            throw NumericError("inverse square root of a matrix that is not positive definite");
        return 1.0 / std::sqrt(x);
    });
}

/// exp of an anti-Hermitian matrix a = iK with K Hermitian.
inline Mat anti_herm_exp(const Mat& a)
{
    const Mat k = cplx(0.0, -1.0) * a;
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(k));
    Eigen::VectorXcd d(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < d.size(); ++i)
        d(i) = std::exp(cplx(0.0, es.eigenvalues()(i)));
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

/**
 * Principal logarithm of a unitary matrix, returned exactly anti-Hermitian.
 * Eigenvalues within `branch_tol` of -1 are rejected: the principal branch
 * is not continuous there.
 */
inline Mat unitary_log(const Mat& w, double branch_tol = 1e-9)
{
    Eigen::ComplexSchur<Mat> schur(w);
    const Mat& t = schur.matrixT();
    const Mat& q = schur.matrixU();
    Eigen::VectorXcd d(t.rows());
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        const double arg = std::arg(t(i, i));
        if (std::numbers::pi - std::abs(arg) < branch_tol)
            throw NumericError("logarithm branch failure: eigenvalue on the negative real axis");
        d(i) = cplx(0.0, arg);
    }
    return anti_hermitian_part(q * d.asDiagonal() * q.adjoint());
}

/// Principal logarithm of a general invertible matrix.
inline Mat principal_log(const Mat& m, double branch_tol = 1e-9)
{
    if (!all_finite(m))
        throw NumericError("non-finite input to the matrix logarithm");
    Eigen::ComplexEigenSolver<Mat> es(m, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const cplx l = es.eigenvalues()(i);
        if (std::abs(l) == 0.0 || (l.real() < 0.0 && std::abs(l.imag()) <= branch_tol * std::abs(l)))
            throw NumericError("logarithm branch failure: eigenvalue on the closed negative real axis");
    }
    const Eigen::MatrixXcd full = m;
    return Mat(full.log());
}

struct Polar
{
    Mat positive;  // P = (M M*)^{1/2}
    Mat unitary;   // W with M = P W
};

/// Left polar decomposition M = P W.
inline Polar polar(const Mat& m)
{
    const Mat mm = m * m.adjoint();
    Polar out;
    out.positive = herm_sqrt(mm);
    out.unitary = herm_inv_sqrt(mm) * m;
    return out;
}

/// Determinant of a general complex matrix.
inline cplx det(const Mat& m) { return m.determinant(); }

/// Projects a matrix onto the unimodular ones by the scalar det^{-1/r}.
inline Mat unimodular_rescale(const Mat& m)
{
    const int r = static_cast<int>(m.rows());
    const cplx d = m.determinant();
    return m * std::pow(d, -1.0 / r);
}

}  // namespace cellhiggs
