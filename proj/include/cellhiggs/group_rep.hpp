/**
 * Edge-path presentations of the fundamental group, SL(r, C)
 * representations of them, and conjugation-invariant comparison.
 *
 * Letters are encoded as integers: 2g is generator g and 2g+1 its inverse.
 * Lexicographic order over these codes lists g0, g0^-1, g1, g1^-1, ...
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cellhiggs/complex_core.hpp"
#include "cellhiggs/matrix.hpp"

namespace cellhiggs {

using Word = std::vector<int>;

inline constexpr int letter(int gen, bool inverse) { return 2 * gen + (inverse ? 1 : 0); }
inline constexpr int letter_generator(int code) { return code >> 1; }
inline constexpr bool letter_inverse(int code) { return code & 1; }
inline constexpr int letter_inverse_code(int code) { return code ^ 1; }

inline std::string word_to_string(const Word& w)
{
    if (w.empty())
        return "1";
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i)
            s += ' ';
        s += 'g' + std::to_string(letter_generator(w[i]));
        if (letter_inverse(w[i]))
            s += "^-1";
    }
    return s;
}

// ---------------------------------------------------------------------------
// Presentation

struct Presentation
{
    int basepoint = 0;
    std::vector<char> in_tree;          // per base edge
    std::vector<int> parent;            // BFS parent vertex, -1 at the root
    std::vector<int> generator_edge;    // base edge per generator, oriented low -> high index
    std::vector<int> edge_generator;    // generator per base edge, -1 for tree edges
    std::vector<Word> relators;         // one per triangle, in stored vertex order

    int generator_count() const { return static_cast<int>(generator_edge.size()); }

    /// Word crossed when walking the base edge a -> b (empty on tree edges).
    Word edge_word(const ComplexMesh& m, int a, int b) const
    {
        const int e = m.find_edge(a, b);
        if (e < 0)
            throw DomainError("no edge between the given vertices");
        const int g = edge_generator[e];
        if (g < 0)
            return {};
        return {letter(g, a > b)};
    }

    /// Vertex sequence from the basepoint to v along the spanning tree.
    std::vector<int> tree_path(int v) const
    {
        std::vector<int> path;
        for (int x = v; x >= 0; x = parent[x])
            path.push_back(x);
        std::reverse(path.begin(), path.end());
        return path;
    }

    /// Closed base-vertex loop representing generator g.
    std::vector<int> generator_loop(const ComplexMesh& m, int g) const
    {
        const auto& ed = m.edge(generator_edge.at(g));
        auto loop = tree_path(ed[0]);
        auto back = tree_path(ed[1]);
        std::reverse(back.begin(), back.end());
        loop.insert(loop.end(), back.begin(), back.end());
        return loop;
    }
};

/// Spanning tree by breadth-first search over ascending vertex indices.
inline Presentation edge_presentation(const ComplexMesh& m, int basepoint)
{
    if (basepoint < 0 || basepoint >= m.vertex_count())
        throw DomainError("basepoint is not a vertex of the complex");
    Presentation p;
    p.basepoint = basepoint;
    p.in_tree.assign(m.edge_count(), 0);
    p.parent.assign(m.vertex_count(), -2);
    p.parent[basepoint] = -1;
    std::queue<int> q;
    q.push(basepoint);
    while (!q.empty()) {
        int v = q.front();
        q.pop();
        std::vector<std::pair<int, int>> nbrs;
        for (int e : m.vertex_edges(v))
            nbrs.push_back({m.other_end(e, v), e});
        std::sort(nbrs.begin(), nbrs.end());
        for (auto [w, e] : nbrs)
            if (p.parent[w] == -2) {
                p.parent[w] = v;
                p.in_tree[e] = 1;
                q.push(w);
            }
    }
    for (int v = 0; v < m.vertex_count(); ++v)
        if (p.parent[v] == -2)
            throw DomainError("complex is disconnected");

    p.edge_generator.assign(m.edge_count(), -1);
    for (int e = 0; e < m.edge_count(); ++e)
        if (!p.in_tree[e]) {
            p.edge_generator[e] = static_cast<int>(p.generator_edge.size());
            p.generator_edge.push_back(e);
        }
    for (const auto& t : m.triangles()) {
        Word w;
        for (int k = 0; k < 3; ++k)
            for (int c : p.edge_word(m, t[k], t[(k + 1) % 3]))
                w.push_back(c);
        p.relators.push_back(std::move(w));
    }
    return p;
}

/**
 * Rank over Q of the abelianized relator matrix (relators x generators),
 * by fraction-free elimination on 64-bit integers.
 */
inline int abelianized_relator_rank(const Presentation& p)
{
    const int rows = static_cast<int>(p.relators.size());
    const int cols = p.generator_count();
    std::vector<std::vector<std::int64_t>> a(rows, std::vector<std::int64_t>(cols, 0));
    for (int i = 0; i < rows; ++i)
        for (int c : p.relators[i])
            a[i][letter_generator(c)] += letter_inverse(c) ? -1 : 1;
    int rank = 0;
    for (int col = 0; col < cols && rank < rows; ++col) {
        int piv = -1;
        for (int i = rank; i < rows; ++i)
            if (a[i][col] != 0) {
                piv = i;
                break;
            }
        if (piv < 0)
            continue;
        std::swap(a[piv], a[rank]);
        for (int i = rank + 1; i < rows; ++i) {
            if (a[i][col] == 0)
                continue;
            const std::int64_t f = a[i][col], g = a[rank][col];
            std::int64_t common = 0;
            for (int j = col; j < cols; ++j) {
                a[i][j] = a[i][j] * g - a[rank][j] * f;
                common = std::gcd(common, a[i][j]);
            }
            if (common > 1)
                for (int j = col; j < cols; ++j)
                    a[i][j] /= common;
        }
        ++rank;
    }
    return rank;
}

inline int first_betti_number(const Presentation& p) { return p.generator_count() - abelianized_relator_rank(p); }

// ---------------------------------------------------------------------------
// Representations

struct Representation
{
    int rank = 2;
    std::vector<Mat> images;
    double tolerance = 1e-9;
    std::vector<double> relator_residuals;  // ||rho(w) - I||_F per relator

    int generator_count() const { return static_cast<int>(images.size()); }

    Mat image(int code) const
    {
        const Mat& m = images.at(letter_generator(code));
        return letter_inverse(code) ? Mat(m.inverse()) : m;
    }

    Mat evaluate(const Word& w) const
    {
        Mat out = identity(rank);
        for (int c : w)
            out = out * image(c);
        return out;
    }

    double max_relator_residual() const
    {
        double r = 0.0;
        for (double x : relator_residuals)
            r = std::max(r, x);
        return r;
    }
};

/// Checks shapes, determinants and relators; fills relator_residuals.
inline void validate_representation(Representation& rep, const Presentation& pres)
{
    if (rep.rank < 2 || rep.rank > kMaxRank)
        throw DomainError("representation rank must lie in [2, " + std::to_string(kMaxRank) + "]");
    if (rep.generator_count() != pres.generator_count())
        throw DomainError("representation has " + std::to_string(rep.generator_count()) +
                          " images but the presentation has " + std::to_string(pres.generator_count()) +
                          " generators");
    for (int g = 0; g < rep.generator_count(); ++g) {
        const Mat& m = rep.images[g];
        if (m.rows() != rep.rank || m.cols() != rep.rank)
            throw DomainError("image of generator " + std::to_string(g) + " has the wrong shape");
        if (!all_finite(m))
            throw DomainError("image of generator " + std::to_string(g) + " is not finite");
        if (std::abs(det(m) - 1.0) > rep.tolerance)
            throw DomainError("determinant violation at generator " + std::to_string(g));
    }
    rep.relator_residuals.clear();
    for (std::size_t i = 0; i < pres.relators.size(); ++i) {
        const double res = frob(rep.evaluate(pres.relators[i]) - identity(rep.rank));
        rep.relator_residuals.push_back(res);
        if (res > rep.tolerance)
            throw DomainError("relator " + std::to_string(i) + " residual " + std::to_string(res) +
                              " exceeds tolerance");
    }
}

inline std::string format_real(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_matrix(std::ostream& out, const Mat& m)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j)
                out << ' ';
            out << format_real(m(i, j).real()) << ' ' << format_real(m(i, j).imag());
        }
        out << '\n';
    }
}

inline std::string save_representation(const Representation& rep)
{
    std::ostringstream out;
    out << "rep r " << rep.rank << " n " << rep.generator_count() << "\n";
    for (int g = 0; g < rep.generator_count(); ++g) {
        out << "g " << g << "\n";
        write_matrix(out, rep.images[g]);
    }
    return out.str();
}

/// Parses the representation file format without validating relators.
inline Representation parse_representation(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto next_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++lineno;
            if (auto h = out.find('#'); h != std::string::npos)
                out.erase(h);
            if (out.find_first_not_of(" \t\r") != std::string::npos)
                return true;
        }
        return false;
    };
    if (!next_line(line))
        throw ParseError(lineno, "empty representation file");
    std::istringstream hs(line);
    std::string kw_rep, kw_r, kw_n;
    int rank = 0, count = 0;
    if (!(hs >> kw_rep >> kw_r >> rank >> kw_n >> count) || kw_rep != "rep" || kw_r != "r" || kw_n != "n")
        throw ParseError(lineno, "expected header 'rep r <rank> n <count>'");
    if (rank < 1 || rank > kMaxRank || count < 0)
        throw ParseError(lineno, "invalid rank or generator count");
    Representation rep;
    rep.rank = rank;
    for (int g = 0; g < count; ++g) {
        if (!next_line(line))
            throw ParseError(lineno, "missing block for generator " + std::to_string(g));
        std::istringstream gs(line);
        std::string kw;
        int idx = -1;
        if (!(gs >> kw >> idx) || kw != "g" || idx != g)
            throw ParseError(lineno, "expected 'g " + std::to_string(g) + "'");
        Mat m(rank, rank);
        for (int i = 0; i < rank; ++i) {
            if (!next_line(line))
                throw ParseError(lineno, "truncated matrix for generator " + std::to_string(g));
            std::istringstream rs(line);
            for (int j = 0; j < rank; ++j) {
                double re = 0, im = 0;
                if (!(rs >> re >> im))
                    throw ParseError(lineno, "matrix row needs " + std::to_string(2 * rank) + " numbers");
                m(i, j) = cplx(re, im);
            }
            std::string extra;
            if (rs >> extra)
                throw ParseError(lineno, "matrix row has extra entries");
        }
        rep.images.push_back(std::move(m));
    }
    if (next_line(line))
        throw ParseError(lineno, "unexpected content after the last generator block");
    return rep;
}

inline Representation load_representation(const std::string& text, const Presentation& pres,
                                          double tolerance = 1e-9)
{
    Representation rep = parse_representation(text);
    rep.tolerance = tolerance;
    validate_representation(rep, pres);
    return rep;
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot open file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Oriented-edge cocycle: matrix converting the b-frame to the a-frame.
using EdgeCocycle = std::function<Mat(int a, int b)>;

/**
 * Representation induced by a flat edge cocycle: a generator's image is the
 * ordered product of cocycle values along its base loop.
 */
inline Representation rep_from_cocycle(const ComplexMesh& m, const Presentation& pres, int rank,
                                       const EdgeCocycle& cocycle, double tolerance = 1e-9)
{
    Representation rep;
    rep.rank = rank;
    rep.tolerance = tolerance;
    for (int g = 0; g < pres.generator_count(); ++g) {
        const auto loop = pres.generator_loop(m, g);
        Mat prod = identity(rank);
        for (std::size_t i = 0; i + 1 < loop.size(); ++i)
            prod = prod * cocycle(loop[i], loop[i + 1]);
        rep.images.push_back(prod);
    }
    validate_representation(rep, pres);
    return rep;
}

/// Returns g rho g^{-1}.
inline Representation conjugate(const Representation& rep, const Mat& g)
{
    Representation out = rep;
    const Mat gi = g.inverse();
    for (auto& m : out.images)
        m = g * m * gi;
    return out;
}

// ---------------------------------------------------------------------------
// Irreducibility (Burnside)

struct IrreducibilityResult
{
    bool irreducible = false;
    int span_dimension = 0;
};

/**
 * Dimension of the span of rho(w) over words of length <= maxlen, grown
 * level by level with early exit once the span is all of M_r(C).
 * maxlen <= 0 selects the default 2 r^2.
 */
inline IrreducibilityResult irreducibility(const Representation& rep, int maxlen = 0)
{
    const int r = rep.rank;
    const int full = r * r;
    if (maxlen <= 0)
        maxlen = 2 * full;
    std::vector<Mat> letters;
    for (int g = 0; g < rep.generator_count(); ++g) {
        letters.push_back(rep.image(letter(g, false)));
        letters.push_back(rep.image(letter(g, true)));
    }
    std::vector<Eigen::VectorXcd> basis;  // orthonormal
    auto try_add = [&](const Mat& m) {
        Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(m.data(), full);
        const double scale = v.norm();
        if (scale == 0.0)
            return false;
        v /= scale;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis)
                v -= b.dot(v) * b;
        const double rest = v.norm();
        if (rest <= 1e-8)
            return false;
        basis.push_back(v / rest);
        return true;
    };
    std::vector<Mat> frontier;
    if (try_add(identity(r)))
        frontier.push_back(identity(r));
    for (int len = 1; len <= maxlen && !frontier.empty() && static_cast<int>(basis.size()) < full; ++len) {
        std::vector<Mat> next;
        for (const auto& f : frontier)
            for (const auto& l : letters) {
                Mat w = l * f;
                if (try_add(w))
                    next.push_back(std::move(w));
                if (static_cast<int>(basis.size()) == full)
                    break;
            }
        frontier = std::move(next);
    }
    // Final dimension by singular values of the collected basis.
    Eigen::MatrixXcd stack(full, static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i)
        stack.col(static_cast<Eigen::Index>(i)) = basis[i];
    int dim = 0;
    if (!basis.empty()) {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stack);
        const auto& sv = svd.singularValues();
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > 1e-8 * sv(0))
                ++dim;
    }
    return {dim == full, dim};
}

// ---------------------------------------------------------------------------
// Trace fingerprints

struct TraceFingerprint
{
    int maxlen = 0;
    int generators = 0;
    int rank = 0;
    std::vector<cplx> traces;          // in lexicographic word order
    std::vector<std::int32_t> letters; // stride maxlen
    std::vector<std::uint8_t> lengths;

    std::size_t size() const { return traces.size(); }

    Word word(std::size_t i) const
    {
        Word w(letters.begin() + static_cast<std::ptrdiff_t>(i * maxlen),
               letters.begin() + static_cast<std::ptrdiff_t>(i * maxlen + lengths[i]));
        return w;
    }
};

namespace detail {

inline void enumerate_words(const std::vector<Mat>& letter_mats, int maxlen, Word& prefix, const Mat& prod,
                            TraceFingerprint& out)
{
    out.traces.push_back(prod.trace());
    out.lengths.push_back(static_cast<std::uint8_t>(prefix.size()));
    for (int i = 0; i < maxlen; ++i)
        out.letters.push_back(i < static_cast<int>(prefix.size()) ? prefix[i] : -1);
    if (static_cast<int>(prefix.size()) == maxlen)
        return;
    for (int c = 0; c < static_cast<int>(letter_mats.size()); ++c) {
        if (!prefix.empty() && c == letter_inverse_code(prefix.back()))
            continue;
        prefix.push_back(c);
        enumerate_words(letter_mats, maxlen, prefix, prod * letter_mats[c], out);
        prefix.pop_back();
    }
}

}  // namespace detail

/**
 * Traces of all freely reduced words of length <= maxlen. Work is split by
 * first letter across `threads` workers and merged in letter order, so the
 * output does not depend on the thread count.
 */
inline TraceFingerprint word_trace_fingerprint(const Representation& rep, int maxlen, int threads = 1)
{
    if (maxlen < 0 || maxlen > 255)
        throw ConfigError("fingerprint word length must lie in [0, 255]");
    TraceFingerprint fp;
    fp.maxlen = maxlen;
    fp.generators = rep.generator_count();
    fp.rank = rep.rank;
    std::vector<Mat> letter_mats;
    for (int c = 0; c < 2 * rep.generator_count(); ++c)
        letter_mats.push_back(rep.image(c));

    fp.traces.push_back(static_cast<double>(rep.rank));
    fp.lengths.push_back(0);
    fp.letters.insert(fp.letters.end(), maxlen, -1);
    if (maxlen == 0)
        return fp;

    const int nletters = static_cast<int>(letter_mats.size());
    std::vector<TraceFingerprint> parts(nletters);
    for (auto& p : parts)
        p.maxlen = maxlen;
    auto work = [&](int first) {
        Word prefix{first};
        detail::enumerate_words(letter_mats, maxlen, prefix, letter_mats[first], parts[first]);
    };
    threads = std::max(1, threads);
    if (threads == 1) {
        for (int c = 0; c < nletters; ++c)
            work(c);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (int c = t; c < nletters; c += threads)
                    work(c);
            });
        for (auto& th : pool)
            th.join();
    }
    for (auto& p : parts) {
        fp.traces.insert(fp.traces.end(), p.traces.begin(), p.traces.end());
        fp.letters.insert(fp.letters.end(), p.letters.begin(), p.letters.end());
        fp.lengths.insert(fp.lengths.end(), p.lengths.begin(), p.lengths.end());
    }
    return fp;
}

struct FingerprintDistance
{
    double max_deviation = 0.0;
    std::size_t worst_index = 0;
    Word worst_word;
};

inline FingerprintDistance fingerprint_distance(const TraceFingerprint& a, const TraceFingerprint& b)
{
    if (a.maxlen != b.maxlen || a.generators != b.generators || a.size() != b.size())
        throw DomainError("fingerprints have mismatched shapes");
    FingerprintDistance d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double dev = std::abs(a.traces[i] - b.traces[i]);
        if (dev > d.max_deviation || i == 0) {
            if (dev > d.max_deviation)
                d.worst_index = i;
            d.max_deviation = std::max(d.max_deviation, dev);
        }
    }
    d.worst_word = a.word(d.worst_index);
    return d;
}

inline bool conjugacy_compare(const TraceFingerprint& a, const TraceFingerprint& b, double tol)
{
    return fingerprint_distance(a, b).max_deviation <= tol;
}

}  // namespace cellhiggs
