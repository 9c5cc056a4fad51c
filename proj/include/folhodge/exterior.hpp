#pragma once

/**
 * @file exterior.hpp
 * @brief Pointwise exterior algebra over an oriented q-dimensional inner
 *        product space.
 *
 * Everything here is degree-by-degree linear algebra on the lexicographically
 * ordered bases {e^I} of Lambda^k:
 *   - multi-index enumeration and ranking,
 *   - wedge and interior products as signed basis maps,
 *   - induced Gram matrices G_k (k-by-k minors of the covector Gram),
 *   - the transverse Hodge star defined by  alpha ^ (star beta) = <alpha,beta> vol.
 *
 * Sign identities are computed in integer arithmetic whenever the metric is
 * the identity, so that tests of e.g. star(star(w)) = (-1)^{k(q-k)} w are exact.
 */

#include <Eigen/Dense>

// When Eigen is backed by LAPACKE, lapacke.h leaks the C99 imaginary-unit
// macro, which would mangle every identifier named I.
#ifdef I
#undef I
#endif

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace folhodge {

/// Parity sign (-1)^n.
inline constexpr int sign_pow(long n) { return (n % 2 == 0) ? 1 : -1; }

/// Binomial coefficient; exact for the small arguments used here (n <= 32).
inline std::int64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/**
 * @brief Strictly increasing index list into {1..q}, stored as a bitmask.
 *
 * Bit (i-1) set means covector index i is present. Degree = popcount.
 */
struct MultiIndex {
    std::uint32_t bits = 0;

    int degree() const { return std::popcount(bits); }

    bool contains(int i) const { return (bits >> (i - 1)) & 1u; }

    /// 1-based indices in increasing order.
    std::vector<int> indices() const {
        std::vector<int> out;
        for (int i = 1; i <= 32; ++i)
            if (contains(i)) out.push_back(i);
        return out;
    }

    /// Complement inside {1..q}.
    MultiIndex complement(int q) const {
        return MultiIndex{~bits & ((q >= 32) ? ~0u : ((1u << q) - 1u))};
    }

    static MultiIndex from_indices(const std::vector<int>& idx) {
        MultiIndex m;
        int prev = 0;
        for (int i : idx) {
            if (i <= prev || i > 32)
                throw std::invalid_argument("multi-index list must be strictly increasing in 1..32");
            m.bits |= (1u << (i - 1));
            prev = i;
        }
        return m;
    }

    bool operator==(const MultiIndex& o) const { return bits == o.bits; }
    bool operator!=(const MultiIndex& o) const { return bits != o.bits; }

    std::string to_string() const {
        std::string s = "e^(";
        bool first = true;
        for (int i : indices()) {
            if (!first) s += ",";
            s += std::to_string(i);
            first = false;
        }
        return s + ")";
    }
};

inline void check_index_range(int i, int q) {
    if (i < 1 || i > q)
        throw std::out_of_range("covector index " + std::to_string(i) +
                                " outside 1.." + std::to_string(q));
}

inline void check_multi_index_range(const MultiIndex& I, int q) {
    if (q < 0 || q > 32) throw std::out_of_range("q outside 0..32");
    std::uint32_t mask = (q >= 32) ? ~0u : ((1u << q) - 1u);
    if (I.bits & ~mask)
        throw std::out_of_range("multi-index " + I.to_string() + " outside 1.." + std::to_string(q));
}

/// All degree-k multi-indices on {1..q} in lexicographic order of index lists.
inline std::vector<MultiIndex> all_multi_indices(int q, int k) {
    std::vector<MultiIndex> out;
    if (k < 0 || k > q) return out;
    std::vector<int> c(k);
    for (int i = 0; i < k; ++i) c[i] = i + 1;
    while (true) {
        out.push_back(MultiIndex::from_indices(c));
        int t = k - 1;
        while (t >= 0 && c[t] == q - (k - 1 - t)) --t;
        if (t < 0) break;
        ++c[t];
        for (int s = t + 1; s < k; ++s) c[s] = c[s - 1] + 1;
    }
    return out;
}

/// Position of I within all_multi_indices(q, degree(I)); combinatorial ranking.
inline int multi_index_rank(int q, const MultiIndex& I) {
    check_multi_index_range(I, q);
    const std::vector<int> idx = I.indices();
    const int k = static_cast<int>(idx.size());
    std::int64_t rank = 0;
    int prev = 0;
    for (int m = 0; m < k; ++m) {
        for (int j = prev + 1; j < idx[m]; ++j) rank += binomial(q - j, k - m - 1);
        prev = idx[m];
    }
    return static_cast<int>(rank);
}

/// Result of a signed basis operation: sign 0 encodes the zero form.
struct SignedIndex {
    int sign = 0;
    MultiIndex index;
};

/**
 * @brief Wedge of basis forms: e^I ^ e^J = sign * e^{I union J}.
 *
 * Sign is the parity of the merge permutation; overlapping index sets give 0.
 */
inline SignedIndex wedge_basis(int q, const MultiIndex& I, const MultiIndex& J) {
    check_multi_index_range(I, q);
    check_multi_index_range(J, q);
    if (I.bits & J.bits) return {0, MultiIndex{}};
    // Inversions: pairs (i in I, j in J) with i > j.
    long inv = 0;
    for (int j = 1; j <= q; ++j)
        if (J.contains(j)) inv += std::popcount(I.bits >> j);  // i in I with i > j
    return {sign_pow(inv), MultiIndex{I.bits | J.bits}};
}

/**
 * @brief Interior product with the identity-metric dual of e^i:
 *        e_i -| e^I = sign * e^{I minus i}, zero if i not in I.
 *
 * General metrics are handled downstream by composing with Gram matrices.
 */
inline SignedIndex contract_basis(int q, int i, const MultiIndex& I) {
    check_index_range(i, q);
    check_multi_index_range(I, q);
    if (!I.contains(i)) return {0, MultiIndex{}};
    const int before = std::popcount(I.bits & ((1u << (i - 1)) - 1u));
    return {sign_pow(before), MultiIndex{I.bits & ~(1u << (i - 1))}};
}

struct NonPositiveMetric : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/**
 * @brief Transverse metric with its per-degree Gram matrices.
 *
 * `metric` is the q-by-q SPD matrix of the metric on frame vectors;
 * `covector_gram` is its inverse (the Gram of the coframe covectors);
 * `degree_gram[k]` has entries det[covector_gram(I_a, J_b)], the k-by-k minor
 * formula for the induced inner product on Lambda^k.
 */
struct MetricGram {
    int q = 0;
    Eigen::MatrixXd metric;
    Eigen::MatrixXd covector_gram;
    std::vector<Eigen::MatrixXd> degree_gram;
    double sqrt_det = 1.0;
    bool identity = false;  // exact fast path for sign tables

    static MetricGram build(const Eigen::MatrixXd& G) {
        if (G.rows() != G.cols() || G.rows() < 1)
            throw std::invalid_argument("metric must be square and nonempty");
        const int q = static_cast<int>(G.rows());
        const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
        if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw NonPositiveMetric("metric is not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        if (es.eigenvalues().minCoeff() <= 1e-12 * scale)
            throw NonPositiveMetric("metric is not positive definite");

        MetricGram g;
        g.q = q;
        g.metric = 0.5 * (G + G.transpose());
        g.identity = g.metric.isIdentity(0.0);
        g.covector_gram = g.identity
                              ? Eigen::MatrixXd::Identity(q, q)
                              : g.metric.llt().solve(Eigen::MatrixXd::Identity(q, q)).eval();
        g.sqrt_det = std::sqrt(g.metric.determinant());

        g.degree_gram.resize(q + 1);
        for (int k = 0; k <= q; ++k) {
            const auto basis = all_multi_indices(q, k);
            const int n = static_cast<int>(basis.size());
            Eigen::MatrixXd Gk(n, n);
            for (int a = 0; a < n; ++a) {
                const auto ia = basis[a].indices();
                for (int b = 0; b < n; ++b) {
                    const auto ib = basis[b].indices();
                    Eigen::MatrixXd minor(k, k);
                    for (int r = 0; r < k; ++r)
                        for (int c = 0; c < k; ++c)
                            minor(r, c) = g.covector_gram(ia[r] - 1, ib[c] - 1);
                    Gk(a, b) = (k == 0) ? 1.0 : minor.determinant();
                }
            }
            g.degree_gram[k] = 0.5 * (Gk + Gk.transpose());
        }
        return g;
    }
};

/// Induced Gram matrix of the lexicographic basis of Lambda^k.
inline const Eigen::MatrixXd& induced_gram(const MetricGram& g, int k) {
    if (k < 0 || k > g.q) throw std::out_of_range("degree outside 0..q");
    return g.degree_gram[k];
}

/**
 * @brief One degree block of the transverse Hodge star.
 *
 * Returns the C(q,k) x C(q,q-k) matrix S with star(e^I) = sum_J S(I,J) e^J,
 * determined by  alpha ^ star(beta) = <alpha,beta>_{G_k} * orientation * sqrt(det G) * e^{1..q}.
 * Closed form: S(I, J) = orientation * sqrt(det G) * eps(J^c, J) * G_k(J^c, I),
 * with eps the merge permutation parity.
 */
inline Eigen::MatrixXd star_basis(const MetricGram& g, int orientation, int k) {
    if (orientation != 1 && orientation != -1)
        throw std::invalid_argument("orientation must be +1 or -1");
    if (k < 0 || k > g.q) throw std::out_of_range("degree outside 0..q");
    const int q = g.q;
    const auto dom = all_multi_indices(q, k);
    const auto cod = all_multi_indices(q, q - k);
    Eigen::MatrixXd S(dom.size(), cod.size());
    const Eigen::MatrixXd& Gk = g.degree_gram[k];
    for (std::size_t jj = 0; jj < cod.size(); ++jj) {
        const MultiIndex Jc = cod[jj].complement(q);
        const int eps = wedge_basis(q, Jc, cod[jj]).sign;
        const int kc = multi_index_rank(q, Jc);
        for (std::size_t ii = 0; ii < dom.size(); ++ii)
            S(ii, jj) = orientation * g.sqrt_det * eps * Gk(kc, ii);
    }
    return S;
}

/**
 * @brief All star blocks of one metric/orientation, with an exact integer
 *        mirror when the metric is the identity.
 */
struct StarTable {
    int q = 0;
    int orientation = 1;
    std::vector<Eigen::MatrixXd> S;     // S[k]: C(q,k) x C(q,q-k)
    bool exact = false;                 // true iff metric == identity
    std::vector<Eigen::MatrixXi> Sint;  // integer mirror, only when exact

    static StarTable build(const MetricGram& g, int orientation) {
        StarTable t;
        t.q = g.q;
        t.orientation = orientation;
        t.exact = g.identity;
        t.S.resize(g.q + 1);
        if (t.exact) t.Sint.resize(g.q + 1);
        for (int k = 0; k <= g.q; ++k) {
            t.S[k] = star_basis(g, orientation, k);
            if (t.exact) {
                t.Sint[k] = t.S[k].array().round().cast<int>();
                // Entries of an identity-metric star are exactly 0 or +-1.
                if ((t.S[k] - t.Sint[k].cast<double>()).cwiseAbs().maxCoeff() != 0.0)
                    throw std::logic_error("identity-metric star table is not integral");
            }
        }
        return t;
    }

    /**
     * Composition star after star on degree k as a C(q,k) square matrix;
     * equals (-1)^{k(q-k)} * Identity.
     */
    Eigen::MatrixXd double_apply(int k) const {
        if (k < 0 || k > q) throw std::out_of_range("degree outside 0..q");
        return S[k] * S[q - k];
    }
};

}  // namespace folhodge
