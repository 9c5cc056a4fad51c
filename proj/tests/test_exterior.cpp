#include <catch2/catch_amalgamated.hpp>

#include <folhodge/exterior.hpp>

#include <random>

using namespace folhodge;

namespace {

MultiIndex mi(std::initializer_list<int> idx) { return MultiIndex::from_indices(std::vector<int>(idx)); }

// Wedge-with-a-covector matrix W: Lambda^k -> Lambda^{k+1}, alpha = sum alpha_i e^i,
// acting on coefficient vectors over the lexicographic bases.
Eigen::MatrixXd wedge_matrix(int q, int k, const Eigen::VectorXd& alpha) {
    const auto dom = all_multi_indices(q, k);
    const auto cod = all_multi_indices(q, k + 1);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(cod.size(), dom.size());
    for (std::size_t c = 0; c < dom.size(); ++c)
        for (int i = 1; i <= q; ++i) {
            const auto r = wedge_basis(q, mi({i}), dom[c]);
            if (r.sign != 0) W(multi_index_rank(q, r.index), c) += r.sign * alpha(i - 1);
        }
    return W;
}

// Independent oracle for one star column: solve the defining linear system
// alpha ^ star(beta) = <alpha,beta> vol  for star(e^I), without the closed form.
Eigen::VectorXd star_column_by_solve(const MetricGram& g, int orientation, int k, int rank_I) {
    const int q = g.q;
    const auto dom = all_multi_indices(q, k);
    const auto cod = all_multi_indices(q, q - k);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dom.size(), cod.size());
    Eigen::VectorXd b(dom.size());
    for (std::size_t r = 0; r < dom.size(); ++r) {
        for (std::size_t c = 0; c < cod.size(); ++c) {
            const auto w = wedge_basis(q, dom[r], cod[c]);
            if (w.sign != 0) A(r, c) = w.sign;  // coefficient of e^{1..q}
        }
        b(r) = g.degree_gram[k](r, rank_I) * orientation * g.sqrt_det;
    }
    return A.fullPivLu().solve(b);
}

Eigen::MatrixXd random_spd(int q, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist;
    Eigen::MatrixXd B(q, q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) B(i, j) = dist(rng);
    return B * B.transpose() + 0.5 * Eigen::MatrixXd::Identity(q, q);
}

}  // namespace

TEST_CASE("multi-index enumeration is lexicographic and ranked consistently") {
    for (int q = 0; q <= 6; ++q)
        for (int k = 0; k <= q; ++k) {
            const auto basis = all_multi_indices(q, k);
            REQUIRE(static_cast<std::int64_t>(basis.size()) == binomial(q, k));
            for (std::size_t r = 0; r < basis.size(); ++r) {
                REQUIRE(basis[r].degree() == k);
                REQUIRE(multi_index_rank(q, basis[r]) == static_cast<int>(r));
                if (r > 0) REQUIRE(basis[r - 1].indices() < basis[r].indices());
            }
        }
}

TEST_CASE("wedge of basis forms: signs and annihilation") {
    const auto r1 = wedge_basis(2, mi({1}), mi({2}));
    REQUIRE(r1.sign == 1);
    REQUIRE(r1.index == mi({1, 2}));

    const auto r2 = wedge_basis(2, mi({2}), mi({1}));
    REQUIRE(r2.sign == -1);
    REQUIRE(r2.index == mi({1, 2}));

    REQUIRE(wedge_basis(2, mi({1}), mi({1})).sign == 0);
    REQUIRE_THROWS_AS(wedge_basis(2, mi({3}), mi({1})), std::out_of_range);
}

TEST_CASE("wedge graded commutativity, exhaustive") {
    for (int q = 1; q <= 5; ++q)
        for (int k = 0; k <= q; ++k)
            for (int l = 0; l + k <= q; ++l)
                for (const auto& I : all_multi_indices(q, k))
                    for (const auto& J : all_multi_indices(q, l)) {
                        const auto ij = wedge_basis(q, I, J);
                        const auto ji = wedge_basis(q, J, I);
                        REQUIRE(ij.sign == sign_pow(k * l) * ji.sign);
                        if (ij.sign != 0) REQUIRE(ij.index == ji.index);
                    }
}

TEST_CASE("contraction of basis forms: signs and absence") {
    const auto r1 = contract_basis(2, 1, mi({1, 2}));
    REQUIRE(r1.sign == 1);
    REQUIRE(r1.index == mi({2}));

    const auto r2 = contract_basis(2, 2, mi({1, 2}));
    REQUIRE(r2.sign == -1);
    REQUIRE(r2.index == mi({1}));

    REQUIRE(contract_basis(3, 3, mi({1, 2})).sign == 0);
    REQUIRE_THROWS_AS(contract_basis(2, 3, mi({1, 2})), std::out_of_range);
}

TEST_CASE("contraction is adjoint to wedge for the identity metric, exhaustive") {
    for (int q = 1; q <= 4; ++q)
        for (int i = 1; i <= q; ++i)
            for (int k = 1; k <= q; ++k)
                for (const auto& A : all_multi_indices(q, k))
                    for (const auto& B : all_multi_indices(q, k - 1)) {
                        // <e_i -| A, B> vs <A, e^i ^ B>, orthonormal basis.
                        const auto ca = contract_basis(q, i, A);
                        const int lhs = (ca.sign != 0 && ca.index == B) ? ca.sign : 0;
                        const auto wb = wedge_basis(q, mi({i}), B);
                        const int rhs = (wb.sign != 0 && wb.index == A) ? wb.sign : 0;
                        REQUIRE(lhs == rhs);
                    }
}

TEST_CASE("induced Gram matrices") {
    SECTION("identity metric gives identity Grams") {
        const auto g = MetricGram::build(Eigen::MatrixXd::Identity(4, 4));
        REQUIRE(g.identity);
        for (int k = 0; k <= 4; ++k)
            REQUIRE(induced_gram(g, k).isIdentity(0.0));
    }
    SECTION("q=2 diagonal metric: covector Gram and top-degree minor") {
        const double a = 2.0, b = 0.5;
        Eigen::MatrixXd G(2, 2);
        G << a, 0, 0, b;
        const auto g = MetricGram::build(G);
        REQUIRE(g.covector_gram(0, 0) == Catch::Approx(1.0 / a).margin(1e-15));
        REQUIRE(g.covector_gram(1, 1) == Catch::Approx(1.0 / b).margin(1e-15));
        REQUIRE(g.degree_gram[1](0, 0) == Catch::Approx(1.0 / a).margin(1e-15));
        REQUIRE(g.degree_gram[2](0, 0) == Catch::Approx(1.0 / (a * b)).margin(1e-15));
    }
    SECTION("positivity is inherited by every degree") {
        for (unsigned seed : {11u, 12u, 13u}) {
            const auto g = MetricGram::build(random_spd(4, seed));
            for (int k = 0; k <= 4; ++k) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.degree_gram[k]);
                REQUIRE(es.eigenvalues().minCoeff() > 0.0);
            }
        }
    }
    SECTION("non-SPD metrics are rejected") {
        Eigen::MatrixXd G(2, 2);
        G << 1, 0, 0, -1;
        REQUIRE_THROWS_AS(MetricGram::build(G), NonPositiveMetric);
        G << 1, 2, 2, 1;  // symmetric, indefinite
        REQUIRE_THROWS_AS(MetricGram::build(G), NonPositiveMetric);
    }
}

TEST_CASE("q=2 identity-metric star table") {
    const auto g = MetricGram::build(Eigen::MatrixXd::Identity(2, 2));
    const auto t = StarTable::build(g, +1);
    REQUIRE(t.exact);

    // star(1) = e^1^e^2, star(e^1) = e^2, star(e^2) = -e^1, star(e^1^e^2) = 1.
    REQUIRE(t.Sint[0](0, 0) == 1);
    REQUIRE(t.Sint[1](0, 0) == 0);
    REQUIRE(t.Sint[1](0, 1) == 1);
    REQUIRE(t.Sint[1](1, 0) == -1);
    REQUIRE(t.Sint[1](1, 1) == 0);
    REQUIRE(t.Sint[2](0, 0) == 1);

    // Independent oracle: columns solved from the defining relation.
    for (int k = 0; k <= 2; ++k)
        for (int r = 0; r < binomial(2, k); ++r) {
            const Eigen::VectorXd col = star_column_by_solve(g, +1, k, r);
            REQUIRE((col.transpose() - t.S[k].row(r)).cwiseAbs().maxCoeff() < 1e-14);
        }

    // Sign law on middle degree: star after star = -Identity.
    REQUIRE((t.Sint[1] * t.Sint[1] + Eigen::MatrixXi::Identity(2, 2)).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("star double application sign law") {
    SECTION("integer-exact for the identity metric, q <= 5") {
        for (int q = 1; q <= 5; ++q) {
            const auto g = MetricGram::build(Eigen::MatrixXd::Identity(q, q));
            for (int orient : {+1, -1}) {
                const auto t = StarTable::build(g, orient);
                for (int k = 0; k <= q; ++k) {
                    const Eigen::MatrixXi prod = t.Sint[k] * t.Sint[q - k];
                    const int n = static_cast<int>(binomial(q, k));
                    const Eigen::MatrixXi want =
                        sign_pow(k * (q - k)) * Eigen::MatrixXi::Identity(n, n);
                    REQUIRE((prod - want).cwiseAbs().maxCoeff() == 0);
                }
            }
        }
    }
    SECTION("floating point for random SPD metrics") {
        for (int q = 2; q <= 4; ++q) {
            const auto g = MetricGram::build(random_spd(q, 100u + q));
            const auto t = StarTable::build(g, +1);
            for (int k = 0; k <= q; ++k) {
                const int n = static_cast<int>(binomial(q, k));
                const Eigen::MatrixXd want = sign_pow(k * (q - k)) * Eigen::MatrixXd::Identity(n, n);
                REQUIRE((t.double_apply(k) - want).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
    }
}

TEST_CASE("star satisfies its defining relation for random metrics") {
    for (int q = 2; q <= 4; ++q) {
        const auto g = MetricGram::build(random_spd(q, 200u + q));
        const auto t = StarTable::build(g, +1);
        for (int k = 0; k <= q; ++k) {
            const auto dom = all_multi_indices(q, k);
            for (std::size_t a = 0; a < dom.size(); ++a) {
                const Eigen::VectorXd oracle = star_column_by_solve(g, +1, k, static_cast<int>(a));
                REQUIRE((oracle.transpose() - t.S[k].row(a)).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
    }
}

TEST_CASE("identity-metric volume normalization e^I ^ star(e^I) = vol") {
    for (int q = 1; q <= 4; ++q) {
        const auto g = MetricGram::build(Eigen::MatrixXd::Identity(q, q));
        for (int orient : {+1, -1}) {
            const auto t = StarTable::build(g, orient);
            for (int k = 0; k <= q; ++k) {
                const auto dom = all_multi_indices(q, k);
                const auto cod = all_multi_indices(q, q - k);
                for (std::size_t a = 0; a < dom.size(); ++a) {
                    double vol_coef = 0.0;
                    for (std::size_t j = 0; j < cod.size(); ++j) {
                        const auto w = wedge_basis(q, dom[a], cod[j]);
                        if (w.sign != 0) vol_coef += w.sign * t.S[k](a, j);
                    }
                    REQUIRE(vol_coef == Catch::Approx(orient).margin(1e-14));
                }
            }
        }
    }
}

TEST_CASE("contraction equals the star sandwich of wedge") {
    // For a covector alpha: (G-dual contraction by alpha) = (-1)^{q(k+1)} star (alpha^) star
    // on k-forms, where the operator matrix of star on degree m is S[m]^T.
    std::mt19937 rng(77);
    std::normal_distribution<double> dist;
    for (int q = 2; q <= 4; ++q) {
        for (bool flat : {true, false}) {
            const auto g = flat ? MetricGram::build(Eigen::MatrixXd::Identity(q, q))
                                : MetricGram::build(random_spd(q, 300u + q));
            const auto t = StarTable::build(g, +1);
            for (int trial = 0; trial < 3; ++trial) {
                Eigen::VectorXd alpha(q);
                for (int i = 0; i < q; ++i) alpha(i) = dist(rng);
                alpha.normalize();
                for (int k = 1; k <= q; ++k) {
                    // G-dual contraction: adjoint of wedge between weighted degrees.
                    const Eigen::MatrixXd W = wedge_matrix(q, k - 1, alpha);
                    const Eigen::MatrixXd contract =
                        g.degree_gram[k - 1].llt().solve(W.transpose() * g.degree_gram[k]);
                    const Eigen::MatrixXd sandwich = sign_pow(q * (k + 1)) *
                                                     t.S[q - k + 1].transpose() *
                                                     wedge_matrix(q, q - k, alpha) *
                                                     t.S[k].transpose();
                    REQUIRE((contract - sandwich).cwiseAbs().maxCoeff() < 1e-12);
                }
            }
        }
    }
}
