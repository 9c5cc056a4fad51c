#include <catch2/catch_amalgamated.hpp>

#include <folhodge/operators.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>

using namespace folhodge;

namespace {

// Codimension-2 model with de^2 = log(lambda) e^1 ^ e^2, kappa = log(lambda) e^1,
// one active coordinate along e^1. Nontaut for every lambda > 1.
CoframeModel log_spiral(double lambda, int N) {
    CoframeModel m;
    m.q = 2;
    const double L = std::log(lambda);
    m.structure = {{2, 1, 2, L}};
    m.active = {{1, 1.0, N}};
    m.metric = Eigen::MatrixXd::Identity(2, 2);
    m.kappa[1] = TrigPoly::constant(1, L);
    return m;
}

// Flat 2-torus model, both coordinates active, kappa = dh (taut by design).
CoframeModel weighted_torus(int N, double amp) {
    CoframeModel m;
    m.q = 2;
    m.active = {{1, 1.0, N}, {2, 1.0, N}};
    m.metric = Eigen::MatrixXd::Identity(2, 2);
    const TrigPoly h = TrigPoly::single({-1, 0}, amp);  // amp sin(2 pi t1)
    return m.with_kappa_shift(h);
}

bool has_code(const ValidationReport& r, GateCode c) {
    for (const auto& f : r.failures)
        if (f.code == c) return true;
    return false;
}

double dense_rel_error(const SparseC& A, const SparseC& B) {
    return detail::rel_residual(A, B);
}

}  // namespace

TEST_CASE("validation admits the catalog-shaped models", "[operators][validate]") {
    SECTION("nontaut log-spiral model") {
        const double L = std::log(2.0);
        const ValidationReport r = validate(log_spiral(2.0, 16));
        REQUIRE(r.passed);
        CHECK(r.d_squared_residual < 1e-14);
        CHECK(r.dkappa_residual == 0.0);
        CHECK(r.modular(0) == Catch::Approx(L).margin(1e-15));
        CHECK(r.modular(1) == 0.0);
        // kappa equals the modular form, so the weight is flat...
        CHECK(r.weight_potential.empty());
        CHECK(r.realizability_residual < 1e-14);
        // ...but kappa itself is obstructed by its constant mode.
        CHECK_FALSE(r.taut);
        CHECK(r.kappa_exactness_residual == Catch::Approx(L).margin(1e-14));
    }
    SECTION("taut weighted torus") {
        const ValidationReport r = validate(weighted_torus(16, 0.3));
        REQUIRE(r.passed);
        CHECK(r.taut);
        CHECK(r.modular.isZero());
        // The least-squares weight recovers the generating potential.
        REQUIRE(r.weight_potential.terms.count({-1, 0}) == 1);
        CHECK(r.weight_potential.terms.at({-1, 0}) == Catch::Approx(0.3).margin(1e-12));
        CHECK(r.kappa_potential.terms.at({-1, 0}) == Catch::Approx(0.3).margin(1e-12));
    }
}

TEST_CASE("each admission gate fires its own code", "[operators][validate]") {
    const CoframeModel base = log_spiral(2.0, 16);

    SECTION("structure constants failing d.d = 0") {
        CoframeModel m;
        m.q = 3;
        // de^1 = e^2 ^ e^3 and de^2 = e^1 ^ e^2 do not close.
        m.structure = {{1, 2, 3, 1.0}, {2, 1, 2, 1.0}};
        m.active = {{1, 1.0, 8}};
        m.metric = Eigen::MatrixXd::Identity(3, 3);
        const ValidationReport r = validate(m);
        REQUIRE_FALSE(r.passed);
        CHECK(has_code(r, GateCode::d_squared));
        // Relative to the collocation-dominated factor norms the violation is
        // small in absolute terms, but it sits ten orders above the gate.
        CHECK(r.d_squared_residual > 1e-8);
    }
    SECTION("malformed structure triples") {
        CoframeModel m = base;
        m.structure.push_back({2, 2, 3, 1.0});  // k == i
        CHECK(has_code(validate(m), GateCode::malformed_structure));
        CoframeModel n = base;
        n.structure.push_back({1, 3, 2, 1.0});  // i >= j
        CHECK(has_code(validate(n), GateCode::malformed_structure));
    }
    SECTION("grid size constraints") {
        CoframeModel m = base;
        m.active[0].grid = 6;
        CHECK(has_code(validate(m), GateCode::grid_too_small));
        CoframeModel n = base;
        n.active[0].grid = 9;
        const ValidationReport r = validate(n);
        CHECK(has_code(r, GateCode::grid_not_even));
        CHECK_FALSE(has_code(r, GateCode::grid_too_small));
    }
    SECTION("active axis bookkeeping") {
        CoframeModel m = base;
        m.active.push_back({1, 1.0, 16});  // duplicate coframe index
        CHECK(has_code(validate(m), GateCode::active_malformed));
        CoframeModel n = base;
        n.active[0].coframe_index = 3;
        CHECK(has_code(validate(n), GateCode::active_malformed));
    }
    SECTION("metric gates") {
        CoframeModel m = base;
        m.metric = Eigen::MatrixXd::Identity(3, 3);
        CHECK(has_code(validate(m), GateCode::metric_shape));
        CoframeModel n = base;
        n.metric << 1.0, 2.0, 2.0, 1.0;  // symmetric, indefinite
        CHECK(has_code(validate(n), GateCode::metric_not_spd));
    }
    SECTION("kappa bookkeeping") {
        CoframeModel m = base;
        m.kappa[5] = TrigPoly::constant(1, 1.0);
        CHECK(has_code(validate(m), GateCode::kappa_malformed));
        CoframeModel n = base;
        n.kappa[2] = TrigPoly::constant(2, 1.0);  // wrong arity
        CHECK(has_code(validate(n), GateCode::kappa_malformed));
    }
    SECTION("kappa must be closed") {
        CoframeModel m = weighted_torus(16, 0.0);
        m.kappa[1] = TrigPoly::single({0, -1}, 1.0);  // sin(2 pi t2) e^1
        const ValidationReport r = validate(m);
        CHECK(has_code(r, GateCode::kappa_not_closed));
        CHECK(r.dkappa_residual > 1.0);
    }
    SECTION("codimension-one constant kappa is unrealizable") {
        CoframeModel m;
        m.q = 1;
        m.active = {{1, 1.0, 16}};
        m.metric = Eigen::MatrixXd::Identity(1, 1);
        m.kappa[1] = TrigPoly::constant(1, 0.8);
        const ValidationReport r = validate(m);
        REQUIRE_FALSE(r.passed);
        CHECK(has_code(r, GateCode::not_realizable));
        CHECK(r.realizability_residual == Catch::Approx(0.8).margin(1e-14));
        CHECK_THROWS_AS(Engine(m), ModelRejected);
    }
}

TEST_CASE("assembled blocks match hand-computed actions", "[operators]") {
    const double lambda = 2.0, L = std::log(lambda);
    const int N = 32;
    Engine eng(log_spiral(lambda, N));
    const Grid& grid = eng.grid();

    Eigen::VectorXd g(N), gp(N);
    for (int j = 0; j < N; ++j) {
        const double t = static_cast<double>(j) / N;
        g(j) = std::sin(2.0 * kPi * t) + 0.3 * std::cos(4.0 * kPi * t);
        gp(j) = 2.0 * kPi * std::cos(2.0 * kPi * t) - 1.2 * kPi * std::sin(4.0 * kPi * t);
    }

    SECTION("d on functions and on one-forms") {
        Eigen::VectorXcd f = g.cast<cplx>();
        const Eigen::VectorXcd df = eng.d_block(0) * f;
        for (int j = 0; j < N; ++j) {
            REQUIRE(std::abs(df(2 * j + 0) - cplx(gp(j), 0.0)) < 1e-9);
            REQUIRE(std::abs(df(2 * j + 1)) < 1e-12);
        }
        // d(g e^2) = (g' + L g) e^1 ^ e^2.
        Eigen::VectorXcd u = Eigen::VectorXcd::Zero(2 * N);
        for (int j = 0; j < N; ++j) u(2 * j + 1) = g(j);
        const Eigen::VectorXcd du = eng.d_block(1) * u;
        for (int j = 0; j < N; ++j)
            REQUIRE(std::abs(du(j) - cplx(gp(j) + L * g(j), 0.0)) < 1e-9);
    }
    SECTION("kappa wedge and contraction") {
        Eigen::VectorXcd f = g.cast<cplx>();
        const Eigen::VectorXcd wf = eng.wedge_kappa_block(0) * f;
        for (int j = 0; j < N; ++j) {
            REQUIRE(std::abs(wf(2 * j + 0) - cplx(L * g(j), 0.0)) < 1e-12);
            REQUIRE(std::abs(wf(2 * j + 1)) < 1e-15);
        }
        Eigen::VectorXcd u(2 * N);
        for (int j = 0; j < N; ++j) {
            u(2 * j + 0) = g(j);        // u e^1
            u(2 * j + 1) = 2.0 * g(j);  // v e^2
        }
        const Eigen::VectorXcd cf = eng.contract_kappa_block(1) * u;
        for (int j = 0; j < N; ++j) REQUIRE(std::abs(cf(j) - cplx(L * g(j), 0.0)) < 1e-12);
    }
    SECTION("pointwise star") {
        Eigen::VectorXcd u(2 * N);
        for (int j = 0; j < N; ++j) {
            u(2 * j + 0) = g(j);
            u(2 * j + 1) = 2.0 * g(j);
        }
        const Eigen::VectorXcd su = eng.star_block(1) * u;
        for (int j = 0; j < N; ++j) {
            REQUIRE(su(2 * j + 0) == -u(2 * j + 1));  // star e^2 = -e^1
            REQUIRE(su(2 * j + 1) == u(2 * j + 0));   // star e^1 = e^2
        }
    }
    SECTION("codifferential on one-forms collapses to -u'") {
        // delta_b(u e^1 + v e^2) = -u' here: the structure and kappa parts
        // cancel exactly because kappa equals the modular form.
        Eigen::VectorXcd u = Eigen::VectorXcd::Zero(2 * N);
        for (int j = 0; j < N; ++j) {
            u(2 * j + 0) = g(j);
            u(2 * j + 1) = 0.5 * g(j);
        }
        const Eigen::VectorXcd bu = eng.delta_b_block(1) * u;
        for (int j = 0; j < N; ++j) REQUIRE(std::abs(bu(j) + cplx(gp(j), 0.0)) < 1e-9);
    }
    SECTION("block shapes and grading") {
        for (int k = 0; k <= 2; ++k) {
            const OperatorBlock b = eng.assemble(OperatorName::d_tilde, k);
            CHECK(b.mat.rows() == eng.dim(k + 1));
            CHECK(b.mat.cols() == eng.dim(k));
            const OperatorBlock s = eng.assemble(OperatorName::star, k);
            CHECK(s.mat.rows() == eng.dim(2 - k));
        }
        const OperatorBlock Db = eng.assemble(OperatorName::D_b, 1);
        REQUIRE(Db.second_codomain.has_value());
        CHECK(Db.mat.rows() == eng.dim(2) + eng.dim(0));
        // Stack order: d_tilde rows first, then delta_tilde.
        Eigen::VectorXcd u = Eigen::VectorXcd::Random(2 * N);
        const Eigen::VectorXcd top = (Db.mat * u).head(eng.dim(2));
        CHECK((top - eng.d_tilde_block(1) * u).norm() < 1e-13 * u.norm());
        (void)grid;
    }
}

TEST_CASE("every operator identity holds on a nontaut model", "[operators][identities]") {
    Engine eng(log_spiral(2.0, 32));
    const IdentitySuiteReport rep = identity_suite(eng);
    CAPTURE(rep.max_residual);
    for (const auto& row : rep.rows) {
        INFO(row.key << " degree " << row.degree << " residual " << row.residual);
        CHECK(row.residual < 1e-12);
    }
    CHECK(rep.star_involution_tested);
    CHECK(rep.pass(1e-12));
}

TEST_CASE("every operator identity holds on a weighted taut model", "[operators][identities]") {
    Engine eng(weighted_torus(32, 0.3));
    const IdentitySuiteReport rep = identity_suite(eng);
    for (const auto& row : rep.rows) {
        INFO(row.key << " degree " << row.degree << " residual " << row.residual);
        CHECK(row.residual < 1e-12);
    }
    CHECK(rep.pass(1e-12));
}

TEST_CASE("identity residuals do not degrade with resolution", "[operators][identities]") {
    for (int N : {16, 32, 64}) {
        Engine eng(log_spiral(1.5, N));
        const IdentitySuiteReport rep = identity_suite(eng);
        INFO("N = " << N << " max residual " << rep.max_residual);
        CHECK(rep.pass(1e-12));
    }
}

TEST_CASE("weighted adjoints pair correctly and involute", "[operators][adjoint]") {
    Engine eng(weighted_torus(32, 0.25));
    const int q = 2;

    SECTION("inner-product pairing <d u, v> = <u, d* v>") {
        for (int k = 0; k < q; ++k) {
            const OperatorBlock dk = eng.assemble(OperatorName::d_tilde, k);
            const OperatorBlock adj = eng.mu_adjoint(dk);
            Eigen::VectorXcd u = Eigen::VectorXcd::Random(eng.dim(k));
            Eigen::VectorXcd v = Eigen::VectorXcd::Random(eng.dim(k + 1));
            const cplx lhs = eng.inner(k + 1, dk.mat * u, v);
            const cplx rhs = eng.inner(k, u, adj.mat * v);
            REQUIRE(std::abs(lhs - rhs) < 1e-10 * (std::abs(lhs) + 1.0));
        }
    }
    SECTION("adjoint is an involution") {
        const OperatorBlock dk = eng.assemble(OperatorName::d_tilde, 0);
        const OperatorBlock back = eng.mu_adjoint(eng.mu_adjoint(dk));
        CHECK(back.adjointed == false);
        CHECK(dense_rel_error(back.mat, dk.mat) < 1e-13);
    }
    SECTION("adjoint of the twisted differential is the twisted codifferential") {
        for (int k = 0; k < q; ++k) {
            const OperatorBlock adj = eng.mu_adjoint(eng.assemble(OperatorName::d_tilde, k));
            CHECK(dense_rel_error(adj.mat, eng.delta_tilde_block(k + 1)) < 1e-12);
        }
    }
    SECTION("adjoint of star is star inverse") {
        for (int k = 0; k <= q; ++k) {
            const OperatorBlock adj = eng.mu_adjoint(eng.assemble(OperatorName::star, k));
            const double s = sign_pow(static_cast<long>(k) * (q - k));
            CHECK(dense_rel_error(adj.mat, SparseC((s * eng.star_block(q - k)).pruned())) < 1e-12);
        }
    }
    SECTION("twisted laplacian is self-adjoint") {
        for (int k = 0; k <= q; ++k) {
            const OperatorBlock lap = eng.assemble(OperatorName::Delta_tilde, k);
            const OperatorBlock adj = eng.mu_adjoint(lap);
            CHECK(dense_rel_error(adj.mat, lap.mat) < 1e-11);
        }
    }
}

TEST_CASE("the flat-weight adjoint needs the modular kappa", "[operators][adjoint]") {
    // With kappa equal to the modular form the weight is flat and delta_b is
    // exactly the plain adjoint of d.
    Engine eng(log_spiral(3.0, 16));
    for (int k = 1; k <= 2; ++k) {
        const OperatorBlock adj = eng.mu_adjoint(eng.assemble(OperatorName::d, k - 1));
        CHECK(dense_rel_error(adj.mat, eng.delta_b_block(k)) < 1e-12);
    }
}

TEST_CASE("twisted laplacian equals the square of the twisted dirac", "[operators]") {
    Engine eng(log_spiral(2.0, 16));
    for (int k = 0; k <= 2; ++k) {
        const SparseC up = SparseC((eng.delta_tilde_block(k + 1) * eng.d_tilde_block(k)).pruned());
        const SparseC down = SparseC((eng.d_tilde_block(k - 1) * eng.delta_tilde_block(k)).pruned());
        CHECK(dense_rel_error(eng.Delta_tilde_block(k), SparseC((up + down).pruned())) < 1e-14);
    }
}

TEST_CASE("conformal shifts conjugate the twisted pair exactly", "[operators][conformal]") {
    // Shifting kappa by dh must turn d_tilde into its e^{h/2}-conjugate.
    const CoframeModel base = log_spiral(2.0, 32);
    const TrigPoly h = TrigPoly::single({-1}, 0.4).plus(TrigPoly::single({2}, 0.15));
    Engine eng0(base);
    Engine eng1(base.with_kappa_shift(h));

    const Eigen::VectorXd hs = sample(h, eng0.grid());
    const Eigen::VectorXd ep = (0.5 * hs.array()).exp();
    const Eigen::VectorXd em = (-0.5 * hs.array()).exp();

    for (int k = 0; k < 2; ++k) {
        const SparseC conj = SparseC((eng0.multiplication_block(ep, k + 1) *
                                      eng0.d_tilde_block(k) * eng0.multiplication_block(em, k))
                                         .pruned());
        // Blocks live on models with identical grids, so dims line up.
        const double r = dense_rel_error(eng1.d_tilde_block(k), conj);
        INFO("degree " << k << " residual " << r);
        CHECK(r < 1e-10);
    }
    for (int k = 1; k <= 2; ++k) {
        const SparseC conj = SparseC((eng0.multiplication_block(ep, k - 1) *
                                      eng0.delta_tilde_block(k) * eng0.multiplication_block(em, k))
                                         .pruned());
        CHECK(dense_rel_error(eng1.delta_tilde_block(k), conj) < 1e-10);
    }
    // The spectra of the twisted laplacians coincide model-to-model.
    const Eigen::MatrixXcd A0 = Eigen::MatrixXcd(eng0.Delta_tilde_block(0));
    const Eigen::MatrixXcd A1 = Eigen::MatrixXcd(eng1.Delta_tilde_block(0));
    Eigen::VectorXcd ev0 = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(A0, false).eigenvalues();
    Eigen::VectorXcd ev1 = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(A1, false).eigenvalues();
    std::sort(ev0.data(), ev0.data() + ev0.size(),
              [](cplx a, cplx b) { return a.real() < b.real(); });
    std::sort(ev1.data(), ev1.data() + ev1.size(),
              [](cplx a, cplx b) { return a.real() < b.real(); });
    CHECK((ev0 - ev1).lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + ev0.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("identities stay exact under a weight varying on both axes", "[operators][identities]") {
    CoframeModel m;
    m.q = 2;
    m.active = {{1, 1.0, 16}, {2, 1.0, 16}};
    m.metric = Eigen::MatrixXd::Identity(2, 2);
    TrigPoly h;
    h.add_term({-1, 1}, 0.2);  // sin(2 pi t1) cos(2 pi t2)
    h.add_term({1, 0}, -0.1);
    Engine eng(m.with_kappa_shift(h));
    const IdentitySuiteReport rep = identity_suite(eng);
    for (const auto& row : rep.rows) {
        INFO(row.key << " degree " << row.degree << " residual " << row.residual);
        CHECK(row.residual < 1e-12);
    }
}

TEST_CASE("blocks from different models refuse to compose", "[operators]") {
    Engine a(log_spiral(2.0, 16));
    Engine b(log_spiral(2.0, 32));
    const OperatorBlock da = a.assemble(OperatorName::d, 0);
    const OperatorBlock db = b.assemble(OperatorName::d, 1);
    CHECK_THROWS_AS(check_composable(db, da), std::invalid_argument);
    CHECK_THROWS_AS(b.mu_adjoint(da), std::invalid_argument);
    const OperatorBlock da1 = a.assemble(OperatorName::d, 1);
    CHECK_NOTHROW(check_composable(da1, da));
}

TEST_CASE("operator names round-trip through their strings", "[operators]") {
    for (int i = 0; i <= static_cast<int>(OperatorName::star_involution); ++i) {
        const auto n = static_cast<OperatorName>(i);
        const auto back = operator_name_from(operator_name_str(n));
        REQUIRE(back.has_value());
        CHECK(*back == n);
    }
    CHECK_FALSE(operator_name_from("nonsense").has_value());
}
