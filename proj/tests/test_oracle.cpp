#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "illposed/oracle.hpp"

using namespace illposed;
using namespace illposed::engine;
using namespace illposed::oracle;
using schemes::SchemeSpec;

namespace {

SpectralOperator geometric_to_zero(double M, double ratio, int n,
                                   OperatorKind kind = OperatorKind::first_kind) {
    std::vector<SpectrumPoint> pts;
    double l = M;
    for (int i = 0; i < n; ++i) {
        pts.push_back({l, 1.0});
        l *= ratio;
    }
    std::sort(pts.begin(), pts.end(),
              [](const SpectrumPoint& a, const SpectrumPoint& b) { return a.lambda < b.lambda; });
    return SpectralOperator(kind, pts);
}

SpectralVector random_vector(std::mt19937& rng, std::size_t n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    SpectralVector x = SpectralVector::zero(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = gauss(rng);
    return x;
}

bool rel_close(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

} // namespace

TEST_CASE("identity-seed lift is diagonal") {
    std::mt19937 rng(11001);
    const SpectralOperator A = geometric_to_zero(1.0, 0.8, 8);
    const ProblemInstance p(A, random_vector(rng, 8), random_vector(rng, 8));
    const DenseInstance inst = lift(p, 0);
    REQUIRE(inst.matrix.rows() == 8);
    for (Eigen::Index i = 0; i < 8; ++i) {
        REQUIRE(inst.matrix(i, i) == A.lambda(static_cast<std::size_t>(i)));
        for (Eigen::Index j = 0; j < 8; ++j)
            if (i != j) REQUIRE(inst.matrix(i, j) == 0.0);
    }
    for (Eigen::Index i = 0; i < 8; ++i)
        REQUIRE(inst.rhs[i] == p.rhs[static_cast<std::size_t>(i)]);
}

TEST_CASE("lift is exactly symmetric and recovers the spectrum") {
    std::mt19937 rng(11002);
    const SpectralOperator A = geometric_to_zero(1.0, 0.85, 24);
    const ProblemInstance p(A, random_vector(rng, 24), random_vector(rng, 24));
    const DenseInstance inst = lift(p, 12345);

    const Eigen::MatrixXd diff = inst.matrix - inst.matrix.transpose();
    REQUIRE(diff.cwiseAbs().maxCoeff() == 0.0);

    // Eigenvalue recovery oracle.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inst.matrix);
    REQUIRE(es.info() == Eigen::Success);
    std::vector<double> ev(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(ev.begin(), ev.end());
    for (std::size_t i = 0; i < A.size(); ++i)
        REQUIRE(ev[i] == Catch::Approx(A.lambda(i)).margin(1e-12));
}

TEST_CASE("lift preserves norms of all conjugated vectors") {
    std::mt19937 rng(11003);
    const SpectralOperator A = geometric_to_zero(1.0, 0.8, 16);
    const SpectralVector xs = random_vector(rng, 16);
    const ProblemInstance p(A, apply_operator(A, xs), random_vector(rng, 16), xs);
    const DenseInstance inst = lift(p, 99);
    REQUIRE(rel_close(inst.rhs.norm(), norm(p.rhs, A), 1e-12));
    REQUIRE(rel_close(inst.initial.norm(), norm(p.initial, A), 1e-12));
    REQUIRE(rel_close(inst.exact_solution->norm(), norm(xs, A), 1e-12));
}

TEST_CASE("integer weights expand to multiplicities, others are rejected") {
    const SpectralOperator multi(OperatorKind::first_kind, {{0.25, 2.0}, {0.75, 3.0}});
    const ProblemInstance p(multi, SpectralVector({1.0, 2.0}), SpectralVector({0.0, 0.0}));
    const DenseInstance inst = lift(p, 0);
    REQUIRE(inst.matrix.rows() == 5);
    REQUIRE(rel_close(inst.rhs.norm(), norm(p.rhs, multi), 1e-14));

    const SpectralOperator frac(OperatorKind::first_kind, {{0.5, 1.5}});
    const ProblemInstance q(frac, SpectralVector({1.0}), SpectralVector({0.0}));
    REQUIRE_THROWS_AS(lift(q, 0), UnsupportedWeights);

    REQUIRE_THROWS_AS(lift(p, 0, 4), std::invalid_argument);  // size cap
}

TEST_CASE("hand-checked explicit step on a 2x2 diagonal instance") {
    const SpectralOperator A(OperatorKind::first_kind, {{0.5, 1.0}, {1.0, 1.0}});
    const ProblemInstance p(A, SpectralVector({0.5, 1.0}), SpectralVector({0.0, 0.0}),
                            SpectralVector({1.0, 1.0}));
    const DenseInstance inst = lift(p, 0);
    const DenseRunResult r = run_dense(inst, SchemeSpec::explicit_power(1.0, 1), 1);
    // x_1 = (I - A) x_0 + y = y: the lambda=1 component is exact after one
    // step, the lambda=0.5 component sits at 0.5.
    REQUIRE(r.final_iterate[0] == 0.5);
    REQUIRE(r.final_iterate[1] == 1.0);
}

TEST_CASE("implicit steps satisfy their linear systems to 1e-11") {
    std::mt19937 rng(11004);
    const SpectralOperator A = geometric_to_zero(1.0, 0.85, 32);
    const SpectralVector xs = random_vector(rng, 32);
    const ProblemInstance p(A, apply_operator(A, xs), random_vector(rng, 32), xs);
    for (const auto& scheme : {SchemeSpec::implicit_euler(1.0, 1), SchemeSpec::implicit_cayley(0.5, 2),
                               SchemeSpec::implicit_squared(1.0, 2)}) {
        const DenseInstance inst = lift(p, 314);
        const Eigen::MatrixXd& M = inst.matrix;
        const Eigen::Index dim = M.rows();
        Eigen::MatrixXd Mk = M;
        for (int j = 1; j < scheme.k; ++j) Mk = (Mk * M).eval();
        const Eigen::MatrixXd S =
            scheme.family == schemes::SchemeFamily::implicit_squared
                ? (Eigen::MatrixXd::Identity(dim, dim) +
                   (scheme.alpha * scheme.alpha) * (Mk * Mk))
                      .eval()
                : (Eigen::MatrixXd::Identity(dim, dim) + scheme.alpha * Mk).eval();
        const detail_oracle::RefinedSolver solver(S);

        // Drive the recurrence directly through the solver and check the
        // step systems.
        Eigen::VectorXd c = scheme.alpha * detail_oracle::matrix_power_apply(M, scheme.k - 1,
                                                                             inst.rhs);
        Eigen::VectorXd x = inst.initial;
        for (int n = 0; n < 50; ++n) {
            Eigen::VectorXd b;
            switch (scheme.family) {
            case schemes::SchemeFamily::implicit_euler:
                b = x + c;
                break;
            case schemes::SchemeFamily::implicit_cayley:
                b = x - scheme.alpha * (Mk * x) + 2.0 * c;
                break;
            default: {
                Eigen::VectorXd w = x - scheme.alpha * (Mk * x);
                b = w - scheme.alpha * (Mk * w) + 2.0 * c;
                break;
            }
            }
            const Eigen::VectorXd x_next = solver.solve(b);
            REQUIRE((S * x_next - b).norm() <= 1e-11 * (1.0 + x.norm()));
            x = x_next;
        }
    }
}

TEST_CASE("diagonal lift reproduces the spectral trajectory per coordinate") {
    std::mt19937 rng(11005);
    const SpectralOperator A = geometric_to_zero(1.0, 0.8, 24);
    const SpectralVector xs = random_vector(rng, 24);
    const ProblemInstance p(A, apply_operator(A, xs), random_vector(rng, 24), xs);
    for (const auto& scheme : {SchemeSpec::explicit_power(1.0, 2), SchemeSpec::implicit_euler(1.0, 1)}) {
        const RunDiagnostics spectral = iterate_first_kind(p, scheme, 100);
        const DenseRunResult dense = run_dense(lift(p, 0), scheme, 100);
        for (std::size_t i = 0; i < 24; ++i)
            REQUIRE(rel_close(dense.final_iterate[static_cast<Eigen::Index>(i)],
                              spectral.final_iterate[i], 1e-10));
    }
}

TEST_CASE("conjugated lift reproduces every recorded norm") {
    std::mt19937 rng(11006);
    const std::vector<SchemeSpec> all = {
        SchemeSpec::explicit_power(1.0, 1),   SchemeSpec::explicit_monomial(0.5, 2),
        SchemeSpec::implicit_euler(1.0, 1),   SchemeSpec::implicit_cayley(1.0, 2),
        SchemeSpec::implicit_squared(1.0, 1),
    };
    const SpectralOperator A = geometric_to_zero(0.9, 0.88, 32);
    for (const auto& scheme : all) {
        const SpectralVector xs = random_vector(rng, 32);
        const ProblemInstance p(A, apply_operator(A, xs), random_vector(rng, 32), xs);
        const RunDiagnostics spectral = iterate_first_kind(p, scheme, 200);
        for (std::uint64_t seed : {1ULL, 2ULL}) {
            const DenseRunResult dense = run_dense(lift(p, seed), scheme, 200);
            REQUIRE(dense.rows.size() == spectral.rows.size());
            for (std::size_t r = 0; r < dense.rows.size(); ++r) {
                REQUIRE(dense.rows[r].n == spectral.rows[r].n);
                REQUIRE(rel_close(dense.rows[r].error.value(),
                                  spectral.rows[r].error.value(), 1e-8));
                REQUIRE(rel_close(dense.rows[r].residual, spectral.rows[r].residual, 1e-8));
                REQUIRE(rel_close(dense.rows[r].correction, spectral.rows[r].correction, 1e-8));
            }
        }
    }
}

TEST_CASE("second-kind equivalence on a spectrum accumulating at one") {
    std::mt19937 rng(11007);
    std::vector<SpectrumPoint> pts;
    for (int i = 1; i <= 20; ++i) pts.push_back({1.0 - std::pow(2.0, -i), 1.0});
    const SpectralOperator B(OperatorKind::second_kind, pts);
    const ProblemInstance p(B, random_vector(rng, B.size()), random_vector(rng, B.size()));
    const RunDiagnostics spectral = iterate_second_kind(p, 200);
    const DenseRunResult dense = run_dense(lift(p, 7), SchemeSpec::second_kind_direct(), 200);
    for (std::size_t r = 0; r < dense.rows.size(); ++r) {
        REQUIRE(rel_close(dense.rows[r].residual, spectral.rows[r].residual, 1e-8));
        REQUIRE(rel_close(dense.rows[r].correction, spectral.rows[r].correction, 1e-8));
    }
}

TEST_CASE("scheme kind must match the instance kind") {
    std::mt19937 rng(11008);
    const SpectralOperator A = geometric_to_zero(1.0, 0.8, 8);
    const ProblemInstance p(A, random_vector(rng, 8), random_vector(rng, 8));
    const DenseInstance inst = lift(p, 1);
    REQUIRE_THROWS_AS(run_dense(inst, SchemeSpec::second_kind_direct(), 5),
                      std::invalid_argument);
}
