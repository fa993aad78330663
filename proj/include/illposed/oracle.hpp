#pragma once

// Independent dense-matrix realization of the iterations, used to validate
// the spectral engine by construction-equivalence.  The spectral model is
// conjugated by a seeded orthogonal basis (products of Householder
// reflectors) and iterated with genuine matrix arithmetic; the implicit
// schemes perform actual symmetric linear solves instead of evaluating the
// resolvent on the diagonal.  Correctness is the only goal here, not speed.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "illposed/engine.hpp"

namespace illposed::oracle {

// Spectral masses without an exact finite matrix realization.
struct UnsupportedWeights : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DenseInstance {
    OperatorKind kind = OperatorKind::first_kind;
    Eigen::MatrixXd matrix;
    Eigen::VectorXd rhs;
    Eigen::VectorXd initial;
    std::optional<Eigen::VectorXd> exact_solution;
    std::uint64_t basis_seed = 0;
};

// Orthogonal basis from seeded Householder reflector products; seed 0 is the
// identity path (the lift stays diagonal).
inline Eigen::MatrixXd householder_basis(Eigen::Index dim, std::uint64_t seed) {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(dim, dim);
    if (seed == 0) return Q;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
        double nrm2 = 0.0;
        do {
            for (Eigen::Index i = 0; i < dim; ++i) v[i] = gauss(rng);
            nrm2 = v.squaredNorm();
        } while (nrm2 == 0.0);
        Q -= v * ((2.0 / nrm2) * (v.transpose() * Q)).eval();
    }
    return Q;
}

// Conjugate the spectral problem into dense coordinates.  Weights are
// realized as multiplicities: each spectrum point with integer mass m is
// repeated m times, its coefficient copied to every slot, so Euclidean norms
// of lifted vectors equal the weighted spectral norms.  Non-integer masses
// have no such realization and are rejected.
inline DenseInstance lift(const engine::ProblemInstance& problem, std::uint64_t seed,
                          int size_cap = 256) {
    const SpectralOperator& A = problem.op;
    std::vector<int> multiplicity(A.size());
    long total = 0;
    for (std::size_t i = 0; i < A.size(); ++i) {
        const double w = A.weight(i);
        const double r = std::round(w);
        if (!(r >= 1.0) || std::abs(w - r) > 1e-12)
            throw UnsupportedWeights(
                "lift: weight " + std::to_string(w) +
                " is not a positive integer multiplicity");
        multiplicity[i] = static_cast<int>(r);
        total += multiplicity[i];
    }
    if (total > size_cap)
        throw std::invalid_argument("lift: expanded dimension " + std::to_string(total) +
                                    " exceeds size cap " + std::to_string(size_cap));

    const Eigen::Index dim = static_cast<Eigen::Index>(total);
    Eigen::VectorXd diag(dim);
    const auto expand = [&](const SpectralVector& x) {
        Eigen::VectorXd out(dim);
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < A.size(); ++i)
            for (int m = 0; m < multiplicity[i]; ++m) out[at++] = x[i];
        return out;
    };
    {
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < A.size(); ++i)
            for (int m = 0; m < multiplicity[i]; ++m) diag[at++] = A.lambda(i);
    }

    const Eigen::MatrixXd Q = householder_basis(dim, seed);
    Eigen::MatrixXd M = Q * diag.asDiagonal() * Q.transpose();
    M = ((M + M.transpose()) / 2.0).eval();

    DenseInstance inst;
    inst.kind = A.kind();
    inst.basis_seed = seed;
    inst.matrix = std::move(M);
    inst.rhs = Q * expand(problem.rhs);
    inst.initial = Q * expand(problem.initial);
    if (problem.exact_solution) inst.exact_solution = Q * expand(*problem.exact_solution);
    return inst;
}

namespace detail_oracle {

inline Eigen::VectorXd matrix_power_apply(const Eigen::MatrixXd& M, int k,
                                          const Eigen::VectorXd& x) {
    Eigen::VectorXd v = x;
    for (int j = 0; j < k; ++j) v = M * v;
    return v;
}

// Symmetric positive definite solve with one step of iterative refinement.
// Under admissibility the implicit system matrices have eigenvalues in
// [1, 1 + alpha*||A||^k], so a single refinement holds the per-step residual
// far below the 1e-11 contract.
class RefinedSolver {
public:
    explicit RefinedSolver(const Eigen::MatrixXd& S) : S_(S), llt_(S) {
        if (llt_.info() != Eigen::Success)
            throw std::runtime_error("oracle: symmetric factorization failed "
                                     "(system matrix not positive definite)");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        Eigen::VectorXd x = llt_.solve(b);
        const Eigen::VectorXd r = b - S_ * x;
        x += llt_.solve(r);
        if (!x.allFinite())
            throw std::runtime_error("oracle: linear solve overflowed");
        return x;
    }

private:
    Eigen::MatrixXd S_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

} // namespace detail_oracle

struct DenseRunResult {
    std::vector<engine::DiagnosticsRow> rows;
    Eigen::VectorXd final_iterate;
    std::vector<double> error_track;
};

// Run the scheme on the dense instance for n_max steps, recording the same
// step indices as the spectral engine.  Explicit schemes advance by matrix
// polynomials, implicit schemes by factorized solves of their step systems:
//   implicit-euler    (I + a M^k) x' = x + a M^{k-1} y
//   implicit-cayley   (I + a M^k) x' = (I - a M^k) x + 2a M^{k-1} y
//   implicit-squared  (I + a^2 M^{2k}) x' = (I - a M^k)^2 x + 2a M^{k-1} y
inline DenseRunResult run_dense(const DenseInstance& inst, const schemes::SchemeSpec& scheme,
                                long n_max) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    if (n_max < 0) throw std::invalid_argument("run_dense: n_max must be >= 0");
    if (scheme.first_kind() != (inst.kind == OperatorKind::first_kind))
        throw std::invalid_argument("run_dense: scheme kind does not match the instance");

    const MatrixXd& M = inst.matrix;
    const Eigen::Index dim = M.rows();
    const double a = scheme.alpha;
    const int k = scheme.k;

    // Constant drive term and the per-step map.
    VectorXd drive = VectorXd::Zero(dim);
    std::optional<detail_oracle::RefinedSolver> solver;
    MatrixXd Mk;
    if (scheme.implicit() || scheme.family == schemes::SchemeFamily::explicit_monomial) {
        Mk = M;
        for (int j = 1; j < k; ++j) Mk = (Mk * M).eval();
    }
    switch (scheme.family) {
    case schemes::SchemeFamily::second_kind_direct:
        drive = inst.rhs;
        break;
    case schemes::SchemeFamily::explicit_power: {
        VectorXd acc = inst.rhs, pw = inst.rhs;
        for (int j = 1; j < k; ++j) {
            pw = (pw - a * (M * pw)).eval();
            acc += pw;
        }
        drive = a * acc;
        break;
    }
    case schemes::SchemeFamily::explicit_monomial:
        drive = a * detail_oracle::matrix_power_apply(M, k - 1, inst.rhs);
        break;
    case schemes::SchemeFamily::implicit_euler:
        drive = a * detail_oracle::matrix_power_apply(M, k - 1, inst.rhs);
        solver.emplace(MatrixXd::Identity(dim, dim) + a * Mk);
        break;
    case schemes::SchemeFamily::implicit_cayley:
        drive = 2.0 * a * detail_oracle::matrix_power_apply(M, k - 1, inst.rhs);
        solver.emplace(MatrixXd::Identity(dim, dim) + a * Mk);
        break;
    case schemes::SchemeFamily::implicit_squared:
        drive = 2.0 * a * detail_oracle::matrix_power_apply(M, k - 1, inst.rhs);
        solver.emplace(MatrixXd::Identity(dim, dim) + (a * a) * (Mk * Mk));
        break;
    }

    const auto step = [&](const VectorXd& x) -> VectorXd {
        switch (scheme.family) {
        case schemes::SchemeFamily::second_kind_direct:
            return M * x + drive;
        case schemes::SchemeFamily::explicit_power: {
            VectorXd w = x;
            for (int j = 0; j < k; ++j) w = (w - a * (M * w)).eval();
            return w + drive;
        }
        case schemes::SchemeFamily::explicit_monomial:
            return x - a * (Mk * x) + drive;
        case schemes::SchemeFamily::implicit_euler:
            return solver->solve(x + drive);
        case schemes::SchemeFamily::implicit_cayley:
            return solver->solve(x - a * (Mk * x) + drive);
        case schemes::SchemeFamily::implicit_squared: {
            VectorXd w = x - a * (Mk * x);
            w = (w - a * (Mk * w)).eval();
            return solver->solve(w + drive);
        }
        }
        throw std::logic_error("run_dense: unreachable");
    };

    const auto residual = [&](const VectorXd& x) -> VectorXd {
        if (scheme.family == schemes::SchemeFamily::second_kind_direct)
            return x - M * x - inst.rhs;
        return M * x - inst.rhs;
    };

    const std::vector<long> steps = engine::recorded_steps(n_max);
    DenseRunResult out;
    out.rows.reserve(steps.size());
    if (inst.exact_solution) out.error_track.reserve(n_max + 1);

    VectorXd x = inst.initial;
    std::size_t next_record = 0;
    for (long n = 0; n <= n_max; ++n) {
        if (inst.exact_solution) out.error_track.push_back((x - *inst.exact_solution).norm());
        const bool record = next_record < steps.size() && steps[next_record] == n;
        VectorXd x_next;
        if (n < n_max || record) x_next = step(x);
        if (record) {
            engine::DiagnosticsRow row;
            row.n = n;
            if (inst.exact_solution) row.error = (x - *inst.exact_solution).norm();
            row.residual = residual(x).norm();
            row.correction = (x_next - x).norm();
            out.rows.push_back(row);
            ++next_record;
        }
        if (n < n_max) x = std::move(x_next);
    }
    out.final_iterate = std::move(x);
    return out;
}

} // namespace illposed::oracle
