#pragma once

// Iteration engines over the spectral model.
//
// Second kind:  x_{n+1} = B x_n + f
// First kind:   x_{n+1} = phi(A) x_n + psi(A) y
//
// Runs record the full diagnostic set (error, residual, correction, and their
// weakened-norm variants), exactly and under per-step perturbations of the
// right-hand side; the sequence-space functionals sigma_n, the error budget
// mu_n + c*||sigma_n||*delta, and the quasi-convergence stopping rule live
// here as well.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "illposed/schemes.hpp"
#include "illposed/spectral.hpp"

namespace illposed::engine {

// ---------------------------------------------------------------------------
// Problem statement

struct ProblemInstance {
    SpectralOperator op;
    SpectralVector rhs;       // f for second kind, y for first kind
    SpectralVector initial;   // x_0
    std::optional<SpectralVector> exact_solution;  // x_*

    ProblemInstance(SpectralOperator op_, SpectralVector rhs_, SpectralVector initial_,
                    std::optional<SpectralVector> exact = {})
        : op(std::move(op_)), rhs(std::move(rhs_)), initial(std::move(initial_)),
          exact_solution(std::move(exact)) {
        detail::require_associated(op, rhs, "ProblemInstance rhs");
        detail::require_associated(op, initial, "ProblemInstance initial");
        if (exact_solution) {
            detail::require_associated(op, *exact_solution, "ProblemInstance exact_solution");
            SpectralVector r = *exact_solution;
            for (std::size_t i = 0; i < op.size(); ++i) {
                const double xs = (*exact_solution)[i];
                r[i] = op.kind() == OperatorKind::second_kind
                           ? xs - op.lambda(i) * xs - rhs[i]
                           : op.lambda(i) * xs - rhs[i];
            }
            const double res = norm(r, op);
            const double scale = 1.0 + norm(*exact_solution, op);
            if (res > 1e-10 * scale)
                throw std::invalid_argument(
                    "ProblemInstance: exact_solution does not satisfy the equation "
                    "(residual " + std::to_string(res) + ")");
        }
    }
};

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnosticsRow {
    long n = 0;
    std::optional<double> error;              // ||x_n - x_*||
    double residual = 0.0;                    // ||x_n - Bx_n - f|| resp. ||Ax_n - y||
    double correction = 0.0;                  // ||x_{n+1} - x_n||
    std::optional<double> weakened_error;     // ||pi(A)(x_n - x_*)||
    std::optional<double> weakened_residual;  // ||pi(A) residual||
    std::optional<double> bound;              // mu_n + c*Delta_n, noisy runs with x_*
    std::optional<double> deviation;          // ||x~_n - x_n||, noisy runs
};

struct RunDiagnostics {
    std::vector<DiagnosticsRow> rows;
    SpectralVector final_iterate;
    // Full per-step tracks (index = n, length n_max+1), kept besides the
    // thinned rows because the stopping rule and the scans consume every step.
    std::vector<double> error_track;      // present when x_* is known
    std::vector<double> deviation_track;  // present for noisy runs
};

// Steps at which diagnostics are recorded: every step up to 1000, then
// geometrically thinned by the factor 1.05, plus the final step.  Long
// asymptotic runs must not produce gigabyte tables.
inline std::vector<long> recorded_steps(long n_max) {
    if (n_max < 0) throw std::invalid_argument("recorded_steps: n_max must be >= 0");
    std::vector<long> out;
    for (long n = 0; n <= std::min<long>(n_max, 1000); ++n) out.push_back(n);
    long n = 1000;
    while (n < n_max) {
        n = std::max(n + 1, static_cast<long>(std::ceil(static_cast<double>(n) * 1.05)));
        if (n < n_max) out.push_back(n);
    }
    if (n_max > 1000) out.push_back(n_max);
    return out;
}

// ---------------------------------------------------------------------------
// Sequence spaces and noise

// The space the error sequence (delta_n) is measured in; its partial-sum
// functionals sigma_n control the accumulated data error.
struct SequenceSpace {
    enum class Kind { lp, weighted_m };

    Kind kind = Kind::lp;
    double p = std::numeric_limits<double>::infinity();  // lp exponent, 1 <= p <= inf
    double nu = 1.0;                                     // weight exponent, omega_k = (k+1)^nu

    static SequenceSpace lp(double p) {
        if (!(p >= 1.0)) throw std::invalid_argument("SequenceSpace::lp: p must be >= 1");
        SequenceSpace s;
        s.kind = Kind::lp;
        s.p = p;
        return s;
    }
    static SequenceSpace weighted_m(double nu) {
        if (!(nu > 0.0))
            throw std::invalid_argument("SequenceSpace::weighted_m: nu must be positive");
        SequenceSpace s;
        s.kind = Kind::weighted_m;
        s.nu = nu;
        return s;
    }

    friend bool operator==(const SequenceSpace&, const SequenceSpace&) = default;
};

// ||sigma_n||: the norm of the functional summing the first n terms.
//   l_p:   n^(1/p') with 1/p + 1/p' = 1  (p = 1 gives 1 for n >= 1; p = inf gives n)
//   m(w):  sum_{k=0}^{n-1} (k+1)^(-nu)
inline double sigma_norm(const SequenceSpace& space, long n) {
    if (n < 0) throw std::invalid_argument("sigma_norm: n must be >= 0");
    if (n == 0) return 0.0;
    if (space.kind == SequenceSpace::Kind::lp) {
        if (std::isinf(space.p)) return static_cast<double>(n);
        if (space.p == 1.0) return 1.0;
        return std::pow(static_cast<double>(n), 1.0 - 1.0 / space.p);
    }
    double acc = 0.0;
    for (long k = 0; k < n; ++k) acc += std::pow(static_cast<double>(k + 1), -space.nu);
    return acc;
}

// Perturbation model: at step n the right-hand side is displaced by exactly
// delta_n along a seed-reproducible uniform direction on the unit sphere of
// the weighted norm.
class NoiseModel {
public:
    NoiseModel(std::vector<double> deltas, SequenceSpace space, std::uint64_t direction_seed)
        : deltas_(std::move(deltas)), space_(space), seed_(direction_seed) {
        if (deltas_.empty()) throw std::invalid_argument("NoiseModel: empty delta sequence");
        for (double d : deltas_)
            if (!(d >= 0.0) || !std::isfinite(d))
                throw std::invalid_argument("NoiseModel: deltas must be nonnegative");
    }

    // The last entry repeats past the end of the list.
    double delta_at(long n) const {
        const auto i = static_cast<std::size_t>(n);
        return i < deltas_.size() ? deltas_[i] : deltas_.back();
    }
    const std::vector<double>& deltas() const noexcept { return deltas_; }
    const SequenceSpace& space() const noexcept { return space_; }
    std::uint64_t direction_seed() const noexcept { return seed_; }

private:
    std::vector<double> deltas_;
    SequenceSpace space_;
    std::uint64_t seed_;
};

// c = max over Sp A of |psi(lambda)|; the amplification of data errors.  The
// direct second-kind iteration forwards the perturbation unchanged (c = 1).
inline double noise_amplification(const schemes::SchemeSpec& scheme,
                                  const SpectralOperator& A) {
    if (!scheme.first_kind()) return 1.0;
    double c = 0.0;
    for (const auto& p : A.points()) c = std::max(c, std::abs(schemes::psi(scheme, p.lambda)));
    return c;
}

// ---------------------------------------------------------------------------
// Iteration core

namespace detail_engine {

struct StepKernel {
    std::vector<double> filter;  // multiplier of x_n per point
    std::vector<double> gain;    // multiplier of the (possibly perturbed) rhs per point
    bool second_kind = false;
};

inline StepKernel make_kernel(const SpectralOperator& A,
                              const std::optional<schemes::SchemeSpec>& scheme) {
    StepKernel kern;
    kern.second_kind = !scheme || !scheme->first_kind();
    kern.filter.resize(A.size());
    kern.gain.resize(A.size());
    if (kern.second_kind) {
        if (A.kind() != OperatorKind::second_kind)
            throw std::invalid_argument("iterate: second-kind scheme on a first-kind operator");
        for (std::size_t i = 0; i < A.size(); ++i) {
            kern.filter[i] = A.lambda(i);
            kern.gain[i] = 1.0;
        }
        return kern;
    }
    if (A.kind() != OperatorKind::first_kind)
        throw std::invalid_argument("iterate: first-kind scheme on a second-kind operator");
    const auto rep = schemes::check_admissibility(*scheme, A);
    if (!rep.ok()) {
        std::string msg = "iterate: scheme '" + schemes::to_token(*scheme) +
                          "' inadmissible on this spectrum:";
        if (!rep.condition_b_ok) msg += " condition b) |phi| <= 1 fails;";
        if (!rep.condition_c_ok) msg += " condition c) phi(lambda) = -1 at an eigenvalue;";
        msg += " offending lambdas:";
        for (double l : rep.offending_lambdas) msg += " " + std::to_string(l);
        throw std::invalid_argument(msg);
    }
    for (std::size_t i = 0; i < A.size(); ++i) {
        kern.filter[i] = schemes::phi(*scheme, A.lambda(i));
        kern.gain[i] = schemes::psi(*scheme, A.lambda(i));
    }
    return kern;
}

// Residual of the current iterate against the unperturbed equation.
inline SpectralVector residual_vector(const StepKernel& kern, const SpectralOperator& A,
                                      const SpectralVector& x, const SpectralVector& rhs) {
    SpectralVector r = x;
    for (std::size_t i = 0; i < A.size(); ++i) {
        r[i] = kern.second_kind ? x[i] - A.lambda(i) * x[i] - rhs[i]
                                : A.lambda(i) * x[i] - rhs[i];
    }
    return r;
}

inline double weighted_norm_of(const std::vector<double>& v, const SpectralOperator& A) {
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += A.weight(i) * v[i] * v[i];
    return std::sqrt(acc);
}

} // namespace detail_engine

// Shared driver.  When `noise` is set the run is the perturbed iteration; an
// exact twin trajectory is advanced alongside it so that the deviation
// ||x~_n - x_n|| and the budget mu_n + c*Delta_n are measured, not bounded.
inline RunDiagnostics run_iteration(const ProblemInstance& problem,
                                    const std::optional<schemes::SchemeSpec>& scheme,
                                    long n_max, const std::optional<ScalarFunction>& pi,
                                    const NoiseModel* noise) {
    if (n_max < 0) throw std::invalid_argument("run_iteration: n_max must be >= 0");
    const SpectralOperator& A = problem.op;
    const std::size_t dim = A.size();
    const auto kern = detail_engine::make_kernel(A, scheme);
    const std::optional<std::vector<double>> pi_table =
        pi ? std::optional<std::vector<double>>(pi->table_on(A)) : std::nullopt;

    const double c_amp =
        scheme ? noise_amplification(*scheme, A) : 1.0;

    SpectralVector x = problem.initial;   // the (possibly noisy) trajectory
    SpectralVector twin = problem.initial;  // exact twin, used under noise
    std::mt19937_64 rng(noise ? noise->direction_seed() : 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> direction(dim);

    const std::vector<long> steps = recorded_steps(n_max);
    RunDiagnostics out;
    out.rows.reserve(steps.size());
    if (problem.exact_solution) out.error_track.reserve(n_max + 1);
    if (noise) out.deviation_track.reserve(n_max + 1);

    double accumulated_delta = 0.0;  // Delta_n = delta_0 + ... + delta_{n-1}
    std::size_t next_record = 0;

    for (long n = 0; n <= n_max; ++n) {
        // Per-step scalars available for every n.
        std::optional<double> err;
        if (problem.exact_solution) {
            err = norm(x - *problem.exact_solution, A);
            out.error_track.push_back(*err);
        }
        std::optional<double> dev;
        if (noise) {
            dev = norm(x - twin, A);
            out.deviation_track.push_back(*dev);
        }

        const bool record = next_record < steps.size() && steps[next_record] == n;
        const bool need_step = n < n_max || record;

        SpectralVector x_next = x;
        SpectralVector twin_next = twin;
        if (need_step) {
            SpectralVector rhs_n = problem.rhs;
            if (noise) {
                const double delta_n = noise->delta_at(n);
                double nrm = 0.0;
                do {
                    for (std::size_t i = 0; i < dim; ++i) direction[i] = gauss(rng);
                    nrm = detail_engine::weighted_norm_of(direction, A);
                } while (nrm == 0.0);
                for (std::size_t i = 0; i < dim; ++i)
                    rhs_n[i] += delta_n * direction[i] / nrm;
            }
            for (std::size_t i = 0; i < dim; ++i) {
                x_next[i] = kern.filter[i] * x[i] + kern.gain[i] * rhs_n[i];
                if (noise)
                    twin_next[i] = kern.filter[i] * twin[i] + kern.gain[i] * problem.rhs[i];
            }
        }

        if (record) {
            DiagnosticsRow row;
            row.n = n;
            row.error = err;
            row.deviation = dev;
            // In the exact second-kind run the residual coincides with the
            // reversed correction; computing it as x - x_next makes the
            // identity of the two norms bit-exact.
            SpectralVector rv = (kern.second_kind && !noise)
                                    ? x - x_next
                                    : detail_engine::residual_vector(kern, A, x, problem.rhs);
            row.residual = norm(rv, A);
            row.correction = norm(x_next - x, A);
            if (pi_table) {
                if (problem.exact_solution) {
                    SpectralVector e = x - *problem.exact_solution;
                    for (std::size_t i = 0; i < dim; ++i) e[i] *= (*pi_table)[i];
                    row.weakened_error = norm(e, A);
                }
                SpectralVector wr = rv;
                for (std::size_t i = 0; i < dim; ++i) wr[i] *= (*pi_table)[i];
                row.weakened_residual = norm(wr, A);
            }
            if (noise && problem.exact_solution) {
                const double mu_n = norm(twin - *problem.exact_solution, A);
                row.bound = mu_n + c_amp * accumulated_delta;
            }
            out.rows.push_back(row);
            ++next_record;
        }

        if (n < n_max) {
            if (noise) accumulated_delta += noise->delta_at(n);
            x = std::move(x_next);
            twin = std::move(twin_next);
        }
    }
    out.final_iterate = std::move(x);
    return out;
}

// x_{n+1} = B x_n + f for n_max steps.
inline RunDiagnostics iterate_second_kind(const ProblemInstance& problem, long n_max,
                                          const std::optional<ScalarFunction>& pi = {}) {
    return run_iteration(problem, std::nullopt, n_max, pi, nullptr);
}

// x_{n+1} = phi(A) x_n + psi(A) y for n_max steps; the scheme must pass
// admissibility conditions b) and c) on the operator's spectrum.
inline RunDiagnostics iterate_first_kind(const ProblemInstance& problem,
                                         const schemes::SchemeSpec& scheme, long n_max,
                                         const std::optional<ScalarFunction>& pi = {}) {
    if (!scheme.first_kind())
        throw std::invalid_argument("iterate_first_kind: scheme is not a first-kind filter");
    return run_iteration(problem, scheme, n_max, pi, nullptr);
}

// Perturbed iteration x~_{n+1} = phi(A) x~_n + psi(A) y_n with
// ||y_n - y|| = delta_n exactly.  A missing scheme means the direct
// second-kind iteration x~_{n+1} = B x~_n + f_n.
inline RunDiagnostics iterate_noisy(const ProblemInstance& problem,
                                    const std::optional<schemes::SchemeSpec>& scheme,
                                    const NoiseModel& noise, long n_max,
                                    const std::optional<ScalarFunction>& pi = {}) {
    return run_iteration(problem, scheme, n_max, pi, &noise);
}

// ---------------------------------------------------------------------------
// Error budgets and stopping

// sigma_0 .. sigma_N in one pass (the weighted space is a prefix sum).
inline std::vector<double> sigma_norms_upto(const SequenceSpace& space, long N) {
    if (N < 0) throw std::invalid_argument("sigma_norms_upto: N must be >= 0");
    std::vector<double> out(static_cast<std::size_t>(N) + 1);
    if (space.kind == SequenceSpace::Kind::weighted_m) {
        double acc = 0.0;
        out[0] = 0.0;
        for (long n = 1; n <= N; ++n) {
            acc += std::pow(static_cast<double>(n), -space.nu);
            out[static_cast<std::size_t>(n)] = acc;
        }
    } else {
        for (long n = 0; n <= N; ++n) out[static_cast<std::size_t>(n)] = sigma_norm(space, n);
    }
    return out;
}

// The bound sequence mu_n + c * ||sigma_n|| * delta.
inline std::vector<double> error_budget(const std::vector<double>& mu,
                                        const SequenceSpace& space, double delta, double c) {
    if (!(delta >= 0.0)) throw std::invalid_argument("error_budget: delta must be >= 0");
    if (!(c > 0.0)) throw std::invalid_argument("error_budget: c must be positive");
    if (mu.empty()) return {};
    const auto sig = sigma_norms_upto(space, static_cast<long>(mu.size()) - 1);
    std::vector<double> out(mu.size());
    for (std::size_t n = 0; n < mu.size(); ++n) out[n] = mu[n] + c * sig[n] * delta;
    return out;
}

// Largest N such that   delta < (mu_n - mu_{n+1}) / (c (||sigma_{n+1}|| - ||sigma_n||))
// holds for every n < N, i.e. the budget still decreases at each of those
// steps.  Evaluated in product form so flat sigma differences are handled.
inline long quasi_stop(const std::vector<double>& mu, const SequenceSpace& space, double delta,
                       double c) {
    if (mu.size() < 2) throw std::invalid_argument("quasi_stop: need at least two mu values");
    if (!(delta >= 0.0)) throw std::invalid_argument("quasi_stop: delta must be >= 0");
    if (!(c > 0.0)) throw std::invalid_argument("quasi_stop: c must be positive");
    const long last = static_cast<long>(mu.size()) - 1;
    const auto sig = sigma_norms_upto(space, last);
    for (long n = 0; n < last; ++n) {
        const double dmu = mu[n] - mu[n + 1];
        const double dsigma = sig[static_cast<std::size_t>(n) + 1] - sig[static_cast<std::size_t>(n)];
        if (!(c * delta * dsigma < dmu)) return n;
    }
    return last;
}

// ---------------------------------------------------------------------------
// Semi-convergence scan

struct ScanPoint {
    double delta = 0.0;
    long best_n = 0;
    double best_error = 0.0;
};

// For each noise level run the perturbed iteration with delta_n = delta and
// report where the true error over n <= n_max bottoms out.
inline std::vector<ScanPoint> semiconvergence_scan(const ProblemInstance& problem,
                                                   const std::optional<schemes::SchemeSpec>& scheme,
                                                   const SequenceSpace& space,
                                                   const std::vector<double>& deltas, long n_max,
                                                   std::uint64_t seed) {
    if (!problem.exact_solution)
        throw std::invalid_argument("semiconvergence_scan: exact solution required");
    std::vector<ScanPoint> out;
    out.reserve(deltas.size());
    for (double delta : deltas) {
        const NoiseModel noise({delta}, space, seed);
        const RunDiagnostics diag = run_iteration(problem, scheme, n_max, {}, &noise);
        ScanPoint pt;
        pt.delta = delta;
        pt.best_n = 0;
        pt.best_error = diag.error_track.front();
        for (long n = 0; n < static_cast<long>(diag.error_track.size()); ++n) {
            if (diag.error_track[static_cast<std::size_t>(n)] < pt.best_error) {
                pt.best_error = diag.error_track[static_cast<std::size_t>(n)];
                pt.best_n = n;
            }
        }
        out.push_back(pt);
    }
    return out;
}

} // namespace illposed::engine
