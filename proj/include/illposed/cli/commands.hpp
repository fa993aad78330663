#pragma once

// Experiment commands behind the illposed-iter CLI: each takes an
// interpreted config, runs the engines or rate computations, and writes one
// CSV table.  Sweep rows may execute concurrently up to a --jobs bound;
// results are gathered and written in deterministic order regardless of
// completion order.
//
// Exit codes: 0 success, 1 I/O, 2 validation/admissibility, 3 numerical
// failure.

#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "illposed/cli/config.hpp"
#include "illposed/engine.hpp"
#include "illposed/fit.hpp"
#include "illposed/oracle.hpp"
#include "illposed/table_io.hpp"

namespace illposed::cli {

struct CommandOptions {
    std::optional<std::string> out_override;
    int jobs = 1;
    bool dry_run = false;
    std::ostream* log = &std::cerr;
};

inline constexpr int exit_ok = 0;
inline constexpr int exit_io = 1;
inline constexpr int exit_validation = 2;
inline constexpr int exit_numerical = 3;

namespace detail_cmd {

inline void parallel_for(int jobs, std::size_t count,
                         const std::function<void(std::size_t)>& body) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

inline long median(std::vector<long> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// 0, 1, and about ten log-spaced integers per decade up to n_max.
inline std::vector<long> rate_grid(long n_max) {
    std::vector<long> ns{0};
    if (n_max >= 1) ns.push_back(1);
    double v = 1.0;
    while (true) {
        v *= std::pow(10.0, 0.1);
        const long n = static_cast<long>(std::llround(v));
        if (n > n_max) break;
        if (n > ns.back()) ns.push_back(n);
    }
    if (ns.back() < n_max) ns.push_back(n_max);
    return ns;
}

inline double rel_gap(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

struct BuiltProblem {
    SpectralOperator op;
    engine::ProblemInstance problem;
    std::optional<schemes::SchemeSpec> scheme;  // empty: direct second-kind
    std::optional<ScalarFunction> pi;
};

inline BuiltProblem build_problem(const ExperimentConfig& cfg) {
    if (!cfg.op) throw std::invalid_argument("this experiment needs an [operator] section");
    std::optional<io::SpectralTable> table;
    if (cfg.op->table_path) {
        std::ifstream in(*cfg.op->table_path, std::ios::binary);
        if (!in)
            throw std::ios_base::failure("cannot read operator table '" + *cfg.op->table_path +
                                         "'");
        table = io::read_spectral_table(in);
    }
    const io::SpectralTable* tbl = table ? &*table : nullptr;
    SpectralOperator op = cfg.op->build(tbl);

    std::optional<SpectralVector> x_star;
    if (cfg.x_star) x_star = cfg.x_star->build(op, tbl);

    SpectralVector rhs = SpectralVector::zero(op.size());
    const bool rhs_from_exact = !cfg.rhs || cfg.rhs->kind == VectorSpec::Kind::from_exact;
    if (rhs_from_exact) {
        if (!x_star)
            throw std::invalid_argument("rhs = from-exact needs problem.x_star");
        for (std::size_t i = 0; i < op.size(); ++i) {
            const double xs = (*x_star)[i];
            rhs[i] = op.kind() == OperatorKind::second_kind ? xs - op.lambda(i) * xs
                                                            : op.lambda(i) * xs;
        }
    } else {
        rhs = cfg.rhs->build(op, tbl);
    }

    std::optional<schemes::SchemeSpec> scheme;
    if (!cfg.scheme_list.empty()) {
        scheme = cfg.scheme_list.front();
        if (!scheme->first_kind()) scheme.reset();  // direct second-kind path
    }
    if (op.kind() == OperatorKind::first_kind && !scheme)
        throw std::invalid_argument("a first-kind operator needs a first-kind scheme token");
    if (op.kind() == OperatorKind::second_kind && scheme)
        throw std::invalid_argument("a second-kind operator runs with 'second-kind' only");

    std::optional<ScalarFunction> pi;
    if (cfg.pi) {
        pi = cfg.pi->build();
        if (!is_weakening_norm(*pi, op))
            throw std::invalid_argument(
                "functions.pi vanishes on a spectrum point; not a weakening norm");
    }

    engine::ProblemInstance problem(op, rhs, cfg.x0.build(op, tbl), x_star);
    return BuiltProblem{std::move(op), std::move(problem), scheme, pi};
}

inline int write_file(const std::string& path, const std::string& content, std::ostream& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        log << "illposed-iter: cannot open '" << path << "' for writing\n";
        return exit_io;
    }
    out << content;
    out.flush();
    if (!out) {
        log << "illposed-iter: short write to '" << path << "'\n";
        return exit_io;
    }
    return exit_ok;
}

} // namespace detail_cmd

// ---------------------------------------------------------------------------
// run

inline int cmd_run(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const auto built = detail_cmd::build_problem(cfg);
    engine::RunDiagnostics diag;
    if (!cfg.noise.deltas.empty()) {
        const engine::NoiseModel noise(cfg.noise.deltas, cfg.noise.space, cfg.noise.seed);
        diag = engine::iterate_noisy(built.problem, built.scheme, noise, cfg.n_max, built.pi);
    } else if (built.scheme) {
        diag = engine::iterate_first_kind(built.problem, *built.scheme, cfg.n_max, built.pi);
    } else {
        diag = engine::iterate_second_kind(built.problem, cfg.n_max, built.pi);
    }
    std::ostringstream os;
    io::write_diagnostics_csv(os, diag.rows);
    return detail_cmd::write_file(opts.out_override.value_or(cfg.resolved_output()), os.str(),
                                  *opts.log);
}

// ---------------------------------------------------------------------------
// rates

inline int cmd_rates(const ExperimentConfig& cfg, const CommandOptions& opts) {
    if (cfg.scheme_list.empty())
        throw std::invalid_argument("rates needs a scheme token");
    if (cfg.theta.kind != FunctionSpec::Kind::power)
        throw std::invalid_argument("rates needs theta = power s=..");
    if (!cfg.interval) throw std::invalid_argument("rates needs rates.interval");
    const schemes::SchemeSpec scheme = cfg.scheme_list.front();
    const ScalarFunction theta = cfg.theta.build();
    const double M = cfg.interval->hi;
    const auto asym = schemes::gamma_asymptotic(scheme, cfg.theta.s);

    const std::vector<long> ns = detail_cmd::rate_grid(cfg.n_max);
    std::vector<std::string> lines(ns.size());
    detail_cmd::parallel_for(opts.jobs, ns.size(), [&](std::size_t i) {
        const long n = ns[i];
        std::ostringstream row;
        row << n << ',' << io::format_double(schemes::gamma_n_numeric(scheme, theta,
                                                                      *cfg.interval, n));
        const auto closed = schemes::gamma_n_closed_form(scheme, cfg.theta.s, M, n);
        row << ',' << (closed ? io::format_double(*closed) : std::string());
        row << ','
            << (asym && n >= 1 ? io::format_double(asym->constant *
                                                   std::pow(static_cast<double>(n), -asym->order))
                               : std::string());
        lines[i] = row.str();
    });

    std::ostringstream os;
    os << "n,gamma_numeric,gamma_closed_form,gamma_asymptotic\n";
    for (const auto& l : lines) os << l << '\n';
    return detail_cmd::write_file(opts.out_override.value_or(cfg.resolved_output()), os.str(),
                                  *opts.log);
}

// ---------------------------------------------------------------------------
// compare

inline int cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opts) {
    if (cfg.scheme_list.size() < 2)
        throw std::invalid_argument("compare needs at least two scheme tokens");
    if (cfg.theta.kind != FunctionSpec::Kind::power)
        throw std::invalid_argument("compare needs theta = power s=..");
    if (!cfg.interval) throw std::invalid_argument("compare needs rates.interval");
    const ScalarFunction theta = cfg.theta.build();

    const std::vector<long> ns = detail_cmd::rate_grid(cfg.n_max);
    const std::size_t n_schemes = cfg.scheme_list.size();
    std::vector<std::vector<double>> gamma(n_schemes, std::vector<double>(ns.size()));
    detail_cmd::parallel_for(opts.jobs, n_schemes * ns.size(), [&](std::size_t task) {
        const std::size_t s = task / ns.size();
        const std::size_t i = task % ns.size();
        gamma[s][i] = schemes::gamma_n_numeric(cfg.scheme_list[s], theta, *cfg.interval,
                                               ns[i]);
    });

    // Fit each scheme over the last decade of the grid.
    const long fit_from = std::max<long>(2, cfg.n_max / 10);
    std::vector<PowerLawFit> fits(n_schemes);
    for (std::size_t s = 0; s < n_schemes; ++s) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < ns.size(); ++i) {
            if (ns[i] >= fit_from && gamma[s][i] > 0.0) {
                xs.push_back(static_cast<double>(ns[i]));
                ys.push_back(gamma[s][i]);
            }
        }
        fits[s] = fit_power_law(xs, ys);
    }

    std::ostringstream os;
    os << "n";
    for (const auto& s : cfg.scheme_list) os << ',' << schemes::to_token(s);
    os << '\n';
    for (std::size_t i = 0; i < ns.size(); ++i) {
        os << ns[i];
        for (std::size_t s = 0; s < n_schemes; ++s) os << ',' << io::format_double(gamma[s][i]);
        os << '\n';
    }
    os << "fit_C";
    for (const auto& f : fits) os << ',' << io::format_double(f.constant);
    os << '\n';
    os << "fit_p";
    for (const auto& f : fits) os << ',' << io::format_double(f.order);
    os << '\n';
    return detail_cmd::write_file(opts.out_override.value_or(cfg.resolved_output()), os.str(),
                                  *opts.log);
}

// ---------------------------------------------------------------------------
// noise

inline int cmd_noise(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const auto built = detail_cmd::build_problem(cfg);
    if (!built.problem.exact_solution)
        throw std::invalid_argument("noise needs problem.x_star (the scan measures true error)");
    if (cfg.noise.deltas.empty())
        throw std::invalid_argument("noise needs a noise.delta sweep list");

    const double c = built.scheme ? engine::noise_amplification(*built.scheme, built.op) : 1.0;

    // Measured exact decay, reused as the majorant mu_n of the stopping rule.
    const engine::RunDiagnostics exact =
        built.scheme ? engine::iterate_first_kind(built.problem, *built.scheme, cfg.n_max)
                     : engine::iterate_second_kind(built.problem, cfg.n_max);
    const std::vector<double>& mu = exact.error_track;

    const std::size_t n_deltas = cfg.noise.deltas.size();
    const std::size_t n_seeds = static_cast<std::size_t>(cfg.noise.seeds);
    std::vector<double> best_err(n_deltas * n_seeds);
    std::vector<long> best_n(n_deltas * n_seeds);
    std::vector<double> err_at_stop(n_deltas * n_seeds);
    std::vector<long> stop_n(n_deltas);

    for (std::size_t d = 0; d < n_deltas; ++d)
        stop_n[d] = engine::quasi_stop(mu, cfg.noise.space, cfg.noise.deltas[d], c);

    detail_cmd::parallel_for(opts.jobs, n_deltas * n_seeds, [&](std::size_t task) {
        const std::size_t d = task / n_seeds;
        const std::size_t j = task % n_seeds;
        const engine::NoiseModel noise({cfg.noise.deltas[d]}, cfg.noise.space,
                                       cfg.noise.seed + j);
        const engine::RunDiagnostics diag =
            engine::iterate_noisy(built.problem, built.scheme, noise, cfg.n_max);
        long argmin = 0;
        for (long n = 0; n < static_cast<long>(diag.error_track.size()); ++n)
            if (diag.error_track[static_cast<std::size_t>(n)] <
                diag.error_track[static_cast<std::size_t>(argmin)])
                argmin = n;
        best_n[task] = argmin;
        best_err[task] = diag.error_track[static_cast<std::size_t>(argmin)];
        err_at_stop[task] = diag.error_track[static_cast<std::size_t>(stop_n[d])];
    });

    std::ostringstream os;
    os << "delta,best_n,best_error,stop_n_129,error_at_stop\n";
    for (std::size_t d = 0; d < n_deltas; ++d) {
        std::vector<double> be, es;
        std::vector<long> bn;
        for (std::size_t j = 0; j < n_seeds; ++j) {
            be.push_back(best_err[d * n_seeds + j]);
            bn.push_back(best_n[d * n_seeds + j]);
            es.push_back(err_at_stop[d * n_seeds + j]);
        }
        os << io::format_double(cfg.noise.deltas[d]) << ',' << detail_cmd::median(bn) << ','
           << io::format_double(detail_cmd::median(be)) << ',' << stop_n[d] << ','
           << io::format_double(detail_cmd::median(es)) << '\n';
    }
    return detail_cmd::write_file(opts.out_override.value_or(cfg.resolved_output()), os.str(),
                                  *opts.log);
}

// ---------------------------------------------------------------------------
// oracle-check

inline int cmd_oracle_check(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const auto built = detail_cmd::build_problem(cfg);
    const oracle::DenseInstance inst =
        oracle::lift(built.problem, cfg.lift_seed, cfg.size_cap);
    const schemes::SchemeSpec scheme =
        built.scheme ? *built.scheme : schemes::SchemeSpec::second_kind_direct();

    const engine::RunDiagnostics spectral =
        built.scheme ? engine::iterate_first_kind(built.problem, *built.scheme, cfg.n_max)
                     : engine::iterate_second_kind(built.problem, cfg.n_max);
    const oracle::DenseRunResult dense = oracle::run_dense(inst, scheme, cfg.n_max);

    double worst = 0.0;
    std::ostringstream os;
    os << "n,error_gap,residual_gap,correction_gap\n";
    for (std::size_t r = 0; r < spectral.rows.size(); ++r) {
        const auto& a = spectral.rows[r];
        const auto& b = dense.rows[r];
        std::optional<double> egap;
        if (a.error && b.error) {
            egap = detail_cmd::rel_gap(*a.error, *b.error);
            worst = std::max(worst, *egap);
        }
        const double rgap = detail_cmd::rel_gap(a.residual, b.residual);
        const double cgap = detail_cmd::rel_gap(a.correction, b.correction);
        worst = std::max({worst, rgap, cgap});
        os << a.n << ',' << (egap ? io::format_double(*egap) : std::string()) << ','
           << io::format_double(rgap) << ',' << io::format_double(cgap) << '\n';
    }
    const int rc = detail_cmd::write_file(opts.out_override.value_or(cfg.resolved_output()),
                                          os.str(), *opts.log);
    if (rc != exit_ok) return rc;
    if (worst > cfg.oracle_tolerance) {
        *opts.log << "illposed-iter: oracle disagreement " << worst << " exceeds tolerance "
                  << cfg.oracle_tolerance << '\n';
        return exit_numerical;
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// Dispatch

inline int run_experiment(const ExperimentConfig& cfg, const CommandOptions& opts) {
    switch (cfg.kind) {
    case ExperimentKind::run: return cmd_run(cfg, opts);
    case ExperimentKind::rates: return cmd_rates(cfg, opts);
    case ExperimentKind::noise: return cmd_noise(cfg, opts);
    case ExperimentKind::compare: return cmd_compare(cfg, opts);
    case ExperimentKind::oracle_check: return cmd_oracle_check(cfg, opts);
    }
    throw std::logic_error("run_experiment: unreachable");
}

// Full pipeline for one subcommand invocation: load, parse, override, check
// the kind, honor --dry-run, execute, map failures to exit codes.
inline int dispatch(ExperimentKind kind, const std::string& config_path,
                    const std::vector<std::string>& overrides, const CommandOptions& opts) {
    std::ostream& log = *opts.log;
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        log << "illposed-iter: cannot read config '" << config_path << "'\n";
        return exit_io;
    }
    std::ostringstream buf;
    buf << in.rdbuf();

    try {
        const ExperimentConfig cfg = parse_config(buf.str(), overrides);
        if (cfg.kind != kind) {
            log << "illposed-iter: config kind '" << to_string(cfg.kind)
                << "' does not match subcommand '" << to_string(kind) << "'\n";
            return exit_validation;
        }
        if (opts.dry_run) {
            std::cout << serialize_config(cfg);
            return exit_ok;
        }
        return run_experiment(cfg, opts);
    } catch (const ConfigError& e) {
        log << "illposed-iter: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::invalid_argument& e) {
        log << "illposed-iter: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::domain_error& e) {
        log << "illposed-iter: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::ios_base::failure& e) {
        log << "illposed-iter: " << e.what() << '\n';
        return exit_io;
    } catch (const std::exception& e) {
        log << "illposed-iter: " << e.what() << '\n';
        return exit_numerical;
    }
}

} // namespace illposed::cli
