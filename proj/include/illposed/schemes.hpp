#pragma once

// Registry of the iteration schemes as spectral filter pairs (phi, psi) with
// phi(lambda) = 1 - lambda*psi(lambda), admissibility validation on a given
// operator, and the qualified rate constants
//
//     gamma_n = max over the spectrum of |phi(lambda)|^n |theta(lambda)|,
//
// computed three ways: dense-grid maximization with golden-section
// refinement, closed forms where the explicit schemes admit them, and the
// n -> infinity power-law asymptotics gamma_n ~ C * n^(-p).

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "illposed/spectral.hpp"

namespace illposed::schemes {

enum class SchemeFamily {
    second_kind_direct,  // iterate with B itself: x_{n+1} = B x_n + f
    explicit_power,      // phi = (1 - alpha*lambda)^k
    explicit_monomial,   // phi = 1 - alpha*lambda^k
    implicit_euler,      // phi = 1 / (1 + alpha*lambda^k)
    implicit_cayley,     // phi = (1 - alpha*lambda^k) / (1 + alpha*lambda^k)
    implicit_squared     // phi = (1 - alpha*lambda^k)^2 / (1 + alpha^2*lambda^{2k})
};

struct SchemeSpec {
    SchemeFamily family = SchemeFamily::second_kind_direct;
    double alpha = 1.0;
    int k = 1;

    static SchemeSpec second_kind_direct() { return SchemeSpec{}; }
    static SchemeSpec explicit_power(double alpha, int k) {
        return make(SchemeFamily::explicit_power, alpha, k);
    }
    static SchemeSpec explicit_monomial(double alpha, int k) {
        return make(SchemeFamily::explicit_monomial, alpha, k);
    }
    static SchemeSpec implicit_euler(double alpha, int k) {
        return make(SchemeFamily::implicit_euler, alpha, k);
    }
    static SchemeSpec implicit_cayley(double alpha, int k) {
        return make(SchemeFamily::implicit_cayley, alpha, k);
    }
    static SchemeSpec implicit_squared(double alpha, int k) {
        return make(SchemeFamily::implicit_squared, alpha, k);
    }

    bool first_kind() const noexcept { return family != SchemeFamily::second_kind_direct; }
    bool implicit() const noexcept {
        return family == SchemeFamily::implicit_euler ||
               family == SchemeFamily::implicit_cayley ||
               family == SchemeFamily::implicit_squared;
    }

    friend bool operator==(const SchemeSpec&, const SchemeSpec&) = default;

private:
    static SchemeSpec make(SchemeFamily fam, double alpha, int k) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw std::invalid_argument("SchemeSpec: alpha must be positive");
        if (k < 1) throw std::invalid_argument("SchemeSpec: k must be >= 1");
        SchemeSpec s;
        s.family = fam;
        s.alpha = alpha;
        s.k = k;
        return s;
    }
};

// ---------------------------------------------------------------------------
// Filter pair

inline double phi(const SchemeSpec& s, double lambda) {
    const double u = s.first_kind() ? s.alpha * std::pow(lambda, s.k) : 0.0;
    switch (s.family) {
    case SchemeFamily::second_kind_direct:
        return lambda;
    case SchemeFamily::explicit_power:
        return std::pow(1.0 - s.alpha * lambda, s.k);
    case SchemeFamily::explicit_monomial:
        return 1.0 - u;
    case SchemeFamily::implicit_euler:
        return 1.0 / (1.0 + u);
    case SchemeFamily::implicit_cayley:
        return (1.0 - u) / (1.0 + u);
    case SchemeFamily::implicit_squared: {
        const double d = 1.0 - u;
        return d * d / (1.0 + u * u);
    }
    }
    throw std::logic_error("phi: unreachable");
}

// psi with phi = 1 - lambda*psi.  The explicit_power quotient
// (1 - (1 - alpha*lambda)^k)/lambda has a removable singularity at 0; the
// factored form alpha * sum_{j<k} (1 - alpha*lambda)^j evaluates it without
// cancellation and gives the exact limit alpha*k at lambda = 0.
//
// For second_kind_direct the perturbation of the right-hand side enters the
// iteration with coefficient 1, so psi is identically 1 there.
inline double psi(const SchemeSpec& s, double lambda) {
    switch (s.family) {
    case SchemeFamily::second_kind_direct:
        return 1.0;
    case SchemeFamily::explicit_power: {
        const double q = 1.0 - s.alpha * lambda;
        double acc = 0.0, pw = 1.0;
        for (int j = 0; j < s.k; ++j) {
            acc += pw;
            pw *= q;
        }
        return s.alpha * acc;
    }
    case SchemeFamily::explicit_monomial:
        return s.alpha * std::pow(lambda, s.k - 1);
    case SchemeFamily::implicit_euler:
        return s.alpha * std::pow(lambda, s.k - 1) /
               (1.0 + s.alpha * std::pow(lambda, s.k));
    case SchemeFamily::implicit_cayley:
        return 2.0 * s.alpha * std::pow(lambda, s.k - 1) /
               (1.0 + s.alpha * std::pow(lambda, s.k));
    case SchemeFamily::implicit_squared: {
        const double u = s.alpha * std::pow(lambda, s.k);
        return 2.0 * s.alpha * std::pow(lambda, s.k - 1) / (1.0 + u * u);
    }
    }
    throw std::logic_error("psi: unreachable");
}

// ---------------------------------------------------------------------------
// Admissibility

struct ClosedInterval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const noexcept { return lo <= x && x <= hi; }
    double width() const noexcept { return hi - lo; }

    friend bool operator==(const ClosedInterval&, const ClosedInterval&) = default;
};

// The spectral interval on which |phi| <= 1 holds for the scheme.  Implicit
// schemes with even k place no restriction; odd k restricts to the half-line.
inline ClosedInterval required_spectrum_interval(const SchemeSpec& s) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const bool even = s.k % 2 == 0;
    switch (s.family) {
    case SchemeFamily::second_kind_direct:
        return {-1.0, 1.0};
    case SchemeFamily::explicit_power:
        return {0.0, 2.0 / s.alpha};
    case SchemeFamily::explicit_monomial: {
        const double m = std::pow(2.0 / s.alpha, 1.0 / s.k);
        return even ? ClosedInterval{-m, m} : ClosedInterval{0.0, m};
    }
    case SchemeFamily::implicit_euler:
    case SchemeFamily::implicit_cayley:
    case SchemeFamily::implicit_squared:
        return even ? ClosedInterval{-inf, inf} : ClosedInterval{0.0, inf};
    }
    throw std::logic_error("required_spectrum_interval: unreachable");
}

struct AdmissibilityReport {
    bool condition_a_ok = true;  // phi = 1 - lambda*psi holds by construction
    bool condition_b_ok = true;  // |phi(lambda)| <= 1 on the operator's spectrum
    bool condition_c_ok = true;  // no eigenvalue solves phi(lambda) = -1
    std::vector<double> offending_lambdas;
    ClosedInterval required_spectrum_interval;

    bool ok() const noexcept { return condition_a_ok && condition_b_ok && condition_c_ok; }
};

// Condition b) is checked pointwise on the operator's abscissas, condition c)
// as an exact test phi(lambda_i) == -1 on the spectrum points: in the
// discrete model the eigenvalues are exactly the stored points.
inline AdmissibilityReport check_admissibility(const SchemeSpec& s,
                                               const SpectralOperator& A) {
    AdmissibilityReport rep;
    rep.required_spectrum_interval = required_spectrum_interval(s);
    for (const auto& p : A.points()) {
        const double f = phi(s, p.lambda);
        const bool over = std::abs(f) > 1.0;
        const bool at_minus_one = f == -1.0;
        if (over) rep.condition_b_ok = false;
        if (at_minus_one) rep.condition_c_ok = false;
        if (over || at_minus_one) rep.offending_lambdas.push_back(p.lambda);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Rate constants gamma_n

namespace detail {

// log of |phi(lambda)|^n |theta(lambda)|, -inf where the product vanishes.
// Working in log space keeps |phi|^n meaningful out to n ~ 10^5.
inline double log_objective(const SchemeSpec& s, const ScalarFunction& theta, double lambda,
                            long n) {
    const double t = std::abs(theta(lambda));
    if (t == 0.0) return -std::numeric_limits<double>::infinity();
    if (n == 0) return std::log(t);
    const double f = std::abs(phi(s, lambda));
    if (f == 0.0) return -std::numeric_limits<double>::infinity();
    return static_cast<double>(n) * std::log(f) + std::log(t);
}

// Scan grid: uniform coverage of the interval plus log-spaced approaches to
// 0 from either side.  The maximand peaks at lambda ~ n^(-1/k) for large n,
// far below a uniform 4096-point resolution.
inline std::vector<double> scan_grid(const ClosedInterval& iv) {
    constexpr int uniform_points = 4096;
    constexpr int log_points = 1024;
    std::vector<double> grid;
    grid.reserve(uniform_points + 2 * log_points + 3);
    const double width = iv.width();
    for (int i = 0; i <= uniform_points; ++i)
        grid.push_back(iv.lo + width * static_cast<double>(i) / uniform_points);
    const double scale = std::max(std::abs(iv.lo), std::abs(iv.hi));
    if (iv.contains(0.0) && scale > 0.0) {
        grid.push_back(0.0);
        for (int i = 0; i < log_points; ++i) {
            const double mag = scale * std::pow(10.0, -14.0 * (log_points - i) /
                                                          static_cast<double>(log_points));
            if (iv.contains(mag)) grid.push_back(mag);
            if (iv.contains(-mag)) grid.push_back(-mag);
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

} // namespace detail

// gamma_n = max over lambda in `interval` of |phi(lambda)|^n |theta(lambda)|,
// by dense grid scan followed by golden-section refinement of the winning
// bracket to absolute tolerance 1e-12 in lambda.
inline double gamma_n_numeric(const SchemeSpec& s, const ScalarFunction& theta,
                              ClosedInterval interval, long n) {
    if (n < 0) throw std::invalid_argument("gamma_n_numeric: n must be nonnegative");
    if (!(interval.lo <= interval.hi) || !std::isfinite(interval.lo) ||
        !std::isfinite(interval.hi))
        throw std::invalid_argument("gamma_n_numeric: bad interval");
    ScalarFunction th =
        interval.lo < 0.0 ? theta.cleared_for_negative_spectrum() : theta;

    const std::vector<double> grid = detail::scan_grid(interval);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = detail::log_objective(s, th, grid[i], n);
        if (v > best) {
            best = v;
            best_i = i;
        }
    }
    if (best == -std::numeric_limits<double>::infinity()) return 0.0;

    double a = grid[best_i > 0 ? best_i - 1 : 0];
    double b = grid[std::min(best_i + 1, grid.size() - 1)];
    constexpr double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = detail::log_objective(s, th, x1, n);
    double f2 = detail::log_objective(s, th, x2, n);
    while (b - a > 1e-12) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = detail::log_objective(s, th, x2, n);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = detail::log_objective(s, th, x1, n);
        }
    }
    best = std::max({best, f1, f2});
    return std::exp(best);
}

// Closed-form gamma_n for theta(lambda) = lambda^s on Sp A in [0, M]
// (symmetric [-M, M] for even k gives the same value).  Available for the
// explicit schemes only; the implicit schemes carry asymptotics instead.
//
// explicit_power:   max of lambda^s |1 - alpha*lambda|^{kn},
//   interior peak at lambda* = s/(alpha(s+kn)) giving
//   (s/(alpha(s+kn)))^s (kn/(s+kn))^{kn}, combined with the endpoint branch
//   M^s |1 - alpha*M|^{kn} that takes over for 1/alpha < M < 2/alpha or when
//   the peak lies beyond M.
// explicit_monomial: substitution u = lambda^k reduces to the same shape with
//   exponents s/k and n.
inline std::optional<double> gamma_n_closed_form(const SchemeSpec& s, double source_order,
                                                 double M, long n) {
    if (!(source_order > 0.0))
        throw std::invalid_argument("gamma_n_closed_form: source order must be positive");
    if (!(M > 0.0)) throw std::invalid_argument("gamma_n_closed_form: M must be positive");
    if (n < 0) throw std::invalid_argument("gamma_n_closed_form: n must be nonnegative");
    if (s.family != SchemeFamily::explicit_power &&
        s.family != SchemeFamily::explicit_monomial)
        return std::nullopt;

    // Both families in the reduced variables: maximize v^p |1 - alpha*v|^m
    // over v in [0, V].
    const double p = s.family == SchemeFamily::explicit_power
                         ? source_order
                         : source_order / s.k;
    const double m = static_cast<double>(s.family == SchemeFamily::explicit_power
                                             ? s.k * n
                                             : n);
    const double V = s.family == SchemeFamily::explicit_power ? M : std::pow(M, s.k);

    const auto log_f = [&](double v) {
        if (v == 0.0) return -std::numeric_limits<double>::infinity();
        const double q = std::abs(1.0 - s.alpha * v);
        if (q == 0.0 && m > 0.0) return -std::numeric_limits<double>::infinity();
        return p * std::log(v) + (m > 0.0 ? m * std::log(q) : 0.0);
    };

    double best = log_f(V);
    if (m > 0.0) {
        const double vstar = p / (s.alpha * (p + m));
        if (vstar < V) {
            // log of (p/(alpha(p+m)))^p (m/(p+m))^m via log1p for precision
            const double interior =
                p * std::log(vstar) - m * std::log1p(p / m);
            best = std::max(best, interior);
        }
    }
    return std::exp(best);
}

struct RateAsymptotic {
    double constant = 0.0;  // C in gamma_n ~ C * n^(-order)
    double order = 0.0;

    friend bool operator==(const RateAsymptotic&, const RateAsymptotic&) = default;
};

// Power-law asymptotics of gamma_n for theta(lambda) = lambda^s.  The direct
// second-kind iteration carries no universal rate and returns nullopt.
inline std::optional<RateAsymptotic> gamma_asymptotic(const SchemeSpec& s,
                                                      double source_order) {
    if (!(source_order > 0.0))
        throw std::invalid_argument("gamma_asymptotic: source order must be positive");
    const double sk = source_order / s.k;
    const double e = std::exp(1.0);
    switch (s.family) {
    case SchemeFamily::second_kind_direct:
        return std::nullopt;
    case SchemeFamily::explicit_power:
        return RateAsymptotic{std::pow(source_order / (e * s.alpha * s.k), source_order),
                              source_order};
    case SchemeFamily::explicit_monomial:
    case SchemeFamily::implicit_euler:
        return RateAsymptotic{std::pow(source_order / (e * s.alpha * s.k), sk), sk};
    case SchemeFamily::implicit_cayley:
    case SchemeFamily::implicit_squared:
        return RateAsymptotic{std::pow(source_order / (2.0 * e * s.alpha * s.k), sk), sk};
    }
    throw std::logic_error("gamma_asymptotic: unreachable");
}

// ---------------------------------------------------------------------------
// Text tokens, e.g. "explicit-power alpha=0.5 k=2"

inline const char* family_name(SchemeFamily f) {
    switch (f) {
    case SchemeFamily::second_kind_direct: return "second-kind";
    case SchemeFamily::explicit_power: return "explicit-power";
    case SchemeFamily::explicit_monomial: return "explicit-monomial";
    case SchemeFamily::implicit_euler: return "implicit-euler";
    case SchemeFamily::implicit_cayley: return "implicit-cayley";
    case SchemeFamily::implicit_squared: return "implicit-squared";
    }
    return "?";
}

inline std::string to_token(const SchemeSpec& s) {
    if (!s.first_kind()) return family_name(s.family);
    std::ostringstream os;
    os.precision(17);
    os << family_name(s.family) << " alpha=" << s.alpha << " k=" << s.k;
    return os.str();
}

inline SchemeSpec parse_scheme_token(const std::string& token) {
    std::istringstream is(token);
    std::string name;
    is >> name;
    if (name.empty()) throw std::invalid_argument("scheme token: empty");

    SchemeFamily fam;
    if (name == "second-kind") fam = SchemeFamily::second_kind_direct;
    else if (name == "explicit-power") fam = SchemeFamily::explicit_power;
    else if (name == "explicit-monomial") fam = SchemeFamily::explicit_monomial;
    else if (name == "implicit-euler") fam = SchemeFamily::implicit_euler;
    else if (name == "implicit-cayley") fam = SchemeFamily::implicit_cayley;
    else if (name == "implicit-squared") fam = SchemeFamily::implicit_squared;
    else throw std::invalid_argument("scheme token: unknown scheme '" + name + "'");

    double alpha = 1.0;
    int k = 1;
    bool saw_alpha = false, saw_k = false;
    const auto number = [](const std::string& val) {
        try {
            std::size_t used = 0;
            const double x = std::stod(val, &used);
            if (used == val.size()) return x;
        } catch (const std::exception&) {
        }
        throw std::invalid_argument("scheme token: bad value '" + val + "'");
    };
    std::string kv;
    while (is >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("scheme token: expected key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "alpha") {
            alpha = number(val);
            saw_alpha = true;
        } else if (key == "k") {
            const double kd = number(val);
            k = static_cast<int>(kd);
            if (kd != k) throw std::invalid_argument("scheme token: k must be an integer");
            saw_k = true;
        } else {
            throw std::invalid_argument("scheme token: unknown key '" + key + "'");
        }
    }
    if (fam == SchemeFamily::second_kind_direct) {
        if (saw_alpha || saw_k)
            throw std::invalid_argument("scheme token: second-kind takes no parameters");
        return SchemeSpec::second_kind_direct();
    }
    SchemeSpec s;
    switch (fam) {
    case SchemeFamily::explicit_power: s = SchemeSpec::explicit_power(alpha, k); break;
    case SchemeFamily::explicit_monomial: s = SchemeSpec::explicit_monomial(alpha, k); break;
    case SchemeFamily::implicit_euler: s = SchemeSpec::implicit_euler(alpha, k); break;
    case SchemeFamily::implicit_cayley: s = SchemeSpec::implicit_cayley(alpha, k); break;
    case SchemeFamily::implicit_squared: s = SchemeSpec::implicit_squared(alpha, k); break;
    default: throw std::logic_error("parse_scheme_token: unreachable");
    }
    return s;
}

} // namespace illposed::schemes
