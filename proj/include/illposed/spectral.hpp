#pragma once

// Finite spectral model of self-adjoint operators in Hilbert space.
//
// An operator is a weighted sample of its spectrum (the multiplication-
// operator picture); vectors live in eigencoordinates, so every spectral
// integral here is a finite weighted sum.  All types are immutable values
// after construction and all operations are pure functions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace illposed {

enum class OperatorKind { second_kind, first_kind };

inline const char* to_string(OperatorKind k) {
    return k == OperatorKind::second_kind ? "second" : "first";
}

// One atom of the discrete spectral measure: mass `weight` at abscissa `lambda`.
struct SpectrumPoint {
    double lambda = 0.0;
    double weight = 1.0;

    friend bool operator==(const SpectrumPoint&, const SpectrumPoint&) = default;
};

// A self-adjoint operator given by its point spectrum.  Lambdas are strictly
// increasing; multiplicity is expressed through the weight, never through
// duplicate abscissas.  Second-kind operators must satisfy max|lambda| <= 1
// (the critical normalization rho(B) = 1 is allowed but not required).
class SpectralOperator {
public:
    SpectralOperator(OperatorKind kind, std::vector<SpectrumPoint> points)
        : kind_(kind), points_(std::move(points)) {
        if (points_.empty())
            throw std::invalid_argument("SpectralOperator: empty spectrum");
        double radius = 0.0;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto& p = points_[i];
            if (!std::isfinite(p.lambda))
                throw std::invalid_argument("SpectralOperator: non-finite lambda");
            if (!(p.weight > 0.0) || !std::isfinite(p.weight))
                throw std::invalid_argument("SpectralOperator: weight must be positive");
            if (i > 0 && !(points_[i - 1].lambda < p.lambda))
                throw std::invalid_argument(
                    "SpectralOperator: lambdas must be strictly increasing");
            radius = std::max(radius, std::abs(p.lambda));
        }
        if (kind_ == OperatorKind::second_kind && radius > 1.0)
            throw std::invalid_argument(
                "SpectralOperator: second-kind spectrum must lie in [-1, 1]");
        norm_ = radius;
    }

    OperatorKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<SpectrumPoint>& points() const noexcept { return points_; }
    double lambda(std::size_t i) const { return points_.at(i).lambda; }
    double weight(std::size_t i) const { return points_.at(i).weight; }

    // Operator norm; for a self-adjoint operator this is the spectral radius.
    double operator_norm() const noexcept { return norm_; }

    // Exact comparison on stored values: eigenvalues like 0 and 1 are
    // constructed exactly, and tolerance matching would silently merge
    // near-critical points whose distinction matters.
    bool has_eigenvalue(double lambda) const noexcept {
        for (const auto& p : points_)
            if (p.lambda == lambda) return true;
        return false;
    }

    friend bool operator==(const SpectralOperator&, const SpectralOperator&) = default;

private:
    OperatorKind kind_;
    std::vector<SpectrumPoint> points_;
    double norm_ = 0.0;
};

// Element of the Hilbert space in spectral coordinates of one operator.
// Association with the operator is structural: the coefficient count must
// match the operator's point count.
struct SpectralVector {
    std::vector<double> coeffs;

    SpectralVector() = default;
    explicit SpectralVector(std::vector<double> c) : coeffs(std::move(c)) {}

    static SpectralVector zero(std::size_t n) {
        return SpectralVector(std::vector<double>(n, 0.0));
    }
    static SpectralVector constant(std::size_t n, double value) {
        return SpectralVector(std::vector<double>(n, value));
    }

    std::size_t size() const noexcept { return coeffs.size(); }
    double operator[](std::size_t i) const { return coeffs[i]; }
    double& operator[](std::size_t i) { return coeffs[i]; }

    friend bool operator==(const SpectralVector&, const SpectralVector&) = default;
};

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a) + " vs " + std::to_string(b) + ")");
}

inline void require_associated(const SpectralOperator& A, const SpectralVector& x,
                               const char* what) {
    require_same_size(A.size(), x.size(), what);
}

} // namespace detail

inline SpectralVector operator+(const SpectralVector& a, const SpectralVector& b) {
    detail::require_same_size(a.size(), b.size(), "SpectralVector::operator+");
    SpectralVector r = a;
    for (std::size_t i = 0; i < b.size(); ++i) r[i] += b[i];
    return r;
}

inline SpectralVector operator-(const SpectralVector& a, const SpectralVector& b) {
    detail::require_same_size(a.size(), b.size(), "SpectralVector::operator-");
    SpectralVector r = a;
    for (std::size_t i = 0; i < b.size(); ++i) r[i] -= b[i];
    return r;
}

inline SpectralVector operator*(double c, const SpectralVector& x) {
    SpectralVector r = x;
    for (auto& v : r.coeffs) v *= c;
    return r;
}

// Scalar function of the operator, used for the function calculus theta(A)x.
// Closed-form descriptors evaluate anywhere; a custom function is a table
// aligned with one operator's spectrum points.
//
// power(s) on negative abscissas: exact nonnegative integer exponents are
// always defined (sign-preserving); any other exponent requires the host
// operation to have declared parity admissibility first, in which case the
// value is the even extension |lambda|^s.
class ScalarFunction {
public:
    enum class Kind { power, one_minus_lambda, identity, custom };

    static ScalarFunction power(double exponent) {
        if (!(exponent > 0.0) || !std::isfinite(exponent))
            throw std::invalid_argument("ScalarFunction::power: exponent must be positive");
        ScalarFunction f;
        f.kind_ = Kind::power;
        f.exponent_ = exponent;
        return f;
    }
    static ScalarFunction one_minus_lambda() {
        ScalarFunction f;
        f.kind_ = Kind::one_minus_lambda;
        return f;
    }
    static ScalarFunction identity() {
        ScalarFunction f;
        f.kind_ = Kind::identity;
        return f;
    }
    static ScalarFunction custom(std::vector<double> table) {
        if (table.empty())
            throw std::invalid_argument("ScalarFunction::custom: empty table");
        ScalarFunction f;
        f.kind_ = Kind::custom;
        f.table_ = std::move(table);
        return f;
    }

    Kind kind() const noexcept { return kind_; }
    double exponent() const noexcept { return exponent_; }
    const std::vector<double>& table() const noexcept { return table_; }
    bool is_custom() const noexcept { return kind_ == Kind::custom; }

    // Host-side declaration that a negative spectral interval has passed the
    // parity admissibility check of the scheme in use.
    ScalarFunction cleared_for_negative_spectrum() const {
        ScalarFunction f = *this;
        f.negative_cleared_ = true;
        return f;
    }
    bool negative_cleared() const noexcept { return negative_cleared_; }

    double operator()(double lambda) const {
        switch (kind_) {
        case Kind::identity:
            return lambda;
        case Kind::one_minus_lambda:
            return 1.0 - lambda;
        case Kind::power:
            if (lambda < 0.0) {
                const bool integral =
                    exponent_ == std::floor(exponent_) && exponent_ < 1e15;
                if (integral) return std::pow(lambda, exponent_);
                if (!negative_cleared_)
                    throw std::domain_error(
                        "ScalarFunction::power: negative lambda without declared "
                        "parity admissibility");
                return std::pow(-lambda, exponent_);
            }
            return std::pow(lambda, exponent_);
        case Kind::custom:
            throw std::logic_error(
                "ScalarFunction::custom: pointwise evaluation requires an operator table");
        }
        throw std::logic_error("ScalarFunction: unreachable");
    }

    // Values on the operator's abscissas; the only way to evaluate a custom
    // function.
    std::vector<double> table_on(const SpectralOperator& A) const {
        if (kind_ == Kind::custom) {
            detail::require_same_size(table_.size(), A.size(), "ScalarFunction::table_on");
            return table_;
        }
        std::vector<double> out(A.size());
        for (std::size_t i = 0; i < A.size(); ++i) out[i] = (*this)(A.lambda(i));
        return out;
    }

    friend bool operator==(const ScalarFunction&, const ScalarFunction&) = default;

private:
    Kind kind_ = Kind::identity;
    double exponent_ = 0.0;
    std::vector<double> table_;
    bool negative_cleared_ = false;
};

// ---------------------------------------------------------------------------
// Operations

inline SpectralVector apply_operator(const SpectralOperator& A, const SpectralVector& x) {
    detail::require_associated(A, x, "apply_operator");
    SpectralVector r = x;
    for (std::size_t i = 0; i < A.size(); ++i) r[i] = A.lambda(i) * x[i];
    return r;
}

inline SpectralVector apply_function(const ScalarFunction& f, const SpectralOperator& A,
                                     const SpectralVector& x) {
    detail::require_associated(A, x, "apply_function");
    const std::vector<double> fv = f.table_on(A);
    SpectralVector r = x;
    for (std::size_t i = 0; i < A.size(); ++i) r[i] = fv[i] * x[i];
    return r;
}

inline double inner_product(const SpectralVector& x, const SpectralVector& y,
                            const SpectralOperator& A) {
    detail::require_associated(A, x, "inner_product");
    detail::require_associated(A, y, "inner_product");
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += (A.weight(i) * x[i]) * y[i];
    return acc;
}

// Discrete form of the spectral-integral norm: sqrt(sum_i w_i x_i^2).
inline double norm(const SpectralVector& x, const SpectralOperator& A) {
    return std::sqrt(inner_product(x, x, A));
}

// Mass below which a coefficient sitting on a zero of theta is treated as
// absent.  Membership in theta(A)X is exact in the model; floating point
// needs a cutoff on the squared-norm contribution w_i * x_i^2.
inline constexpr double source_mass_tolerance = 1e-24;

// Norm of x in the sourcewise class theta(A)X: inf{ ||h|| : theta(A)h = x }.
// In the discrete injective model the infimum is attained by the unique
// preimage h_i = x_i / theta(lambda_i).  Returns nullopt when x carries
// more than source_mass_tolerance of squared mass on a zero of theta
// (x is not representable).
inline std::optional<double> source_norm(const SpectralVector& x, const ScalarFunction& theta,
                                         const SpectralOperator& A) {
    detail::require_associated(A, x, "source_norm");
    const std::vector<double> th = theta.table_on(A);
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) {
        if (th[i] == 0.0) {
            if (A.weight(i) * x[i] * x[i] > source_mass_tolerance) return std::nullopt;
            continue;
        }
        const double h = x[i] / th[i];
        acc += A.weight(i) * h * h;
    }
    return std::sqrt(acc);
}

// Weakened norm ||pi(A)x||.  Always returns the seminorm value; whether pi
// actually induces a norm (its zeros avoid the eigenvalues) is a
// configuration-time concern, see is_weakening_norm.
inline double weakened_norm(const SpectralVector& x, const ScalarFunction& pi,
                            const SpectralOperator& A) {
    return norm(apply_function(pi, A, x), A);
}

// True when pi vanishes on no spectrum point, i.e. ||pi(A)x|| is a genuine
// norm on the discrete model.
inline bool is_weakening_norm(const ScalarFunction& pi, const SpectralOperator& A) {
    for (double v : pi.table_on(A))
        if (v == 0.0) return false;
    return true;
}

// Orthoprojection onto the eigenspace of `eigenvalue`.  Matching is exact on
// stored values; projecting onto an absent eigenvalue gives the zero vector.
inline SpectralVector eigen_projection(const SpectralOperator& A, double eigenvalue,
                                       const SpectralVector& x) {
    detail::require_associated(A, x, "eigen_projection");
    SpectralVector r = SpectralVector::zero(x.size());
    for (std::size_t i = 0; i < A.size(); ++i)
        if (A.lambda(i) == eigenvalue) r[i] = x[i];
    return r;
}

} // namespace illposed
