#pragma once

// Least-squares power-law fit gamma ~ C * n^(-p) on log-log coordinates,
// used to confront measured rate sequences with their declared asymptotics.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace illposed {

struct PowerLawFit {
    double constant = 0.0;  // C
    double order = 0.0;     // p
};

inline PowerLawFit fit_power_law(const std::vector<double>& n_values,
                                 const std::vector<double>& gamma_values) {
    if (n_values.size() != gamma_values.size())
        throw std::invalid_argument("fit_power_law: length mismatch");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long m = 0;
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        if (!(n_values[i] > 0.0) || !(gamma_values[i] > 0.0)) continue;
        const double x = std::log(n_values[i]);
        const double y = std::log(gamma_values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 2) throw std::invalid_argument("fit_power_law: need at least two positive samples");
    const double denom = m * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("fit_power_law: degenerate abscissas");
    const double slope = (m * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / m;
    return PowerLawFit{std::exp(intercept), -slope};
}

} // namespace illposed
