#pragma once

// Plain-text serialization.
//
// Operators and vectors travel as a tabular format: one line per spectrum
// point, columns `lambda weight coeff...` where each extra column is one
// vector.  Diagnostics go out as CSV with the fixed header
// `n,error,residual,correction,weakened_error,weakened_residual,bound`.
// All numbers are written with 17 significant digits so doubles round-trip
// exactly.

#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "illposed/engine.hpp"
#include "illposed/spectral.hpp"

namespace illposed::io {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Spectral tables

struct SpectralTable {
    std::vector<SpectrumPoint> points;
    std::vector<std::vector<double>> columns;  // columns[j][i]: vector j at point i

    SpectralOperator build_operator(OperatorKind kind) const {
        return SpectralOperator(kind, points);
    }
    SpectralVector column(std::size_t j) const { return SpectralVector(columns.at(j)); }
};

inline void write_spectral_table(std::ostream& os, const SpectralOperator& A,
                                 const std::vector<const SpectralVector*>& columns = {}) {
    for (const auto* c : columns) detail::require_associated(A, *c, "write_spectral_table");
    for (std::size_t i = 0; i < A.size(); ++i) {
        os << format_double(A.lambda(i)) << ' ' << format_double(A.weight(i));
        for (const auto* c : columns) os << ' ' << format_double((*c)[i]);
        os << '\n';
    }
}

// Lines starting with '#' and blank lines are skipped.  Every data line must
// carry the same column count.
inline SpectralTable read_spectral_table(std::istream& is) {
    SpectralTable table;
    std::string line;
    std::size_t n_cols = 0;
    long line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        if (!ls.eof())
            throw std::invalid_argument("spectral table line " + std::to_string(line_no) +
                                        ": malformed number");
        if (vals.size() < 2)
            throw std::invalid_argument("spectral table line " + std::to_string(line_no) +
                                        ": expected at least lambda and weight");
        if (n_cols == 0) {
            n_cols = vals.size();
            table.columns.resize(n_cols - 2);
        } else if (vals.size() != n_cols) {
            throw std::invalid_argument("spectral table line " + std::to_string(line_no) +
                                        ": inconsistent column count");
        }
        table.points.push_back({vals[0], vals[1]});
        for (std::size_t j = 2; j < vals.size(); ++j) table.columns[j - 2].push_back(vals[j]);
    }
    if (table.points.empty()) throw std::invalid_argument("spectral table: no data lines");
    return table;
}

// ---------------------------------------------------------------------------
// Diagnostics CSV

inline const char* diagnostics_csv_header() {
    return "n,error,residual,correction,weakened_error,weakened_residual,bound";
}

inline void write_diagnostics_csv(std::ostream& os,
                                  const std::vector<engine::DiagnosticsRow>& rows) {
    const auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    os << diagnostics_csv_header() << '\n';
    for (const auto& r : rows) {
        os << r.n << ',' << opt(r.error) << ',' << format_double(r.residual) << ','
           << format_double(r.correction) << ',' << opt(r.weakened_error) << ','
           << opt(r.weakened_residual) << ',' << opt(r.bound) << '\n';
    }
}

} // namespace illposed::io
