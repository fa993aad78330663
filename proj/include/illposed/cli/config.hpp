#pragma once

// Experiment configuration: a small line-oriented key = value grammar with
// bracketed section headers, round-trippable through serialize/parse.
// Experiments carry ~15 parameters, so a config file plus `--set key=value`
// overrides beats positional flags.

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "illposed/engine.hpp"
#include "illposed/schemes.hpp"
#include "illposed/spectral.hpp"
#include "illposed/table_io.hpp"

namespace illposed::cli {

// Parse/validation failure with a source location; maps to exit code 2.
struct ConfigError : std::invalid_argument {
    int line;
    int column;
    ConfigError(int line_, int column_, const std::string& message)
        : std::invalid_argument("config:" + std::to_string(line_) + ":" +
                                std::to_string(column_) + ": " + message),
          line(line_), column(column_) {}
};

enum class ExperimentKind { run, rates, noise, compare, oracle_check };

inline const char* to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::run: return "run";
    case ExperimentKind::rates: return "rates";
    case ExperimentKind::noise: return "noise";
    case ExperimentKind::compare: return "compare";
    case ExperimentKind::oracle_check: return "oracle-check";
    }
    return "?";
}

inline std::optional<ExperimentKind> experiment_kind_from(const std::string& name) {
    if (name == "run") return ExperimentKind::run;
    if (name == "rates") return ExperimentKind::rates;
    if (name == "noise") return ExperimentKind::noise;
    if (name == "compare") return ExperimentKind::compare;
    if (name == "oracle-check") return ExperimentKind::oracle_check;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Typed pieces

struct GeneratorSpec {
    enum class Kind { uniform, geometric_to_zero };
    Kind kind = Kind::uniform;
    double a = 0.0, b = 0.0;     // uniform(a, b, n)
    double M = 0.0, ratio = 0.0; // geometric-to-zero(M, ratio, n)
    int n_points = 0;

    friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

struct OperatorConfig {
    OperatorKind kind = OperatorKind::first_kind;
    std::optional<GeneratorSpec> generator;
    std::vector<SpectrumPoint> points;  // explicit lambda:weight entries
    std::vector<SpectrumPoint> pins;    // extra tagged points
    std::optional<std::string> table_path;  // spectral table file: lambda weight coeff...

    // Merge the loaded table, generator output, explicit points and pins;
    // exact-duplicate abscissas accumulate their masses.
    SpectralOperator build(const io::SpectralTable* table = nullptr) const {
        std::map<double, double> mass;
        const auto add = [&](double lambda, double weight) { mass[lambda] += weight; };
        if (table)
            for (const auto& p : table->points) add(p.lambda, p.weight);
        if (generator) {
            const auto& g = *generator;
            if (g.n_points < 1)
                throw std::invalid_argument("operator generator: n_points must be >= 1");
            if (g.kind == GeneratorSpec::Kind::uniform) {
                for (int i = 0; i < g.n_points; ++i) {
                    const double t = g.n_points == 1
                                         ? 0.0
                                         : static_cast<double>(i) / (g.n_points - 1);
                    add(g.a + (g.b - g.a) * t, 1.0);
                }
            } else {
                double l = g.M;
                for (int i = 0; i < g.n_points; ++i) {
                    add(l, 1.0);
                    l *= g.ratio;
                }
            }
        }
        for (const auto& p : points) add(p.lambda, p.weight);
        for (const auto& p : pins) add(p.lambda, p.weight);
        if (mass.empty()) throw std::invalid_argument("operator: no spectrum points configured");
        std::vector<SpectrumPoint> pts;
        pts.reserve(mass.size());
        for (const auto& [lambda, weight] : mass) pts.push_back({lambda, weight});
        return SpectralOperator(kind, pts);
    }

    friend bool operator==(const OperatorConfig&, const OperatorConfig&) = default;
};

struct FunctionSpec {
    enum class Kind { power, one_minus_lambda, identity, custom };
    Kind kind = Kind::power;
    double s = 1.0;
    std::vector<double> table;

    ScalarFunction build() const {
        switch (kind) {
        case Kind::power: return ScalarFunction::power(s);
        case Kind::one_minus_lambda: return ScalarFunction::one_minus_lambda();
        case Kind::identity: return ScalarFunction::identity();
        case Kind::custom: return ScalarFunction::custom(table);
        }
        throw std::logic_error("FunctionSpec: unreachable");
    }

    friend bool operator==(const FunctionSpec&, const FunctionSpec&) = default;
};

struct VectorSpec {
    enum class Kind { zero, ones, constant, list, basis, column, from_exact };
    Kind kind = Kind::zero;
    double value = 0.0;          // constant; also the basis coefficient
    long index = 0;              // basis position or table column
    std::vector<double> values;  // list
    std::optional<FunctionSpec> applied;  // `apply <function> to <base>`

    SpectralVector build(const SpectralOperator& A,
                         const io::SpectralTable* table = nullptr) const {
        SpectralVector base;
        switch (kind) {
        case Kind::zero: base = SpectralVector::zero(A.size()); break;
        case Kind::ones: base = SpectralVector::constant(A.size(), 1.0); break;
        case Kind::constant: base = SpectralVector::constant(A.size(), value); break;
        case Kind::list:
            if (values.size() != A.size())
                throw std::invalid_argument("vector list: expected " +
                                            std::to_string(A.size()) + " entries, got " +
                                            std::to_string(values.size()));
            base = SpectralVector(values);
            break;
        case Kind::basis:
            if (index < 0 || static_cast<std::size_t>(index) >= A.size())
                throw std::invalid_argument("vector basis: index out of range");
            base = SpectralVector::zero(A.size());
            base[static_cast<std::size_t>(index)] = value;
            break;
        case Kind::column:
            if (!table)
                throw std::invalid_argument("vector column: needs operator.table");
            if (index < 0 || static_cast<std::size_t>(index) >= table->columns.size())
                throw std::invalid_argument("vector column: index out of range");
            if (table->columns[static_cast<std::size_t>(index)].size() != A.size())
                throw std::invalid_argument(
                    "vector column: table rows do not match the merged operator");
            base = table->column(static_cast<std::size_t>(index));
            break;
        case Kind::from_exact:
            throw std::invalid_argument("from-exact is only meaningful as the rhs");
        }
        if (applied) base = apply_function(applied->build(), A, base);
        return base;
    }

    friend bool operator==(const VectorSpec&, const VectorSpec&) = default;
};

struct NoiseConfig {
    engine::SequenceSpace space =
        engine::SequenceSpace::lp(std::numeric_limits<double>::infinity());
    std::vector<double> deltas;  // empty: no noise configured
    std::uint64_t seed = 1;
    int seeds = 1;  // number of seeded repetitions for median aggregation

    friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::run;
    long n_max = 1000;
    std::optional<OperatorConfig> op;
    std::vector<schemes::SchemeSpec> scheme_list;
    FunctionSpec theta;
    std::optional<FunctionSpec> pi;
    std::optional<schemes::ClosedInterval> interval;
    VectorSpec x0;
    std::optional<VectorSpec> x_star;
    std::optional<VectorSpec> rhs;
    NoiseConfig noise;
    std::uint64_t lift_seed = 1;
    int size_cap = 256;
    double oracle_tolerance = 1e-8;
    std::string output_path;  // empty: derived from the kind

    std::string resolved_output() const {
        return output_path.empty() ? std::string(to_string(kind)) + ".csv" : output_path;
    }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// ---------------------------------------------------------------------------
// Raw layer

struct RawEntry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
    int column = 1;
};

namespace detail_cfg {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline double parse_number(const std::string& s, int line, int col) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, col, "expected a number, got '" + s + "'");
    }
}

inline long parse_integer(const std::string& s, int line, int col) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, col, "expected an integer, got '" + s + "'");
    }
}

} // namespace detail_cfg

inline std::vector<RawEntry> parse_raw(const std::string& text) {
    std::vector<RawEntry> entries;
    std::istringstream is(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string t = detail_cfg::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const int col = static_cast<int>(line.find_first_not_of(" \t")) + 1;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(line_no, col, "unterminated section header");
            section = detail_cfg::trim(t.substr(1, t.size() - 2));
            if (section.empty()) throw ConfigError(line_no, col, "empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line_no, col, "expected 'key = value' or '[section]'");
        const std::string key = detail_cfg::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(line_no, col, "empty key");
        if (section.empty())
            throw ConfigError(line_no, col, "key '" + key + "' outside any section");
        RawEntry e;
        e.section = section;
        e.key = key;
        e.value = detail_cfg::trim(line.substr(eq + 1));
        e.line = line_no;
        e.column = static_cast<int>(eq) + 2;
        entries.push_back(e);
    }
    return entries;
}

// `--set section.key=value`: replaces the last matching entry or appends.
inline void apply_override(std::vector<RawEntry>& entries, const std::string& spec) {
    const auto eq = spec.find('=');
    const auto dot = spec.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError(0, 1, "--set expects section.key=value, got '" + spec + "'");
    RawEntry e;
    e.section = detail_cfg::trim(spec.substr(0, dot));
    e.key = detail_cfg::trim(spec.substr(dot + 1, eq - dot - 1));
    e.value = detail_cfg::trim(spec.substr(eq + 1));
    if (e.section.empty() || e.key.empty())
        throw ConfigError(0, 1, "--set expects section.key=value, got '" + spec + "'");
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
        if (it->section == e.section && it->key == e.key) {
            it->value = e.value;
            return;
        }
    }
    entries.push_back(e);
}

// ---------------------------------------------------------------------------
// Token forms of the typed pieces

inline std::string to_token(const GeneratorSpec& g) {
    std::ostringstream os;
    if (g.kind == GeneratorSpec::Kind::uniform)
        os << "uniform(" << io::format_double(g.a) << ", " << io::format_double(g.b) << ", "
           << g.n_points << ")";
    else
        os << "geometric-to-zero(" << io::format_double(g.M) << ", "
           << io::format_double(g.ratio) << ", " << g.n_points << ")";
    return os.str();
}

inline GeneratorSpec parse_generator(const std::string& tok, int line, int col) {
    const auto open = tok.find('(');
    if (open == std::string::npos || tok.back() != ')')
        throw ConfigError(line, col, "generator must look like name(arg, arg, n)");
    const std::string name = detail_cfg::trim(tok.substr(0, open));
    std::vector<std::string> args;
    std::string inner = tok.substr(open + 1, tok.size() - open - 2);
    std::istringstream is(inner);
    std::string piece;
    while (std::getline(is, piece, ',')) args.push_back(detail_cfg::trim(piece));
    if (args.size() != 3)
        throw ConfigError(line, col, "generator '" + name + "' takes exactly 3 arguments");
    GeneratorSpec g;
    if (name == "uniform") {
        g.kind = GeneratorSpec::Kind::uniform;
        g.a = detail_cfg::parse_number(args[0], line, col);
        g.b = detail_cfg::parse_number(args[1], line, col);
    } else if (name == "geometric-to-zero") {
        g.kind = GeneratorSpec::Kind::geometric_to_zero;
        g.M = detail_cfg::parse_number(args[0], line, col);
        g.ratio = detail_cfg::parse_number(args[1], line, col);
        if (!(g.M > 0.0) || !(g.ratio > 0.0) || !(g.ratio < 1.0))
            throw ConfigError(line, col, "geometric-to-zero needs M > 0 and 0 < ratio < 1");
    } else {
        throw ConfigError(line, col, "unknown generator '" + name + "'");
    }
    g.n_points = static_cast<int>(detail_cfg::parse_integer(args[2], line, col));
    if (g.n_points < 1) throw ConfigError(line, col, "generator needs n_points >= 1");
    return g;
}

inline std::string to_token(const FunctionSpec& f) {
    std::ostringstream os;
    switch (f.kind) {
    case FunctionSpec::Kind::power: os << "power s=" << io::format_double(f.s); break;
    case FunctionSpec::Kind::one_minus_lambda: os << "one-minus-lambda"; break;
    case FunctionSpec::Kind::identity: os << "identity"; break;
    case FunctionSpec::Kind::custom:
        os << "custom";
        for (double v : f.table) os << ' ' << io::format_double(v);
        break;
    }
    return os.str();
}

inline FunctionSpec parse_function(const std::string& tok, int line, int col) {
    const auto parts = detail_cfg::split_ws(tok);
    if (parts.empty()) throw ConfigError(line, col, "empty function token");
    FunctionSpec f;
    if (parts[0] == "power") {
        f.kind = FunctionSpec::Kind::power;
        if (parts.size() != 2 || parts[1].rfind("s=", 0) != 0)
            throw ConfigError(line, col, "power needs exactly 's=<value>'");
        f.s = detail_cfg::parse_number(parts[1].substr(2), line, col);
        if (!(f.s > 0.0)) throw ConfigError(line, col, "power needs s > 0");
    } else if (parts[0] == "one-minus-lambda") {
        if (parts.size() != 1) throw ConfigError(line, col, "one-minus-lambda takes no arguments");
        f.kind = FunctionSpec::Kind::one_minus_lambda;
    } else if (parts[0] == "identity") {
        if (parts.size() != 1) throw ConfigError(line, col, "identity takes no arguments");
        f.kind = FunctionSpec::Kind::identity;
    } else if (parts[0] == "custom") {
        f.kind = FunctionSpec::Kind::custom;
        if (parts.size() < 2) throw ConfigError(line, col, "custom needs tabulated values");
        for (std::size_t i = 1; i < parts.size(); ++i)
            f.table.push_back(detail_cfg::parse_number(parts[i], line, col));
    } else {
        throw ConfigError(line, col, "unknown function '" + parts[0] + "'");
    }
    return f;
}

inline std::string to_token(const VectorSpec& v) {
    std::ostringstream os;
    if (v.applied) os << "apply " << to_token(*v.applied) << " to ";
    switch (v.kind) {
    case VectorSpec::Kind::zero: os << "zero"; break;
    case VectorSpec::Kind::ones: os << "ones"; break;
    case VectorSpec::Kind::constant: os << "const " << io::format_double(v.value); break;
    case VectorSpec::Kind::list:
        os << "list";
        for (double x : v.values) os << ' ' << io::format_double(x);
        break;
    case VectorSpec::Kind::basis:
        os << "basis " << v.index << ' ' << io::format_double(v.value);
        break;
    case VectorSpec::Kind::column: os << "column " << v.index; break;
    case VectorSpec::Kind::from_exact: os << "from-exact"; break;
    }
    return os.str();
}

inline VectorSpec parse_vector(const std::string& tok, int line, int col) {
    auto parts = detail_cfg::split_ws(tok);
    if (parts.empty()) throw ConfigError(line, col, "empty vector expression");
    VectorSpec v;
    if (parts[0] == "apply") {
        // apply <function...> to <base...>
        std::size_t to_at = 0;
        for (std::size_t i = 1; i < parts.size(); ++i)
            if (parts[i] == "to") {
                to_at = i;
                break;
            }
        if (to_at == 0 || to_at + 1 >= parts.size())
            throw ConfigError(line, col, "apply expects 'apply <function> to <vector>'");
        std::string ftok, btok;
        for (std::size_t i = 1; i < to_at; ++i) ftok += (i > 1 ? " " : "") + parts[i];
        for (std::size_t i = to_at + 1; i < parts.size(); ++i)
            btok += (i > to_at + 1 ? " " : "") + parts[i];
        v = parse_vector(btok, line, col);
        if (v.applied) throw ConfigError(line, col, "nested apply is not supported");
        if (v.kind == VectorSpec::Kind::from_exact)
            throw ConfigError(line, col, "apply cannot wrap from-exact");
        v.applied = parse_function(ftok, line, col);
        return v;
    }
    if (parts[0] == "zero") {
        v.kind = VectorSpec::Kind::zero;
    } else if (parts[0] == "ones") {
        v.kind = VectorSpec::Kind::ones;
    } else if (parts[0] == "const") {
        if (parts.size() != 2) throw ConfigError(line, col, "const needs one value");
        v.kind = VectorSpec::Kind::constant;
        v.value = detail_cfg::parse_number(parts[1], line, col);
    } else if (parts[0] == "list") {
        v.kind = VectorSpec::Kind::list;
        if (parts.size() < 2) throw ConfigError(line, col, "list needs values");
        for (std::size_t i = 1; i < parts.size(); ++i)
            v.values.push_back(detail_cfg::parse_number(parts[i], line, col));
    } else if (parts[0] == "basis") {
        if (parts.size() != 3) throw ConfigError(line, col, "basis needs index and value");
        v.kind = VectorSpec::Kind::basis;
        v.index = detail_cfg::parse_integer(parts[1], line, col);
        v.value = detail_cfg::parse_number(parts[2], line, col);
    } else if (parts[0] == "column") {
        if (parts.size() != 2) throw ConfigError(line, col, "column needs an index");
        v.kind = VectorSpec::Kind::column;
        v.index = detail_cfg::parse_integer(parts[1], line, col);
    } else if (parts[0] == "from-exact") {
        if (parts.size() != 1) throw ConfigError(line, col, "from-exact takes no arguments");
        v.kind = VectorSpec::Kind::from_exact;
    } else {
        throw ConfigError(line, col, "unknown vector expression '" + parts[0] + "'");
    }
    return v;
}

inline std::string to_token(const engine::SequenceSpace& s) {
    std::ostringstream os;
    if (s.kind == engine::SequenceSpace::Kind::lp)
        os << "lp p=" << (std::isinf(s.p) ? "inf" : io::format_double(s.p));
    else
        os << "weighted nu=" << io::format_double(s.nu);
    return os.str();
}

inline engine::SequenceSpace parse_space(const std::string& tok, int line, int col) {
    const auto parts = detail_cfg::split_ws(tok);
    if (parts.size() != 2) throw ConfigError(line, col, "space must be 'lp p=..' or 'weighted nu=..'");
    try {
        if (parts[0] == "lp" && parts[1].rfind("p=", 0) == 0) {
            const std::string pv = parts[1].substr(2);
            return engine::SequenceSpace::lp(
                pv == "inf" ? std::numeric_limits<double>::infinity()
                            : detail_cfg::parse_number(pv, line, col));
        }
        if (parts[0] == "weighted" && parts[1].rfind("nu=", 0) == 0)
            return engine::SequenceSpace::weighted_m(
                detail_cfg::parse_number(parts[1].substr(3), line, col));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(line, col, e.what());
    }
    throw ConfigError(line, col, "space must be 'lp p=..' or 'weighted nu=..'");
}

// ---------------------------------------------------------------------------
// Interpretation

inline ExperimentConfig interpret(const std::vector<RawEntry>& entries) {
    ExperimentConfig cfg;
    bool saw_kind = false;
    for (const auto& e : entries) {
        const int L = e.line, C = e.column;
        const auto num = [&](const std::string& s) { return detail_cfg::parse_number(s, L, C); };
        if (e.section == "experiment") {
            if (e.key == "kind") {
                const auto k = experiment_kind_from(e.value);
                if (!k) throw ConfigError(L, C, "unknown experiment kind '" + e.value + "'");
                cfg.kind = *k;
                saw_kind = true;
            } else if (e.key == "n_max") {
                cfg.n_max = detail_cfg::parse_integer(e.value, L, C);
                if (cfg.n_max < 0) throw ConfigError(L, C, "n_max must be >= 0");
            } else {
                throw ConfigError(L, C, "unknown key 'experiment." + e.key + "'");
            }
        } else if (e.section == "operator") {
            if (!cfg.op) cfg.op.emplace();
            if (e.key == "kind") {
                if (e.value == "first") cfg.op->kind = OperatorKind::first_kind;
                else if (e.value == "second") cfg.op->kind = OperatorKind::second_kind;
                else throw ConfigError(L, C, "operator kind must be 'first' or 'second'");
            } else if (e.key == "generator") {
                cfg.op->generator = parse_generator(e.value, L, C);
            } else if (e.key == "points") {
                for (const auto& p : detail_cfg::split_ws(e.value)) {
                    const auto colon = p.find(':');
                    if (colon == std::string::npos)
                        throw ConfigError(L, C, "points entries look like lambda:weight");
                    cfg.op->points.push_back({num(p.substr(0, colon)), num(p.substr(colon + 1))});
                }
            } else if (e.key == "pin") {
                const auto parts = detail_cfg::split_ws(e.value);
                if (parts.size() != 2) throw ConfigError(L, C, "pin needs 'lambda weight'");
                cfg.op->pins.push_back({num(parts[0]), num(parts[1])});
            } else if (e.key == "table") {
                if (e.value.empty()) throw ConfigError(L, C, "table needs a path");
                cfg.op->table_path = e.value;
            } else {
                throw ConfigError(L, C, "unknown key 'operator." + e.key + "'");
            }
        } else if (e.section == "scheme") {
            if (e.key == "use") {
                cfg.scheme_list.clear();
                std::istringstream is(e.value);
                std::string piece;
                while (std::getline(is, piece, ',')) {
                    const std::string tok = detail_cfg::trim(piece);
                    if (tok.empty()) throw ConfigError(L, C, "empty scheme token");
                    try {
                        cfg.scheme_list.push_back(schemes::parse_scheme_token(tok));
                    } catch (const std::exception& ex) {
                        throw ConfigError(L, C, ex.what());
                    }
                }
                if (cfg.scheme_list.empty()) throw ConfigError(L, C, "no scheme tokens");
            } else {
                throw ConfigError(L, C, "unknown key 'scheme." + e.key + "'");
            }
        } else if (e.section == "functions") {
            if (e.key == "theta") cfg.theta = parse_function(e.value, L, C);
            else if (e.key == "pi") cfg.pi = parse_function(e.value, L, C);
            else throw ConfigError(L, C, "unknown key 'functions." + e.key + "'");
        } else if (e.section == "rates") {
            if (e.key == "interval") {
                const auto parts = detail_cfg::split_ws(e.value);
                if (parts.size() != 2) throw ConfigError(L, C, "interval needs 'lo hi'");
                cfg.interval = schemes::ClosedInterval{num(parts[0]), num(parts[1])};
                if (!(cfg.interval->lo <= cfg.interval->hi))
                    throw ConfigError(L, C, "interval needs lo <= hi");
            } else {
                throw ConfigError(L, C, "unknown key 'rates." + e.key + "'");
            }
        } else if (e.section == "problem") {
            if (e.key == "x0") cfg.x0 = parse_vector(e.value, L, C);
            else if (e.key == "x_star") cfg.x_star = parse_vector(e.value, L, C);
            else if (e.key == "rhs") cfg.rhs = parse_vector(e.value, L, C);
            else throw ConfigError(L, C, "unknown key 'problem." + e.key + "'");
        } else if (e.section == "noise") {
            if (e.key == "space") cfg.noise.space = parse_space(e.value, L, C);
            else if (e.key == "delta") {
                cfg.noise.deltas.clear();
                for (const auto& d : detail_cfg::split_ws(e.value)) {
                    const double v = num(d);
                    if (v < 0.0) throw ConfigError(L, C, "deltas must be >= 0");
                    cfg.noise.deltas.push_back(v);
                }
                if (cfg.noise.deltas.empty()) throw ConfigError(L, C, "delta needs values");
            } else if (e.key == "seed") {
                cfg.noise.seed = static_cast<std::uint64_t>(
                    detail_cfg::parse_integer(e.value, L, C));
            } else if (e.key == "seeds") {
                cfg.noise.seeds = static_cast<int>(detail_cfg::parse_integer(e.value, L, C));
                if (cfg.noise.seeds < 1) throw ConfigError(L, C, "seeds must be >= 1");
            } else {
                throw ConfigError(L, C, "unknown key 'noise." + e.key + "'");
            }
        } else if (e.section == "oracle") {
            if (e.key == "lift_seed")
                cfg.lift_seed =
                    static_cast<std::uint64_t>(detail_cfg::parse_integer(e.value, L, C));
            else if (e.key == "size_cap") {
                cfg.size_cap = static_cast<int>(detail_cfg::parse_integer(e.value, L, C));
                if (cfg.size_cap < 1) throw ConfigError(L, C, "size_cap must be >= 1");
            } else if (e.key == "tolerance") {
                cfg.oracle_tolerance = num(e.value);
                if (!(cfg.oracle_tolerance > 0.0))
                    throw ConfigError(L, C, "tolerance must be positive");
            } else {
                throw ConfigError(L, C, "unknown key 'oracle." + e.key + "'");
            }
        } else if (e.section == "output") {
            if (e.key == "path") cfg.output_path = e.value;
            else throw ConfigError(L, C, "unknown key 'output." + e.key + "'");
        } else {
            throw ConfigError(L, C, "unknown section '" + e.section + "'");
        }
    }
    if (!saw_kind) throw ConfigError(0, 1, "missing required key experiment.kind");
    return cfg;
}

inline ExperimentConfig parse_config(const std::string& text,
                                     const std::vector<std::string>& overrides = {}) {
    auto entries = parse_raw(text);
    for (const auto& o : overrides) apply_override(entries, o);
    return interpret(entries);
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "[experiment]\n";
    os << "kind = " << to_string(cfg.kind) << '\n';
    os << "n_max = " << cfg.n_max << '\n';
    if (cfg.op) {
        os << "\n[operator]\n";
        os << "kind = " << (cfg.op->kind == OperatorKind::first_kind ? "first" : "second")
           << '\n';
        if (cfg.op->generator) os << "generator = " << to_token(*cfg.op->generator) << '\n';
        if (cfg.op->table_path) os << "table = " << *cfg.op->table_path << '\n';
        if (!cfg.op->points.empty()) {
            os << "points =";
            for (const auto& p : cfg.op->points)
                os << ' ' << io::format_double(p.lambda) << ':' << io::format_double(p.weight);
            os << '\n';
        }
        for (const auto& p : cfg.op->pins)
            os << "pin = " << io::format_double(p.lambda) << ' ' << io::format_double(p.weight)
               << '\n';
    }
    if (!cfg.scheme_list.empty()) {
        os << "\n[scheme]\n";
        os << "use = ";
        for (std::size_t i = 0; i < cfg.scheme_list.size(); ++i)
            os << (i ? ", " : "") << schemes::to_token(cfg.scheme_list[i]);
        os << '\n';
    }
    os << "\n[functions]\n";
    os << "theta = " << to_token(cfg.theta) << '\n';
    if (cfg.pi) os << "pi = " << to_token(*cfg.pi) << '\n';
    if (cfg.interval) {
        os << "\n[rates]\n";
        os << "interval = " << io::format_double(cfg.interval->lo) << ' '
           << io::format_double(cfg.interval->hi) << '\n';
    }
    os << "\n[problem]\n";
    os << "x0 = " << to_token(cfg.x0) << '\n';
    if (cfg.x_star) os << "x_star = " << to_token(*cfg.x_star) << '\n';
    if (cfg.rhs) os << "rhs = " << to_token(*cfg.rhs) << '\n';
    if (!cfg.noise.deltas.empty()) {
        os << "\n[noise]\n";
        os << "space = " << to_token(cfg.noise.space) << '\n';
        os << "delta =";
        for (double d : cfg.noise.deltas) os << ' ' << io::format_double(d);
        os << '\n';
        os << "seed = " << cfg.noise.seed << '\n';
        os << "seeds = " << cfg.noise.seeds << '\n';
    }
    os << "\n[oracle]\n";
    os << "lift_seed = " << cfg.lift_seed << '\n';
    os << "size_cap = " << cfg.size_cap << '\n';
    os << "tolerance = " << io::format_double(cfg.oracle_tolerance) << '\n';
    os << "\n[output]\n";
    if (!cfg.output_path.empty()) os << "path = " << cfg.output_path << '\n';
    return os.str();
}

} // namespace illposed::cli
