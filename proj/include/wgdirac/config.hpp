#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "qpgreens.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace wgdirac {

struct RunConfig {
    struct Geometry {
        double radius = 0.1;
        std::vector<double> shape_coeffs; // overrides radius when nonempty
        int n_nodes = 32;
    } geometry;

    struct Numerics {
        int m_trunc = 16;
        int n_reg = 192;
        double fd_dp = 1e-4;
        double fd_dl = 1e-4;
        double fd_dd = 1e-4;
        int n_bands = 4;       // bands written to bands.csv
        int n_p_nodes = 64;    // Brillouin nodes for the gap Green's function
        int m_gamma_nodes = 32;
        int scan_points = 41;
        double dirac_lo = 20.0;
        double dirac_hi = 90.0;
        int fd_nx = 80;
        int fd_cells = 12;
        bool bloch_table = false;
        int table_bands = 6;
        int table_p_nodes = 64;
    } numerics;

    struct Tolerances {
        double root = 1e-9;
        double oracle = 5e-3;     // relative band agreement
        double residual = 5e-2;   // continuity and derivative
        double dirichlet = 1e-2;
        double pattern = 5e-2;
        double oracle_mode = 0.2; // FD vs BIE interface value, fraction of gap width
    } tolerances;

    struct Sweep {
        std::vector<double> deltas{0.01};
        int p_points = 21;
        double c = 0.9;
    } sweep;

    struct Output {
        std::string directory = "out";
        std::vector<std::string> formats{"csv", "json", "gnuplot"};
        std::string cache = "";
    } output;

    bool wants(const std::string& f) const
    {
        for (const auto& s : output.formats)
            if (s == f) return true;
        return false;
    }

    ObstacleShape shape() const
    {
        if (!geometry.shape_coeffs.empty()) return make_shape(geometry.shape_coeffs, geometry.n_nodes);
        return make_disk(geometry.radius, geometry.n_nodes);
    }

    KernelParams kernel() const
    {
        KernelParams k;
        k.m_trunc = numerics.m_trunc;
        k.n_reg = numerics.n_reg;
        return k;
    }

    std::vector<double> p_grid() const
    {
        std::vector<double> g;
        for (int i = 0; i < sweep.p_points; ++i) g.push_back(kTwoPi * i / (sweep.p_points - 1));
        return g;
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v)
{
    try {
        size_t n = 0;
        const double x = std::stod(v, &n);
        if (n != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail(ErrorKind::Config, key + ": expected a number, got '" + v + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v)
{
    try {
        size_t n = 0;
        const long x = std::stol(v, &n);
        if (n != v.size()) throw std::invalid_argument(v);
        return int(x);
    } catch (const std::exception&) {
        fail(ErrorKind::Config, key + ": expected an integer, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrorKind::Config, key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace detail

inline void validate(const RunConfig& c)
{
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) fail(ErrorKind::Config, msg);
    };
    need(c.geometry.n_nodes >= 8 && c.geometry.n_nodes % 2 == 0, "geometry.n_nodes must be even and >= 8");
    need(c.numerics.m_trunc >= 8, "numerics.m_trunc must be >= 8");
    need(c.numerics.n_reg >= 16, "numerics.n_reg must be >= 16");
    need(c.numerics.fd_dp > 0 && c.numerics.fd_dl > 0 && c.numerics.fd_dd > 0, "finite-difference steps must be positive");
    need(c.numerics.n_bands >= 1 && c.numerics.n_bands <= 12, "numerics.n_bands must lie in [1, 12]");
    need(c.numerics.n_p_nodes >= 16, "numerics.n_p_nodes must be >= 16");
    need(c.numerics.m_gamma_nodes >= 24, "numerics.m_gamma_nodes must be >= 24");
    need(c.numerics.scan_points >= 5, "numerics.scan_points must be >= 5");
    need(c.numerics.dirac_lo > 0 && c.numerics.dirac_hi > c.numerics.dirac_lo, "Dirac window must satisfy 0 < lo < hi");
    need(c.numerics.fd_nx >= 60 && c.numerics.fd_nx % 4 == 0, "numerics.fd_nx must be a multiple of 4 and >= 60");
    need(c.numerics.fd_cells >= 4, "numerics.fd_cells must be >= 4");
    need(c.numerics.table_bands >= 4, "numerics.table_bands must be >= 4");
    need(c.numerics.table_p_nodes >= 32 && c.numerics.table_p_nodes % 2 == 0,
         "numerics.table_p_nodes must be even and >= 32");
    for (double t : {c.tolerances.root, c.tolerances.oracle, c.tolerances.residual, c.tolerances.dirichlet,
                     c.tolerances.pattern, c.tolerances.oracle_mode})
        need(t > 0, "all tolerances must be positive");
    need(!c.sweep.deltas.empty(), "sweep.deltas must be nonempty");
    for (double d : c.sweep.deltas) need(d > 0 && d < 0.05, "sweep.deltas values must lie in (0, 0.05)");
    need(c.sweep.p_points >= 3, "sweep.p_points must be >= 3");
    need(c.sweep.c > 0 && c.sweep.c < 1, "sweep.c must lie in (0, 1)");
    need(!c.output.directory.empty(), "output.directory must be nonempty");
    for (const auto& f : c.output.formats)
        need(f == "csv" || f == "json" || f == "gnuplot", "output.formats: unknown format '" + f + "'");
}

// key = value lines; '#' starts a comment; lists are comma separated.
inline RunConfig parse_config(const std::string& text)
{
    RunConfig c;
    using namespace detail;
    const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters = {
        {"geometry.radius", [&](auto& k, auto& v) { c.geometry.radius = parse_double(k, v); }},
        {"geometry.shape_coeffs",
         [&](auto& k, auto& v) {
             c.geometry.shape_coeffs.clear();
             for (const auto& s : split_list(v)) c.geometry.shape_coeffs.push_back(parse_double(k, s));
         }},
        {"geometry.n_nodes", [&](auto& k, auto& v) { c.geometry.n_nodes = parse_int(k, v); }},
        {"numerics.m_trunc", [&](auto& k, auto& v) { c.numerics.m_trunc = parse_int(k, v); }},
        {"numerics.n_reg", [&](auto& k, auto& v) { c.numerics.n_reg = parse_int(k, v); }},
        {"numerics.fd_dp", [&](auto& k, auto& v) { c.numerics.fd_dp = parse_double(k, v); }},
        {"numerics.fd_dl", [&](auto& k, auto& v) { c.numerics.fd_dl = parse_double(k, v); }},
        {"numerics.fd_dd", [&](auto& k, auto& v) { c.numerics.fd_dd = parse_double(k, v); }},
        {"numerics.n_bands", [&](auto& k, auto& v) { c.numerics.n_bands = parse_int(k, v); }},
        {"numerics.n_p_nodes", [&](auto& k, auto& v) { c.numerics.n_p_nodes = parse_int(k, v); }},
        {"numerics.m_gamma_nodes", [&](auto& k, auto& v) { c.numerics.m_gamma_nodes = parse_int(k, v); }},
        {"numerics.scan_points", [&](auto& k, auto& v) { c.numerics.scan_points = parse_int(k, v); }},
        {"numerics.dirac_lo", [&](auto& k, auto& v) { c.numerics.dirac_lo = parse_double(k, v); }},
        {"numerics.dirac_hi", [&](auto& k, auto& v) { c.numerics.dirac_hi = parse_double(k, v); }},
        {"numerics.fd_nx", [&](auto& k, auto& v) { c.numerics.fd_nx = parse_int(k, v); }},
        {"numerics.fd_cells", [&](auto& k, auto& v) { c.numerics.fd_cells = parse_int(k, v); }},
        {"numerics.bloch_table", [&](auto& k, auto& v) { c.numerics.bloch_table = parse_bool(k, v); }},
        {"numerics.table_bands", [&](auto& k, auto& v) { c.numerics.table_bands = parse_int(k, v); }},
        {"numerics.table_p_nodes", [&](auto& k, auto& v) { c.numerics.table_p_nodes = parse_int(k, v); }},
        {"tolerances.root", [&](auto& k, auto& v) { c.tolerances.root = parse_double(k, v); }},
        {"tolerances.oracle", [&](auto& k, auto& v) { c.tolerances.oracle = parse_double(k, v); }},
        {"tolerances.residual", [&](auto& k, auto& v) { c.tolerances.residual = parse_double(k, v); }},
        {"tolerances.dirichlet", [&](auto& k, auto& v) { c.tolerances.dirichlet = parse_double(k, v); }},
        {"tolerances.pattern", [&](auto& k, auto& v) { c.tolerances.pattern = parse_double(k, v); }},
        {"tolerances.oracle_mode", [&](auto& k, auto& v) { c.tolerances.oracle_mode = parse_double(k, v); }},
        {"sweep.deltas",
         [&](auto& k, auto& v) {
             c.sweep.deltas.clear();
             for (const auto& s : split_list(v)) c.sweep.deltas.push_back(parse_double(k, s));
         }},
        {"sweep.p_points", [&](auto& k, auto& v) { c.sweep.p_points = parse_int(k, v); }},
        {"sweep.c", [&](auto& k, auto& v) { c.sweep.c = parse_double(k, v); }},
        {"output.directory", [&](auto&, auto& v) { c.output.directory = v; }},
        {"output.formats", [&](auto&, auto& v) { c.output.formats = split_list(v); }},
        {"output.cache", [&](auto&, auto& v) { c.output.cache = v; }},
    };

    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (value.empty())
            fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": empty value for '" + key + "'");
        it->second(key, value);
    }
    validate(c);
    return c;
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

} // namespace wgdirac
