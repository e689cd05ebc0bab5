#pragma once

#include "bands.hpp"
#include "config.hpp"
#include "dirac.hpp"
#include "fdoracle.hpp"
#include "gapgreens.hpp"
#include "interface.hpp"
#include "io.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace wgdirac {

// Exit codes of the command-line front end.
enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitCertification = 3, kExitOracle = 4 };

inline int exit_code_for(ErrorKind k)
{
    switch (k) {
    case ErrorKind::Config:
    case ErrorKind::Geometry:
    case ErrorKind::Domain: return kExitConfig;
    case ErrorKind::Oracle: return kExitOracle;
    default: return kExitCertification;
    }
}

inline std::string fmt_num(double x)
{
    std::ostringstream os;
    os << std::setprecision(12) << x;
    return os.str();
}

inline std::string delta_tag(double d)
{
    std::ostringstream os;
    os << "delta_" << std::setprecision(6) << d;
    return os.str();
}

// Throws if any required key is missing or any number in the document is not finite.
inline void validate_json(const nlohmann::json& j, const std::vector<std::string>& required, const std::string& what)
{
    for (const auto& k : required)
        if (!j.contains(k))
            fail(ErrorKind::StructureViolation, what + ": missing field '" + k + "'");
    std::function<void(const nlohmann::json&)> walk = [&](const nlohmann::json& v) {
        if (v.is_number_float() && !std::isfinite(v.get<double>()))
            fail(ErrorKind::StructureViolation, what + ": non-finite value");
        if (v.is_structured())
            for (const auto& e : v) walk(e);
    };
    walk(j);
}

// Shared state of one invocation; later commands reuse earlier results.
class Pipeline {
public:
    Pipeline(RunConfig cfg, std::filesystem::path out, int jobs, bool verify, std::ostream& log)
        : cfg_(std::move(cfg)), out_(std::move(out)), jobs_(std::max(1, jobs)), verify_(verify), log_(log),
          shape_(cfg_.shape()), kp_(cfg_.kernel()), solver_(shape_, kp_)
    {
    }

    const std::vector<std::string>& written() const { return written_; }
    const std::vector<std::string>& failures() const { return failures_; }

    void run(const std::string& cmd)
    {
        if (cmd == "bands") bands();
        else if (cmd == "dirac") dirac();
        else if (cmd == "gap") gap();
        else if (cmd == "interface") interface();
        else if (cmd == "oracle") oracle();
        else if (cmd == "all") {
            bands();
            dirac();
            gap();
            interface();
            oracle();
        } else
            fail(ErrorKind::Config, "unknown command '" + cmd + "'");
    }

    void bands()
    {
        std::vector<double> deltas{0.0};
        for (double d : cfg_.sweep.deltas) {
            deltas.push_back(d);
            deltas.push_back(-d);
        }
        const auto grid = cfg_.p_grid();
        const int nb = cfg_.numerics.n_bands;
        struct Row {
            double lambda, sigma;
        };
        const int np = int(grid.size());
        std::vector<Row> rows(deltas.size() * nb * np);
        parallel_for(int(deltas.size()) * np, jobs_, [&](int k) {
            const int di = k / np, pi = k % np;
            std::vector<double> v;
            for (double hi = 200.0; int(v.size()) < nb; hi *= 2.0) {
                if (hi > 1e5) fail(ErrorKind::NoBand, "band search exceeded lambda = 1e5");
                v = solver_.all_in(grid[pi], deltas[di], 0.5, hi);
            }
            for (int b = 0; b < nb; ++b) {
                const BandPoint bp = solver_.certify(grid[pi], v[b], deltas[di]);
                rows[(di * nb + b) * np + pi] = {v[b], bp.sigma_min / bp.sigma_max};
            }
        });
        std::ostringstream csv;
        csv << "band,delta,p,lambda,sigma_min\n";
        for (size_t di = 0; di < deltas.size(); ++di)
            for (int b = 0; b < nb; ++b)
                for (int pi = 0; pi < np; ++pi) {
                    const Row& r = rows[(di * nb + b) * np + pi];
                    csv << b + 1 << ',' << fmt_num(deltas[di]) << ',' << fmt_num(grid[pi]) << ',' << fmt_num(r.lambda)
                        << ',' << fmt_num(r.sigma) << '\n';
                }
        write("bands.csv", csv.str());
        if (cfg_.wants("gnuplot")) {
            std::ostringstream gp;
            gp << "set datafile separator ','\nset xlabel 'p'\nset ylabel 'lambda'\nset key outside\n"
               << "set terminal pngcairo size 900,600\nset output 'bands.png'\nplot \\\n";
            for (size_t di = 0; di < deltas.size(); ++di)
                gp << "  'bands.csv' every ::1 using ($2==" << fmt_num(deltas[di]) << "?$3:1/0):4 with points pt 7 ps 0.5 "
                   << "title 'delta = " << fmt_num(deltas[di]) << "'" << (di + 1 < deltas.size() ? ", \\\n" : "\n");
            write("bands.gp", gp.str());
        }
        if (verify_) {
            // lambda_n(p) = lambda_n(2 pi - p) on the symmetric grid, all points certified
            double even = 0.0, worst = 0.0;
            for (size_t di = 0; di < deltas.size(); ++di)
                for (int b = 0; b < nb; ++b)
                    for (int pi = 0; pi < np; ++pi) {
                        const Row& r = rows[(di * nb + b) * np + pi];
                        const Row& m = rows[(di * nb + b) * np + (np - 1 - pi)];
                        even = std::max(even, std::abs(r.lambda - m.lambda) / r.lambda);
                        worst = std::max(worst, r.sigma);
                    }
            check(even < 1e-6, "bands: p -> 2 pi - p symmetry defect " + fmt_num(even));
            check(worst < 1e-6, "bands: certification ratio " + fmt_num(worst));
        }
        log_ << "bands: " << deltas.size() << " structures, " << nb << " bands, " << np << " p points\n";
    }

    const DiracData& dirac()
    {
        if (dirac_) return *dirac_;
        const FDSteps steps{cfg_.numerics.fd_dp, cfg_.numerics.fd_dl, cfg_.numerics.fd_dd};
        dirac_ = analyze_dirac(solver_, cfg_.numerics.dirac_lo, cfg_.numerics.dirac_hi, steps, jobs_);
        const DiracData& d = *dirac_;
        nlohmann::json j;
        j["p_star"] = d.p_star;
        j["lambda_star"] = d.lambda_star;
        j["gamma_star"] = d.gamma_star;
        j["theta_star"] = d.theta_star;
        j["t_star"] = d.t_star;
        j["alpha_star"] = d.alpha_star;
        j["beta_star"] = d.beta_star;
        j["pattern_residuals"] = {{"t_lambda", d.residuals.t_lambda}, {"t_p", d.residuals.t_p}, {"s", d.residuals.s}};
        j["reflection_residuals"] = {{"odd", d.odd_residual}, {"even", d.even_residual}};
        auto mat = [](const Eigen::Matrix2cd& m) {
            nlohmann::json a = nlohmann::json::array();
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) a.push_back({m(r, c).real(), m(r, c).imag()});
            return a;
        };
        j["pairing"] = {{"t_lambda", mat(d.pair_lambda)}, {"t_p", mat(d.pair_p)}, {"s", mat(d.pair_s)}};
        write_json("dirac.json", j,
                   {"p_star", "lambda_star", "gamma_star", "theta_star", "t_star", "alpha_star", "beta_star",
                    "pattern_residuals"});
        if (cfg_.wants("csv")) {
            std::ostringstream csv;
            csv << "matrix,row,col,re,im\n";
            const std::pair<const char*, const Eigen::Matrix2cd*> ms[] = {
                {"t_lambda", &d.pair_lambda}, {"t_p", &d.pair_p}, {"s", &d.pair_s}};
            for (const auto& [name, m] : ms)
                for (int r = 0; r < 2; ++r)
                    for (int c = 0; c < 2; ++c)
                        csv << name << ',' << r + 1 << ',' << c + 1 << ',' << fmt_num((*m)(r, c).real()) << ','
                            << fmt_num((*m)(r, c).imag()) << '\n';
            write("pattern.csv", csv.str());
        }
        if (verify_) {
            check(d.alpha_star > 0.0, "dirac: alpha_star not positive");
            check(std::abs(d.t_star) > 0.0, "dirac: t_star vanishes");
            check(d.residuals.max() < cfg_.tolerances.pattern,
                  "dirac: pattern residual " + fmt_num(d.residuals.max()));
        }
        log_ << "dirac: lambda* = " << fmt_num(d.lambda_star) << ", alpha* = " << fmt_num(d.alpha_star)
             << ", t* = " << fmt_num(d.t_star) << "\n";
        return d;
    }

    struct GapReport {
        GapInterval interval;
        double edges_plus[2];
        double edges_minus[2];
    };

    const std::vector<GapReport>& gap()
    {
        if (!gaps_.empty()) return gaps_;
        const DiracData& d = dirac();
        const double window = 12.0;
        nlohmann::json arr = nlohmann::json::array();
        for (double delta : cfg_.sweep.deltas) {
            GapReport g{gap_interval(d, delta, cfg_.sweep.c), {0, 0}, {0, 0}};
            const double lo = d.lambda_star - window, hi = d.lambda_star + window;
            double lower_max = -1e300, upper_min = 1e300;
            for (int s = 0; s < 2; ++s) {
                const double dl = s == 0 ? delta : -delta;
                double* e = s == 0 ? g.edges_plus : g.edges_minus;
                // band edges at p = pi, checked to be the extrema against neighbouring p
                for (double p : {kPi, kPi - 0.05, kPi - 0.1}) {
                    const int base = solver_.count_below(p, lo, dl);
                    const double l1 = solver_.band_lambda(p, base + 1, dl, lo, hi).lambda;
                    const double l2 = solver_.band_lambda(p, base + 2, dl, lo, hi).lambda;
                    if (p == kPi) {
                        e[0] = l1;
                        e[1] = l2;
                    }
                    lower_max = std::max(lower_max, l1);
                    upper_min = std::min(upper_min, l2);
                }
            }
            if (!(lower_max < g.interval.e1 && g.interval.e2 < upper_min)) {
                std::ostringstream os;
                os << "gap: interval [" << g.interval.e1 << ", " << g.interval.e2 << "] not inside band gap ("
                   << lower_max << ", " << upper_min << ") at delta " << delta;
                fail(ErrorKind::AssumptionViolation, os.str());
            }
            const double predicted = delta * std::abs(d.beta_star);
            nlohmann::json jg;
            jg["delta"] = delta;
            jg["gap"] = {g.interval.e1, g.interval.e2};
            jg["edges_plus"] = {g.edges_plus[0], g.edges_plus[1]};
            jg["edges_minus"] = {g.edges_minus[0], g.edges_minus[1]};
            jg["predicted_half_width"] = predicted;
            jg["measured_half_width"] = 0.5 * (g.edges_plus[1] - g.edges_plus[0]);
            arr.push_back(jg);
            gaps_.push_back(g);
        }
        write_json("gap.json", nlohmann::json{{"lambda_star", d.lambda_star}, {"gaps", arr}}, {"lambda_star", "gaps"});
        log_ << "gap: " << gaps_.size() << " intervals verified\n";
        return gaps_;
    }

    const std::vector<InterfaceModeResult>& interface()
    {
        if (!modes_.empty()) return modes_;
        const DiracData& d = dirac();
        const auto& gaps = gap();
        InterfaceParams ip;
        ip.m_nodes = cfg_.numerics.m_gamma_nodes;
        ip.n_p = cfg_.numerics.n_p_nodes;
        ip.scan_points = cfg_.numerics.scan_points;
        ip.root_tol = cfg_.tolerances.root;
        ip.jobs = jobs_;
        for (const GapReport& g : gaps) {
            const GapInterval full{std::max(g.edges_plus[0], g.edges_minus[0]),
                                   std::min(g.edges_plus[1], g.edges_minus[1]), g.interval.delta, 1.0};
            InterfaceModeResult r = find_interface_eigenvalue(shape_, kp_, g.interval, ip, &full);
            reconstruct_interface_mode(shape_, kp_, r, ip, {}, false);
            const double pairing = even_mode_pairing(r.density, d, shape_, kp_);
            const std::string dir = delta_tag(g.interval.delta) + "/";
            nlohmann::json j;
            j["delta"] = r.delta;
            j["gap"] = {r.gap.e1, r.gap.e2};
            j["lambda_star_mode"] = r.lambda_star_mode;
            j["kappa"] = r.decay.kappa;
            j["decay_r2"] = r.decay.r2;
            j["residuals"] = {{"continuity", r.continuity_residual},
                              {"derivative", r.derivative_residual},
                              {"dirichlet", r.dirichlet_residual},
                              {"sigma_min_at_root", r.sigma_min_at_root}};
            j["dips"] = r.dips;
            j["crossings"] = r.crossings;
            j["even_mode_pairing"] = pairing;
            j["warnings"] = r.warnings;
            nlohmann::json scan = nlohmann::json::array();
            for (const auto& s : r.sigma_scan) scan.push_back({s[0], s[1]});
            j["sigma_scan"] = scan;
            if (cfg_.numerics.bloch_table) j["bloch_table"] = table_diagnostics(r);
            write_json(dir + "interface.json", j,
                       {"delta", "gap", "lambda_star_mode", "kappa", "residuals", "sigma_scan"});
            if (cfg_.wants("csv")) {
                std::ostringstream f;
                f << "x1,x2,re_u,im_u\n";
                for (size_t i = 0; i < r.field_points.size(); ++i)
                    f << fmt_num(r.field_points[i].x1) << ',' << fmt_num(r.field_points[i].x2) << ','
                      << fmt_num(r.field[i]) << ",0\n";
                write(dir + "field.csv", f.str());
                std::ostringstream s;
                s << "lambda,sigma_min\n";
                for (const auto& q : r.sigma_scan) s << fmt_num(q[0]) << ',' << fmt_num(q[1]) << '\n';
                write(dir + "sigma_scan.csv", s.str());
                std::ostringstream c;
                c << "x1,column_max\n";
                for (size_t i = 0; i < r.column_x1.size(); ++i)
                    c << fmt_num(r.column_x1[i]) << ',' << fmt_num(r.column_max[i]) << '\n';
                write(dir + "decay.csv", c.str());
            }
            if (cfg_.wants("gnuplot")) {
                std::ostringstream gp;
                gp << "set datafile separator ','\nset terminal pngcairo size 900,600\n"
                   << "set output 'sigma_scan.png'\nset xlabel 'lambda'\nset ylabel 'sigma_min'\n"
                   << "set arrow from " << fmt_num(r.gap.e1) << ",graph 0 to " << fmt_num(r.gap.e1)
                   << ",graph 1 nohead dt 2\n"
                   << "set arrow from " << fmt_num(r.gap.e2) << ",graph 0 to " << fmt_num(r.gap.e2)
                   << ",graph 1 nohead dt 2\n"
                   << "plot 'sigma_scan.csv' every ::1 using 1:2 with linespoints notitle\n"
                   << "unset arrow\nset output 'field.png'\nset xlabel 'x1'\nset ylabel 'x2'\nset view map\n"
                   << "splot 'field.csv' every ::1 using 1:2:3 with points pt 5 ps 0.6 palette notitle\n"
                   << "set output 'decay.png'\nset logscale y\nset xlabel 'x1'\nset ylabel 'max |u|'\n"
                   << "plot 'decay.csv' every ::1 using 1:2 with lines notitle\n";
                write(dir + "interface.gp", gp.str());
            }
            if (verify_) {
                check(r.gap.contains(r.lambda_star_mode), "interface: mode outside the gap interval");
                check(r.dips == 1, "interface: " + std::to_string(r.dips) + " sigma_min dips");
                check(r.continuity_residual < cfg_.tolerances.residual, "interface: continuity residual");
                check(r.derivative_residual < cfg_.tolerances.residual, "interface: derivative residual");
                check(r.dirichlet_residual < cfg_.tolerances.dirichlet, "interface: Dirichlet residual");
                check(r.decay.kappa > 0.0 && r.decay.r2 > 0.95, "interface: decay fit");
            }
            log_ << "interface: delta = " << fmt_num(r.delta) << ", lambda = " << fmt_num(r.lambda_star_mode)
                 << ", kappa = " << fmt_num(r.decay.kappa) << "\n";
            modes_.push_back(std::move(r));
        }
        return modes_;
    }

    void oracle()
    {
        const int nx = cfg_.numerics.fd_nx;
        const auto grid = cfg_.p_grid();
        // FD band chart (p, lambda_1..lambda_4)
        std::vector<std::vector<double>> chart(grid.size());
        parallel_for(int(grid.size()), jobs_, [&](int i) { chart[i] = fd_bloch_eigs(shape_, grid[i], 0.0, 4, nx); });
        std::ostringstream csv;
        csv << "p,lambda1,lambda2,lambda3,lambda4\n";
        for (size_t i = 0; i < grid.size(); ++i) {
            csv << fmt_num(grid[i]);
            for (double l : chart[i]) csv << ',' << fmt_num(l);
            csv << '\n';
        }
        write("fd_bands.csv", csv.str());

        const auto cmp = oracle_band_comparison(shape_, kp_, nx, jobs_);
        nlohmann::json j;
        nlohmann::json pts = nlohmann::json::array();
        double worst = 0.0;
        for (const auto& c : cmp) {
            pts.push_back({{"p", c.p}, {"band", c.band}, {"bie", c.bie}, {"fd", c.fd}, {"rel_diff", c.rel}});
            worst = std::max(worst, c.rel);
        }
        j["band_points"] = pts;
        j["max_rel_diff"] = worst;

        std::vector<std::string> disagreements;
        if (worst > cfg_.tolerances.oracle) disagreements.push_back("bands differ by " + fmt_num(worst));

        const DiracData& d = dirac();
        const auto& gaps = gap();
        nlohmann::json sc = nlohmann::json::array();
        for (size_t k = 0; k < gaps.size(); ++k) {
            const GapInterval& g = gaps[k].interval;
            const auto s = fd_supercell_interface(shape_, g.delta, cfg_.numerics.fd_cells, 60, g.e1, g.e2);
            nlohmann::json e{{"delta", g.delta}, {"found", s.found}, {"in_gap", s.in_gap}};
            if (s.found) {
                e["lambda"] = s.lambda;
                e["kappa"] = s.decay.kappa;
                e["decay_r2"] = s.decay.r2;
            }
            if (k < modes_.size() && s.found) {
                const double diff = std::abs(s.lambda - modes_[k].lambda_star_mode);
                e["bie_lambda"] = modes_[k].lambda_star_mode;
                e["diff_over_width"] = diff / g.width();
                if (diff > cfg_.tolerances.oracle_mode * g.width())
                    disagreements.push_back("supercell mode differs by " + fmt_num(diff));
            }
            if (!s.found) disagreements.push_back("supercell has no in-gap mode at delta " + fmt_num(g.delta));
            sc.push_back(e);
        }
        j["supercell"] = sc;
        j["lambda_star"] = d.lambda_star;
        write_json("oracle.json", j, {"band_points", "max_rel_diff", "supercell"});
        if (cfg_.wants("gnuplot")) {
            write("fd_bands.gp", "set datafile separator ','\nset terminal pngcairo size 900,600\n"
                                 "set output 'fd_bands.png'\nset xlabel 'p'\nset ylabel 'lambda'\n"
                                 "plot for [k=2:5] 'fd_bands.csv' every ::1 using 1:k with lines title columnhead(k)\n");
        }
        for (const auto& m : disagreements) log_ << "oracle: " << m << "\n";
        if (!disagreements.empty()) fail(ErrorKind::Oracle, disagreements.front());
        log_ << "oracle: max band difference " << fmt_num(worst) << "\n";
    }

    struct OraclePoint {
        double p;
        int band;
        double bie, fd, rel;
    };

    // BIE bands against Richardson-extrapolated FD bands at ten (p, band) points.
    static std::vector<OraclePoint> oracle_band_comparison(const ObstacleShape& shape, const KernelParams& kp, int nx,
                                                           int jobs)
    {
        const BandSolver solver(shape, kp);
        std::vector<OraclePoint> pts;
        for (double p : {kPi / 3.0, kPi / 2.0, 2.0 * kPi / 3.0, 5.0 * kPi / 6.0, kPi})
            for (int band : {1, 2}) pts.push_back({p, band, 0, 0, 0});
        parallel_for(int(pts.size()), jobs, [&](int i) {
            auto& q = pts[i];
            q.bie = solver.band_lambda(q.p, q.band, 0.0, 0.5, 200.0).lambda;
            q.fd = fd_band_richardson(shape, q.p, 0.0, q.band, nx).extrapolated;
            q.rel = std::abs(q.fd - q.bie) / q.bie;
        });
        return pts;
    }

private:
    nlohmann::json table_diagnostics(const InterfaceModeResult& r)
    {
        BlochTableParams bp;
        bp.n_bands = cfg_.numerics.table_bands;
        bp.n_p_nodes = cfg_.numerics.table_p_nodes;
        bp.jobs = jobs_;
        const std::filesystem::path cache = cfg_.output.cache.empty() ? out_ / "cache" : std::filesystem::path(cfg_.output.cache);
        bool hit = false;
        const BlochTable t = cached_bloch_table(cache, shape_, kp_, r.delta, bp, &hit);
        return {{"cache_hit", hit},
                {"pole_margin", t.pole_margin(r.lambda_star_mode)},
                {"tail_estimate", t.tail_estimate(r.lambda_star_mode)},
                {"evenness_defect", t.evenness_defect}};
    }

    void write(const std::string& rel, const std::string& content)
    {
        atomic_write(out_ / rel, content);
        written_.push_back(rel);
    }

    void write_json(const std::string& rel, const nlohmann::json& j, const std::vector<std::string>& required)
    {
        validate_json(j, required, rel);
        if (cfg_.wants("json")) write(rel, j.dump(2) + "\n");
    }

    void check(bool ok, const std::string& msg)
    {
        if (ok) return;
        failures_.push_back(msg);
        log_ << "verify: " << msg << "\n";
    }

    RunConfig cfg_;
    std::filesystem::path out_;
    int jobs_;
    bool verify_;
    std::ostream& log_;
    ObstacleShape shape_;
    KernelParams kp_;
    BandSolver solver_;
    std::optional<DiracData> dirac_;
    std::vector<GapReport> gaps_;
    std::vector<InterfaceModeResult> modes_;
    std::vector<std::string> written_;
    std::vector<std::string> failures_;
};

} // namespace wgdirac
