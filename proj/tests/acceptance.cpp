#include <wgdirac/dirac.hpp>
#include <wgdirac/fdoracle.hpp>
#include <wgdirac/gapgreens.hpp>
#include <wgdirac/interface.hpp>
#include <wgdirac/pipeline.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

using namespace wgdirac;

namespace {

// Pinned tolerances.
constexpr double kDiracSplit = 1e-6;      // relative to lambda*
constexpr double kKernelSigma = 1e-5;     // two smallest singular values, relative to sigma_max
constexpr double kThirdSigma = 1e-2;
constexpr double kDiracSeconds = 120.0;
constexpr double kSlopeTol = 0.03;
constexpr double kPatternTol = 0.05;
constexpr double kRatioLo = 1.8, kRatioHi = 2.2;
constexpr double kEdgeTol = 0.15;
constexpr double kSwapDominant = 0.95, kSwapCross = 0.2;
constexpr double kModeVsFd = 0.2;         // fraction of the gap width
constexpr double kInterfaceResidual = 5e-2;
constexpr double kDirichletResidual = 1e-2;
constexpr double kInterfaceSeconds = 1800.0;
constexpr double kDecayR2 = 0.95;
constexpr double kKappaTol = 0.25;
constexpr double kKernelIdentity = 1e-12;
constexpr double kGapGreensIdentity = 1e-4;
constexpr double kHelmholtz = 1e-2;
constexpr double kOracleTol = 5e-3;
constexpr double kFluxTol = 0.05;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void run(int id, const char* name, const std::function<bool(std::ostringstream&)>& body)
{
    const auto t0 = Clock::now();
    std::ostringstream detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail << "exception: " << e.what();
    }
    if (!ok) ++failures;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", ok ? "PASS" : "FAIL", id, name, detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
}

const ObstacleShape& disk()
{
    static const ObstacleShape s = make_disk(0.1, 32);
    return s;
}

const BandSolver& solver()
{
    static const BandSolver b(disk(), KernelParams{});
    return b;
}

const DiracData& dirac()
{
    static const DiracData d = analyze_dirac(solver(), 20.0, 90.0);
    return d;
}

std::optional<InterfaceModeResult> g_mode;
std::optional<SupercellResult> g_fd;

} // namespace

int main()
{
    std::printf("acceptance: default disk radius 0.1, 32 boundary nodes\n");

    run(1, "Dirac crossing", [](std::ostringstream& os) {
        const auto t0 = Clock::now();
        const DiracPoint dp = dirac_point(solver(), 20.0, 90.0);
        const auto s = min_singular_values(solver().assemble(kPi, dp.lambda_star, 0.0), solver().weights(), 3);
        const double t = seconds_since(t0);
        const double r0 = s.smallest[0] / s.sigma_max, r1 = s.smallest[1] / s.sigma_max,
                     r2 = s.smallest[2] / s.sigma_max;
        os << "lambda* = " << dp.lambda_star << ", split/lambda* = " << dp.split / dp.lambda_star
           << ", sigma ratios " << r0 << ", " << r1 << ", " << r2 << ", " << t << " s";
        return dp.split < kDiracSplit * dp.lambda_star && r0 < kKernelSigma && r1 < kKernelSigma && r2 > kThirdSigma &&
               t < kDiracSeconds;
    });

    run(2, "slope consistency", [](std::ostringstream& os) {
        const DiracData& d = dirac();
        const SlopeFit s = band_slope(solver(), d.lambda_star);
        const double ref = std::abs(d.theta_star / d.gamma_star);
        const double rel = std::abs(s.alpha - ref) / ref;
        os << "band slope " << s.alpha << ", |theta*/gamma*| = " << ref << ", rel diff " << rel;
        return rel < kSlopeTol;
    });

    run(3, "pairing pattern", [](std::ostringstream& os) {
        bool ok = true;
        for (double radius : {0.08, 0.1, 0.12}) {
            const ObstacleShape s = make_disk(radius, 32);
            const DiracData d = analyze_dirac(BandSolver(s, KernelParams{}), 20.0, 90.0);
            const double sdiag = d.pair_s(0, 0).real() * d.pair_s(1, 1).real();
            os << "r=" << radius << ": T_lambda " << d.residuals.t_lambda << ", T_p " << d.residuals.t_p << ", S "
               << d.residuals.s << "; ";
            ok = ok && d.residuals.max() < kPatternTol && sdiag < 0.0;
        }
        return ok;
    });

    run(4, "gap opening and linear scaling", [](std::ostringstream& os) {
        const DiracData& d = dirac();
        const double lo = d.lambda_star - 12.0, hi = d.lambda_star + 12.0;
        std::vector<double> widths;
        bool ok = true;
        for (double delta : {0.005, 0.01, 0.02}) {
            double width = 0.0;
            for (double dl : {delta, -delta}) {
                double lower_max = -1e300, upper_min = 1e300, e1 = 0.0, e2 = 0.0;
                for (double p : {kPi, kPi - 0.05, kPi - 0.1}) {
                    const int base = solver().count_below(p, lo, dl);
                    const double l1 = solver().band_lambda(p, base + 1, dl, lo, hi).lambda;
                    const double l2 = solver().band_lambda(p, base + 2, dl, lo, hi).lambda;
                    if (p == kPi) {
                        e1 = l1;
                        e2 = l2;
                    }
                    lower_max = std::max(lower_max, l1);
                    upper_min = std::min(upper_min, l2);
                }
                const double pred = delta * std::abs(d.t_star / d.gamma_star);
                const double err = std::max(std::abs((e2 - d.lambda_star) / pred - 1.0),
                                            std::abs((d.lambda_star - e1) / pred - 1.0));
                ok = ok && lower_max < d.lambda_star && d.lambda_star < upper_min && err < kEdgeTol;
                if (dl > 0) {
                    width = e2 - e1;
                    os << "delta " << delta << ": width " << width << ", edge error " << err << "; ";
                }
            }
            widths.push_back(width);
        }
        const double q1 = widths[1] / widths[0], q2 = widths[2] / widths[1];
        os << "ratios " << q1 << ", " << q2;
        return ok && q1 >= kRatioLo && q1 <= kRatioHi && q2 >= kRatioLo && q2 <= kRatioHi;
    });

    run(5, "band-edge eigenspace swap", [](std::ostringstream& os) {
        const SwapReport s = mode_swap_check(dirac(), solver(), 0.01);
        os << "dominant min " << s.dominant_min << ", cross max " << s.cross_max << ", swapped "
           << (s.swapped ? "yes" : "no");
        return s.dominant_min > kSwapDominant && s.cross_max < kSwapCross && s.swapped;
    });

    run(6, "interface mode existence and uniqueness", [](std::ostringstream& os) {
        const auto t0 = Clock::now();
        const GapInterval g = gap_interval(dirac(), 0.01, 0.9);
        const InterfaceParams ip;
        InterfaceModeResult r = find_interface_eigenvalue(disk(), KernelParams{}, g, ip);
        reconstruct_interface_mode(disk(), KernelParams{}, r, ip, {}, false);
        const double t = seconds_since(t0);
        g_mode = r;
        g_fd = fd_supercell_interface(disk(), 0.01, 12, 60, g.e1, g.e2);
        const double diff = g_fd->found ? std::abs(g_fd->lambda - r.lambda_star_mode) : 1e300;
        os << "I = [" << g.e1 << ", " << g.e2 << "], lambda = " << r.lambda_star_mode << ", dips " << r.dips
           << ", FD " << g_fd->lambda << " (diff/width " << diff / g.width() << "), residuals "
           << r.continuity_residual << ", " << r.derivative_residual << ", " << r.dirichlet_residual << ", solve "
           << t << " s";
        return g.contains(r.lambda_star_mode) && r.dips == 1 && g_fd->found && diff < kModeVsFd * g.width() &&
               r.continuity_residual < kInterfaceResidual && r.derivative_residual < kInterfaceResidual &&
               r.dirichlet_residual < kDirichletResidual && t < kInterfaceSeconds;
    });

    run(7, "exponential decay", [](std::ostringstream& os) {
        if (!g_mode || !g_fd || !g_fd->found) {
            os << "no interface mode available";
            return false;
        }
        const DecayFit& b = g_mode->decay;
        const DecayFit& f = g_fd->decay;
        const double rel = std::abs(b.kappa - f.kappa) / f.kappa;
        os << "kappa " << b.kappa << " (R^2 " << b.r2 << "), FD kappa " << f.kappa << ", rel diff " << rel;
        return b.kappa > 0.0 && b.r2 > kDecayR2 && rel < kKappaTol;
    });

    run(8, "Green's function identities", [](std::ostringstream& os) {
        std::mt19937 rng(20240611);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        auto point = [&] { return Point{(u(rng) - 0.5) * 2.0, 0.5 * u(rng)}; };
        const double lam = dirac().lambda_star, p = 2.3, h = 0.037;
        auto kp = [&](double pp) {
            KernelParams k;
            k.p = pp;
            k.lambda = lam;
            return k;
        };
        const QPKernel K(kp(p)), Kp(kp(kPi + h)), Km(kp(kPi - h));
        const cplx eip = std::exp(cplx(0.0, p));
        double qp = 0.0, cj = 0.0;
        for (int i = 0; i < 50; ++i) {
            const Point x = point(), y = point();
            if (norm(x - y) < 1e-3) continue;
            qp = std::max(qp, std::abs(K(x + Point{1.0, 0.0}, y) - eip * K(x, y)));
            cj = std::max(cj, std::abs(Kp(x, y) - std::conj(Km(x, y))));
        }
        const GapGreens g(disk(), 0.01, 52.3, KernelParams{}, 64);
        const Point x{0.0, 0.13}, y{0.0, 0.41}, z{1.6, 0.2};
        const double rec = std::abs(g(z, y) - g(y, z)) / std::abs(g(z, y));
        const double par = std::abs(g(z, y) - g({-1.6, 0.2}, y)) / std::abs(g(z, y));
        const double rec0 = std::abs(g(x, y) - g(y, x)) / std::abs(g(x, y));
        const double hr = helmholtz_residual_check(g, y, {{0.5, 0.2}, {1.3, 0.1}, {-0.6, 0.4}}, 1e-3);
        os << "quasi-periodicity " << qp << ", conjugation " << cj << ", reciprocity " << std::max(rec, rec0)
           << ", parity " << par << ", Helmholtz residual " << hr;
        return qp < kKernelIdentity && cj < kKernelIdentity && rec < kGapGreensIdentity &&
               rec0 < kGapGreensIdentity && par < kGapGreensIdentity && hr < kHelmholtz;
    });

    run(9, "oracle equivalence", [](std::ostringstream& os) {
        const auto pts = Pipeline::oracle_band_comparison(disk(), KernelParams{}, 80, 1);
        double worst = 0.0;
        for (const auto& q : pts) worst = std::max(worst, q.rel);
        os << pts.size() << " points, max rel diff " << worst;
        return pts.size() == 10 && worst < kOracleTol;
    });

    run(10, "Bloch flux identity", [](std::ostringstream& os) {
        const DiracData& d = dirac();
        const FluxReport r = flux_identity(d, disk(), KernelParams{}, d.alpha_star);
        os << "flux " << r.flux.real() << (r.flux.imag() < 0 ? " - " : " + ") << std::abs(r.flux.imag())
           << "i, alpha/2 = " << 0.5 * r.alpha << ", rel error " << r.rel_error;
        return r.rel_error < kFluxTol;
    });

    std::printf("acceptance: %d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
