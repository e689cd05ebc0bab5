#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "layerops.hpp"
#include "parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace wgdirac {

struct DispersionCurve {
    int band_index = 1;
    double delta = 0.0;
    std::vector<double> p_grid;
    std::vector<double> lambdas;
    std::vector<double> sigma_mins;
};

struct BandPoint {
    double lambda = 0.0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
};

// Characteristic values of T(p, .) are counted by inertia: for real lambda
// the symmetrized operator is Hermitian with strictly decreasing eigenvalues
// between empty-strip poles, and each pole adds one positive eigenvalue.
class BandSolver {
public:
    BandSolver(const ObstacleShape& shape, KernelParams kp) : shape_(shape), kp_(kp), w_(stacked_weights(shape)) {}

    const ObstacleShape& shape() const { return shape_; }
    const KernelParams& kernel_params() const { return kp_; }
    const VecR& weights() const { return w_; }

    OperatorMatrix assemble(double p, double lambda, double delta) const
    {
        return assemble_T(p, lambda, delta, shape_, kp_);
    }

    // eigenvalues of the Hermitian part, descending
    std::vector<double> eigs(double p, double lambda, double delta) const
    {
        const MatC S = symmetrized(assemble(p, lambda, delta), w_);
        const MatC H = 0.5 * (S + S.adjoint());
        Eigen::SelfAdjointEigenSolver<MatC> es(H, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            fail(ErrorKind::LinearAlgebra, "Hermitian eigensolver failed");
        std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
        std::sort(ev.begin(), ev.end(), std::greater<>());
        return ev;
    }

    static int positives(const std::vector<double>& ev)
    {
        return int(std::count_if(ev.begin(), ev.end(), [](double v) { return v > 0.0; }));
    }

    // number of empty-strip eigenvalues (p + 2 pi m)^2 + (2 pi n)^2 in (a, b)
    static int poles_between(double p, double a, double b)
    {
        int c = 0;
        const int mm = int(std::sqrt(std::max(std::abs(a), std::abs(b))) / kTwoPi) + 3;
        for (int m = -mm; m <= mm; ++m)
            for (int n = 0; n <= mm; ++n) {
                const double pm = p + kTwoPi * m, qn = kTwoPi * n;
                const double e = pm * pm + qn * qn;
                if (e > a && e < b) ++c;
            }
        return c;
    }

    static double nearest_pole_distance(double p, double lambda)
    {
        // transverse cutoffs (2 pi n)^2 are removable but excluded by the kernel
        double best = 1e300;
        for (int n = 0; n <= int(std::sqrt(std::abs(lambda)) / kTwoPi) + 2; ++n)
            best = std::min(best, std::abs(kTwoPi * n * kTwoPi * n - lambda));
        const int mm = int(std::sqrt(std::abs(lambda)) / kTwoPi) + 3;
        for (int m = -mm; m <= mm; ++m)
            for (int n = 0; n <= mm; ++n) {
                const double pm = p + kTwoPi * m, qn = kTwoPi * n;
                best = std::min(best, std::abs(pm * pm + qn * qn - lambda));
            }
        return best;
    }

    // number of characteristic values of T(p, .) below lambda
    int count_below(double p, double lambda, double delta) const
    {
        const int ref = positives(eigs(p, kRefLambda, delta));
        const int c = ref - positives(eigs(p, safe(p, lambda), delta)) + poles_between(p, kRefLambda, safe(p, lambda));
        if (c < 0)
            fail(ErrorKind::Refinement, "negative characteristic value count; discretization too coarse");
        return c;
    }

    // lambda of band `band` (1-based) at p, searched inside [lo, hi].
    BandPoint band_lambda(double p, int band, double delta, double lo, double hi) const
    {
        const int ref = positives(eigs(p, kRefLambda, delta));
        auto count = [&](double lam) {
            return ref - positives(eigs(p, lam, delta)) + poles_between(p, kRefLambda, lam);
        };
        lo = safe(p, lo);
        hi = safe(p, hi);
        int clo = count(lo), chi = count(hi);
        if (clo >= band || chi < band) {
            std::ostringstream os;
            os << "band " << band << " not bracketed at p=" << p << " in [" << lo << ", " << hi << "] (counts " << clo
               << ", " << chi << ")";
            fail(ErrorKind::NoBand, os.str());
        }
        return bisect_and_refine(p, band, delta, lo, hi, clo, count);
    }

    // Bracket contract: exactly one crossing inside [lo, hi].
    BandPoint find_band_lambda(double p, double lo, double hi, double delta) const
    {
        const int ref = positives(eigs(p, kRefLambda, delta));
        auto count = [&](double lam) {
            return ref - positives(eigs(p, lam, delta)) + poles_between(p, kRefLambda, lam);
        };
        lo = safe(p, lo);
        hi = safe(p, hi);
        const int clo = count(lo), chi = count(hi);
        if (chi == clo)
            fail(ErrorKind::NoBand, "no characteristic value in bracket");
        if (chi > clo + 1)
            fail(ErrorKind::AmbiguousBracket, "more than one characteristic value in bracket");
        return bisect_and_refine(p, clo + 1, delta, lo, hi, clo, count);
    }

    // all characteristic values in (lo, hi) at p, ascending, with multiplicity
    std::vector<double> all_in(double p, double delta, double lo, double hi) const
    {
        const int ref = positives(eigs(p, kRefLambda, delta));
        auto count = [&](double lam) {
            return ref - positives(eigs(p, lam, delta)) + poles_between(p, kRefLambda, lam);
        };
        lo = safe(p, lo);
        hi = safe(p, hi);
        const int clo = count(lo), chi = count(hi);
        std::vector<double> out;
        for (int b = clo + 1; b <= chi; ++b) out.push_back(bisect_and_refine(p, b, delta, lo, hi, clo, count).lambda);
        return out;
    }

    BandPoint certify(double p, double lambda, double delta) const
    {
        const auto s = min_singular_values(assemble(p, lambda, delta), w_, 1);
        return {lambda, s.smallest[0], s.sigma_max};
    }

    static constexpr double kRefLambda = -1.0;
    double bisect_tol = 2e-3;
    double certify_rel = 1e-8;

private:
    double safe(double p, double lam) const
    {
        for (int k = 0; k < 20 && nearest_pole_distance(p, lam) < 1e3 * kp_.sing_guard; ++k) lam += 7e3 * kp_.sing_guard;
        return lam;
    }

    template <class Count>
    BandPoint bisect_and_refine(double p, int band, double delta, double lo, double hi, int clo, Count&& count) const
    {
        while (hi - lo > bisect_tol) {
            const double mid = safe(p, 0.5 * (lo + hi));
            if (mid <= lo || mid >= hi) break;
            const int c = count(mid);
            if (c >= band)
                hi = mid;
            else {
                lo = mid;
                clo = c;
            }
        }
        if (poles_between(p, lo, hi) != 0)
            fail(ErrorKind::Refinement, "empty-strip pole inside final band bracket");
        const auto elo = eigs(p, lo, delta);
        const int P = positives(elo);
        const int K = P - (band - 1 - clo);
        if (K < 1 || K > int(elo.size()))
            fail(ErrorKind::Refinement, "could not identify crossing eigenvalue");
        auto f = [&](double lam) { return eigs(p, lam, delta)[K - 1]; };
        double a = lo, b = hi, fa = elo[K - 1], fb = f(hi);
        if (!(fa > 0.0) || fb > 0.0)
            fail(ErrorKind::Refinement, "crossing eigenvalue does not change sign in bracket");
        // Illinois regula falsi
        int side = 0;
        double x = a;
        for (int it = 0; it < 60; ++it) {
            x = (a * fb - b * fa) / (fb - fa);
            const double fx = f(x);
            if (fx == 0.0) break;
            if (fx > 0.0) {
                a = x;
                fa = fx;
                if (side == 1) fb *= 0.5;
                side = 1;
            } else {
                b = x;
                fb = fx;
                if (side == -1) fa *= 0.5;
                side = -1;
            }
            if (b - a < 1e-12 * std::abs(x) || std::abs(fx) < 1e-15) break;
        }
        BandPoint bp = certify(p, x, delta);
        if (!(bp.sigma_min < certify_rel * bp.sigma_max)) {
            std::ostringstream os;
            os << "band point at p=" << p << " lambda=" << x << " failed certification (sigma_min/sigma_max = "
               << bp.sigma_min / bp.sigma_max << ")";
            fail(ErrorKind::Refinement, os.str());
        }
        return bp;
    }

    const ObstacleShape& shape_;
    KernelParams kp_;
    VecR w_;
};

struct DiracPoint {
    double p_star = kPi;
    double lambda_star = 0.0;
    double split = 0.0; // |lambda_2(pi) - lambda_1(pi)|
};

// Lowest characteristic value at p = pi inside the window; it must be double.
// Folding makes every value at p = pi double, so the lowest pair is taken.
inline DiracPoint dirac_point(const BandSolver& solver, double lo, double hi, double rel_tol = 1e-6)
{
    const int base = solver.count_below(kPi, lo, 0.0);
    DiracPoint d;
    double l1 = 0.0, l2 = 0.0;
    try {
        l1 = solver.band_lambda(kPi, base + 1, 0.0, lo, hi).lambda;
        l2 = solver.band_lambda(kPi, base + 2, 0.0, lo, hi).lambda;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoBand) throw;
        fail(ErrorKind::AssumptionViolation, std::string("fewer than two characteristic values in Dirac window: ") + e.what());
    }
    d.lambda_star = 0.5 * (l1 + l2);
    d.split = std::abs(l2 - l1);
    if (!(d.split < rel_tol * std::abs(d.lambda_star))) {
        std::ostringstream os;
        os << "lowest characteristic values at p = pi in [" << lo << ", " << hi << "] are not a double pair (split "
           << d.split << ")";
        fail(ErrorKind::AssumptionViolation, os.str());
    }
    return d;
}

// Default p-grid: 41 uniform points on [0, 2 pi] plus 21 points with |p - pi| <= 0.15.
inline std::vector<double> default_p_grid()
{
    std::vector<double> g;
    for (int i = 0; i <= 40; ++i) g.push_back(kTwoPi * i / 40.0);
    for (int i = 0; i <= 20; ++i) g.push_back(kPi - 0.15 + 0.3 * i / 20.0);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), g.end());
    return g;
}

// Traces band `band` over p_grid; each point is found by counting in a window
// around the previous value, widened on failure.
inline DispersionCurve trace_band(const BandSolver& solver, int band, const std::vector<double>& p_grid, double delta,
                                  double lo, double hi, int jobs = 1)
{
    if (!std::is_sorted(p_grid.begin(), p_grid.end()))
        fail(ErrorKind::Refinement, "p grid must be sorted");
    DispersionCurve c;
    c.band_index = band;
    c.delta = delta;
    c.p_grid = p_grid;
    c.lambdas.resize(p_grid.size());
    c.sigma_mins.resize(p_grid.size());
    parallel_for(int(p_grid.size()), jobs, [&](int i) {
        const BandPoint bp = solver.band_lambda(p_grid[i], band, delta, lo, hi);
        c.lambdas[i] = bp.lambda;
        c.sigma_mins[i] = bp.sigma_min;
    });
    return c;
}

} // namespace wgdirac
