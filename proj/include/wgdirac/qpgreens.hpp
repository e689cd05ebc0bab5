#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "special.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

namespace wgdirac {

struct KernelParams {
    double p = kPi;
    cplx lambda = 50.0;
    int m_trunc = 16;
    double sing_guard = 1e-6;
    int n_reg = 192;
};

// Throws if lambda sits within sing_guard of an empty-strip eigenvalue
// (p + 2 pi m)^2 + (2 pi n)^2, where the series denominators vanish.
inline void check_guard(const KernelParams& kp)
{
    if (kp.m_trunc < 8)
        fail(ErrorKind::Kernel, "m_trunc must be at least 8");
    if (!(kp.sing_guard > 0.0))
        fail(ErrorKind::Kernel, "sing_guard must be positive");
    const double lam = std::abs(kp.lambda);
    const int mmax = std::max(kp.m_trunc, int(std::sqrt(lam) / kTwoPi) + 2);
    const int nmax = int(std::sqrt(lam) / kTwoPi) + 2;
    for (int m = -mmax; m <= mmax; ++m) {
        const double pm = kp.p + kTwoPi * m;
        for (int n = 0; n <= nmax; ++n) {
            const double qn = kTwoPi * n;
            if (std::abs(kp.lambda - (pm * pm + qn * qn)) < kp.sing_guard) {
                std::ostringstream os;
                os << "lambda " << kp.lambda << " within guard of empty-strip eigenvalue (m=" << m << ", n=" << n
                   << ") at p=" << kp.p;
                fail(ErrorKind::Kernel, os.str());
            }
        }
    }
}

// Quasi-periodic Green's function of (Delta + lambda) on the strip 0 < x2 < 1/2
// with Neumann walls: G(x + e1, y) = e^{ip} G(x, y), G ~ log|x - y| / (2 pi).
// Two exact representations are used: modal in x1 (m-form, decays in the
// transverse image distance) and modal in x2 (n-form, decays in |x1 - y1|).
// Near the diagonal the n-form is resummed against the free-space log terms.
class QPKernel {
public:
    static constexpr int kMaxTerms = 420;
    static constexpr double kSplitDist = 0.05;
    static constexpr double kDecay = 37.0;

    explicit QPKernel(const KernelParams& kp) : kp_(kp)
    {
        check_guard(kp_);
        const cplx lam = kp_.lambda;
        eip_ = std::exp(cplx(0.0, kp_.p));
        const int nmax = std::max(kMaxTerms, kp_.n_reg) + 1;
        kap_n_.resize(nmax);
        dm1_.resize(nmax);
        dp_.resize(nmax);
        dm_.resize(nmax);
        for (int n = 0; n < nmax; ++n) {
            const double q = kTwoPi * n;
            const cplx k = principal_sqrt(cplx(q * q, 0.0) - lam);
            if (std::abs(k) < 1e-7)
                fail(ErrorKind::Kernel, "lambda at a transverse cutoff (2 pi n)^2; the longitudinal resummation degenerates");
            kap_n_[n] = k;
            const cplx am = std::exp(-k - cplx(0.0, kp_.p));
            const cplx ap = std::exp(-k + cplx(0.0, kp_.p));
            dm_[n] = 1.0 / (1.0 - am);
            dm1_[n] = am / (1.0 - am);
            dp_[n] = 1.0 / (1.0 - ap);
        }
        mcap_ = std::max(kp_.m_trunc, kMaxTerms);
        kap_m_.resize(2 * mcap_ + 1);
        cm_.resize(2 * mcap_ + 1);
        for (int m = -mcap_; m <= mcap_; ++m) {
            const double pm = kp_.p + kTwoPi * m;
            const cplx k = principal_sqrt(cplx(pm * pm, 0.0) - lam);
            kap_m_[m + mcap_] = k;
            cm_[m + mcap_] = -1.0 / (2.0 * k * (-expm1c(-k)));
        }
    }

    const KernelParams& params() const { return kp_; }

    static cplx principal_sqrt(cplx z)
    {
        cplx s = std::sqrt(z);
        if (s.real() < 0.0) s = -s;
        return s;
    }

    static int terms_for(double dist)
    {
        return std::min(kMaxTerms, int(std::ceil(kDecay / (kTwoPi * dist))) + 2);
    }

    cplx operator()(Point x, Point y) const
    {
        Reduced r = reduce(x, y);
        const double dn = std::abs(r.d);
        const double dm = transverse_dist(x.x2, y.x2);
        cplx v;
        if (dn < kSplitDist && dm < kSplitDist) {
            if (r.d == 0.0 && x.x2 == y.x2)
                fail(ErrorKind::Domain, "Green's function evaluated at coincident points");
            v = regular_all_reduced(r.d, x.x2, y.x2) + singular_reduced(r.d, x.x2, y.x2);
        } else if (dn >= dm) {
            v = sum_n(r.d, x.x2, y.x2, std::max(8, terms_for(dn)));
        } else {
            v = sum_m(r.d, x.x2, y.x2, std::max(kp_.m_trunc, terms_for(dm)));
        }
        return r.phase * v;
    }

    // Raw truncated m-form with |m| <= M.
    cplx series_m(Point x, Point y, int M) const
    {
        Reduced r = reduce(x, y);
        return r.phase * sum_m(r.d, x.x2, y.x2, std::min(M, mcap_));
    }

    // Raw truncated n-form with n <= N.
    cplx series_n(Point x, Point y, int N) const
    {
        Reduced r = reduce(x, y);
        return r.phase * sum_n(r.d, x.x2, y.x2, std::min(N, int(kap_n_.size()) - 1));
    }

    // G minus the direct and both wall-image log terms, each weighted by J0.
    cplx regular_all(Point x, Point y) const
    {
        Reduced r = reduce(x, y);
        return r.phase * regular_all_reduced(r.d, x.x2, y.x2);
    }

    // G - J0(k r) log(r) / (2 pi) with r the distance to the nearest periodic
    // copy of y; finite at x = y.
    cplx regular_direct(Point x, Point y) const
    {
        Reduced r = reduce(x, y);
        const double s2 = x.x2 + y.x2;
        const double rb = std::hypot(r.d, s2), rt = std::hypot(r.d, 1.0 - s2);
        cplx img = 0.0;
        if (rb > 0.0) img += j0r(rb) * std::log(rb);
        if (rt > 0.0) img += j0r(rt) * std::log(rt);
        return r.phase * (regular_all_reduced(r.d, x.x2, y.x2) + img / kTwoPi);
    }

    // J0(sqrt(lambda) r)
    cplx j0r(double r) const { return bessel_j0_sq(kp_.lambda * (r * r)); }

private:
    struct Reduced {
        double d;
        cplx phase;
    };

    Reduced reduce(Point x, Point y) const
    {
        const double d1 = x.x1 - y.x1;
        const double j = std::nearbyint(d1);
        Reduced r{d1 - j, 1.0};
        if (j != 0.0) r.phase = std::exp(cplx(0.0, kp_.p * j));
        return r;
    }

    static double transverse_dist(double x2, double y2)
    {
        const double s2 = x2 + y2;
        return std::min({std::abs(x2 - y2), s2, 1.0 - s2});
    }

    cplx f_n(int n, double d) const
    {
        const cplx k = kap_n_[n];
        const double ad = std::abs(d);
        const cplx e1 = std::exp(-k * ad);
        const cplx e2 = (k.real() * (1.0 - ad) > 45.0) ? cplx(0.0) : std::exp(-k * (1.0 - ad));
        if (d >= 0.0) return -(e1 * dm_[n] + eip_ * e2 * dp_[n]) / (2.0 * k);
        return -(e1 * dp_[n] + std::conj(eip_) * e2 * dm_[n]) / (2.0 * k);
    }

    // f_n minus its free part -exp(-q|d|)/(2q) minus the second-order
    // correction -lambda (1 + q|d|) exp(-q|d|) / (4 q^3); n >= 1.
    cplx f_n_remainder(int n, double d) const
    {
        const cplx lam = kp_.lambda;
        const double q = kTwoPi * n;
        const cplx k = kap_n_[n];
        const double ad = std::abs(d);
        const double eq = std::exp(-q * ad);
        const cplx main = -(eq / (2.0 * k)) * (expm1c(lam * ad / (q + k)) + lam / (q * (q + k)));
        const cplx a2 = -lam * (1.0 + q * ad) * eq / (4.0 * q * q * q);
        const cplx e1 = std::exp(-k * ad);
        const cplx e2 = (k.real() * (1.0 - ad) > 45.0) ? cplx(0.0) : std::exp(-k * (1.0 - ad));
        cplx wrap;
        if (d >= 0.0)
            wrap = -(e1 * dm1_[n] + eip_ * e2 * dp_[n]) / (2.0 * k);
        else
            wrap = -(e1 * (dp_[n] - 1.0) + std::conj(eip_) * e2 * dm_[n]) / (2.0 * k);
        return main - a2 + wrap;
    }

    cplx sum_n(double d, double x2, double y2, int N) const
    {
        const cplx zm = std::exp(cplx(0.0, kTwoPi * (x2 - y2)));
        const cplx zp = std::exp(cplx(0.0, kTwoPi * (x2 + y2)));
        cplx wm = 1.0, wp = 1.0;
        cplx s = 2.0 * f_n(0, d);
        for (int n = 1; n <= N; ++n) {
            wm *= zm;
            wp *= zp;
            s += 2.0 * (wm.real() + wp.real()) * f_n(n, d);
        }
        return s;
    }

    cplx sum_m(double d1, double x2, double y2, int M) const
    {
        const double ad2 = std::abs(x2 - y2), s2 = x2 + y2;
        cplx s = 0.0;
        for (int m = -M; m <= M; ++m) {
            const cplx k = kap_m_[m + mcap_];
            cplx e = std::exp(-k * ad2) + std::exp(-k * s2) + std::exp(-k * (1.0 - s2));
            if (k.real() * (1.0 - ad2) < 45.0) e += std::exp(-k * (1.0 - ad2));
            const double pm = kp_.p + kTwoPi * m;
            s += std::exp(cplx(0.0, pm * d1)) * cm_[m + mcap_] * e;
        }
        return s;
    }

    cplx singular_reduced(double d, double x2, double y2) const
    {
        const double s2 = x2 + y2;
        const double r = std::hypot(d, x2 - y2), rb = std::hypot(d, s2), rt = std::hypot(d, 1.0 - s2);
        cplx v = 0.0;
        if (r > 0.0) v += j0r(r) * std::log(r);
        if (rb > 0.0) v += j0r(rb) * std::log(rb);
        if (rt > 0.0) v += j0r(rt) * std::log(rt);
        return v / kTwoPi;
    }

    cplx regular_all_reduced(double d, double x2, double y2) const
    {
        const cplx lam = kp_.lambda;
        const double d2 = x2 - y2, s2 = x2 + y2;
        const double a = kTwoPi * std::abs(d);
        const double bm = kTwoPi * d2, bp = kTwoPi * s2;

        cplx head = 2.0 * f_n(0, d);
        const cplx zm = std::exp(cplx(0.0, bm)), zp = std::exp(cplx(0.0, bp));
        cplx wm = 1.0, wp = 1.0;
        for (int n = 1; n <= kp_.n_reg; ++n) {
            wm *= zm;
            wp *= zp;
            head += 2.0 * (wm.real() + wp.real()) * f_n_remainder(n, d);
        }

        const double r2 = d * d + d2 * d2, rb2 = d * d + s2 * s2, rt2 = d * d + (1.0 - s2) * (1.0 - s2);
        const double sh = std::sinh(kPi * d);
        const double sm = std::sin(kPi * d2), sp = std::sin(kPi * s2);
        const double rho_m = r2 > 0.0 ? (sh * sh + sm * sm) / (kPi * kPi * r2) : 1.0;
        const double rho_p = rb2 > 0.0 ? (sh * sh + sp * sp) / (kPi * kPi * rb2 * rt2) : 1.0 / rt2;
        const double logs = (-2.0 * a + 2.0 * std::log(4.0) + std::log(kPi * kPi * rho_m) + std::log(kPi * kPi * rho_p)) /
                            (2.0 * kTwoPi);

        auto li = [&](double b) {
            double bb = std::remainder(b, kTwoPi);
            return polylog23_exp(cplx(-a, bb));
        };
        const auto [l2m, l3m] = li(bm);
        const auto [l2p, l3p] = li(bp);
        const cplx poly =
            -lam / (16.0 * kPi * kPi * kPi) * (a * (l2m.real() + l2p.real()) + l3m.real() + l3p.real());

        cplx bes = 0.0;
        if (r2 > 0.0) bes += one_minus_j0_sq(lam * r2) * 0.5 * std::log(r2);
        if (rb2 > 0.0) bes += one_minus_j0_sq(lam * rb2) * 0.5 * std::log(rb2);
        bes += one_minus_j0_sq(lam * rt2) * 0.5 * std::log(rt2);

        return head + logs + poly + bes / kTwoPi;
    }

    KernelParams kp_;
    cplx eip_;
    std::vector<cplx> kap_n_, dm1_, dp_, dm_;
    int mcap_ = 0;
    std::vector<cplx> kap_m_, cm_;
};

inline cplx eval_Ge(Point x, Point y, const KernelParams& kp)
{
    if (x.x1 == y.x1 && x.x2 == y.x2)
        fail(ErrorKind::Domain, "Green's function evaluated at x = y");
    return QPKernel(kp)(x, y);
}

struct SplitValue {
    double log_coeff;
    cplx smooth_part;
};

inline constexpr double kLogCoeff = 1.0 / kTwoPi;

// G = log_coeff * log|x - y| + smooth_part, for |x - y| < 0.1.
inline SplitValue eval_Ge_split(Point x, Point y, const KernelParams& kp)
{
    const double r = norm(x - y);
    if (!(r < 0.1))
        fail(ErrorKind::Domain, "split evaluation requires |x - y| < 0.1");
    QPKernel K(kp);
    cplx smooth = K.regular_direct(x, y);
    if (r > 0.0) smooth -= one_minus_j0_sq(kp.lambda * (r * r)) * std::log(r) / kTwoPi;
    return {kLogCoeff, smooth};
}

enum class Deriv { dP, dLambda };

inline cplx kernel_derivative(Deriv which, Point x, Point y, const KernelParams& kp, double step)
{
    if (!(step >= 1e-6 && step <= 1e-3))
        fail(ErrorKind::Kernel, "derivative step outside [1e-6, 1e-3]");
    KernelParams a = kp, b = kp;
    if (which == Deriv::dP) {
        a.p += step;
        b.p -= step;
    } else {
        a.lambda += step;
        b.lambda -= step;
    }
    return (eval_Ge(x, y, a) - eval_Ge(x, y, b)) / (2.0 * step);
}

} // namespace wgdirac
