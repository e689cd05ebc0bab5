#pragma once

#include "bands.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "layerops.hpp"
#include "parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <vector>

namespace wgdirac {

struct FDSteps {
    double dp = 1e-4;
    double dl = 1e-4;
    double dd = 1e-4;
};

struct PatternResiduals {
    double t_lambda = 0.0;
    double t_p = 0.0;
    double s = 0.0;
    double max() const { return std::max({t_lambda, t_p, s}); }
};

struct DiracData {
    double p_star = kPi;
    double lambda_star = 0.0;
    DensityPair phi_odd;
    DensityPair phi_even;
    double gamma_star = 0.0;
    double theta_star = 0.0;
    double t_star = 0.0;
    double alpha_star = 0.0;
    double beta_star = 0.0;
    Eigen::Matrix2cd pair_lambda = Eigen::Matrix2cd::Zero();
    Eigen::Matrix2cd pair_p = Eigen::Matrix2cd::Zero();
    Eigen::Matrix2cd pair_s = Eigen::Matrix2cd::Zero();
    PatternResiduals residuals;
    double odd_residual = 0.0;  // density-level reflection residuals
    double even_residual = 0.0;
};

// Reflection of the period cell about x1 = 1/2 acting on densities:
// obstacle 1 <-> obstacle 2, node j <-> mirrored node. At p = pi a field odd
// about x1 = 0 is even about x1 = 1/2, so the odd Dirac mode is its +1 eigenvector.
inline VecC cell_reflection(const VecC& v, const ObstacleShape& shape)
{
    const int n = shape.n_nodes();
    VecC out(2 * n);
    for (int j = 0; j < n; ++j) {
        const int r = shape.reflected_index(j);
        out[j] = v[n + r];
        out[n + j] = v[r];
    }
    return out;
}

// Fixes the gauge: largest-magnitude entry real positive, unit weighted norm.
inline VecC gauge_fixed(VecC v, const VecR& w)
{
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    v *= std::conj(v[imax]) / std::abs(v[imax]);
    return v / weighted_norm(v, w);
}

struct SymmetrizedModes {
    DensityPair odd;
    DensityPair even;
    double odd_residual = 0.0;
    double even_residual = 0.0;
};

inline SymmetrizedModes symmetrize_dirac_modes(const std::vector<DensityPair>& raw, const ObstacleShape& shape,
                                               double tol = 1e-3)
{
    if (raw.size() != 2)
        fail(ErrorKind::NoKernel, "Dirac kernel must be two-dimensional");
    const VecR w = stacked_weights(shape);
    const Eigen::Index m = w.size();
    MatC V(m, 2);
    V.col(0) = raw[0].stacked();
    V.col(1) = raw[1].stacked();
    MatC PV(m, 2);
    PV.col(0) = cell_reflection(V.col(0), shape);
    PV.col(1) = cell_reflection(V.col(1), shape);
    const MatC WV = w.cast<cplx>().asDiagonal() * V;
    const Eigen::Matrix2cd G = V.adjoint() * WV;
    const Eigen::Matrix2cd R = G.ldlt().solve(WV.adjoint() * PV);
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(R);
    if (es.info() != Eigen::Success)
        fail(ErrorKind::SymmetryFailure, "reflection eigenproblem failed");
    const int ip = es.eigenvalues()[0].real() > es.eigenvalues()[1].real() ? 0 : 1;
    VecC odd = gauge_fixed(V * es.eigenvectors().col(ip), w);
    VecC even = gauge_fixed(V * es.eigenvectors().col(1 - ip), w);
    SymmetrizedModes out;
    out.odd_residual = weighted_norm(cell_reflection(odd, shape) - odd, w);
    out.even_residual = weighted_norm(cell_reflection(even, shape) + even, w);
    if (!(out.odd_residual < tol) || !(out.even_residual < tol)) {
        std::ostringstream os;
        os << "Dirac modes not reflection symmetric (residuals " << out.odd_residual << ", " << out.even_residual << ")";
        fail(ErrorKind::SymmetryFailure, os.str());
    }
    out.odd = DensityPair::from_stacked(odd);
    out.even = DensityPair::from_stacked(even);
    return out;
}

// Sample points in one period [-1/2, 1/2) x (0, 1/2) at least `margin` away
// from the obstacles of every listed configuration.
inline std::vector<Point> cell_sample_grid(const ObstacleShape& shape, const std::vector<double>& deltas, int nx,
                                           int ny, double margin)
{
    std::vector<Point> pts;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const Point x{-0.5 + (i + 0.5) / nx, 0.5 * (j + 0.5) / ny};
            bool ok = true;
            for (double d : deltas)
                for (const Point& c : cell_centers(d)) {
                    const double k = std::floor(x.x1 - c.x1 + 0.5);
                    if (norm(x - Point{c.x1 + k, c.x2}) < shape.max_radius() + margin) ok = false;
                }
            if (ok) pts.push_back(x);
        }
    return pts;
}

// max |u(-x1, x2) - sign u(x1, x2)| over the grid, relative to max |u|.
inline double field_reflection_residual(const LayerPotential& u, const std::vector<Point>& grid, double sign)
{
    double scale = 0.0, res = 0.0;
    for (const Point& x : grid) {
        const cplx a = u(x), b = u({-x.x1, x.x2});
        scale = std::max(scale, std::abs(a));
        res = std::max(res, std::abs(b - sign * a));
    }
    return res / scale;
}

// P(j, i) = phi_j^H W X phi_i
inline Eigen::Matrix2cd pairing_matrix(const MatC& X, const VecC& f1, const VecC& f2, const VecR& w)
{
    const std::array<const VecC*, 2> f{&f1, &f2};
    Eigen::Matrix2cd P;
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const VecC Xi = X * *f[i];
            P(j, i) = (f[j]->conjugate().array() * w.array().cast<cplx>() * Xi.array()).sum();
        }
    return P;
}

inline PatternResiduals pattern_residuals(const Eigen::Matrix2cd& Pl, const Eigen::Matrix2cd& Pp,
                                          const Eigen::Matrix2cd& Ps)
{
    PatternResiduals r;
    const double g = 0.5 * std::abs(Pl(0, 0) + Pl(1, 1));
    r.t_lambda = std::max({std::abs(Pl(0, 1)), std::abs(Pl(1, 0)), std::abs(Pl(0, 0) - Pl(1, 1)),
                           std::abs(Pl(0, 0).imag()), std::abs(Pl(1, 1).imag())}) /
                 g;
    const double th = 0.5 * std::abs(Pp(1, 0) - Pp(0, 1));
    r.t_p = std::max({std::abs(Pp(0, 0)), std::abs(Pp(1, 1)), std::abs(Pp(0, 1).real()), std::abs(Pp(1, 0).real()),
                      std::abs(Pp(0, 1) + Pp(1, 0))}) /
            th;
    const double t = 0.5 * std::abs(Ps(0, 0) - Ps(1, 1));
    r.s = std::max({std::abs(Ps(0, 1)), std::abs(Ps(1, 0)), std::abs(Ps(0, 0) + Ps(1, 1)), std::abs(Ps(0, 0).imag()),
                    std::abs(Ps(1, 1).imag())}) /
          t;
    return r;
}

// gamma*, theta*, t* from central differences of the assembled operator.
inline void compute_coefficients(DiracData& d, const ObstacleShape& shape, const KernelParams& kp, FDSteps steps,
                                 int jobs = 1, bool enforce = true, double pattern_tol = 0.05)
{
    for (double s : {steps.dp, steps.dl, steps.dd})
        if (!(s >= 1e-5 && s <= 1e-3))
            fail(ErrorKind::Domain, "finite-difference step outside [1e-5, 1e-3]");
    const double p = d.p_star, l = d.lambda_star;
    struct Arg {
        double p, l, delta;
    };
    const std::array<Arg, 6> args{{{p, l + steps.dl, 0.0},
                                   {p, l - steps.dl, 0.0},
                                   {p + steps.dp, l, 0.0},
                                   {p - steps.dp, l, 0.0},
                                   {p, l, steps.dd},
                                   {p, l, -steps.dd}}};
    std::array<MatC, 6> T;
    parallel_for(6, jobs, [&](int i) { T[i] = assemble_T(args[i].p, args[i].l, args[i].delta, shape, kp).entries; });
    const MatC Tl = (T[0] - T[1]) / (2.0 * steps.dl);
    const MatC Tp = (T[2] - T[3]) / (2.0 * steps.dp);
    const MatC S = (T[4] - T[5]) / (2.0 * steps.dd);
    const VecR w = stacked_weights(shape);
    const VecC f1 = d.phi_odd.stacked(), f2 = d.phi_even.stacked();
    d.pair_lambda = pairing_matrix(Tl, f1, f2, w);
    d.pair_p = pairing_matrix(Tp, f1, f2, w);
    d.pair_s = pairing_matrix(S, f1, f2, w);
    d.gamma_star = 0.5 * (d.pair_lambda(0, 0) + d.pair_lambda(1, 1)).real();
    d.theta_star = d.pair_p(1, 0).imag();
    d.t_star = 0.5 * (d.pair_s(0, 0) - d.pair_s(1, 1)).real();
    d.alpha_star = std::abs(d.theta_star / d.gamma_star);
    d.beta_star = d.t_star / d.gamma_star;
    d.residuals = pattern_residuals(d.pair_lambda, d.pair_p, d.pair_s);
    if (enforce && !(d.residuals.max() < pattern_tol)) {
        std::ostringstream os;
        os << "pairing matrices off pattern (T_lambda " << d.residuals.t_lambda << ", T_p " << d.residuals.t_p << ", S "
           << d.residuals.s << ")";
        fail(ErrorKind::StructureViolation, os.str());
    }
}

// Full Dirac analysis: locate lambda*, extract and symmetrize the kernel, and
// compute the coefficients.
inline DiracData analyze_dirac(const BandSolver& solver, double lo, double hi, FDSteps steps = {}, int jobs = 1,
                               bool enforce = true)
{
    const DiracPoint dp = dirac_point(solver, lo, hi);
    DiracData d;
    d.p_star = dp.p_star;
    d.lambda_star = dp.lambda_star;
    const OperatorMatrix T = solver.assemble(kPi, dp.lambda_star, 0.0);
    const auto raw = kernel_vectors(T, solver.shape(), 2);
    const SymmetrizedModes m = symmetrize_dirac_modes(raw, solver.shape());
    d.phi_odd = m.odd;
    d.phi_even = m.even;
    d.odd_residual = m.odd_residual;
    d.even_residual = m.even_residual;
    compute_coefficients(d, solver.shape(), solver.kernel_params(), steps, jobs, enforce);
    return d;
}

struct GapInterval {
    double e1 = 0.0;
    double e2 = 0.0;
    double delta = 0.0;
    double c = 0.9;
    double width() const { return e2 - e1; }
    bool contains(double l) const { return l > e1 && l < e2; }
};

inline GapInterval gap_interval(const DiracData& d, double delta, double c)
{
    if (!(c > 0.0 && c < 1.0))
        fail(ErrorKind::Domain, "gap fraction c must lie in (0, 1)");
    if (delta < 0.0)
        fail(ErrorKind::Domain, "gap interval needs delta >= 0");
    if (!(std::abs(d.t_star) > 1e-10 * std::abs(d.gamma_star)))
        fail(ErrorKind::DegenerateGap, "t* vanishes; no gap opens at first order");
    const double h = c * delta * std::abs(d.beta_star);
    return {d.lambda_star - h, d.lambda_star + h, delta, c};
}

// One-sided slopes of bands 1 and 2 at p -> pi-, Richardson-corrected from
// steps h and h/2.
struct SlopeFit {
    double slope1 = 0.0; // d lambda_1 / dp at pi-
    double slope2 = 0.0; // d lambda_2 / dp at pi-
    double alpha = 0.0;  // mean of |slope1|, |slope2|
    double mismatch = 0.0;
};

inline SlopeFit band_slope(const BandSolver& solver, double lambda_star, double h = 0.02, double window = 6.0)
{
    auto at = [&](double hh, int band) {
        return solver.band_lambda(kPi - hh, band, 0.0, lambda_star - window, lambda_star + window).lambda;
    };
    const int base = solver.count_below(kPi - h, lambda_star - window, 0.0);
    auto slope = [&](int band, double hh) { return (lambda_star - at(hh, base + band)) / hh; };
    SlopeFit f;
    f.slope1 = 2.0 * slope(1, 0.5 * h) - slope(1, h);
    f.slope2 = 2.0 * slope(2, 0.5 * h) - slope(2, h);
    f.alpha = 0.5 * (std::abs(f.slope1) + std::abs(f.slope2));
    f.mismatch = std::abs(std::abs(f.slope1) - std::abs(f.slope2)) / f.alpha;
    return f;
}

struct AsymptoticReport {
    std::vector<double> p;
    std::vector<double> lambda1, lambda2;
    std::vector<double> model1, model2;
    double max_rel_dev = 0.0; // relative to the distance from lambda*
    double edge_error = 0.0;  // e in lambda_2(pi) - lambda* = delta |beta*| (1 + e)
    double bound = 0.0;
    bool pass = false;
};

// Compares traced perturbed bands with lambda* -+ sqrt(delta^2 t*^2 + theta*^2 (p - pi)^2) / |gamma*|.
inline AsymptoticReport asymptotic_band_check(const DiracData& d, const BandSolver& solver, double delta,
                                              const std::vector<double>& p_grid, int jobs = 1, double window = 12.0)
{
    AsymptoticReport r;
    for (double p : p_grid)
        if (std::abs(p - kPi) <= 0.1 + 1e-12) r.p.push_back(p);
    if (r.p.empty())
        fail(ErrorKind::Domain, "no grid points within 0.1 of pi");
    const size_t n = r.p.size();
    r.lambda1.resize(n);
    r.lambda2.resize(n);
    r.model1.resize(n);
    r.model2.resize(n);
    const double lo = d.lambda_star - window, hi = d.lambda_star + window;
    double maxdp = 0.0;
    parallel_for(int(n), jobs, [&](int i) {
        const int base = solver.count_below(r.p[i], lo, delta);
        r.lambda1[i] = solver.band_lambda(r.p[i], base + 1, delta, lo, hi).lambda;
        r.lambda2[i] = solver.band_lambda(r.p[i], base + 2, delta, lo, hi).lambda;
    });
    for (size_t i = 0; i < n; ++i) {
        const double dp = r.p[i] - kPi;
        maxdp = std::max(maxdp, std::abs(dp));
        const double off =
            std::sqrt(delta * delta * d.t_star * d.t_star + d.theta_star * d.theta_star * dp * dp) / std::abs(d.gamma_star);
        r.model1[i] = d.lambda_star - off;
        r.model2[i] = d.lambda_star + off;
        if (off > 0.0) {
            r.max_rel_dev = std::max(r.max_rel_dev, std::abs(r.lambda1[i] - r.model1[i]) / off);
            r.max_rel_dev = std::max(r.max_rel_dev, std::abs(r.lambda2[i] - r.model2[i]) / off);
        }
        if (std::abs(dp) < 1e-12 && delta > 0.0)
            r.edge_error = (r.lambda2[i] - d.lambda_star) / (delta * std::abs(d.beta_star)) - 1.0;
    }
    r.bound = 3.0 * (delta + maxdp);
    r.pass = r.max_rel_dev < r.bound;
    return r;
}

// Overlaps |<u_{n,+-delta}(.; pi), phi_k>| / (|u| |phi_k|) on a cell grid.
struct SwapReport {
    Eigen::Matrix2d plus = Eigen::Matrix2d::Zero();  // rows: band 1, 2 at +delta; cols: odd, even
    Eigen::Matrix2d minus = Eigen::Matrix2d::Zero(); // same at -delta
    double band_plus[2] = {0.0, 0.0};
    double band_minus[2] = {0.0, 0.0};
    double dominant_min = 0.0;
    double cross_max = 0.0;
    bool swapped = false; // -delta pattern is the row swap of the +delta pattern
};

inline SwapReport mode_swap_check(const DiracData& d, const BandSolver& solver, double delta, double window = 12.0)
{
    if (!(delta > 0.0))
        fail(ErrorKind::Domain, "mode swap check needs delta > 0");
    const ObstacleShape& shape = solver.shape();
    const KernelParams& kp = solver.kernel_params();
    const auto grid = cell_sample_grid(shape, {0.0, delta, -delta}, 24, 12, 0.02);
    auto sample = [&](const LayerPotential& u) {
        VecC v(grid.size());
        for (size_t i = 0; i < grid.size(); ++i) v[i] = u(grid[i]);
        return v;
    };
    const LayerPotential uo(shape, kPi, d.lambda_star, 0.0, kp, d.phi_odd);
    const LayerPotential ue(shape, kPi, d.lambda_star, 0.0, kp, d.phi_even);
    const VecC fo = sample(uo), fe = sample(ue);
    SwapReport r;
    const double lo = d.lambda_star - window, hi = d.lambda_star + window;
    for (int s = 0; s < 2; ++s) {
        const double dl = s == 0 ? delta : -delta;
        const int base = solver.count_below(kPi, lo, dl);
        for (int b = 0; b < 2; ++b) {
            const double lam = solver.band_lambda(kPi, base + b + 1, dl, lo, hi).lambda;
            (s == 0 ? r.band_plus : r.band_minus)[b] = lam;
            const auto ker = kernel_vectors(solver.assemble(kPi, lam, dl), shape, 1);
            const LayerPotential u(shape, kPi, lam, dl, kp, ker[0]);
            const VecC fu = sample(u);
            Eigen::Matrix2d& M = s == 0 ? r.plus : r.minus;
            M(b, 0) = std::abs(fo.dot(fu)) / (fo.norm() * fu.norm());
            M(b, 1) = std::abs(fe.dot(fu)) / (fe.norm() * fu.norm());
        }
    }
    for (const Eigen::Matrix2d* M : {&r.plus, &r.minus})
        for (int b = 0; b < 2; ++b)
            if (!(M->row(b).maxCoeff() > 0.9))
                fail(ErrorKind::SwapInconclusive, "band-edge mode has no dominant Dirac component");
    // dominant assignment at +delta: band 1 -> odd if plus(0,0) > plus(0,1)
    const bool diag = r.plus(0, 0) > r.plus(0, 1);
    auto dom = [&](const Eigen::Matrix2d& M, bool dg) {
        return dg ? std::min(M(0, 0), M(1, 1)) : std::min(M(0, 1), M(1, 0));
    };
    auto crs = [&](const Eigen::Matrix2d& M, bool dg) {
        return dg ? std::max(M(0, 1), M(1, 0)) : std::max(M(0, 0), M(1, 1));
    };
    r.dominant_min = std::min(dom(r.plus, diag), dom(r.minus, !diag));
    r.cross_max = std::max(crs(r.plus, diag), crs(r.minus, !diag));
    r.swapped = (r.minus(0, 0) > r.minus(0, 1)) != diag;
    return r;
}

// Flux of the right-propagating Dirac mode through Gamma = {0} x (0, 1/2).
struct FluxReport {
    cplx flux = 0.0;   // int_Gamma d1 v1 conj(v1) dx2, with int_Y |v1|^2 = 1
    cplx flux_left = 0.0;
    double alpha = 0.0; // reference slope
    double rel_error = 0.0;
};

inline FluxReport flux_identity(const DiracData& d, const ObstacleShape& shape, const KernelParams& kp, double alpha,
                                int nx = 80, int ny = 40, int upsample_factor = 2, int jobs = 1)
{
    const ObstacleShape fine = with_nodes(shape, shape.n_nodes() * upsample_factor);
    const LayerPotential u0(fine, kPi, d.lambda_star, 0.0, kp, upsample(d.phi_odd, upsample_factor));
    const LayerPotential u1(fine, kPi, d.lambda_star, 0.0, kp, upsample(d.phi_even, upsample_factor));
    const std::array<const LayerPotential*, 2> F{&u0, &u1};

    // Gram matrix over the period cell (0, 1) x (0, 1/2); the layer potential
    // vanishes inside the obstacles, so the whole rectangle is integrated.
    std::vector<Eigen::Matrix2cd> rows(nx, Eigen::Matrix2cd::Zero());
    const double hx = 1.0 / nx, hy = 0.5 / ny;
    parallel_for(nx, jobs, [&](int i) {
        for (int j = 0; j < ny; ++j) {
            const Point x{(i + 0.5) * hx, (j + 0.5) * hy};
            const cplx a = u0.raw(x), b = u1.raw(x);
            Eigen::Vector2cd v(a, b);
            rows[i] += v.conjugate() * v.transpose() * (hx * hy);
        }
    });
    Eigen::Matrix2cd G = Eigen::Matrix2cd::Zero();
    for (const auto& r : rows) G += r;

    // Q(k, l) = int_Gamma conj(F_k) d1 F_l, midpoint rule in x2 (even extension is smooth)
    const int nq = 64;
    const double h = 1e-4;
    Eigen::Matrix2cd Q = Eigen::Matrix2cd::Zero();
    for (int j = 0; j < nq; ++j) {
        const double x2 = 0.5 * (j + 0.5) / nq;
        Eigen::Vector2cd v, dv;
        for (int k = 0; k < 2; ++k) {
            v[k] = (*F[k])({0.0, x2});
            dv[k] = ((*F[k])({h, x2}) - (*F[k])({-h, x2})) / (2.0 * h);
        }
        Q += v.conjugate() * dv.transpose() * (0.5 / nq);
    }

    // maximize Im(c^H Q c) subject to c^H G c = 1
    const Eigen::Matrix2cd A = (Q - Q.adjoint()) / cplx(0.0, 2.0);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2cd> es(A, G);
    if (es.info() != Eigen::Success)
        fail(ErrorKind::LinearAlgebra, "flux eigenproblem failed");
    const Eigen::Vector2cd cr = es.eigenvectors().col(1), cl = es.eigenvectors().col(0);
    FluxReport r;
    r.flux = (cr.adjoint() * Q * cr)(0, 0) / (cr.adjoint() * G * cr)(0, 0).real();
    r.flux_left = (cl.adjoint() * Q * cl)(0, 0) / (cl.adjoint() * G * cl)(0, 0).real();
    r.alpha = alpha;
    r.rel_error = std::abs(r.flux - cplx(0.0, 0.5 * alpha)) / (0.5 * alpha);
    return r;
}

} // namespace wgdirac
