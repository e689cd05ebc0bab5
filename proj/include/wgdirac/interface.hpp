#pragma once

#include "decay.hpp"
#include "dirac.hpp"
#include "errors.hpp"
#include "gapgreens.hpp"
#include "parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace wgdirac {

struct InterfaceParams {
    int m_nodes = 32;     // Gamma quadrature nodes
    int n_p = 64;         // Brillouin nodes per period
    int scan_points = 41;
    double root_tol = 1e-9;
    int jobs = 1;
};

struct InterfaceOperator {
    double lambda = 0.0;
    double delta = 0.0;
    int m_nodes = 0;
    MatR matrix; // 2 (G_delta + G_-delta) on Gamma, f -> values at the nodes
};

inline InterfaceOperator assemble_interface_operator(const ObstacleShape& shape, const KernelParams& kp, double lambda,
                                                     double delta_a, double delta_b, const InterfaceParams& ip)
{
    if (ip.m_nodes < 24)
        fail(ErrorKind::Domain, "interface operator needs at least 24 Gamma nodes");
    const GammaGrid grid{ip.m_nodes};
    const GapGreens ga(shape, delta_a, lambda, kp, ip.n_p, ip.jobs);
    const GapGreens gb(shape, delta_b, lambda, kp, ip.n_p, ip.jobs);
    InterfaceOperator op;
    op.lambda = lambda;
    op.delta = delta_a;
    op.m_nodes = ip.m_nodes;
    op.matrix = 2.0 * (gamma_operator(ga, grid, ip.jobs) + gamma_operator(gb, grid, ip.jobs));
    return op;
}

inline InterfaceOperator assemble_interface_operator(const ObstacleShape& shape, const KernelParams& kp, double lambda,
                                                     double delta, const InterfaceParams& ip)
{
    return assemble_interface_operator(shape, kp, lambda, delta, -delta, ip);
}

inline double symmetry_defect(const MatR& m)
{
    return (m - m.transpose()).norm() / m.norm();
}

// Positive principal part of the Gamma single layer, (1/pi)(-log-weights + mean):
// cosine mode k >= 1 maps to itself times 1/(pi k), the constant to 1/pi.
inline MatR gamma_principal(const GammaGrid& grid)
{
    const int m = grid.m;
    MatR P(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            const double s = grid.node(a), t = grid.node(b);
            const double r = (kress_weight(m, kTwoPi * (s - t)) + kress_weight(m, kTwoPi * (s + t))) / kTwoPi;
            P(a, b) = (-r + 2.0 * grid.h()) / kPi;
        }
    return P;
}

// Spectrum of P^{-1/2} M P^{-1/2}: high modes sit near -1, so sigma_min is
// not masked by the compactness of the first-kind operator. Same inertia as M.
struct NormalizedSpectrum {
    VecR eigenvalues; // ascending
    MatR vectors;     // columns mapped back to densities, unit L2(Gamma) norm
    double sigma_min = 0.0;
    int n_positive = 0;
};

inline NormalizedSpectrum normalized_spectrum(const InterfaceOperator& op)
{
    const GammaGrid grid{op.m_nodes};
    Eigen::SelfAdjointEigenSolver<MatR> ps(gamma_principal(grid));
    const MatR pis = ps.operatorInverseSqrt();
    const MatR sym = 0.5 * (op.matrix + op.matrix.transpose());
    Eigen::SelfAdjointEigenSolver<MatR> es(pis * sym * pis);
    if (es.info() != Eigen::Success)
        fail(ErrorKind::LinearAlgebra, "interface eigensolver failed");
    NormalizedSpectrum out;
    out.eigenvalues = es.eigenvalues();
    out.vectors = pis * es.eigenvectors();
    for (int c = 0; c < out.vectors.cols(); ++c) out.vectors.col(c) /= std::sqrt(grid.h() * out.vectors.col(c).squaredNorm());
    out.sigma_min = out.eigenvalues.cwiseAbs().minCoeff();
    for (int i = 0; i < out.eigenvalues.size(); ++i)
        if (out.eigenvalues[i] > 0.0) ++out.n_positive;
    return out;
}

struct InterfaceModeResult {
    double delta = 0.0;
    GapInterval gap;
    double lambda_star_mode = 0.0;
    VecR density;                         // on Gamma nodes, unit L2 norm
    double sigma_min_at_root = 0.0;
    std::vector<std::array<double, 2>> sigma_scan; // (lambda, sigma_min)
    int dips = 0;
    int crossings = 0; // inertia change across the scan window
    std::vector<std::string> warnings;

    // filled by reconstruct_interface_mode
    std::vector<Point> field_points;
    VecR field;
    std::vector<double> column_x1;
    std::vector<double> column_max;
    DecayFit decay;
    double continuity_residual = 0.0;
    double derivative_residual = 0.0;
    double dirichlet_residual = 0.0;
};

namespace detail {

struct ScanPoint {
    double lambda;
    NormalizedSpectrum spectrum;
};

inline ScanPoint interface_point(const ObstacleShape& shape, const KernelParams& kp, double lambda, double delta,
                                 const InterfaceParams& ip)
{
    return {lambda, normalized_spectrum(assemble_interface_operator(shape, kp, lambda, delta, ip))};
}

// local minima of sigma below 0.1 x median
inline int count_dips(const std::vector<double>& s)
{
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    int dips = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        const bool left = i == 0 || s[i] < s[i - 1];
        const bool right = i + 1 == s.size() || s[i] < s[i + 1];
        if (left && right && s[i] < 0.1 * med) ++dips;
    }
    return dips;
}

} // namespace detail

// Interface eigenvalue inside the gap: sigma_min scan, inertia count, then
// Illinois regula falsi on the eigenvalue that changes sign.
inline InterfaceModeResult find_interface_eigenvalue(const ObstacleShape& shape, const KernelParams& kp,
                                                     const GapInterval& gap, const InterfaceParams& ip,
                                                     const GapInterval* full_window = nullptr)
{
    if (!(gap.width() > 0.0))
        fail(ErrorKind::PoleRisk, "empty gap interval");
    if (ip.scan_points < 5)
        fail(ErrorKind::Domain, "scan needs at least 5 points");
    const double delta = gap.delta;
    InterfaceModeResult r;
    r.delta = delta;
    r.gap = gap;

    const int ns = ip.scan_points;
    std::vector<detail::ScanPoint> scan(ns);
    InterfaceParams inner = ip;
    inner.jobs = 1;
    parallel_for(ns, ip.jobs, [&](int i) {
        const double lam = gap.e1 + (i + 1) * gap.width() / (ns + 1);
        scan[i] = detail::interface_point(shape, kp, lam, delta, inner);
    });
    std::vector<double> sig;
    for (const auto& s : scan) {
        r.sigma_scan.push_back({s.lambda, s.spectrum.sigma_min});
        sig.push_back(s.spectrum.sigma_min);
    }
    r.dips = detail::count_dips(sig);
    r.crossings = scan.front().spectrum.n_positive - scan.back().spectrum.n_positive;

    if (full_window) {
        const auto lo = detail::interface_point(shape, kp, full_window->e1 + 1e-3 * full_window->width(), delta, ip);
        const auto hi = detail::interface_point(shape, kp, full_window->e2 - 1e-3 * full_window->width(), delta, ip);
        const int outer = lo.spectrum.n_positive - hi.spectrum.n_positive;
        if (outer != r.crossings) {
            std::ostringstream os;
            os << "crossing count " << outer << " in the full window differs from " << r.crossings
               << " in the scan window";
            r.warnings.push_back(os.str());
        }
    }

    if (r.crossings == 0 && r.dips == 0)
        fail(ErrorKind::NoMode, "no interface eigenvalue inside the gap");
    if (r.crossings != 1 || r.dips != 1) {
        std::ostringstream os;
        os << "expected one interface eigenvalue; inertia change " << r.crossings << ", sigma_min dips " << r.dips;
        fail(r.crossings == 0 ? ErrorKind::NoMode : ErrorKind::UniquenessViolation, os.str());
    }

    int k = 0;
    while (scan[k + 1].spectrum.n_positive == scan[k].spectrum.n_positive) ++k;
    const int m = ip.m_nodes;
    const int idx = m - scan[k].spectrum.n_positive; // eigenvalue that changes sign
    double a = scan[k].lambda, b = scan[k + 1].lambda;
    double fa = scan[k].spectrum.eigenvalues[idx], fb = scan[k + 1].spectrum.eigenvalues[idx];
    detail::ScanPoint best = std::abs(fa) < std::abs(fb) ? scan[k] : scan[k + 1];
    int side = 0;
    for (int it = 0; it < 60 && b - a > ip.root_tol; ++it) {
        double c = (a * fb - b * fa) / (fb - fa);
        if (!(c > a && c < b)) c = 0.5 * (a + b);
        auto pt = detail::interface_point(shape, kp, c, delta, ip);
        const double fc = pt.spectrum.eigenvalues[idx];
        if (std::abs(fc) <= std::abs(best.spectrum.eigenvalues[idx])) best = pt;
        if (fc == 0.0) break;
        if ((fc > 0.0) == (fa > 0.0)) {
            a = c;
            fa = fc;
            if (side == -1) fb *= 0.5;
            side = -1;
        } else {
            b = c;
            fb = fc;
            if (side == 1) fa *= 0.5;
            side = 1;
        }
        if (std::abs(fc) < 1e-13) break;
    }
    r.lambda_star_mode = best.lambda;
    r.sigma_min_at_root = std::abs(best.spectrum.eigenvalues[idx]);
    r.density = best.spectrum.vectors.col(idx);
    Eigen::Index imax;
    r.density.cwiseAbs().maxCoeff(&imax);
    if (r.density[imax] < 0.0) r.density = -r.density;
    if (!gap.contains(r.lambda_star_mode))
        fail(ErrorKind::NoMode, "refined interface eigenvalue left the gap");
    return r;
}

// Field of the interface density: u = 2 S_delta phi for x1 > 0 and
// u = -2 S_-delta phi for x1 < 0.
class InterfaceField {
public:
    InterfaceField(const ObstacleShape& shape, const KernelParams& kp, double lambda, double delta, const VecR& phi,
                   const InterfaceParams& ip)
        : shape_(shape), kp_(kp), phi_(phi), grid_{int(phi.size())}, jobs_(ip.jobs),
          right_(shape, delta, lambda, kp, ip.n_p, ip.jobs), left_(shape, -delta, lambda, kp, ip.n_p, ip.jobs)
    {
    }

    const GapGreens& right() const { return right_; }
    const GapGreens& left() const { return left_; }

    // values on Gamma from each side at heights s
    std::pair<VecR, VecR> on_gamma(const std::vector<double>& s) const
    {
        const VecR up = 2.0 * gamma_operator(right_, s, grid_, jobs_) * phi_;
        const VecR um = -2.0 * gamma_operator(left_, s, grid_, jobs_) * phi_;
        return {up, um};
    }

    // field at points off Gamma
    VecR operator()(const std::vector<Point>& xs) const
    {
        std::vector<Point> pr, pl;
        std::vector<int> ir, il;
        for (int i = 0; i < int(xs.size()); ++i) {
            if (xs[i].x1 > 0.0) {
                pr.push_back(xs[i]);
                ir.push_back(i);
            } else if (xs[i].x1 < 0.0) {
                pl.push_back(xs[i]);
                il.push_back(i);
            } else {
                fail(ErrorKind::Domain, "point on Gamma; use on_gamma");
            }
        }
        VecR out(xs.size());
        side(right_, 2.0, pr, ir, out);
        side(left_, -2.0, pl, il, out);
        return out;
    }

    bool inside_obstacle(Point x) const
    {
        return x.x1 > 0.0 ? right_.inside_obstacle(x) : left_.inside_obstacle(x);
    }

    // max |u| on the two cell obstacles of one side (+1 right, -1 left), sampled
    // between quadrature nodes with the Kress rule on the source obstacle.
    // Each side is mirror symmetric about x1 = 0, so the cell obstacles stand
    // for their mirror images next to Gamma.
    double boundary_max(int sign, int samples_per_obstacle) const
    {
        const GapGreens& g = sign > 0 ? right_ : left_;
        const int nf = 8 * grid_.m;
        std::vector<double> ts(nf);
        std::vector<Point> ys(nf);
        for (int b = 0; b < nf; ++b) {
            ts[b] = (b + 0.5) * 0.5 / nf;
            ys[b] = {0.0, ts[b]};
        }
        const VecR wf = gamma_resample(phi_, ts) * (0.5 / nf);
        const int n = shape_.n_nodes();
        const auto cs = cell_centers(g.delta());
        const int np = int(g.nodes().size());
        std::vector<VecR> part(np);
        parallel_for(np, jobs_, [&](int q) {
            const PNode& pn = g.nodes()[q];
            KernelParams kp = kp_;
            kp.p = pn.p;
            kp.lambda = g.lambda();
            const QPKernel K(kp);
            VecC rhs(2 * n);
            for (int i = 0; i < 2; ++i)
                for (int b = 0; b < n; ++b) {
                    cplx v = 0.0;
                    for (int c = 0; c < nf; ++c) v += K(cs[i] + shape_.nodes()[b], ys[c]) * wf[c];
                    rhs[i * n + b] = v;
                }
            const OperatorMatrix T = assemble_T(pn.p, g.lambda(), g.delta(), shape_, kp_);
            const VecC psi = T.entries.partialPivLu().solve(rhs);
            const LayerPotential lp(shape_, pn.p, g.lambda(), g.delta(), kp_, DensityPair::from_stacked(psi));
            VecR acc(2 * samples_per_obstacle);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < samples_per_obstacle; ++j) {
                    const double t = kTwoPi * (j + 0.37) / samples_per_obstacle;
                    const Point x = cs[i] + shape_.point_at(t);
                    cplx v = 0.0;
                    for (int c = 0; c < nf; ++c) v += K(x, ys[c]) * wf[c];
                    v -= lp.on_boundary(i, t);
                    acc[i * samples_per_obstacle + j] = pn.weight * v.real();
                }
            part[q] = acc;
        });
        VecR total = VecR::Zero(2 * samples_per_obstacle);
        for (const auto& v : part) total += v;
        return 2.0 * total.cwiseAbs().maxCoeff();
    }

private:
    // points near Gamma need a finer line quadrature; they are batched apart
    void side(const GapGreens& g, double factor, const std::vector<Point>& pts, const std::vector<int>& idx,
              VecR& out) const
    {
        std::vector<Point> near, far;
        std::vector<int> in, jf;
        for (size_t j = 0; j < pts.size(); ++j) {
            if (std::abs(pts[j].x1) < 0.25) {
                near.push_back(pts[j]);
                in.push_back(idx[j]);
            } else {
                far.push_back(pts[j]);
                jf.push_back(idx[j]);
            }
        }
        if (!near.empty()) {
            const VecR v = factor * gamma_single_layer(g, near, phi_, jobs_);
            for (size_t j = 0; j < in.size(); ++j) out[in[j]] = v[j];
        }
        if (!far.empty()) {
            const VecR v = factor * gamma_single_layer(g, far, phi_, jobs_);
            for (size_t j = 0; j < jf.size(); ++j) out[jf[j]] = v[j];
        }
    }

    const ObstacleShape& shape_;
    KernelParams kp_;
    VecR phi_;
    GammaGrid grid_;
    int jobs_;
    GapGreens right_;
    GapGreens left_;
};

struct ReconstructParams {
    double half_length = 5.0;  // field window [-L, L]
    int columns_per_unit = 16;
    int rows = 16;
    double eta = 0.02;         // one-sided difference step for the derivative check
    int boundary_samples = 32; // per obstacle
    double fit_lo = 1.0;
    double fit_hi = 4.0;
};

// Completes a located interface mode: interface residuals, obstacle
// Dirichlet residual, field samples and the decay fit.
inline void reconstruct_interface_mode(const ObstacleShape& shape, const KernelParams& kp, InterfaceModeResult& r,
                                       const InterfaceParams& ip, const ReconstructParams& rp = {},
                                       bool enforce = true)
{
    const InterfaceField F(shape, kp, r.lambda_star_mode, r.delta, r.density, ip);
    const GammaGrid grid{int(r.density.size())};

    // heights between the quadrature nodes
    std::vector<double> s;
    for (int j = 0; j < grid.m; ++j) s.push_back((j + 0.3) * grid.h());
    const auto [up, um] = F.on_gamma(s);
    r.continuity_residual = (up - um).norm() / (0.5 * (up + um)).norm();

    std::vector<Point> pts;
    for (int k = 1; k <= 3; ++k)
        for (double h : s) pts.push_back({k * rp.eta, h});
    for (int k = 1; k <= 3; ++k)
        for (double h : s) pts.push_back({-k * rp.eta, h});
    const VecR v = F(pts);
    const int n = int(s.size());
    const VecR phi = gamma_resample(r.density, s);
    VecR dp(n), dm(n);
    for (int j = 0; j < n; ++j) {
        dp[j] = (-11.0 * up[j] + 18.0 * v[j] - 9.0 * v[n + j] + 2.0 * v[2 * n + j]) / (6.0 * rp.eta);
        dm[j] = -(-11.0 * um[j] + 18.0 * v[3 * n + j] - 9.0 * v[4 * n + j] + 2.0 * v[5 * n + j]) / (6.0 * rp.eta);
    }
    r.derivative_residual = std::max((dp - phi).norm(), (dm - phi).norm()) / phi.norm();

    r.field_points.clear();
    const int ncol = int(std::lround(2.0 * rp.half_length * rp.columns_per_unit));
    for (int i = 0; i < ncol; ++i) {
        const double x1 = -rp.half_length + (i + 0.5) / rp.columns_per_unit;
        for (int j = 0; j < rp.rows; ++j) {
            const Point x{x1, (j + 0.5) * 0.5 / rp.rows};
            if (!F.inside_obstacle(x)) r.field_points.push_back(x);
        }
    }
    r.field = F(r.field_points);
    r.column_x1.clear();
    r.column_max.clear();
    for (size_t i = 0; i < r.field_points.size(); ++i) {
        const double x1 = r.field_points[i].x1;
        if (r.column_x1.empty() || r.column_x1.back() != x1) {
            r.column_x1.push_back(x1);
            r.column_max.push_back(0.0);
        }
        r.column_max.back() = std::max(r.column_max.back(), std::abs(r.field[i]));
    }
    r.decay = fit_decay(r.column_x1, r.column_max, rp.fit_lo, rp.fit_hi);

    const double scale = r.field.cwiseAbs().maxCoeff();
    r.dirichlet_residual =
        std::max(F.boundary_max(1, rp.boundary_samples), F.boundary_max(-1, rp.boundary_samples)) / scale;

    if (enforce && (r.continuity_residual > 5e-2 || r.derivative_residual > 5e-2)) {
        std::ostringstream os;
        os << "interface residuals too large: continuity " << r.continuity_residual << ", derivative "
           << r.derivative_residual;
        fail(ErrorKind::Reconstruction, os.str());
    }
}

// |<phi, u_even|Gamma>| / (|phi| |u_even|Gamma|) with the even Dirac mode traced on Gamma.
inline double even_mode_pairing(const VecR& phi, const DiracData& d, const ObstacleShape& shape,
                                const KernelParams& kp)
{
    const GammaGrid grid{int(phi.size())};
    const LayerPotential ue(shape, d.p_star, d.lambda_star, 0.0, kp, d.phi_even);
    cplx ip = 0.0;
    double nu = 0.0;
    for (int b = 0; b < grid.m; ++b) {
        const cplx u = ue({0.0, grid.node(b)});
        ip += phi[b] * std::conj(u);
        nu += std::norm(u);
    }
    return std::abs(ip) / (phi.norm() * std::sqrt(nu));
}

} // namespace wgdirac
