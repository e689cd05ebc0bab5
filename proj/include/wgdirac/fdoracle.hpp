#pragma once

#include "decay.hpp"
#include "errors.hpp"
#include "geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

namespace wgdirac {

// Finite-difference grid on [x0, x0 + length] x [0, 1/2] with spacing
// h = 1/nx = (1/2)/ny. Obstacle boundaries use Shortley-Weller stencils.
struct FDGrid {
    int nx = 80;       // nodes per unit length
    int ny = 40;       // intervals across the strip
    double h = 1.0 / 80;
    double x0 = 0.0;
    int n_cols = 80;   // unknown columns
    bool periodic = true;
    std::complex<double> quasi_phase = 1.0;
    std::vector<char> mask; // column-major (i * (ny + 1) + j): inside obstacle

    double x_of(int i) const { return periodic ? x0 + i * h : x0 + (i + 1) * h; }
    double y_of(int j) const { return j * h; }
    int at(int i, int j) const { return i * (ny + 1) + j; }
};

struct FDMode {
    double lambda = 0.0;
    Eigen::VectorXcd values; // on free nodes, ordered as FDProblem::free_index
};

class FDProblem {
public:
    using SpMat = Eigen::SparseMatrix<std::complex<double>>;

    // Periodic cell [0, 1) with quasi-periodic wrap e^{ip}.
    static FDProblem bloch_cell(const ObstacleShape& shape, double p, double delta, int nx)
    {
        FDGrid g = base_grid(nx);
        g.periodic = true;
        g.x0 = 0.0;
        g.n_cols = nx;
        g.quasi_phase = std::exp(std::complex<double>(0.0, p));
        std::vector<Point> cs;
        for (const Point& c : cell_centers(delta))
            for (int k = -1; k <= 1; ++k) cs.push_back({c.x1 + k, c.x2});
        return FDProblem(shape, g, std::move(cs));
    }

    // Obstacle-free cell, same wrap as bloch_cell.
    static FDProblem empty_cell(double p, int nx)
    {
        FDGrid g = base_grid(nx);
        g.periodic = true;
        g.x0 = 0.0;
        g.n_cols = nx;
        g.quasi_phase = std::exp(std::complex<double>(0.0, p));
        return FDProblem(make_disk(0.1, 16), g, {});
    }

    // Truncated joint structure on [-n_cells, n_cells] with Dirichlet ends.
    static FDProblem joint_supercell(const ObstacleShape& shape, double delta, int n_cells, int nx)
    {
        FDGrid g = base_grid(nx);
        g.periodic = false;
        g.x0 = -double(n_cells);
        g.n_cols = 2 * n_cells * nx - 1;
        return FDProblem(shape, g, layout_centers(Variant::Joint, delta, n_cells).centers);
    }

    const FDGrid& grid() const { return g_; }
    const SpMat& matrix() const { return A_; }
    int n_free() const { return n_free_; }
    const std::vector<int>& free_index() const { return idx_; }

    // Eigenvalues (with vectors) of -Delta nearest to `target`, ascending.
    // Block Krylov space of the shift-invert operator with explicit restarts. Only Ritz values within `radius` of the target gate
    // convergence; pairs are accepted by true residual.
    std::vector<FDMode> eigs_near(double target, int k, double tol = 1e-8, int max_restarts = 40,
                                  double radius = 1e300) const
    {
        using MatX = Eigen::MatrixXcd;
        const int n = n_free_;
        const int bs = std::min(n, std::max(4, k + 2));
        const int steps = std::max(5, 32 / bs);
        SpMat S = A_;
        SpMat I(n, n);
        I.setIdentity();
        S -= I * std::complex<double>(target, 0.0);
        Eigen::SparseLU<SpMat> lu;
        lu.analyzePattern(S);
        lu.factorize(S);
        if (lu.info() != Eigen::Success)
            fail(ErrorKind::Oracle, "sparse LU factorization failed (shift on an eigenvalue?)");

        MatX X(n, bs);
        for (int c = 0; c < bs; ++c)
            for (int r = 0; r < n; ++r)
                X(r, c) = std::complex<double>(std::cos(0.37 * r * (c + 1) + 0.1 * c), std::sin(0.11 * r + 0.7 * c));

        double norm_a = 0.0;
        {
            Eigen::VectorXd rows = Eigen::VectorXd::Zero(n);
            for (int c = 0; c < A_.outerSize(); ++c)
                for (SpMat::InnerIterator it(A_, c); it; ++it) rows[it.row()] += std::abs(it.value());
            norm_a = rows.maxCoeff();
        }
        // residual floor set by rounding in rows with short Shortley-Weller arms;
        // below it a pair is accepted once its value has stopped moving
        const double floor_abs = 1e-13 * norm_a;

        std::vector<FDMode> out;
        std::vector<std::complex<double>> prev;
        for (int rs = 0; rs < max_restarts; ++rs) {
            // orthonormal basis of span{X, S^-1 X, ..., S^-steps X}
            MatX Q(n, bs * (steps + 1));
            int m = 0;
            MatX block = X;
            for (int st = 0; st <= steps; ++st) {
                for (int c = 0; c < block.cols(); ++c) {
                    Eigen::VectorXcd v = block.col(c);
                    for (int pass = 0; pass < 2; ++pass)
                        for (int q = 0; q < m; ++q) v -= Q.col(q).dot(v) * Q.col(q);
                    const double nv = v.norm();
                    if (nv < 1e-12) continue;
                    Q.col(m++) = v / nv;
                }
                if (st == steps) break;
                MatX next(n, bs);
                for (int c = 0; c < bs; ++c) next.col(c) = lu.solve(Q.col(m - bs + c));
                block = next;
            }
            // Ritz pairs of the shifted inverse: values nearest the target are
            // extremal there, so no spurious interior values appear
            const MatX Qm = Q.leftCols(m);
            MatX SQ(n, m);
            for (int c = 0; c < m; ++c) SQ.col(c) = lu.solve(Qm.col(c));
            const MatX H = Qm.adjoint() * SQ;
            Eigen::ComplexEigenSolver<MatX> es(H);
            if (es.info() != Eigen::Success)
                fail(ErrorKind::Oracle, "Rayleigh-Ritz eigenproblem failed");
            std::vector<int> order(m);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(),
                      [&](int a, int c) { return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[c]); });
            out.clear();
            std::vector<std::complex<double>> cur;
            bool done = true;
            for (int c = 0; c < m && int(out.size()) < k; ++c) {
                const std::complex<double> mu = es.eigenvalues()[order[c]];
                if (std::abs(mu) == 0.0) break;
                const std::complex<double> th = target + 1.0 / mu;
                Eigen::VectorXcd v = SQ * es.eigenvectors().col(order[c]);
                v /= v.norm();
                const double res = (A_ * v - th * v).norm();
                cur.push_back(th);
                const double scale = tol * std::max(1.0, std::abs(th));
                bool settled = false;
                for (const auto& q : prev) settled = settled || std::abs(q - th) < 0.1 * scale;
                if (res < scale || (res < floor_abs && settled))
                    out.push_back({th.real(), v});
                else if (std::abs(th - target) <= radius)
                    done = false;
            }
            prev = cur;
            for (int c = 0; c < bs && c < m; ++c) X.col(c) = SQ * es.eigenvectors().col(order[c]);
            if (done && (int(out.size()) >= std::min(k, n) || radius < 1e299)) break;
            if (rs == max_restarts - 1)
                fail(ErrorKind::Oracle, "shift-invert Krylov iteration did not converge");
        }
        std::sort(out.begin(), out.end(), [](const FDMode& a, const FDMode& c) { return a.lambda < c.lambda; });
        return out;
    }

private:
    static FDGrid base_grid(int nx)
    {
        if (nx < 8 || nx % 2 != 0)
            fail(ErrorKind::Oracle, "FD grid needs an even nx >= 8");
        FDGrid g;
        g.nx = nx;
        g.ny = nx / 2;
        g.h = 1.0 / nx;
        return g;
    }

    FDProblem(const ObstacleShape& shape, FDGrid g, std::vector<Point> centers)
        : shape_(shape), g_(std::move(g)), centers_(std::move(centers))
    {
        if (!centers_.empty() && 2.0 * shape_.max_radius() / g_.h < 12.0)
            fail(ErrorKind::Oracle, "FD grid does not resolve the obstacle (fewer than 12 nodes across)");
        build();
    }

    // signed level set: negative inside obstacle k
    double level(int k, double x, double y) const
    {
        const Point rel{x - centers_[k].x1, y - centers_[k].x2};
        const double r = norm(rel);
        if (r == 0.0) return -shape_.radius_at(0.0);
        return r - shape_.radius_at(std::atan2(rel.x2, rel.x1));
    }

    int inside(double x, double y) const
    {
        for (int k = 0; k < int(centers_.size()); ++k) {
            if (std::abs(x - centers_[k].x1) > shape_.max_radius() + 1e-12) continue;
            if (level(k, x, y) < 0.0) return k;
        }
        return -1;
    }

    // fraction t in (0, 1] of the step from (x, y) along (dx, dy) * h to the
    // boundary; `blocked` is the mask value of the neighbor node
    double arm(double x, double y, int dx, int dy, bool blocked) const
    {
        if (!blocked) return 1.0;
        const double xn = x + dx * g_.h, yn = y + dy * g_.h;
        int k = 0;
        double lv = 1e300;
        for (int c = 0; c < int(centers_.size()); ++c) {
            const double v = level(c, xn, yn);
            if (v < lv) {
                lv = v;
                k = c;
            }
        }
        double a = 0.0, b = 1.0;
        for (int it = 0; it < 60; ++it) {
            const double m = 0.5 * (a + b);
            if (level(k, x + m * dx * g_.h, y + m * dy * g_.h) < 0.0)
                b = m;
            else
                a = m;
        }
        return std::max(0.5 * (a + b), 1e-8);
    }

    bool blocked(int i, int j) const
    {
        if (j < 0 || j > g_.ny) return false;
        if (g_.periodic) i = ((i % g_.n_cols) + g_.n_cols) % g_.n_cols;
        else if (i < 0 || i >= g_.n_cols) return false;
        return g_.mask[g_.at(i, j)] != 0;
    }

    void build()
    {
        const int nc = g_.n_cols, ny = g_.ny;
        g_.mask.assign(size_t(nc) * (ny + 1), 0);
        idx_.assign(size_t(nc) * (ny + 1), -1);
        n_free_ = 0;
        for (int i = 0; i < nc; ++i)
            for (int j = 0; j <= ny; ++j) {
                const bool in = inside(g_.x_of(i), g_.y_of(j)) >= 0;
                g_.mask[g_.at(i, j)] = in;
                if (!in) idx_[g_.at(i, j)] = n_free_++;
            }
        std::vector<Eigen::Triplet<std::complex<double>>> trip;
        const double h2 = g_.h * g_.h;
        for (int i = 0; i < nc; ++i)
            for (int j = 0; j <= ny; ++j) {
                const int r = idx_[g_.at(i, j)];
                if (r < 0) continue;
                const double x = g_.x_of(i), y = g_.y_of(j);
                double diag = 0.0;
                // x direction
                const double tE = arm(x, y, 1, 0, blocked(i + 1, j)), tW = arm(x, y, -1, 0, blocked(i - 1, j));
                diag += 2.0 / (h2 * tE * tW);
                for (int s : {1, -1}) {
                    const double t = s == 1 ? tE : tW, to = s == 1 ? tW : tE;
                    if (blocked(i + s, j)) continue;
                    int ii = i + s;
                    std::complex<double> ph = 1.0;
                    if (g_.periodic) {
                        if (ii >= nc) {
                            ii -= nc;
                            ph = g_.quasi_phase;
                        }
                        if (ii < 0) {
                            ii += nc;
                            ph = std::conj(g_.quasi_phase);
                        }
                    } else if (ii < 0 || ii >= nc) {
                        continue; // Dirichlet end
                    }
                    trip.emplace_back(r, idx_[g_.at(ii, j)], -2.0 / (h2 * t * (t + to)) * ph);
                }
                // y direction, Neumann walls by ghost reflection
                const double tN = j < ny ? arm(x, y, 0, 1, blocked(i, j + 1)) : 1.0;
                const double tS = j > 0 ? arm(x, y, 0, -1, blocked(i, j - 1)) : 1.0;
                diag += 2.0 / (h2 * tN * tS);
                for (int s : {1, -1}) {
                    const double t = s == 1 ? tN : tS, to = s == 1 ? tS : tN;
                    if (blocked(i, j + s)) continue;
                    int jj = j + s;
                    if (jj < 0) jj = 1;
                    if (jj > ny) jj = ny - 1;
                    trip.emplace_back(r, idx_[g_.at(i, jj)], -2.0 / (h2 * t * (t + to)));
                }
                trip.emplace_back(r, r, diag);
            }
        A_.resize(n_free_, n_free_);
        A_.setFromTriplets(trip.begin(), trip.end());
        A_.makeCompressed();
    }

    ObstacleShape shape_;
    FDGrid g_;
    std::vector<Point> centers_;
    std::vector<int> idx_;
    int n_free_ = 0;
    SpMat A_;
};

// Smallest n_eigs Bloch eigenvalues at (p, delta).
inline std::vector<double> fd_bloch_eigs(const ObstacleShape& shape, double p, double delta, int n_eigs, int nx,
                                         double target = 0.0)
{
    const auto modes = FDProblem::bloch_cell(shape, p, delta, nx).eigs_near(target, n_eigs);
    std::vector<double> out;
    for (const auto& m : modes) out.push_back(m.lambda);
    return out;
}

struct RichardsonBand {
    double coarse = 0.0;
    double fine = 0.0;
    double extrapolated = 0.0;
};

// Band value (1-based) from grids nx and 2 nx with second-order extrapolation.
inline RichardsonBand fd_band_richardson(const ObstacleShape& shape, double p, double delta, int band, int nx)
{
    const auto a = fd_bloch_eigs(shape, p, delta, band, nx);
    const auto b = fd_bloch_eigs(shape, p, delta, band, 2 * nx);
    RichardsonBand r;
    r.coarse = a[band - 1];
    r.fine = b[band - 1];
    r.extrapolated = (4.0 * r.fine - r.coarse) / 3.0;
    return r;
}

struct SupercellResult {
    bool found = false;
    double lambda = 0.0;
    std::vector<double> in_gap; // all eigenvalues found inside the gap
    std::vector<double> x1;     // column coordinates
    std::vector<double> colmax; // max |u| per column
    DecayFit decay;
    double symmetry_residual = 0.0;
};

// Interface eigenvalue of the truncated joint structure inside (e1, e2).
// Among in-gap eigenvalues the one most concentrated near x1 = 0 is chosen
// (Dirichlet ends can carry their own edge states).
inline SupercellResult fd_supercell_interface(const ObstacleShape& shape, double delta, int n_cells, int nx, double e1,
                                              double e2, int n_eigs = 6)
{
    const FDProblem prob = FDProblem::joint_supercell(shape, delta, n_cells, nx);
    const auto modes = prob.eigs_near(0.5 * (e1 + e2), n_eigs, 1e-9, 40, 0.5 * (e2 - e1));
    const FDGrid& g = prob.grid();
    SupercellResult r;
    double best = -1.0;
    for (const auto& m : modes) {
        if (!(m.lambda > e1 && m.lambda < e2)) continue;
        r.in_gap.push_back(m.lambda);
        double center = 0.0, total = 0.0;
        for (int i = 0; i < g.n_cols; ++i)
            for (int j = 0; j <= g.ny; ++j) {
                const int k = prob.free_index()[g.at(i, j)];
                if (k < 0) continue;
                const double w = std::norm(m.values[k]);
                total += w;
                if (std::abs(g.x_of(i)) < n_cells / 3.0) center += w;
            }
        if (center / total > best) {
            best = center / total;
            r.found = true;
            r.lambda = m.lambda;
            r.x1.assign(g.n_cols, 0.0);
            r.colmax.assign(g.n_cols, 0.0);
            for (int i = 0; i < g.n_cols; ++i) {
                r.x1[i] = g.x_of(i);
                for (int j = 0; j <= g.ny; ++j) {
                    const int k = prob.free_index()[g.at(i, j)];
                    if (k >= 0) r.colmax[i] = std::max(r.colmax[i], std::abs(m.values[k]));
                }
            }
        }
    }
    if (r.found) {
        r.decay = fit_decay(r.x1, r.colmax, 1.0, std::min(4.0, n_cells - 1.0));
        // envelope mirror symmetry; the obstacles themselves are not mirror images
        const auto env = unit_envelope(r.x1, r.colmax);
        double num = 0.0, den = 0.0;
        const int nc = g.n_cols;
        for (int i = 0; i < nc; ++i) {
            num = std::max(num, std::abs(env[i] - env[nc - 1 - i]));
            den = std::max(den, env[i]);
        }
        r.symmetry_residual = num / den;
    }
    return r;
}

} // namespace wgdirac
