#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "qpgreens.hpp"
#include "special.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace wgdirac {

using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;

struct DensityPair {
    VecC phi1;
    VecC phi2;

    VecC stacked() const
    {
        VecC v(phi1.size() + phi2.size());
        v << phi1, phi2;
        return v;
    }
    static DensityPair from_stacked(const VecC& v)
    {
        const Eigen::Index n = v.size() / 2;
        return {v.head(n), v.tail(n)};
    }
};

struct OperatorMatrix {
    MatC entries;
    double p = 0.0;
    cplx lambda = 0.0;
    double delta = 0.0;
    int n = 0;

    auto block(int i, int j) const { return entries.block(i * n, j * n, n, n); }
};

// Arc-length weights of both obstacles, stacked.
inline VecR stacked_weights(const ObstacleShape& shape)
{
    const int n = shape.n_nodes();
    VecR w(2 * n);
    for (int j = 0; j < n; ++j) w[j] = w[j + n] = shape.weights()[j];
    return w;
}

// Bilinear weighted pairing sum_a w_a a_a b_a (no conjugation).
inline cplx pairing(const VecC& a, const VecC& b, const VecR& w)
{
    return (a.array() * b.array() * w.array().cast<cplx>()).sum();
}

inline double weighted_norm(const VecC& a, const VecR& w)
{
    return std::sqrt((a.array().abs2() * w.array()).sum());
}

namespace detail {

inline std::vector<double> kress_table(int n_nodes)
{
    std::vector<double> r(n_nodes);
    for (int m = 0; m < n_nodes; ++m) r[m] = kress_weight(n_nodes / 2, kTwoPi * m / n_nodes);
    return r;
}

// Kress-discretized self block of one obstacle centered at c, before the
// column speed factor: entry = R(t_a - t_b) A + (2 pi / N) B.
inline MatC self_block(const QPKernel& K, const ObstacleShape& shape, Point c)
{
    const int n = shape.n_nodes();
    const auto rk = kress_table(n);
    const bool herm = K.params().lambda.imag() == 0.0;
    const double h = kTwoPi / n;
    MatC D(n, n);
    for (int a = 0; a < n; ++a) {
        const Point xa = c + shape.nodes()[a];
        const int b0 = herm ? a : 0;
        for (int b = b0; b < n; ++b) {
            const Point xb = c + shape.nodes()[b];
            cplx A, B;
            if (a == b) {
                A = 1.0 / (2.0 * kTwoPi);
                B = K.regular_direct(xa, xa) + std::log(shape.speeds()[a] * shape.speeds()[a]) / (2.0 * kTwoPi);
            } else {
                const double r = norm(xa - xb);
                const double s = std::sin(0.5 * (shape.param(a) - shape.param(b)));
                A = K.j0r(r) / (2.0 * kTwoPi);
                if (r < 0.1)
                    B = K.regular_direct(xa, xb) + A * std::log(r * r / (4.0 * s * s));
                else
                    B = K(xa, xb) - A * std::log(4.0 * s * s);
            }
            D(a, b) = rk[std::abs(a - b)] * A + h * B;
            if (herm && b != a) D(b, a) = rk[std::abs(a - b)] * A + h * std::conj(B);
        }
    }
    return D;
}

} // namespace detail

inline OperatorMatrix assemble_T(double p, cplx lambda, double delta, const ObstacleShape& shape,
                                 const KernelParams& base)
{
    KernelParams kp = base;
    kp.p = p;
    kp.lambda = lambda;
    const QPKernel K(kp);
    const int n = shape.n_nodes();
    const auto cs = cell_centers(delta);
    OperatorMatrix T;
    T.p = p;
    T.lambda = lambda;
    T.delta = delta;
    T.n = n;
    T.entries.resize(2 * n, 2 * n);

    const MatC D = detail::self_block(K, shape, cs[0]);
    for (int b = 0; b < n; ++b) {
        T.entries.block(0, b, n, 1) = D.col(b) * shape.speeds()[b];
    }
    T.entries.block(n, n, n, n) = T.entries.block(0, 0, n, n);

    const bool herm = lambda.imag() == 0.0;
    for (int a = 0; a < n; ++a) {
        const Point x1 = cs[0] + shape.nodes()[a];
        for (int b = 0; b < n; ++b) {
            const Point x2 = cs[1] + shape.nodes()[b];
            const cplx g = K(x1, x2);
            T.entries(a, n + b) = g * shape.weights()[b];
            if (herm)
                T.entries(n + b, a) = std::conj(g) * shape.weights()[a];
            else
                T.entries(n + b, a) = K(x2, x1) * shape.weights()[a];
        }
    }
    return T;
}

// W^{1/2} T W^{-1/2}: Hermitian for real lambda.
inline MatC symmetrized(const OperatorMatrix& T, const VecR& w)
{
    const VecR s = w.array().sqrt();
    return s.asDiagonal() * T.entries * s.cwiseInverse().asDiagonal();
}

struct SingularSummary {
    std::vector<double> smallest; // ascending
    double sigma_max = 0.0;
};

inline SingularSummary min_singular_values(const OperatorMatrix& T, const VecR& w, int k)
{
    if (k < 1 || k > T.entries.rows())
        fail(ErrorKind::LinearAlgebra, "requested singular value count out of range");
    Eigen::BDCSVD<MatC> svd(symmetrized(T, w));
    if (svd.info() != Eigen::Success)
        fail(ErrorKind::LinearAlgebra, "SVD failed");
    const VecR& sv = svd.singularValues();
    SingularSummary out;
    out.sigma_max = sv[0];
    for (int i = 0; i < k; ++i) out.smallest.push_back(sv[sv.size() - 1 - i]);
    return out;
}

inline SingularSummary min_singular_values(const OperatorMatrix& T, const ObstacleShape& shape, int k)
{
    return min_singular_values(T, stacked_weights(shape), k);
}

// Right singular vectors of the dim smallest singular values, mapped back to
// densities with unit weighted norm.
inline std::vector<DensityPair> kernel_vectors(const OperatorMatrix& T, const ObstacleShape& shape, int dim,
                                               double rel_threshold = 1e-4)
{
    const VecR w = stacked_weights(shape);
    Eigen::BDCSVD<MatC> svd(symmetrized(T, w), Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success)
        fail(ErrorKind::LinearAlgebra, "SVD failed");
    const VecR& sv = svd.singularValues();
    const Eigen::Index m = sv.size();
    std::vector<DensityPair> out;
    for (int i = 0; i < dim; ++i) {
        if (!(sv[m - 1 - i] < rel_threshold * sv[0]))
            fail(ErrorKind::NoKernel, "singular value above kernel threshold");
        VecC v = svd.matrixV().col(m - 1 - i);
        v = v.cwiseQuotient(w.array().sqrt().matrix().cast<cplx>());
        v /= weighted_norm(v, w);
        out.push_back(DensityPair::from_stacked(v));
    }
    return out;
}

// Trigonometric interpolation of nodal values from n to n * factor nodes.
inline VecC trig_upsample(const VecC& v, int factor)
{
    const int n = int(v.size());
    const int m = n * factor;
    VecC c(n);
    for (int k = 0; k < n; ++k) {
        cplx s = 0.0;
        for (int j = 0; j < n; ++j) s += v[j] * std::exp(cplx(0.0, -kTwoPi * k * j / n));
        c[k] = s / double(n);
    }
    VecC out(m);
    for (int j = 0; j < m; ++j) {
        const double t = kTwoPi * j / m;
        cplx s = 0.0;
        for (int k = 0; k < n; ++k) {
            int kk = k <= n / 2 ? k : k - n;
            double wgt = (k == n / 2) ? 0.5 : 1.0;
            if (k == n / 2) {
                s += c[k] * wgt * (std::exp(cplx(0.0, kk * t)) + std::exp(cplx(0.0, -kk * t)));
                continue;
            }
            s += c[k] * std::exp(cplx(0.0, kk * t));
        }
        out[j] = s;
    }
    return out;
}

inline DensityPair upsample(const DensityPair& d, int factor)
{
    return {trig_upsample(d.phi1, factor), trig_upsample(d.phi2, factor)};
}

// Single-layer field generated by densities on the two obstacles of a cell.
class LayerPotential {
public:
    LayerPotential(const ObstacleShape& shape, double p, cplx lambda, double delta, const KernelParams& base,
                   DensityPair density)
        : shape_(shape), kernel_(make_params(base, p, lambda)), delta_(delta), dens_(std::move(density)),
          centers_(cell_centers(delta))
    {
    }

    bool inside_obstacle(Point x) const
    {
        for (const Point& c : centers_) {
            const double j = std::floor(x.x1 - c.x1 + 0.5);
            const Point rel = x - Point{c.x1 + j, c.x2};
            const double r = norm(rel);
            if (r == 0.0) return true;
            if (r < shape_.radius_at(std::atan2(rel.x2, rel.x1))) return true;
        }
        return false;
    }

    cplx operator()(Point x) const
    {
        if (inside_obstacle(x))
            fail(ErrorKind::Domain, "field point inside an obstacle");
        return raw(x);
    }

    // Layer potential without the domain check (continues inside obstacles).
    cplx raw(Point x) const
    {
        const int n = shape_.n_nodes();
        cplx u = 0.0;
        for (int b = 0; b < n; ++b) {
            const double w = shape_.weights()[b];
            u += kernel_(x, centers_[0] + shape_.nodes()[b]) * (w * dens_.phi1[b]);
            u += kernel_(x, centers_[1] + shape_.nodes()[b]) * (w * dens_.phi2[b]);
        }
        return u;
    }

    // Field at parameter t on obstacle i (0 or 1), with Kress quadrature on
    // the source obstacle.
    cplx on_boundary(int i, double t) const
    {
        const int n = shape_.n_nodes();
        const Point c = centers_[i];
        const Point x = c + shape_.point_at(t);
        const VecC& own = i == 0 ? dens_.phi1 : dens_.phi2;
        const VecC& other = i == 0 ? dens_.phi2 : dens_.phi1;
        const double h = kTwoPi / n;
        cplx u = 0.0;
        for (int b = 0; b < n; ++b) {
            const Point y = c + shape_.nodes()[b];
            const double tau = t - shape_.param(b);
            const double s = std::sin(0.5 * tau);
            const double r = norm(x - y);
            cplx A, B;
            if (r < 1e-14) {
                A = 1.0 / (2.0 * kTwoPi);
                B = kernel_.regular_direct(x, x) + std::log(shape_.speeds()[b] * shape_.speeds()[b]) / (2.0 * kTwoPi);
            } else {
                A = kernel_.j0r(r) / (2.0 * kTwoPi);
                if (r < 0.1)
                    B = kernel_.regular_direct(x, y) + A * std::log(r * r / (4.0 * s * s));
                else
                    B = kernel_(x, y) - A * std::log(4.0 * s * s);
            }
            u += (kress_weight(n / 2, tau) * A + h * B) * shape_.speeds()[b] * own[b];
            u += kernel_(x, centers_[1 - i] + shape_.nodes()[b]) * shape_.weights()[b] * other[b];
        }
        return u;
    }

    const QPKernel& kernel() const { return kernel_; }
    const std::vector<Point>& centers() const { return centers_; }
    const DensityPair& density() const { return dens_; }

private:
    static KernelParams make_params(KernelParams kp, double p, cplx lambda)
    {
        kp.p = p;
        kp.lambda = lambda;
        return kp;
    }

    const ObstacleShape& shape_;
    QPKernel kernel_;
    double delta_;
    DensityPair dens_;
    std::vector<Point> centers_;
};

inline cplx field_from_density(const DensityPair& density, Point x, double p, cplx lambda, double delta,
                               const ObstacleShape& shape, const KernelParams& params)
{
    return LayerPotential(shape, p, lambda, delta, params, density)(x);
}

} // namespace wgdirac
