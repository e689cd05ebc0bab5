#pragma once

#include "bands.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "layerops.hpp"
#include "parallel.hpp"
#include "qpgreens.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <optional>
#include <memory>
#include <sstream>
#include <vector>

namespace wgdirac {

using MatR = Eigen::MatrixXd;

struct PNode {
    double p = 0.0;
    double weight = 0.0; // weights sum to 1; a node inside (0, pi) also stands for 2 pi - p
};

// Distance from p to the nearest p with (p + 2 pi m)^2 + (2 pi n)^2 = lambda,
// where the empty-strip kernel has a pole.
inline double empty_pole_distance(double p, double lambda)
{
    double best = 1e300;
    for (int n = 0; kTwoPi * n * kTwoPi * n < lambda; ++n) {
        const double q = std::sqrt(lambda - kTwoPi * n * kTwoPi * n);
        for (const double c : {q, -q}) {
            const double d = std::remainder(p - c, kTwoPi);
            best = std::min(best, std::abs(d));
        }
    }
    return best;
}

// Trapezoid nodes for (1/2 pi) int_0^{2 pi} f(p) dp with f(2 pi - p) = conj f(p),
// folded onto [0, pi]. Among node counts n_p, n_p + 2, ... and offsets 1/2, 0
// the first set keeping a fifth of a spacing away from empty-strip poles is used.
inline std::vector<PNode> brillouin_nodes(double lambda, int n_p)
{
    if (n_p < 8 || n_p % 2 != 0)
        fail(ErrorKind::Table, "Brillouin quadrature needs an even node count >= 8");
    int best_n = n_p;
    double best_s = 0.5, best_d = -1.0;
    for (int extra = 0; extra <= 8; extra += 2) {
        const int n = n_p + extra;
        for (const double s : {0.5, 0.0}) {
            double d = 1e300;
            for (int j = 0; j < n; ++j) d = std::min(d, empty_pole_distance(kTwoPi * (j + s) / n, lambda));
            const double rel = d / (kTwoPi / n);
            if (rel > best_d) {
                best_d = rel;
                best_n = n;
                best_s = s;
            }
        }
        if (best_d >= 0.2) break;
    }
    std::vector<PNode> out;
    for (int j = 0; j < best_n; ++j) {
        const double p = kTwoPi * (j + best_s) / best_n;
        if (p > kPi + 1e-12) break;
        const bool edge = std::abs(p) < 1e-12 || std::abs(p - kPi) < 1e-12;
        out.push_back({p, (edge ? 1.0 : 2.0) / best_n});
    }
    return out;
}

// In-gap Green's function of the periodic structure with shift delta:
// (Delta + lambda) G = delta_y, Dirichlet on obstacles, Neumann on the walls.
// Per Brillouin node G^p = G^e - S_p T(p)^{-1} G^e|_obstacles, averaged over p.
class GapGreens {
public:
    GapGreens(const ObstacleShape& shape, double delta, double lambda, const KernelParams& base, int n_p = 64,
              int jobs = 1)
        : shape_(shape), delta_(delta), lambda_(lambda), nodes_(brillouin_nodes(lambda, n_p))
    {
        const auto cs = cell_centers(delta);
        const int n = shape.n_nodes();
        for (int i = 0; i < 2; ++i)
            for (int b = 0; b < n; ++b) {
                bnodes_.push_back(cs[i] + shape.nodes()[b]);
                bw_.push_back(shape.weights()[b]);
            }
        slices_.resize(nodes_.size());
        parallel_for(int(nodes_.size()), jobs, [&](int i) {
            KernelParams kp = base;
            kp.p = nodes_[i].p;
            kp.lambda = lambda;
            const OperatorMatrix T = assemble_T(kp.p, lambda, delta, shape, base);
            slices_[i] = std::make_unique<Slice>(Slice{nodes_[i].p, nodes_[i].weight, QPKernel(kp), T.entries.partialPivLu()});
        });
    }

    double delta() const { return delta_; }
    double lambda() const { return lambda_; }
    const std::vector<PNode>& nodes() const { return nodes_; }
    const ObstacleShape& shape() const { return shape_; }

    // G(xs_i, ys_j) for non-coincident pairs outside the obstacles.
    MatR matrix(const std::vector<Point>& xs, const std::vector<Point>& ys, int jobs = 1) const
    {
        return accumulate(xs, ys, jobs, [](const QPKernel& K, Point x, Point y) { return K(x, y); });
    }

    double operator()(Point x, Point y) const { return matrix({x}, {y})(0, 0); }

    // sum_p w Re[kernel(x, y) - obstacle correction], with the kernel supplied
    // by the caller (used to strip singular terms before averaging).
    template <class Kern>
    MatR accumulate(const std::vector<Point>& xs, const std::vector<Point>& ys, int jobs, Kern&& kern) const
    {
        const int nx = int(xs.size()), ny = int(ys.size()), nb = int(bnodes_.size());
        std::vector<MatR> part(slices_.size());
        parallel_for(int(slices_.size()), jobs, [&](int i) {
            const Slice& sl = *slices_[i];
            MatC E(nx, nb), F(nb, ny), D(nx, ny);
            for (int a = 0; a < nx; ++a)
                for (int b = 0; b < nb; ++b) E(a, b) = sl.K(xs[a], bnodes_[b]) * bw_[b];
            for (int b = 0; b < nb; ++b)
                for (int c = 0; c < ny; ++c) F(b, c) = sl.K(bnodes_[b], ys[c]);
            for (int a = 0; a < nx; ++a)
                for (int c = 0; c < ny; ++c) D(a, c) = kern(sl.K, xs[a], ys[c]);
            const MatC G = D - E * sl.lu.solve(F);
            part[i] = sl.w * G.real();
        });
        MatR out = MatR::Zero(nx, ny);
        for (const auto& m : part) out += m;
        return out;
    }

    // Real density f given at points ys with weights wy (a quadrature for a
    // line integral): returns sum_j G(xs_i, ys_j) wy_j f_j. The obstacle
    // correction is applied to the combined source, so the cost is one solve per node.
    VecR apply(const std::vector<Point>& xs, const std::vector<Point>& ys, const VecR& wf, int jobs = 1) const
    {
        const int nx = int(xs.size()), ny = int(ys.size()), nb = int(bnodes_.size());
        std::vector<VecR> part(slices_.size());
        parallel_for(int(slices_.size()), jobs, [&](int i) {
            const Slice& sl = *slices_[i];
            VecC g = VecC::Zero(nb);
            for (int b = 0; b < nb; ++b)
                for (int c = 0; c < ny; ++c) g[b] += sl.K(bnodes_[b], ys[c]) * wf[c];
            const VecC psi = sl.lu.solve(g);
            VecR v(nx);
            for (int a = 0; a < nx; ++a) {
                cplx u = 0.0;
                for (int c = 0; c < ny; ++c) u += sl.K(xs[a], ys[c]) * wf[c];
                for (int b = 0; b < nb; ++b) u -= sl.K(xs[a], bnodes_[b]) * (bw_[b] * psi[b]);
                v[a] = sl.w * u.real();
            }
            part[i] = v;
        });
        VecR out = VecR::Zero(nx);
        for (const auto& v : part) out += v;
        return out;
    }

    bool inside_obstacle(Point x) const
    {
        for (const Point& c : cell_centers(delta_)) {
            const double j = std::floor(x.x1 - c.x1 + 0.5);
            const Point rel = x - Point{c.x1 + j, c.x2};
            const double r = norm(rel);
            if (r == 0.0 || r < shape_.radius_at(std::atan2(rel.x2, rel.x1))) return true;
        }
        return false;
    }

private:
    struct Slice {
        double p;
        double w;
        QPKernel K;
        Eigen::PartialPivLU<MatC> lu;
    };

    const ObstacleShape& shape_;
    double delta_;
    double lambda_;
    std::vector<PNode> nodes_;
    std::vector<Point> bnodes_;
    std::vector<double> bw_;
    std::vector<std::unique_ptr<Slice>> slices_;
};

// Hash of everything that determines a Bloch table besides delta and sizes.
inline std::string geometry_hash(const ObstacleShape& shape, const KernelParams& kp)
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* data, size_t n) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (double c : shape.fourier_cos_coeffs()) mix(&c, sizeof c);
    const int n = shape.n_nodes();
    mix(&n, sizeof n);
    mix(&kp.m_trunc, sizeof kp.m_trunc);
    mix(&kp.n_reg, sizeof kp.n_reg);
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// Perturbed Bloch eigenpairs on the folded Brillouin nodes, fields normalized
// to unit L2 norm over the cell (0, 1) x (0, 1/2) minus the obstacles.
struct BlochTable {
    std::string geometry;
    double delta = 0.0;
    int n_bands = 0;
    int n_p_nodes = 0;
    std::vector<PNode> nodes;
    std::vector<std::vector<double>> lambda;  // [node][band]
    std::vector<std::vector<VecC>> density;   // [node][band], stacked, already scaled to unit cell norm
    std::vector<std::vector<double>> cell_norm; // discrete cell norm after scaling
    std::vector<double> next_band;            // band n_bands + 1 per node
    double evenness_defect = 0.0;             // max |lambda_n(p) - lambda_n(2 pi - p)| over check nodes

    double next_band_min() const { return *std::min_element(next_band.begin(), next_band.end()); }

    // min over nodes and bands of |lambda - lambda_n(p)|
    double pole_margin(double lam) const
    {
        double m = 1e300;
        for (const auto& row : lambda)
            for (double l : row) m = std::min(m, std::abs(lam - l));
        return m;
    }

    // bound on the omitted bands, 1 / (min_p lambda_{n+1}(p) - lambda)
    double tail_estimate(double lam) const { return 1.0 / std::abs(next_band_min() - lam); }
};

struct BlochTableParams {
    int n_bands = 6;
    int n_p_nodes = 64;
    int grid_nx = 40; // cell sampling for the normalization
    int jobs = 1;
};

namespace detail {

inline std::vector<Point> cell_samples(const ObstacleShape& shape, double delta, int nx, double& weight)
{
    const int ny = nx / 2;
    weight = 1.0 / (double(nx) * nx);
    LayerPotential probe(shape, 0.0, 1.0, delta, KernelParams{}, {VecC::Zero(shape.n_nodes()), VecC::Zero(shape.n_nodes())});
    std::vector<Point> out;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const Point x{(i + 0.5) / nx, (j + 0.5) / nx};
            if (!probe.inside_obstacle(x)) out.push_back(x);
        }
    return out;
}

inline std::vector<cplx> sample_field(const QPKernel& K, const std::vector<Point>& bn, const std::vector<double>& bw,
                                      const VecC& dens, const std::vector<Point>& xs)
{
    std::vector<cplx> u(xs.size(), 0.0);
    for (size_t i = 0; i < xs.size(); ++i)
        for (size_t b = 0; b < bn.size(); ++b) u[i] += K(xs[i], bn[b]) * (bw[b] * dens[b]);
    return u;
}

} // namespace detail

inline BlochTable build_bloch_table(const ObstacleShape& shape, const KernelParams& kp, double delta,
                                    const BlochTableParams& bp)
{
    if (bp.n_bands < 4)
        fail(ErrorKind::Table, "Bloch table needs at least 4 bands");
    if (bp.n_p_nodes < 32 || bp.n_p_nodes % 2 != 0)
        fail(ErrorKind::Table, "Bloch table needs an even node count >= 32");
    BlochTable t;
    t.geometry = geometry_hash(shape, kp);
    t.delta = delta;
    t.n_bands = bp.n_bands;
    t.n_p_nodes = bp.n_p_nodes;
    for (int j = 0; j < bp.n_p_nodes / 2; ++j) t.nodes.push_back({kTwoPi * (j + 0.5) / bp.n_p_nodes, 2.0 / bp.n_p_nodes});
    const int nn = int(t.nodes.size());
    t.lambda.resize(nn);
    t.density.resize(nn);
    t.cell_norm.resize(nn);
    t.next_band.resize(nn);

    const BandSolver solver(shape, kp);
    const auto cs = cell_centers(delta);
    std::vector<Point> bn;
    std::vector<double> bw;
    for (int i = 0; i < 2; ++i)
        for (int b = 0; b < shape.n_nodes(); ++b) {
            bn.push_back(cs[i] + shape.nodes()[b]);
            bw.push_back(shape.weights()[b]);
        }
    double cw = 0.0;
    const auto samples = detail::cell_samples(shape, delta, bp.grid_nx, cw);

    auto values_at = [&](double p) {
        std::vector<double> v;
        for (double hi = 200.0; int(v.size()) < bp.n_bands + 1 && hi < 1e5; hi *= 2.0) v = solver.all_in(p, delta, 0.5, hi);
        if (int(v.size()) < bp.n_bands + 1) {
            std::ostringstream os;
            os << "band tracing failed at p=" << p;
            fail(ErrorKind::Table, os.str());
        }
        v.resize(bp.n_bands + 1);
        return v;
    };

    parallel_for(nn, bp.jobs, [&](int q) {
        const double p = t.nodes[q].p;
        std::vector<double> v;
        try {
            v = values_at(p);
        } catch (const Error& e) {
            std::ostringstream os;
            os << "node " << q << " (p=" << p << "): " << e.what();
            fail(ErrorKind::Table, os.str());
        }
        t.next_band[q] = v.back();
        v.pop_back();
        t.lambda[q] = v;
        t.density[q].assign(v.size(), VecC());
        t.cell_norm[q].assign(v.size(), 0.0);
        for (size_t b = 0; b < v.size();) {
            size_t e = b + 1;
            while (e < v.size() && std::abs(v[e] - v[b]) < 1e-7 * v[b]) ++e;
            const int dim = int(e - b);
            double mean = 0.0;
            for (size_t i = b; i < e; ++i) mean += v[i] / dim;
            const auto kv = kernel_vectors(solver.assemble(p, mean, delta), shape, dim);
            KernelParams kk = kp;
            kk.p = p;
            kk.lambda = mean;
            const QPKernel K(kk);
            std::vector<std::vector<cplx>> f;
            for (const auto& d : kv) f.push_back(detail::sample_field(K, bn, bw, d.stacked(), samples));
            // orthonormalize within the group in the cell inner product
            Eigen::MatrixXcd Gm(dim, dim);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) {
                    cplx s = 0.0;
                    for (size_t x = 0; x < samples.size(); ++x) s += std::conj(f[i][x]) * f[j][x];
                    Gm(i, j) = s * cw;
                }
            const Eigen::MatrixXcd L = Gm.llt().matrixL();
            const Eigen::MatrixXcd Linv = L.inverse();
            for (int i = 0; i < dim; ++i) {
                VecC d = VecC::Zero(2 * shape.n_nodes());
                for (int j = 0; j < dim; ++j) d += std::conj(Linv(i, j)) * kv[j].stacked();
                t.density[q][b + i] = d;
                const auto u = detail::sample_field(K, bn, bw, d, samples);
                double nrm = 0.0;
                for (const cplx& z : u) nrm += std::norm(z);
                t.cell_norm[q][b + i] = std::sqrt(nrm * cw);
            }
            b = e;
        }
    });

    // evenness on a few mirrored nodes
    for (int q : {0, nn / 3, nn - 1}) {
        const auto v = values_at(kTwoPi - t.nodes[q].p);
        for (int b = 0; b < bp.n_bands; ++b) t.evenness_defect = std::max(t.evenness_defect, std::abs(v[b] - t.lambda[q][b]));
    }
    return t;
}

inline nlohmann::json to_json(const BlochTable& t)
{
    nlohmann::json j;
    j["geometry"] = t.geometry;
    j["delta"] = t.delta;
    j["n_bands"] = t.n_bands;
    j["n_p_nodes"] = t.n_p_nodes;
    j["evenness_defect"] = t.evenness_defect;
    j["next_band"] = t.next_band;
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (size_t q = 0; q < t.nodes.size(); ++q) {
        nlohmann::json n;
        n["p"] = t.nodes[q].p;
        n["weight"] = t.nodes[q].weight;
        n["lambda"] = t.lambda[q];
        n["cell_norm"] = t.cell_norm[q];
        auto& ds = n["density"] = nlohmann::json::array();
        for (const VecC& d : t.density[q]) {
            std::vector<double> re(d.size()), im(d.size());
            for (Eigen::Index i = 0; i < d.size(); ++i) {
                re[i] = d[i].real();
                im[i] = d[i].imag();
            }
            ds.push_back({{"re", re}, {"im", im}});
        }
        nodes.push_back(n);
    }
    return j;
}

inline BlochTable bloch_table_from_json(const nlohmann::json& j)
{
    BlochTable t;
    t.geometry = j.at("geometry").get<std::string>();
    t.delta = j.at("delta").get<double>();
    t.n_bands = j.at("n_bands").get<int>();
    t.n_p_nodes = j.at("n_p_nodes").get<int>();
    t.evenness_defect = j.at("evenness_defect").get<double>();
    t.next_band = j.at("next_band").get<std::vector<double>>();
    for (const auto& n : j.at("nodes")) {
        t.nodes.push_back({n.at("p").get<double>(), n.at("weight").get<double>()});
        t.lambda.push_back(n.at("lambda").get<std::vector<double>>());
        t.cell_norm.push_back(n.at("cell_norm").get<std::vector<double>>());
        std::vector<VecC> ds;
        for (const auto& d : n.at("density")) {
            const auto re = d.at("re").get<std::vector<double>>();
            const auto im = d.at("im").get<std::vector<double>>();
            VecC v(re.size());
            for (size_t i = 0; i < re.size(); ++i) v[i] = cplx(re[i], im[i]);
            ds.push_back(v);
        }
        t.density.push_back(ds);
    }
    return t;
}

inline std::string bloch_cache_name(const std::string& geometry, double delta, int n_bands, int n_p_nodes)
{
    std::ostringstream os;
    os << "bloch_" << geometry << "_d" << std::setprecision(10) << delta << "_b" << n_bands << "_p" << n_p_nodes
       << ".json";
    return os.str();
}

// Table from the cache directory when the key matches, else built and stored.
inline BlochTable cached_bloch_table(const std::filesystem::path& dir, const ObstacleShape& shape,
                                     const KernelParams& kp, double delta, const BlochTableParams& bp,
                                     bool* hit = nullptr)
{
    const std::string geo = geometry_hash(shape, kp);
    const auto path = dir / bloch_cache_name(geo, delta, bp.n_bands, bp.n_p_nodes);
    if (std::filesystem::exists(path)) {
        try {
            BlochTable t = bloch_table_from_json(nlohmann::json::parse(read_file(path)));
            if (t.geometry == geo && t.delta == delta && t.n_bands == bp.n_bands && t.n_p_nodes == bp.n_p_nodes) {
                if (hit) *hit = true;
                return t;
            }
        } catch (const std::exception&) {
            // unreadable cache entries are rebuilt
        }
    }
    if (hit) *hit = false;
    BlochTable t = build_bloch_table(shape, kp, delta, bp);
    atomic_write(path, to_json(t).dump());
    return t;
}

// Band-sum representation of the gap Green's function,
// (1/2 pi) int sum_n u_n(x; p) conj(u_n(y; p)) / (lambda - lambda_n(p)) dp,
// over the bands stored in the table.
class BandSumGreens {
public:
    BandSumGreens(const BlochTable& t, const ObstacleShape& shape, const KernelParams& kp) : t_(t)
    {
        const auto cs = cell_centers(t.delta);
        for (int i = 0; i < 2; ++i)
            for (int b = 0; b < shape.n_nodes(); ++b) {
                bn_.push_back(cs[i] + shape.nodes()[b]);
                bw_.push_back(shape.weights()[b]);
            }
        for (size_t q = 0; q < t.nodes.size(); ++q) {
            std::vector<QPKernel> ks;
            for (double l : t.lambda[q]) {
                KernelParams k = kp;
                k.p = t.nodes[q].p;
                k.lambda = l;
                ks.emplace_back(k);
            }
            kernels_.push_back(std::move(ks));
        }
    }

    double operator()(Point x, Point y, double lambda, int n_bands = -1) const
    {
        const int nb = n_bands < 0 ? t_.n_bands : std::min(n_bands, t_.n_bands);
        double out = 0.0;
        for (size_t q = 0; q < t_.nodes.size(); ++q)
            for (int b = 0; b < nb; ++b) {
                const QPKernel& K = kernels_[q][b];
                const VecC& d = t_.density[q][b];
                cplx ux = 0.0, uy = 0.0;
                for (size_t j = 0; j < bn_.size(); ++j) {
                    ux += K(x, bn_[j]) * (bw_[j] * d[j]);
                    uy += K(y, bn_[j]) * (bw_[j] * d[j]);
                }
                out += t_.nodes[q].weight * (ux * std::conj(uy)).real() / (lambda - t_.lambda[q][b]);
            }
        return out;
    }

private:
    const BlochTable& t_;
    std::vector<Point> bn_;
    std::vector<double> bw_;
    std::vector<std::vector<QPKernel>> kernels_;
};

// Midpoint nodes t_b = (b + 1/2) / (2M) on Gamma = {0} x (0, 1/2). A density
// on Gamma is extended evenly across both walls, which makes it 1-periodic.
struct GammaGrid {
    int m = 32;

    double h() const { return 0.5 / m; }
    double node(int b) const { return (b + 0.5) * h(); }
    std::vector<double> nodes() const
    {
        std::vector<double> t(m);
        for (int b = 0; b < m; ++b) t[b] = node(b);
        return t;
    }
    std::vector<Point> points() const
    {
        std::vector<Point> out;
        for (int b = 0; b < m; ++b) out.push_back({0.0, node(b)});
        return out;
    }
};

// Cosine-series interpolation of nodal values on Gamma to arbitrary t.
inline double gamma_interp(const VecR& f, double t)
{
    const int m = int(f.size());
    double out = 0.0;
    for (int k = 0; k < m; ++k) {
        double c = 0.0;
        for (int b = 0; b < m; ++b) c += f[b] * std::cos(kPi * k * (2 * b + 1) / (2.0 * m));
        c *= (k == 0 ? 1.0 : 2.0) / m;
        out += c * std::cos(kTwoPi * k * t);
    }
    return out;
}

inline VecR gamma_resample(const VecR& f, const std::vector<double>& ts)
{
    const int m = int(f.size());
    VecR c(m);
    for (int k = 0; k < m; ++k) {
        double s = 0.0;
        for (int b = 0; b < m; ++b) s += f[b] * std::cos(kPi * k * (2 * b + 1) / (2.0 * m));
        c[k] = s * (k == 0 ? 1.0 : 2.0) / m;
    }
    VecR out(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) {
        double v = 0.0;
        for (int k = 0; k < m; ++k) v += c[k] * std::cos(kTwoPi * k * ts[i]);
        out[i] = v;
    }
    return out;
}

namespace detail {

inline bool gamma_near(double s, double t)
{
    return std::abs(s - t) < QPKernel::kSplitDist || s + t < QPKernel::kSplitDist ||
           1.0 - s - t < QPKernel::kSplitDist;
}

} // namespace detail

// Rows of the single-layer operator on Gamma, f -> int_0^{1/2} G(s, t) f(t) dt,
// for evaluation heights s in (0, 1/2). On the even 1-periodic extension the
// kernel is log-singular at t = s and t = -s; both are removed with the Kress
// product weights for log(4 sin^2(pi u)).
inline MatR gamma_operator(const GapGreens& g, const std::vector<double>& s_eval, const GammaGrid& grid, int jobs = 1)
{
    const int m = grid.m;
    const double h = grid.h();
    const double k2 = g.lambda();
    std::vector<Point> xs, ys = grid.points();
    for (double s : s_eval) {
        if (!(s > 0.0 && s < 0.5))
            fail(ErrorKind::Domain, "Gamma evaluation height outside (0, 1/2)");
        xs.push_back({0.0, s});
    }
    const MatR smooth = g.accumulate(xs, ys, jobs, [](const QPKernel& K, Point x, Point y) -> cplx {
        return detail::gamma_near(x.x2, y.x2) ? K.regular_all(x, y) : K(x, y);
    });

    auto j0 = [&](double r) { return bessel_j0_sq(cplx(k2 * r * r)).real(); };
    auto L = [&](double u) { return j0(std::abs(u)) * std::log(std::abs(u)) / kTwoPi; };
    auto A1 = [&](double u) { return j0(std::sin(kPi * u) / kPi) / (2.0 * kTwoPi); };
    auto ell = [](double u) { return std::log(4.0 * std::sin(kPi * u) * std::sin(kPi * u)); };
    auto R1 = [&](double u) { return kress_weight(m, kTwoPi * u) / kTwoPi; };
    // L(u) - A1(u) ell(u), finite at u = 0
    auto Dsing = [&](double u) { return std::abs(u) < 1e-14 ? -std::log(kTwoPi) / kTwoPi : L(u) - A1(u) * ell(u); };

    MatR out(xs.size(), m);
    for (size_t i = 0; i < xs.size(); ++i) {
        const double s = s_eval[i];
        for (int b = 0; b < m; ++b) {
            const double t = grid.node(b);
            double k2v = smooth(i, b);
            if (detail::gamma_near(s, t))
                k2v += Dsing(s - t) + L(s + t) + L(1.0 - s - t) - A1(s + t) * ell(s + t);
            else
                k2v -= A1(s - t) * ell(s - t) + A1(s + t) * ell(s + t);
            out(i, b) = R1(s - t) * A1(s - t) + R1(s + t) * A1(s + t) + h * k2v;
        }
    }
    return out;
}

inline MatR gamma_operator(const GapGreens& g, const GammaGrid& grid, int jobs = 1)
{
    return gamma_operator(g, grid.nodes(), grid, jobs);
}

// Single layer over Gamma at points off Gamma: int_0^{1/2} G(x, (0, t)) f(t) dt
// with f interpolated to a midpoint rule fine enough for the nearest point.
inline VecR gamma_single_layer(const GapGreens& g, const std::vector<Point>& xs, const VecR& f, int jobs = 1)
{
    double dmin = 1e300;
    for (const Point& x : xs) {
        if (x.x1 == 0.0)
            fail(ErrorKind::Domain, "point on Gamma; use gamma_operator");
        dmin = std::min(dmin, std::abs(x.x1));
    }
    int nf = int(f.size());
    while (0.5 / nf > dmin / 6.0 && nf < 4096) nf *= 2;
    std::vector<double> ts(nf);
    std::vector<Point> ys(nf);
    for (int b = 0; b < nf; ++b) {
        ts[b] = (b + 0.5) * 0.5 / nf;
        ys[b] = {0.0, ts[b]};
    }
    const VecR wf = gamma_resample(f, ts) * (0.5 / nf);
    return g.apply(xs, ys, wf, jobs);
}

// Five-point residual |(Delta + lambda) G| at each sample, divided by
// lambda * max |G| over the stencil.
inline std::vector<double> helmholtz_residuals(const std::function<double(Point)>& G, double lambda,
                                               const std::vector<Point>& samples, double h)
{
    std::vector<double> out;
    for (const Point& x : samples) {
        const double c = G(x);
        const double e = G({x.x1 + h, x.x2}), w = G({x.x1 - h, x.x2});
        const double n = G({x.x1, x.x2 + h}), s = G({x.x1, x.x2 - h});
        const double lap = (e + w + n + s - 4.0 * c) / (h * h);
        const double scale = lambda * std::max({std::abs(c), std::abs(e), std::abs(w), std::abs(n), std::abs(s)});
        out.push_back(std::abs(lap + lambda * c) / scale);
    }
    return out;
}

inline double helmholtz_residual_check(const GapGreens& g, Point y, const std::vector<Point>& samples, double h,
                                       int jobs = 1)
{
    for (const Point& x : samples)
        if (norm(x - y) < 0.2)
            fail(ErrorKind::Domain, "Helmholtz sample within 0.2 of the source");
    std::vector<Point> all;
    for (const Point& x : samples)
        for (const Point& d : {Point{0, 0}, Point{h, 0}, Point{-h, 0}, Point{0, h}, Point{0, -h}}) all.push_back(x + d);
    const MatR v = g.matrix(all, {y}, jobs);
    size_t idx = 0;
    std::vector<double> vals(all.size());
    for (size_t i = 0; i < all.size(); ++i) vals[i] = v(i, 0);
    auto lookup = [&](Point) { return vals[idx++]; };
    const auto res = helmholtz_residuals(lookup, g.lambda(), samples, h);
    return *std::max_element(res.begin(), res.end());
}

} // namespace wgdirac
