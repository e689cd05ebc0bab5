#pragma once

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace wgdirac {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kStripHeight = 0.5;
inline constexpr double kCenterHeight = 0.25;
inline constexpr double kDeltaMax = 0.05;

struct Point {
    double x1 = 0.0;
    double x2 = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
inline Point operator-(Point a, Point b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
inline Point operator*(double s, Point a) { return {s * a.x1, s * a.x2}; }
inline double norm(Point a) { return std::hypot(a.x1, a.x2); }

// Star-shaped obstacle r(t) = sum_k a_k cos(k (t - pi/2)) about its center.
// Only cosines in (t - pi/2) are representable, so r(t) = r(pi - t) always.
class ObstacleShape {
public:
    ObstacleShape(std::vector<double> coeffs, int n_nodes) : coeffs_(std::move(coeffs)), n_(n_nodes)
    {
        if (n_ < 16 || n_ % 2 != 0)
            fail(ErrorKind::Geometry, "n_nodes must be even and at least 16");
        if (coeffs_.empty() || !(coeffs_[0] > 0.0))
            fail(ErrorKind::Geometry, "leading radius coefficient must be positive");
        build();
        validate();
    }

    const std::vector<double>& fourier_cos_coeffs() const { return coeffs_; }
    int n_nodes() const { return n_; }
    double param(int j) const { return kTwoPi * j / n_; }

    double radius_at(double t) const
    {
        double r = 0.0;
        for (std::size_t k = 0; k < coeffs_.size(); ++k)
            r += coeffs_[k] * std::cos(k * (t - 0.5 * kPi));
        return r;
    }

    double radius_deriv(double t) const
    {
        double r = 0.0;
        for (std::size_t k = 1; k < coeffs_.size(); ++k)
            r -= coeffs_[k] * k * std::sin(k * (t - 0.5 * kPi));
        return r;
    }

    Point point_at(double t) const
    {
        const double r = radius_at(t);
        return {r * std::cos(t), r * std::sin(t)};
    }

    Point tangent_at(double t) const
    {
        const double r = radius_at(t), dr = radius_deriv(t);
        return {dr * std::cos(t) - r * std::sin(t), dr * std::sin(t) + r * std::cos(t)};
    }

    double speed_at(double t) const { return norm(tangent_at(t)); }

    const std::vector<Point>& nodes() const { return nodes_; }
    const std::vector<Point>& normals() const { return normals_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& speeds() const { return speeds_; }

    // index of the node that is the mirror image under x1 -> -x1
    int reflected_index(int j) const { return ((n_ / 2 - j) % n_ + n_) % n_; }

    double perimeter() const
    {
        double s = 0.0;
        for (double w : weights_) s += w;
        return s;
    }

    double max_radius() const { return max_radius_; }

    // stable identifier for cache keys
    std::string fingerprint() const
    {
        std::ostringstream os;
        os.precision(17);
        os << "n=" << n_;
        for (double c : coeffs_) os << ";" << c;
        std::uint64_t h = 1469598103934665603ull;
        for (char ch : os.str()) {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ull;
        }
        std::ostringstream hex;
        hex << std::hex << h;
        return hex.str();
    }

private:
    void build()
    {
        nodes_.resize(n_);
        normals_.resize(n_);
        weights_.resize(n_);
        speeds_.resize(n_);
        for (int j = 0; j < n_; ++j) {
            const double t = param(j);
            nodes_[j] = point_at(t);
            const Point tg = tangent_at(t);
            const double sp = norm(tg);
            speeds_[j] = sp;
            normals_[j] = {tg.x2 / sp, -tg.x1 / sp};
            weights_[j] = kTwoPi / n_ * sp;
        }
    }

    void validate()
    {
        const int dense = std::max(1024, 16 * n_);
        std::vector<Point> pts(dense);
        double per = 0.0;
        max_radius_ = 0.0;
        for (int j = 0; j < dense; ++j) {
            const double t = kTwoPi * j / dense;
            const double r = radius_at(t);
            if (!(r > 0.0))
                fail(ErrorKind::Geometry, "radius function is not positive");
            max_radius_ = std::max(max_radius_, r);
            pts[j] = point_at(t);
            per += speed_at(t) * kTwoPi / dense;
            if (std::abs(pts[j].x2) >= kCenterHeight)
                fail(ErrorKind::Geometry, "obstacle touches the waveguide walls");
        }
        double diam = 0.0;
        const int stride = std::max(1, dense / 512);
        for (int a = 0; a < dense; a += stride)
            for (int b = a + stride; b < dense; b += stride)
                diam = std::max(diam, norm(pts[a] - pts[b]));
        if (diam >= 0.5 - 2.0 * kDeltaMax)
            fail(ErrorKind::Geometry, "obstacle diameter leaves no room for dimerization");
        if (std::abs(perimeter() - per) > 1e-10 * per)
            fail(ErrorKind::Geometry, "too few nodes to resolve the boundary");
    }

    std::vector<double> coeffs_;
    int n_;
    std::vector<Point> nodes_, normals_;
    std::vector<double> weights_, speeds_;
    double max_radius_ = 0.0;
};

inline ObstacleShape make_disk(double radius, int n_nodes)
{
    if (!(radius > 0.0) || !(radius < 0.25))
        fail(ErrorKind::Geometry, "disk radius must lie in (0, 1/4)");
    return ObstacleShape({radius}, n_nodes);
}

inline ObstacleShape make_shape(std::vector<double> coeffs, int n_nodes)
{
    return ObstacleShape(std::move(coeffs), n_nodes);
}

inline ObstacleShape with_nodes(const ObstacleShape& s, int n_nodes)
{
    return ObstacleShape(s.fourier_cos_coeffs(), n_nodes);
}

enum class Variant { Unperturbed, PlusDelta, MinusDelta, Joint };

struct CellLayout {
    double delta = 0.0;
    std::vector<Point> centers;
    Variant variant = Variant::Unperturbed;
};

// Centers of the two obstacles in the reference cell [0,1] for the periodic
// structure with dimerization delta (delta < 0 gives the mirrored structure).
inline std::vector<Point> cell_centers(double delta)
{
    return {{0.25 - delta, kCenterHeight}, {0.75 + delta, kCenterHeight}};
}

inline CellLayout layout_centers(Variant v, double delta, int n_cells)
{
    if (!(std::abs(delta) < kDeltaMax))
        fail(ErrorKind::Geometry, "dimerization shift too large");
    if (n_cells < 1)
        fail(ErrorKind::Geometry, "need at least one cell");
    CellLayout out;
    out.variant = v;
    out.delta = delta;
    auto z = [](int n) { return (2.0 * std::abs(n) - 1.0) / 4.0 * (n > 0 ? 1.0 : -1.0); };
    if (v == Variant::Joint) {
        for (int n = -2 * n_cells; n <= 2 * n_cells; ++n) {
            if (n == 0) continue;
            const double s = (std::abs(n) % 2 == 0) ? delta : -delta;
            out.centers.push_back({z(n) + s, kCenterHeight});
        }
        return out;
    }
    const double d = v == Variant::PlusDelta ? delta : v == Variant::MinusDelta ? -delta : 0.0;
    if (v == Variant::Unperturbed && delta != 0.0)
        fail(ErrorKind::Geometry, "unperturbed layout takes delta = 0");
    for (int k = 0; k < n_cells; ++k)
        for (const Point& c : cell_centers(d))
            out.centers.push_back({c.x1 + k, c.x2});
    return out;
}

} // namespace wgdirac
