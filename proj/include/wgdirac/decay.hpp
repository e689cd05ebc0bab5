#pragma once

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace wgdirac {

struct DecayFit {
    double kappa = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int n_points = 0;
};

// Largest column maximum within a unit window centered at each column,
// restricted to the same side of x1 = 0.
inline std::vector<double> unit_envelope(const std::vector<double>& x1, const std::vector<double>& colmax)
{
    std::vector<double> env(x1.size(), 0.0);
    for (size_t i = 0; i < x1.size(); ++i)
        for (size_t j = 0; j < x1.size(); ++j)
            if (std::abs(x1[j] - x1[i]) <= 0.5 && (x1[j] > 0) == (x1[i] > 0)) env[i] = std::max(env[i], colmax[j]);
    return env;
}

// Least-squares fit of log(envelope) = intercept - kappa |x1| over
// lo <= |x1| <= hi. The envelope at x1 is the largest column maximum within a
// unit window centered at x1, which removes the within-cell oscillation.
inline DecayFit fit_decay(const std::vector<double>& x1, const std::vector<double>& colmax, double lo, double hi)
{
    if (x1.size() != colmax.size())
        fail(ErrorKind::Domain, "decay fit: size mismatch");
    std::vector<double> xs, ys;
    const auto env = unit_envelope(x1, colmax);
    for (size_t i = 0; i < x1.size(); ++i) {
        const double a = std::abs(x1[i]);
        if (a < lo || a > hi || !(env[i] > 0.0)) continue;
        xs.push_back(a);
        ys.push_back(std::log(env[i]));
    }
    DecayFit f;
    f.n_points = int(xs.size());
    if (f.n_points < 3)
        fail(ErrorKind::Domain, "decay fit needs at least three columns in range");
    const double n = double(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - slope * sx) / n;
    f.kappa = -slope;
    const double my = sy / n;
    double ss_res = 0.0, ss_tot = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (f.intercept + slope * xs[i]);
        ss_res += e * e;
        ss_tot += (ys[i] - my) * (ys[i] - my);
    }
    f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    return f;
}

} // namespace wgdirac
