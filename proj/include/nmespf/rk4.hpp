#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nmespf/core.hpp"

namespace nmespf {

// Classical fixed-step RK4 between breakpoints. The callable receives
// (t, x, at_right_end); at_right_end is set only for the final stage of a
// step that lands exactly on a breakpoint, so piecewise-defined right-hand
// sides can serve the left limit there and keep full order across kinks.
template <typename F>
Vec2 rk4_integrate(F&& f, double a, double b, Vec2 x, double h_max,
                   const std::vector<double>& breaks) {
    if (!(b >= a)) throw std::invalid_argument("rk4_integrate: b < a");
    std::vector<double> cuts;
    cuts.push_back(a);
    for (double c : breaks) {
        if (c > a && c < b) cuts.push_back(c);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i];
        const double hi = cuts[i + 1];
        if (hi <= lo) continue;
        const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / h_max - 1e-12)));
        const double h = (hi - lo) / n;
        for (int k = 0; k < n; ++k) {
            const double t = lo + h * k;
            const double tend = (k + 1 == n) ? hi : t + h;
            const bool last = (k + 1 == n);
            const Vec2 k1 = f(t, x, false);
            const Vec2 k2 = f(t + 0.5 * h, x + 0.5 * h * k1, false);
            const Vec2 k3 = f(t + 0.5 * h, x + 0.5 * h * k2, false);
            const Vec2 k4 = f(tend, x + h * k3, last);
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!finite(x)) {
                throw std::runtime_error("rk4_integrate: non-finite state at t=" +
                                         format_double(tend));
            }
        }
    }
    return x;
}

// Reference solution by step halving until the Richardson estimate
// |x_h - x_{h/2}| / 15 drops below tol.
template <typename F>
Vec2 rk4_truth(F&& f, double a, double b, const Vec2& x0,
               const std::vector<double>& breaks, double tol = 1e-10) {
    double h = (b - a) / 64.0;
    Vec2 coarse = rk4_integrate(f, a, b, x0, h, breaks);
    for (int iter = 0; iter < 22; ++iter) {
        h *= 0.5;
        const Vec2 fine = rk4_integrate(f, a, b, x0, h, breaks);
        if ((fine - coarse).norm() / 15.0 <= tol) return fine;
        coarse = fine;
    }
    throw std::runtime_error("rk4_truth: failed to reach the requested tolerance");
}

}  // namespace nmespf
