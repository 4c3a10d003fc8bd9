#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace nmespf {

// 4-point Gauss-Legendre on [a, b].
template <typename F>
double gauss4(const F& f, double a, double b) {
    static constexpr double n0 = 0.33998104358485626480;
    static constexpr double n1 = 0.86113631159405257522;
    static constexpr double w0 = 0.65214515486254614263;
    static constexpr double w1 = 0.34785484513745385737;
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    return h * (w0 * (f(c - h * n0) + f(c + h * n0)) +
                w1 * (f(c - h * n1) + f(c + h * n1)));
}

namespace detail {

template <typename F>
double adapt(const F& f, double a, double b, double whole, double rel_tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = gauss4(f, a, m);
    const double right = gauss4(f, m, b);
    const double err = std::fabs(left + right - whole);
    if (!std::isfinite(left + right)) return left + right;
    if (depth <= 0 || err <= rel_tol * (std::fabs(left + right) + 1e-300) ||
        err <= 1e-15 * rel_tol) {
        return left + right;
    }
    return adapt(f, a, m, left, rel_tol, depth - 1) +
           adapt(f, m, b, right, rel_tol, depth - 1);
}

}  // namespace detail

// Integrate f over [a, b], splitting at the supplied breakpoints (control
// discontinuities) and refining adaptively within each smooth piece.
// Pieces shorter than `direct_len` are taken in a single Gauss panel: the
// panel error is O(len^9) and already far below rel_tol there.
template <typename F>
double integrate(const F& f, double a, double b, const std::vector<double>& breaks,
                 double rel_tol = 1e-10, double direct_len = 1e-3) {
    if (!(b >= a)) throw std::invalid_argument("integrate: b < a");
    if (a == b) return 0.0;
    std::vector<double> cuts;
    cuts.push_back(a);
    for (double c : breaks) {
        if (c > a && c < b) cuts.push_back(c);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i];
        const double hi = cuts[i + 1];
        if (hi - lo <= 0.0) continue;
        if (hi - lo <= direct_len) {
            total += gauss4(f, lo, hi);
        } else {
            total += detail::adapt(f, lo, hi, gauss4(f, lo, hi), rel_tol, 48);
        }
    }
    return total;
}

}  // namespace nmespf
