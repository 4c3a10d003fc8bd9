#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "nmespf/core.hpp"

namespace nmespf {

// Non-negative scalar stored as log10(value). The step-count rule composes
// exponentials of exponentials; several intermediate quantities (growth
// factors, mismatch gains, step counts) overflow double for routine inputs.
// Carrying them in log form keeps comparisons and reports exact and lets the
// caller decide what "too large to run" means.
struct PosVal {
    double lg = -std::numeric_limits<double>::infinity();  // log10(value)

    PosVal() = default;

    static PosVal from(double v) {
        PosVal p;
        if (v < 0.0) throw std::domain_error("PosVal::from: negative value");
        p.lg = (v == 0.0) ? -std::numeric_limits<double>::infinity() : std::log10(v);
        return p;
    }

    // e^x for real x (may exceed double range)
    static PosVal exp_of(double x) {
        PosVal p;
        p.lg = x / 2.302585092994045684;  // ln(10)
        return p;
    }

    // e^x - 1 for x >= 0
    static PosVal expm1_of(double x) {
        if (x < 0.0) throw std::domain_error("PosVal::expm1_of: negative exponent");
        if (x > 700.0) return exp_of(x);
        return from(std::expm1(x));
    }

    bool zero() const { return std::isinf(lg) && lg < 0.0; }
    bool huge() const { return std::isinf(lg) && lg > 0.0; }

    // Saturates: 0 below ~1e-308, inf above ~1e308.
    double value() const {
        if (zero()) return 0.0;
        if (lg > 308.0) return std::numeric_limits<double>::infinity();
        if (lg < -308.0) return 0.0;
        return std::pow(10.0, lg);
    }

    std::string str() const {
        if (zero()) return "0";
        if (lg > 300.0 || lg < -300.0) return "10^" + format_double(lg);
        return format_double(value());
    }

    friend PosVal operator*(PosVal a, PosVal b) {
        PosVal p;
        p.lg = (a.zero() || b.zero()) ? -std::numeric_limits<double>::infinity()
                                      : a.lg + b.lg;
        return p;
    }
    friend PosVal operator/(PosVal a, PosVal b) {
        if (b.zero()) throw std::domain_error("PosVal: division by zero");
        PosVal p;
        p.lg = a.zero() ? a.lg : a.lg - b.lg;
        return p;
    }
    friend PosVal operator+(PosVal a, PosVal b) {
        if (a.zero()) return b;
        if (b.zero()) return a;
        if (a.lg < b.lg) std::swap(a, b);
        PosVal p;
        p.lg = a.huge() ? a.lg : a.lg + std::log10(1.0 + std::pow(10.0, b.lg - a.lg));
        return p;
    }

    friend bool operator<(PosVal a, PosVal b) { return a.lg < b.lg; }
    friend bool operator<=(PosVal a, PosVal b) { return a.lg <= b.lg; }
    friend bool operator>(PosVal a, PosVal b) { return a.lg > b.lg; }

    friend PosVal min(PosVal a, PosVal b) { return a < b ? a : b; }
    friend PosVal max(PosVal a, PosVal b) { return a < b ? b : a; }
};

inline PosVal pv(double v) { return PosVal::from(v); }

}  // namespace nmespf
