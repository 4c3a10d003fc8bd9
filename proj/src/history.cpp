#include "nmespf/history.hpp"

#include <algorithm>
#include <cmath>

namespace nmespf {

namespace {

constexpr double kJoinTol = 1e-12;

// Max of |f| on [a, b]: 64-interval scan plus a parabolic refinement step
// around the best node.
template <typename F>
double scan_sup(const F& f, double a, double b) {
    if (!(b > a)) return (b == a) ? std::fabs(f(a)) : 0.0;
    const int n = 64;
    double best = 0.0;
    double best_t = a;
    for (int i = 0; i <= n; ++i) {
        const double t = a + (b - a) * i / n;
        const double v = std::fabs(f(t));
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    const double h = (b - a) / n;
    const double t0 = std::max(a, best_t - h);
    const double t1 = std::min(b, best_t + h);
    const double fm = std::fabs(f(0.5 * (t0 + t1)));
    const double fl = std::fabs(f(t0));
    const double fr = std::fabs(f(t1));
    // vertex of the parabola through the three probes
    const double denom = fl - 2.0 * fm + fr;
    if (std::fabs(denom) > 1e-300) {
        const double dt = 0.25 * (t1 - t0) * (fl - fr) / denom;
        const double tv = std::clamp(0.5 * (t0 + t1) + dt, t0, t1);
        best = std::max(best, std::fabs(f(tv)));
    }
    return std::max({best, fm, fl, fr});
}

}  // namespace

TabulatedSegment::TabulatedSegment(std::vector<double> grid,
                                   std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (grid_.size() < 2 || values_.size() + 1 != grid_.size()) {
        throw std::invalid_argument("TabulatedSegment: need n+1 grid points for n values");
    }
    if (!std::is_sorted(grid_.begin(), grid_.end())) {
        throw std::invalid_argument("TabulatedSegment: grid must be increasing");
    }
    begin = grid_.front();
    end = grid_.back();
}

double TabulatedSegment::value(double t) const {
    if (t <= grid_.front()) return values_.front();
    // left-continuous: (t_i, t_{i+1}] -> v_i
    auto it = std::lower_bound(grid_.begin(), grid_.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - grid_.begin());
    if (idx == 0) return values_.front();
    return values_[std::min(idx - 1, values_.size() - 1)];
}

void TabulatedSegment::kinks(std::vector<double>* out) const {
    for (std::size_t i = 1; i + 1 < grid_.size(); ++i) out->push_back(grid_[i]);
}

void InputHistory::add(std::unique_ptr<Segment> seg) {
    if (!(seg->end > seg->begin)) {
        throw std::invalid_argument("InputHistory: empty segment");
    }
    if (!segs_.empty() &&
        std::fabs(segs_.back()->end - seg->begin) > kJoinTol) {
        throw std::invalid_argument("InputHistory: segments must be contiguous");
    }
    segs_.push_back(std::move(seg));
}

double InputHistory::front_time() const {
    if (segs_.empty()) throw std::logic_error("InputHistory: empty");
    return segs_.front()->begin;
}

double InputHistory::back_time() const {
    if (segs_.empty()) throw std::logic_error("InputHistory: empty");
    return segs_.back()->end;
}

bool InputHistory::covers(double a, double b) const {
    if (segs_.empty()) return false;
    return a >= front_time() - kJoinTol && b <= back_time() + kJoinTol;
}

const Segment* InputHistory::find(double t, bool prefer_left) const {
    if (segs_.empty()) return nullptr;
    // first segment with end > t (right-continuous); with prefer_left, the
    // one with end >= t.
    std::size_t lo = 0, hi = segs_.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const bool past = prefer_left ? (segs_[mid]->end >= t) : (segs_[mid]->end > t);
        if (past) hi = mid; else lo = mid + 1;
    }
    if (lo == segs_.size()) {
        // tolerate queries at the very end of the window
        if (t <= back_time() + kJoinTol) return segs_.back().get();
        return nullptr;
    }
    return segs_[lo].get();
}

double InputHistory::value(double t, bool prefer_left) const {
    const Segment* s = find(t, prefer_left);
    if (s == nullptr || t < s->begin - kJoinTol) {
        throw std::out_of_range("InputHistory: query at t=" + format_double(t) +
                                " outside the stored window");
    }
    return s->value(t);
}

std::vector<double> InputHistory::kinks_in(double a, double b) const {
    std::vector<double> out;
    for (const auto& s : segs_) {
        if (s->begin > a && s->begin < b) out.push_back(s->begin);
        if (s->end <= a || s->begin >= b) continue;
        std::vector<double> inner;
        s->kinks(&inner);
        for (double k : inner) {
            if (k > a && k < b) out.push_back(k);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

// Scan each smooth piece of the segment separately so that narrow plateaus
// of tabulated inputs cannot slip between scan nodes.
template <typename F>
double segment_sup(const Segment& seg, double lo, double hi, const F& f) {
    std::vector<double> cuts{lo};
    std::vector<double> inner;
    seg.kinks(&inner);
    for (double k : inner) {
        if (k > lo && k < hi) cuts.push_back(k);
    }
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        // stay inside the half-open plateau (value() is left-continuous)
        const double eps = 1e-12 * (1.0 + std::fabs(cuts[i]));
        const double p0 = std::min(cuts[i] + (i == 0 ? 0.0 : eps), cuts[i + 1]);
        best = std::max(best, scan_sup(f, p0, cuts[i + 1]));
    }
    return best;
}

}  // namespace

double InputHistory::sup_input_error(const ReferenceTrajectory& ref, double a,
                                     double b) const {
    if (!covers(a, b)) {
        throw std::out_of_range("InputHistory: window not covered");
    }
    double best = 0.0;
    for (const auto& s : segs_) {
        const double lo = std::max(a, s->begin);
        const double hi = std::min(b, s->end);
        if (hi <= lo) continue;
        best = std::max(best, segment_sup(*s, lo, hi, [&](double t) {
            return s->value(t) - ref.vd(t);
        }));
    }
    return best;
}

double InputHistory::sup_abs(double a, double b) const {
    if (!covers(a, b)) {
        throw std::out_of_range("InputHistory: window not covered");
    }
    double best = 0.0;
    for (const auto& s : segs_) {
        const double lo = std::max(a, s->begin);
        const double hi = std::min(b, s->end);
        if (hi <= lo) continue;
        best = std::max(best,
                        segment_sup(*s, lo, hi, [&](double t) { return s->value(t); }));
    }
    return best;
}

void InputHistory::drop_before(double t) {
    std::size_t keep = 0;
    while (keep < segs_.size() && segs_[keep]->end <= t) ++keep;
    if (keep > 0) segs_.erase(segs_.begin(), segs_.begin() + keep);
}

}  // namespace nmespf
