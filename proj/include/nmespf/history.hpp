#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "nmespf/controller.hpp"
#include "nmespf/core.hpp"
#include "nmespf/reference.hpp"

namespace nmespf {

// One piece of the applied-input record, defined on [begin, end).
class Segment {
  public:
    virtual ~Segment() = default;
    virtual double value(double t) const = 0;
    virtual void kinks(std::vector<double>* out) const {}
    double begin = 0.0;
    double end = 0.0;
};

class ConstantSegment : public Segment {
  public:
    ConstantSegment(double t0, double t1, double v) : v_(v) {
        begin = t0;
        end = t1;
    }
    double value(double) const override { return v_; }

  private:
    double v_;
};

// Arbitrary closed-form input (used for on-reference initial histories and
// for test instances).
class CallableSegment : public Segment {
  public:
    CallableSegment(double t0, double t1, std::function<double(double)> f)
        : f_(std::move(f)) {
        begin = t0;
        end = t1;
    }
    double value(double t) const override { return f_(t); }

  private:
    std::function<double(double)> f_;
};

// Sampled initial condition, piecewise constant and left-continuous:
// value on (t_i, t_{i+1}] is v_i, value at the first grid point is v_0.
class TabulatedSegment : public Segment {
  public:
    TabulatedSegment(std::vector<double> grid, std::vector<double> values);
    double value(double t) const override;
    void kinks(std::vector<double>* out) const override;

  private:
    std::vector<double> grid_;
    std::vector<double> values_;
};

// Control produced by the hybrid law after the sample at t_sample: the
// predicted error coasts along the nominal loop and the control formula is
// evaluated exactly, so integrators and the predictor's quadrature see the
// exact signal rather than stored samples.
class ControllerSegment : public Segment {
  public:
    ControllerSegment(double t0, double t1,
                      std::shared_ptr<const ReferenceTrajectory> ref,
                      ControllerState state)
        : ref_(std::move(ref)), state_(state) {
        begin = t0;
        end = t1;
    }
    double value(double t) const override {
        return control_value(state_, ref_->model(), *ref_, t);
    }
    const ControllerState& state() const { return state_; }

  private:
    std::shared_ptr<const ReferenceTrajectory> ref_;
    ControllerState state_;
};

// Contiguous, non-overlapping record of the applied input over a growing
// window. Value queries are right-continuous at segment joins; set
// prefer_left when closing an integration piece at a join.
class InputHistory {
  public:
    void add(std::unique_ptr<Segment> seg);

    double front_time() const;
    double back_time() const;
    bool covers(double a, double b) const;

    double value(double t, bool prefer_left = false) const;

    // Segment joins and interior kinks in (a, b), for quadrature splitting.
    std::vector<double> kinks_in(double a, double b) const;

    // Actual supremum of |v(s) - v_d(s)| over [a, b): each overlapping
    // segment is scanned on a fine grid with local parabolic refinement
    // of the peak (the segments are closed forms, not stored samples).
    double sup_input_error(const ReferenceTrajectory& ref, double a, double b) const;

    // Same, for |v(s)| alone.
    double sup_abs(double a, double b) const;

    std::size_t segment_count() const { return segs_.size(); }
    const Segment& segment(std::size_t i) const { return *segs_[i]; }

    // Drop segments that end at or before t (no longer reachable by any
    // delayed lookup).
    void drop_before(double t);

  private:
    const Segment* find(double t, bool prefer_left) const;
    std::vector<std::unique_ptr<Segment>> segs_;
};

}  // namespace nmespf
