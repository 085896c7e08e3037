#pragma once

// Adaptive Dormand-Prince 5(4) integrator with continuous (dense) output.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pilotwave::ode {

using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

// Returns false when a proposed step end point must be rejected (the step is
// then halved, down to the configured floor).
using Admissible = std::function<bool(double t, std::span<const double> y)>;

struct Tolerances {
    double rtol = 1e-10;
    double atol = 1e-10;
    double h_min = 1e-14;
    double h_max = 0.0;  // 0 = unbounded
    double h_init = 0.0; // 0 = automatic
    std::size_t max_steps = 50'000'000;
};

enum class StepStatus {
    accepted,
    reached_end,
    step_underflow,   // error control demanded a step below h_min
    inadmissible,     // admissibility check kept failing until h_min
    too_many_steps,
};

struct Statistics {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t inadmissible_rejections = 0;
    std::size_t rhs_evaluations = 0;
    double min_step = 0.0;
};

class DormandPrince {
public:
    DormandPrince(std::size_t dimension, Rhs rhs, Tolerances tol = {});

    void set_admissible(Admissible check) { admissible_ = std::move(check); }

    void initialize(double t0, std::span<const double> y0);

    // Takes one accepted step towards t_end (either direction), never past it.
    StepStatus step(double t_end);

    // Drives step() until t_end or failure; the observer sees every accepted step.
    StepStatus advance_to(double t_end,
                          const std::function<bool(const DormandPrince&)>& observer = {});

    double t() const { return t_; }
    double t_previous() const { return t_prev_; }
    std::span<const double> y() const { return y_; }
    std::span<const double> y_previous() const { return y_prev_; }
    std::span<const double> derivative() const { return k1_; }
    double last_step() const { return t_ - t_prev_; }
    std::size_t dimension() const { return n_; }
    const Statistics& statistics() const { return stats_; }
    const Tolerances& tolerances() const { return tol_; }

    // Continuous extension over the last accepted step [t_previous, t].
    void interpolate(double t, std::span<double> out) const;
    double interpolate_component(double t, std::size_t i) const;

private:
    double error_norm(std::span<const double> y_old, std::span<const double> y_new) const;
    double initial_step(double direction);

    std::size_t n_;
    Rhs rhs_;
    Tolerances tol_;
    Admissible admissible_;
    Statistics stats_;

    double t_ = 0.0;
    double t_prev_ = 0.0;
    double h_ = 0.0;
    bool initialized_ = false;
    bool have_dense_ = false;

    std::vector<double> y_, y_prev_, y_stage_, y_new_;
    std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_;
    std::vector<double> r1_, r2_, r3_, r4_, r5_;
    std::vector<double> comp_, comp_new_;
};

// Locates a crossing of g along the last accepted step by bisection/secant on
// the dense output. direction > 0 keeps only upward crossings, < 0 downward,
// 0 either. Returns the crossing time when one exists inside the step.
struct Crossing {
    double t;
    std::vector<double> y;
};

using ScalarOfState = std::function<double(double t, std::span<const double> y)>;

bool find_crossing(const DormandPrince& stepper, const ScalarOfState& g, int direction,
                   Crossing& out, double t_tol = 1e-14);

}  // namespace pilotwave::ode
