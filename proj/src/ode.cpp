#include "pilotwave/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pilotwave::ode {

namespace {

// Dormand & Prince (1980) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Shampine's fourth-order continuous extension (as in Hairer's DOPRI5).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double safety = 0.9;
constexpr double fac_min = 0.2;
constexpr double fac_max = 10.0;

}  // namespace

DormandPrince::DormandPrince(std::size_t dimension, Rhs rhs, Tolerances tol)
    : n_(dimension), rhs_(std::move(rhs)), tol_(tol) {
    if (n_ == 0) throw std::invalid_argument("DormandPrince: dimension must be positive");
    if (!(tol_.rtol >= 0.0) || !(tol_.atol >= 0.0) || tol_.rtol + tol_.atol <= 0.0)
        throw std::invalid_argument("DormandPrince: tolerances must be positive");
    for (auto* v : {&y_, &y_prev_, &y_stage_, &y_new_, &k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_,
                    &r1_, &r2_, &r3_, &r4_, &r5_, &comp_, &comp_new_})
        v->assign(n_, 0.0);
}

void DormandPrince::initialize(double t0, std::span<const double> y0) {
    if (y0.size() != n_) throw std::invalid_argument("DormandPrince: state size mismatch");
    t_ = t_prev_ = t0;
    std::copy(y0.begin(), y0.end(), y_.begin());
    std::copy(y0.begin(), y0.end(), y_prev_.begin());
    std::fill(comp_.begin(), comp_.end(), 0.0);
    rhs_(t_, y_, k1_);
    ++stats_.rhs_evaluations;
    h_ = 0.0;
    initialized_ = true;
    have_dense_ = false;
}

double DormandPrince::error_norm(std::span<const double> y_old,
                                 std::span<const double> y_new) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        const double sk = tol_.atol + tol_.rtol * std::max(std::abs(y_old[i]), std::abs(y_new[i]));
        const double r = y_stage_[i] / sk;  // y_stage_ holds the error vector here
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(n_));
}

double DormandPrince::initial_step(double direction) {
    if (tol_.h_init > 0.0) return direction * tol_.h_init;
    double dnf = 0.0, dny = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        const double sk = tol_.atol + tol_.rtol * std::abs(y_[i]);
        dnf += (k1_[i] / sk) * (k1_[i] / sk);
        dny += (y_[i] / sk) * (y_[i] / sk);
    }
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    if (tol_.h_max > 0.0) h = std::min(h, tol_.h_max);
    for (std::size_t i = 0; i < n_; ++i) y_new_[i] = y_[i] + direction * h * k1_[i];
    rhs_(t_ + direction * h, y_new_, k2_);
    ++stats_.rhs_evaluations;
    double der2 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        const double sk = tol_.atol + tol_.rtol * std::abs(y_[i]);
        const double d = (k2_[i] - k1_[i]) / sk;
        der2 += d * d;
    }
    der2 = std::sqrt(der2) / h;
    const double der12 = std::max(der2, std::sqrt(dnf));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
    h = std::min(100.0 * h, h1);
    if (tol_.h_max > 0.0) h = std::min(h, tol_.h_max);
    return direction * h;
}

StepStatus DormandPrince::step(double t_end) {
    if (!initialized_) throw std::logic_error("DormandPrince: step() before initialize()");
    if (t_ == t_end) return StepStatus::reached_end;
    if (stats_.accepted + stats_.rejected >= tol_.max_steps) return StepStatus::too_many_steps;

    const double direction = t_end > t_ ? 1.0 : -1.0;
    if (h_ == 0.0 || (h_ > 0.0) != (direction > 0.0)) h_ = initial_step(direction);

    bool rejected_before = false;
    for (;;) {
        double h = h_;
        if (tol_.h_max > 0.0 && std::abs(h) > tol_.h_max) h = direction * tol_.h_max;
        bool last = false;
        if (direction * (t_ + h - t_end) >= 0.0 ||
            std::abs(t_end - (t_ + h)) < 1e-12 * std::abs(h)) {
            h = t_end - t_;
            last = true;
        }
        if (std::abs(h) < tol_.h_min && !last) return StepStatus::step_underflow;

        const std::size_t n = n_;
        for (std::size_t i = 0; i < n; ++i) y_stage_[i] = y_[i] + h * a21 * k1_[i];
        rhs_(t_ + c2 * h, y_stage_, k2_);
        for (std::size_t i = 0; i < n; ++i) y_stage_[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
        rhs_(t_ + c3 * h, y_stage_, k3_);
        for (std::size_t i = 0; i < n; ++i)
            y_stage_[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
        rhs_(t_ + c4 * h, y_stage_, k4_);
        for (std::size_t i = 0; i < n; ++i)
            y_stage_[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
        rhs_(t_ + c5 * h, y_stage_, k5_);
        for (std::size_t i = 0; i < n; ++i)
            y_stage_[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] +
                                       a65 * k5_[i]);
        const double t_new = last ? t_end : t_ + h;
        rhs_(t_new, y_stage_, k6_);
        // Compensated update keeps roundoff from accumulating over long runs.
        for (std::size_t i = 0; i < n; ++i) {
            const double inc = h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] +
                                    a76 * k6_[i]) +
                               comp_[i];
            y_new_[i] = y_[i] + inc;
            comp_new_[i] = inc - (y_new_[i] - y_[i]);
        }
        rhs_(t_new, y_new_, k7_);
        stats_.rhs_evaluations += 6;

        for (std::size_t i = 0; i < n; ++i)
            y_stage_[i] = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] +
                               e6 * k6_[i] + e7 * k7_[i]);
        const double err = error_norm(y_, y_new_);

        bool finite = std::isfinite(err);
        if (finite && err <= 1.0 && admissible_ && !admissible_(t_new, y_new_)) {
            ++stats_.inadmissible_rejections;
            h_ = 0.5 * h;
            if (std::abs(h_) < tol_.h_min) return StepStatus::inadmissible;
            rejected_before = true;
            continue;
        }

        if (finite && err <= 1.0) {
            double fac = err == 0.0 ? fac_max : safety * std::pow(err, -0.2);
            fac = std::clamp(fac, fac_min, rejected_before ? 1.0 : fac_max);

            for (std::size_t i = 0; i < n; ++i) {
                const double dy = y_new_[i] - y_[i];
                const double bspl = h * k1_[i] - dy;
                r1_[i] = y_[i];
                r2_[i] = dy;
                r3_[i] = bspl;
                r4_[i] = dy - h * k7_[i] - bspl;
                r5_[i] = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] +
                              d6 * k6_[i] + d7 * k7_[i]);
            }
            have_dense_ = true;
            std::swap(y_prev_, y_);
            std::swap(y_, y_new_);
            std::swap(k1_, k7_);
            std::swap(comp_, comp_new_);
            t_prev_ = t_;
            t_ = t_new;
            ++stats_.accepted;
            const double ah = std::abs(h);
            if (stats_.min_step == 0.0 || ah < stats_.min_step) stats_.min_step = ah;
            if (!last) h_ = h * fac;
            return last ? StepStatus::reached_end : StepStatus::accepted;
        }

        ++stats_.rejected;
        const double fac = finite ? std::max(fac_min, safety * std::pow(err, -0.2)) : fac_min;
        h_ = h * std::min(1.0, fac);
        rejected_before = true;
        if (std::abs(h_) < tol_.h_min) return StepStatus::step_underflow;
        if (stats_.accepted + stats_.rejected >= tol_.max_steps) return StepStatus::too_many_steps;
    }
}

StepStatus DormandPrince::advance_to(double t_end,
                                     const std::function<bool(const DormandPrince&)>& observer) {
    for (;;) {
        const StepStatus s = step(t_end);
        if (s == StepStatus::accepted || s == StepStatus::reached_end) {
            if (observer && !observer(*this)) return s;
            if (s == StepStatus::reached_end) return s;
            continue;
        }
        return s;
    }
}

void DormandPrince::interpolate(double t, std::span<double> out) const {
    if (!have_dense_) {
        std::copy(y_.begin(), y_.end(), out.begin());
        return;
    }
    const double h = t_ - t_prev_;
    const double theta = (t - t_prev_) / h;
    const double theta1 = 1.0 - theta;
    for (std::size_t i = 0; i < n_; ++i)
        out[i] = r1_[i] + theta * (r2_[i] + theta1 * (r3_[i] + theta * (r4_[i] + theta1 * r5_[i])));
}

double DormandPrince::interpolate_component(double t, std::size_t i) const {
    if (!have_dense_) return y_[i];
    const double theta = (t - t_prev_) / (t_ - t_prev_);
    const double theta1 = 1.0 - theta;
    return r1_[i] + theta * (r2_[i] + theta1 * (r3_[i] + theta * (r4_[i] + theta1 * r5_[i])));
}

bool find_crossing(const DormandPrince& stepper, const ScalarOfState& g, int direction,
                   Crossing& out, double t_tol) {
    const double ta = stepper.t_previous();
    const double tb = stepper.t();
    if (ta == tb) return false;
    double ga = g(ta, stepper.y_previous());
    double gb = g(tb, stepper.y());
    // Orient so that "upward" refers to increasing integration variable.
    const double orient = tb > ta ? 1.0 : -1.0;
    const bool up = ga < 0.0 && gb >= 0.0;
    const bool down = ga > 0.0 && gb <= 0.0;
    const bool want_up = orient > 0 ? direction >= 0 : direction <= 0;
    const bool want_down = orient > 0 ? direction <= 0 : direction >= 0;
    if (!((up && want_up) || (down && want_down))) return false;

    std::vector<double> y(stepper.dimension());
    double lo = ta, hi = tb, glo = ga, ghi = gb;
    int side = 0;
    for (int iter = 0; iter < 200; ++iter) {
        // Illinois variant of regula falsi, bisecting when it stalls.
        double tm = (glo * hi - ghi * lo) / (glo - ghi);
        if (!(std::isfinite(tm)) || tm <= std::min(lo, hi) || tm >= std::max(lo, hi))
            tm = 0.5 * (lo + hi);
        stepper.interpolate(tm, y);
        const double gm = g(tm, y);
        if (gm == 0.0) {
            lo = hi = tm;
            break;
        }
        if ((gm < 0.0) == (glo < 0.0)) {
            lo = tm;
            glo = gm;
            if (side == -1) ghi *= 0.5;
            side = -1;
        } else {
            hi = tm;
            ghi = gm;
            if (side == 1) glo *= 0.5;
            side = 1;
        }
        if (std::abs(hi - lo) <= t_tol * std::max(1.0, std::abs(tm))) break;
    }
    out.t = std::abs(glo) < std::abs(ghi) ? lo : hi;
    out.y.resize(stepper.dimension());
    stepper.interpolate(out.t, out.y);
    return true;
}

}  // namespace pilotwave::ode
