// Embedded Dormand-Prince 5(4) stepper with dense output.
#pragma once

#include <array>
#include <functional>
#include <limits>

#include "hamlens/types.hpp"

namespace hamlens {

struct OdeConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    double init_step = 0.0; // 0 = choose automatically
};

using OdeRhs = std::function<void(double, const Vec&, Vec&)>;

// Coefficients of the quartic interpolant over one accepted step:
// y(t0 + theta*h) = r[0] + theta*(r[1] + (1-theta)*(r[2] + theta*(r[3] + (1-theta)*r[4]))).
struct DenseCoeffs {
    double t0 = 0.0;
    double h = 0.0;
    std::array<Vec, 5> r;

    void eval(double t, Vec& out) const;
    Vec eval(double t) const {
        Vec out;
        eval(t, out);
        return out;
    }
};

class Dopri5Stepper {
public:
    Dopri5Stepper(OdeRhs rhs, double t0, Vec y0, OdeConfig cfg = {});

    // Take one accepted step toward t_target (never past it).
    // Returns false if already at the target.
    bool advance(double t_target);

    double t_prev() const { return t_prev_; }
    double t_curr() const { return t_; }
    const Vec& y_curr() const { return y_; }
    const Vec& y_prev() const { return y_prev_; }
    const DenseCoeffs& dense() const { return dense_; }

    double last_err() const { return last_err_; }
    double max_err_seen() const { return max_err_seen_; }
    long n_rhs() const { return n_rhs_; }

private:
    void eval_rhs(double t, const Vec& y, Vec& out);
    double error_norm(const Vec& y0, const Vec& y1, const Vec& err) const;
    double initial_step(double dir, double span);
    void build_dense(double h);

    OdeRhs rhs_;
    OdeConfig cfg_;
    double t_, t_prev_;
    Vec y_, y_prev_;
    double h_abs_ = 0.0;
    double last_err_ = 0.0, max_err_seen_ = 0.0;
    long n_rhs_ = 0;
    std::array<Vec, 7> k_;
    Vec y_stage_, y_next_, err_vec_;
    DenseCoeffs dense_;
    bool fsal_valid_ = false;
};

} // namespace hamlens
