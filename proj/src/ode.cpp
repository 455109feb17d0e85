#include "hamlens/ode.hpp"

#include <algorithm>
#include <cmath>

#include "hamlens/errors.hpp"

namespace hamlens {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// Difference between the 5th and 4th order weights.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense-output weights.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

} // namespace

void DenseCoeffs::eval(double t, Vec& out) const {
    const double theta = (t - t0) / h;
    const double theta1 = 1.0 - theta;
    out = r[0] + theta * (r[1] + theta1 * (r[2] + theta * (r[3] + theta1 * r[4])));
}

Dopri5Stepper::Dopri5Stepper(OdeRhs rhs, double t0, Vec y0, OdeConfig cfg)
    : rhs_(std::move(rhs)), cfg_(cfg), t_(t0), t_prev_(t0), y_(std::move(y0)), y_prev_(y_) {
    const long m = y_.size();
    for (auto& k : k_) k.resize(m);
    y_stage_.resize(m);
    y_next_.resize(m);
    err_vec_.resize(m);
    for (auto& r : dense_.r) r.resize(m);
}

void Dopri5Stepper::eval_rhs(double t, const Vec& y, Vec& out) {
    rhs_(t, y, out);
    ++n_rhs_;
}

double Dopri5Stepper::error_norm(const Vec& y0, const Vec& y1, const Vec& err) const {
    double acc = 0.0;
    for (long i = 0; i < err.size(); ++i) {
        const double sk = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y0(i)), std::abs(y1(i)));
        const double q = err(i) / sk;
        acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

double Dopri5Stepper::initial_step(double dir, double span) {
    double d0 = 0.0, d1 = 0.0;
    for (long i = 0; i < y_.size(); ++i) {
        const double sk = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_(i));
        d0 += (y_(i) / sk) * (y_(i) / sk);
        d1 += (k_[0](i) / sk) * (k_[0](i) / sk);
    }
    d0 = std::sqrt(d0 / static_cast<double>(y_.size()));
    d1 = std::sqrt(d1 / static_cast<double>(y_.size()));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);

    y_stage_ = y_ + (dir * h0) * k_[0];
    eval_rhs(t_ + dir * h0, y_stage_, k_[1]);
    double d2 = 0.0;
    for (long i = 0; i < y_.size(); ++i) {
        const double sk = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_(i));
        const double q = (k_[1](i) - k_[0](i)) / sk;
        d2 += q * q;
    }
    d2 = std::sqrt(d2 / static_cast<double>(y_.size())) / h0;

    const double dm = std::max(d1, d2);
    const double h1 = (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min({100.0 * h0, h1, span, cfg_.max_step});
}

void Dopri5Stepper::build_dense(double h) {
    dense_.t0 = t_prev_;
    dense_.h = h;
    dense_.r[0] = y_prev_;
    dense_.r[1] = y_ - y_prev_;
    dense_.r[2] = h * k_[0] - dense_.r[1];
    dense_.r[3] = dense_.r[1] - h * k_[6] - dense_.r[2];
    dense_.r[4] = h * (d1 * k_[0] + d3 * k_[2] + d4 * k_[3] + d5 * k_[4] + d6 * k_[5] + d7 * k_[6]);
}

bool Dopri5Stepper::advance(double t_target) {
    const double span = std::abs(t_target - t_);
    const double tiny = 1e-14 * std::max({1.0, std::abs(t_), std::abs(t_target)});
    if (span <= tiny) return false;
    const double dir = (t_target > t_) ? 1.0 : -1.0;

    if (!fsal_valid_) {
        eval_rhs(t_, y_, k_[0]);
        fsal_valid_ = true;
    }
    if (h_abs_ == 0.0)
        h_abs_ = (cfg_.init_step > 0.0) ? std::min(cfg_.init_step, span) : initial_step(dir, span);

    while (true) {
        double h_abs = std::min({h_abs_, cfg_.max_step, span});
        // Avoid a vanishing leftover step next time.
        if (span - h_abs < 0.1 * h_abs) h_abs = span;
        const double h = dir * h_abs;
        if (h_abs < 1e-14 * std::max(1.0, std::abs(t_)))
            fail(ErrorCode::StepSizeUnderflow, "step size underflow in time integration");

        y_stage_ = y_ + h * (a21 * k_[0]);
        eval_rhs(t_ + c2 * h, y_stage_, k_[1]);
        y_stage_ = y_ + h * (a31 * k_[0] + a32 * k_[1]);
        eval_rhs(t_ + c3 * h, y_stage_, k_[2]);
        y_stage_ = y_ + h * (a41 * k_[0] + a42 * k_[1] + a43 * k_[2]);
        eval_rhs(t_ + c4 * h, y_stage_, k_[3]);
        y_stage_ = y_ + h * (a51 * k_[0] + a52 * k_[1] + a53 * k_[2] + a54 * k_[3]);
        eval_rhs(t_ + c5 * h, y_stage_, k_[4]);
        y_stage_ = y_ + h * (a61 * k_[0] + a62 * k_[1] + a63 * k_[2] + a64 * k_[3] + a65 * k_[4]);
        eval_rhs(t_ + h, y_stage_, k_[5]);
        y_next_ = y_ + h * (a71 * k_[0] + a73 * k_[2] + a74 * k_[3] + a75 * k_[4] + a76 * k_[5]);
        eval_rhs(t_ + h, y_next_, k_[6]);

        err_vec_ = h * (e1 * k_[0] + e3 * k_[2] + e4 * k_[3] + e5 * k_[4] + e6 * k_[5] + e7 * k_[6]);
        const double err = error_norm(y_, y_next_, err_vec_);

        if (err <= 1.0) {
            t_prev_ = t_;
            y_prev_.swap(y_);
            y_.swap(y_next_);
            t_ = (h_abs >= span) ? t_target : t_ + h;
            build_dense(h);
            k_[0].swap(k_[6]); // FSAL
            last_err_ = err;
            max_err_seen_ = std::max(max_err_seen_, err);
            const double fac = (err == 0.0)
                                   ? kMaxFactor
                                   : std::min(kMaxFactor, std::max(kMinFactor, kSafety * std::pow(err, -0.2)));
            h_abs_ = h_abs * fac;
            return true;
        }
        h_abs_ = h_abs * std::max(kMinFactor, kSafety * std::pow(err, -0.2));
    }
}

} // namespace hamlens
