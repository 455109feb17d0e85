// Core value types shared across the library.
#pragma once

#include <Eigen/Dense>
#include <utility>

namespace hamlens {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Point of phase space T*R^n: base position x and covector xi.
struct PhasePoint {
    Vec x;
    Vec xi;

    PhasePoint() = default;
    PhasePoint(Vec x_, Vec xi_) : x(std::move(x_)), xi(std::move(xi_)) {}

    int dim() const { return static_cast<int>(x.size()); }
};

inline Vec pack(const PhasePoint& p) {
    Vec y(2 * p.dim());
    y.head(p.dim()) = p.x;
    y.tail(p.dim()) = p.xi;
    return y;
}

inline PhasePoint unpack(const Vec& y) {
    const int n = static_cast<int>(y.size()) / 2;
    return PhasePoint(y.head(n), y.tail(n));
}

inline double phase_dist(const PhasePoint& a, const PhasePoint& b) {
    return std::max((a.x - b.x).cwiseAbs().maxCoeff(), (a.xi - b.xi).cwiseAbs().maxCoeff());
}

// Standard symplectic structure on R^{2n} with the (x, xi) block ordering:
// J = [0 -I; I 0], sigma(v, w) = <Jv, w>.
inline Mat symplectic_J(int n) {
    Mat J = Mat::Zero(2 * n, 2 * n);
    J.topRightCorner(n, n) = -Mat::Identity(n, n);
    J.bottomLeftCorner(n, n) = Mat::Identity(n, n);
    return J;
}

inline double symplectic_form(const Vec& v, const Vec& w) {
    const int n = static_cast<int>(v.size()) / 2;
    // sigma(v,w) = <dxi ^ dx, (v,w)> = v_xi . w_x - v_x . w_xi
    return v.tail(n).dot(w.head(n)) - v.head(n).dot(w.tail(n));
}

// || M^T J M - J ||_inf, zero iff M is symplectic.
inline double symplectic_residual(const Mat& M) {
    const int n = static_cast<int>(M.rows()) / 2;
    const Mat J = symplectic_J(n);
    return (M.transpose() * J * M - J).cwiseAbs().maxCoeff();
}

} // namespace hamlens
