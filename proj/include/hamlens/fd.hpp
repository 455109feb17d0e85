// Central finite-difference helpers used for derivative fallbacks.
#pragma once

#include <cmath>
#include <functional>

#include "hamlens/types.hpp"

namespace hamlens {
namespace fd {

// Step scaled to the magnitude of the argument block.
inline double step(double norm, double h0 = 1e-5) {
    return h0 * std::max(1.0, norm);
}

inline double inf_norm(const Vec& v) {
    return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

inline Vec gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    Vec g(x.size());
    Vec xp = x, xm = x;
    for (int i = 0; i < x.size(); ++i) {
        xp(i) = x(i) + h;
        xm(i) = x(i) - h;
        g(i) = (f(xp) - f(xm)) / (2.0 * h);
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return g;
}

// J(i,j) = dF_i/dx_j.
inline Mat jacobian(const std::function<Vec(const Vec&)>& F, const Vec& x, double h, int out_dim) {
    Mat J(out_dim, x.size());
    Vec xp = x, xm = x;
    for (int j = 0; j < x.size(); ++j) {
        xp(j) = x(j) + h;
        xm(j) = x(j) - h;
        J.col(j) = (F(xp) - F(xm)) / (2.0 * h);
        xp(j) = x(j);
        xm(j) = x(j);
    }
    return J;
}

// Symmetric Hessian by direct second differences of a scalar function.
inline Mat hessian(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    const int n = static_cast<int>(x.size());
    Mat H(n, n);
    const double f0 = f(x);
    Vec xt = x;
    for (int i = 0; i < n; ++i) {
        xt(i) = x(i) + h;
        const double fp = f(xt);
        xt(i) = x(i) - h;
        const double fm = f(xt);
        xt(i) = x(i);
        H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
        for (int j = i + 1; j < n; ++j) {
            xt(i) = x(i) + h;
            xt(j) = x(j) + h;
            const double fpp = f(xt);
            xt(j) = x(j) - h;
            const double fpm = f(xt);
            xt(i) = x(i) - h;
            const double fmm = f(xt);
            xt(j) = x(j) + h;
            const double fmp = f(xt);
            xt(i) = x(i);
            xt(j) = x(j);
            H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    return H;
}

// M(i,j) = d^2 f / da_i db_j for f(a, b).
inline Mat mixed_hessian(const std::function<double(const Vec&, const Vec&)>& f,
                         const Vec& a, const Vec& b, double ha, double hb) {
    const int na = static_cast<int>(a.size());
    const int nb = static_cast<int>(b.size());
    Mat M(na, nb);
    Vec at = a, bt = b;
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
            at(i) = a(i) + ha;
            bt(j) = b(j) + hb;
            const double fpp = f(at, bt);
            bt(j) = b(j) - hb;
            const double fpm = f(at, bt);
            at(i) = a(i) - ha;
            const double fmm = f(at, bt);
            bt(j) = b(j) + hb;
            const double fmp = f(at, bt);
            at(i) = a(i);
            bt(j) = b(j);
            M(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * ha * hb);
        }
    }
    return M;
}

// Five-point stencil first derivative of g at 0 (error O(h^4)).
inline double derivative4(const std::function<double(double)>& g, double h) {
    return (-g(2.0 * h) + 8.0 * g(h) - 8.0 * g(-h) + g(-2.0 * h)) / (12.0 * h);
}

// Plain central first derivative of g at 0.
inline double derivative2(const std::function<double(double)>& g, double h) {
    return (g(h) - g(-h)) / (2.0 * h);
}

} // namespace fd
} // namespace hamlens
