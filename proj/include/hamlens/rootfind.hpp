// Scalar root bracketing and polishing.
#pragma once

#include <cmath>
#include <functional>

#include "hamlens/errors.hpp"

namespace hamlens {
namespace rootfind {

// Root of f in [a, b] given a sign change; hybrid secant/bisection.
inline double bracketed(const std::function<double(double)>& f, double a, double b, double fa,
                        double fb, double x_tol = 1e-14, double f_tol = 1e-13,
                        int max_iter = 200) {
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) fail(ErrorCode::NoRoot, "bracket does not straddle a root");
    for (int it = 0; it < max_iter; ++it) {
        double c = b - fb * (b - a) / (fb - fa); // secant
        const double lo = std::min(a, b), hi = std::max(a, b);
        const double margin = 0.1 * (hi - lo);
        if (!(c > lo + margin && c < hi - margin)) c = 0.5 * (a + b);
        const double fc = f(c);
        if (std::abs(fc) <= f_tol || std::abs(b - a) <= x_tol * std::max(1.0, std::abs(c)))
            return c;
        if (fa * fc <= 0.0) {
            b = c;
            fb = fc;
        } else {
            a = c;
            fa = fc;
        }
    }
    return 0.5 * (a + b);
}

} // namespace rootfind
} // namespace hamlens
