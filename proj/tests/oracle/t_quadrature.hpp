#pragma once

// Upper tail of Student's t by composite Simpson integration of the density.

#include <cmath>
#include <numbers>

namespace oracle {

inline double t_density(double x, double df) {
    const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) /
                     std::sqrt(df * std::numbers::pi);
    return c * std::pow(1 + x * x / df, -(df + 1) / 2);
}

// P(T > t) = 1/2 - integral_0^t density, for t >= 0.
inline double t_upper_tail_simpson(double t, double df, int intervals = 20000) {
    const double h = t / intervals;
    double s = t_density(0, df) + t_density(t, df);
    for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * t_density(i * h, df);
    return 0.5 - s * h / 3.0;
}

}  // namespace oracle
