#pragma once

#include <span>

namespace pmn::eval {

struct TTestResult {
    double t = 0.0;
    double p = 0.5;
    double mean_difference = 0.0;
    std::size_t degrees_of_freedom = 0;
    /// Differences had zero variance; p is 0, 1 or 0.5 by the sign of the mean.
    bool degenerate = false;
};

/// One-tailed paired t-test of mean(a - b) > 0. The upper tail of Student's
/// t comes from the regularized incomplete beta function.
TTestResult paired_t_test_one_tailed(std::span<const double> a, std::span<const double> b);

/// P(T > t) for Student's t with `df` degrees of freedom.
double student_t_upper_tail(double t, double df);

}  // namespace pmn::eval
