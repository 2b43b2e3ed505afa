#include "pmn/eval/ttest.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <string>

#include "pmn/common/error.hpp"

namespace pmn::eval {

double student_t_upper_tail(double t, double df) {
    if (!(df > 0)) throw ContractError("degrees of freedom must be positive");
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    const double x = df / (df + t * t);
    const double tail = 0.5 * boost::math::ibeta(df / 2.0, 0.5, x);
    return t >= 0 ? tail : 1.0 - tail;
}

TTestResult paired_t_test_one_tailed(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("paired t-test on " + std::to_string(a.size()) + " and " +
                             std::to_string(b.size()) + " values");
    }
    const std::size_t n = a.size();
    if (n < 2) throw ContractError("paired t-test needs at least two pairs");
    std::vector<double> d(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a[i] - b[i];
        if (!std::isfinite(d[i])) throw ContractError("paired t-test on non-finite values");
        sum += d[i];
    }
    TTestResult r;
    r.degrees_of_freedom = n - 1;
    r.mean_difference = sum / double(n);
    bool constant = true;
    for (double v : d) constant = constant && v == d[0];
    double ss = 0.0;
    for (double v : d) ss += (v - r.mean_difference) * (v - r.mean_difference);
    const double sd = std::sqrt(ss / double(n - 1));
    if (constant || sd == 0.0) {
        r.degenerate = true;
        const double m = constant ? d[0] : r.mean_difference;
        r.mean_difference = m;
        r.t = m > 0 ? INFINITY : (m < 0 ? -INFINITY : 0.0);
        r.p = m > 0 ? 0.0 : (m < 0 ? 1.0 : 0.5);
        return r;
    }
    r.t = r.mean_difference / (sd / std::sqrt(double(n)));
    r.p = student_t_upper_tail(r.t, double(n - 1));
    return r;
}

}  // namespace pmn::eval
