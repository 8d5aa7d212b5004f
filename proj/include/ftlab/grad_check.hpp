#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ftlab {

// Scalar-valued function of a flat input vector, plus its reverse-mode
// gradient at a point. Both views are supplied by the caller so the checker
// stays independent of how the graph is built.
struct GradCheckFn {
    std::function<double(std::span<const double>)> value;
    std::function<std::vector<double>(std::span<const double>)> gradient;
};

struct GradCheckResult {
    double max_rel_err = 0.0;
    size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// Compares the reverse-mode gradient against central finite differences at x.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8). The
// perturbation loop is an independent map over coordinates and runs in
// parallel.
GradCheckResult grad_check(const GradCheckFn& f, std::span<const double> x, double eps = 1e-5);

}  // namespace ftlab
