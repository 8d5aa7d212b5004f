#include "ftlab/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ftlab/kernels.hpp"

namespace ftlab {

GradCheckResult grad_check(const GradCheckFn& f, std::span<const double> x, double eps) {
    const std::vector<double> x0(x.begin(), x.end());
    const std::vector<double> analytic = f.gradient(x0);
    const int64_t n = static_cast<int64_t>(x0.size());
    std::vector<double> errs(x0.size(), 0.0);
    std::vector<double> numeric(x0.size(), 0.0);

    const bool par = kernels::parallel_enabled() && n > 1;
#pragma omp parallel for if (par) schedule(dynamic)
    for (int64_t i = 0; i < n; ++i) {
        std::vector<double> xp = x0;
        xp[static_cast<size_t>(i)] = x0[static_cast<size_t>(i)] + eps;
        const double fp = f.value(xp);
        xp[static_cast<size_t>(i)] = x0[static_cast<size_t>(i)] - eps;
        const double fm = f.value(xp);
        const double fd = (fp - fm) / (2.0 * eps);
        numeric[static_cast<size_t>(i)] = fd;
        const double ad = analytic[static_cast<size_t>(i)];
        const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-8});
        errs[static_cast<size_t>(i)] = std::fabs(fd - ad) / denom;
    }

    GradCheckResult res;
    for (size_t i = 0; i < errs.size(); ++i) {
        if (errs[i] > res.max_rel_err) {
            res.max_rel_err = errs[i];
            res.worst_index = i;
            res.analytic_at_worst = analytic[i];
            res.numeric_at_worst = numeric[i];
        }
    }
    return res;
}

}  // namespace ftlab
