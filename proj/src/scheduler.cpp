#include "ftlab/scheduler.hpp"

#include <cmath>
#include <string>

#include "ftlab/error.hpp"

namespace ftlab {

int64_t warmup_steps(int64_t total_steps, double warmup_frac) {
    if (warmup_frac < 0.0 || warmup_frac >= 1.0) throw ConfigError("warmup fraction must be in [0, 1)");
    // ceil with a small slack so that e.g. 0.1 * 100 lands on 10, not 11
    return static_cast<int64_t>(std::ceil(warmup_frac * static_cast<double>(total_steps) - 1e-9));
}

double lr_at_step(int64_t step, int64_t total_steps, double peak_lr, double warmup_frac) {
    if (total_steps < 1) throw ContractError("lr_at_step: total_steps must be positive");
    if (step < 0 || step > total_steps) {
        throw ContractError("lr_at_step: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(total_steps) + "]");
    }
    const int64_t w = warmup_steps(total_steps, warmup_frac);
    // ratio first, so the boundary values come out exact
    if (step <= w && w > 0) {
        return peak_lr * (static_cast<double>(step) / static_cast<double>(w));
    }
    if (total_steps == w) return step == total_steps ? 0.0 : peak_lr;
    return peak_lr * (static_cast<double>(total_steps - step) / static_cast<double>(total_steps - w));
}

}  // namespace ftlab
