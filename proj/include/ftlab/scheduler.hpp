#pragma once

#include <cstdint>

namespace ftlab {

// Linear warmup to peak_lr over ceil(warmup_frac * total_steps) steps, then
// linear decay to zero at total_steps.
double lr_at_step(int64_t step, int64_t total_steps, double peak_lr, double warmup_frac);

int64_t warmup_steps(int64_t total_steps, double warmup_frac);

}  // namespace ftlab
