#pragma once

#include <cstdint>
#include <vector>

#include "ftlab/named_tensors.hpp"
#include "ftlab/strategies.hpp"

namespace ftlab {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Adam with decoupled weight decay and one absolute learning rate per
// parameter group. Decay skips biases and norm parameters, like mixout does.
class AdamW {
public:
    AdamW(const NamedTensors& params, const std::vector<ParamGroup>& groups, AdamWConfig cfg = {});

    // One update. lr_scale is the scheduler's multiplier and scales every
    // group identically, so group learning-rate ratios are preserved at
    // every step.
    void step(NamedTensors& params, const NamedTensors& grads, double lr_scale);

    int64_t step_count() const { return t_; }

private:
    struct Slot {
        std::vector<double> m, v;
        double lr = 0.0;
        bool decay = true;
    };
    std::vector<Slot> slots_;  // aligned with params order
    AdamWConfig cfg_;
    int64_t t_ = 0;
};

bool weight_decay_applies(std::string_view name);

}  // namespace ftlab
