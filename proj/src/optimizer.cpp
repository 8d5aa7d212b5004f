#include "ftlab/optimizer.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

namespace ftlab {

bool weight_decay_applies(std::string_view name) {
    return !name.ends_with(".bias") && name.find(".norm.") == std::string_view::npos;
}

AdamW::AdamW(const NamedTensors& params, const std::vector<ParamGroup>& groups, AdamWConfig cfg) : cfg_(cfg) {
    std::unordered_map<std::string, double> lr_by_name;
    for (const auto& g : groups) {
        for (const auto& n : g.param_names) {
            if (!lr_by_name.emplace(n, g.lr).second) {
                throw ContractError("parameter '" + n + "' appears in more than one group");
            }
        }
    }
    slots_.reserve(params.size());
    for (const auto& e : params) {
        auto it = lr_by_name.find(e.name);
        if (it == lr_by_name.end()) throw ContractError("parameter '" + e.name + "' missing from all groups");
        Slot s;
        s.m.assign(static_cast<size_t>(e.tensor.size()), 0.0);
        s.v.assign(static_cast<size_t>(e.tensor.size()), 0.0);
        s.lr = it->second;
        s.decay = weight_decay_applies(e.name);
        slots_.push_back(std::move(s));
        lr_by_name.erase(it);
    }
    if (!lr_by_name.empty()) {
        throw ContractError("group references unknown parameter '" + lr_by_name.begin()->first + "'");
    }
}

void AdamW::step(NamedTensors& params, const NamedTensors& grads, double lr_scale) {
    if (params.size() != slots_.size() || grads.size() != slots_.size()) {
        throw ContractError("optimizer state does not match parameter set");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t p = 0; p < slots_.size(); ++p) {
        Slot& s = slots_[p];
        Tensor& w = params.entry(p).tensor;
        const Tensor& g = grads.entry(p).tensor;
        if (g.size() != w.size()) throw ContractError("gradient shape mismatch for " + params.entry(p).name);
        const double lr = s.lr * lr_scale;
        const double wd = s.decay ? cfg_.weight_decay : 0.0;
        for (int64_t i = 0; i < w.size(); ++i) {
            const double gi = g[i];
            s.m[static_cast<size_t>(i)] = cfg_.beta1 * s.m[static_cast<size_t>(i)] + (1.0 - cfg_.beta1) * gi;
            s.v[static_cast<size_t>(i)] = cfg_.beta2 * s.v[static_cast<size_t>(i)] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = s.m[static_cast<size_t>(i)] / bc1;
            const double vhat = s.v[static_cast<size_t>(i)] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + wd * w[i]);
        }
    }
}

}  // namespace ftlab
