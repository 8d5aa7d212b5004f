#include "ftlab/strategies.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>

namespace ftlab {

const char* to_string(LlrdSetup s) {
    switch (s) {
        case LlrdSetup::uniform: return "uniform";
        case LlrdSetup::two_group: return "2group";
        case LlrdSetup::four_group: return "4group";
    }
    return "?";
}

const char* to_string(PoolingMode m) {
    switch (m) {
        case PoolingMode::final_pooler: return "final";
        case PoolingMode::avg_last4: return "avg4";
        case PoolingMode::concat_last4: return "concat4";
    }
    return "?";
}

std::optional<LlrdSetup> llrd_from_string(std::string_view s) {
    if (s == "uniform") return LlrdSetup::uniform;
    if (s == "2group") return LlrdSetup::two_group;
    if (s == "4group") return LlrdSetup::four_group;
    return std::nullopt;
}

std::optional<PoolingMode> pooling_from_string(std::string_view s) {
    if (s == "final") return PoolingMode::final_pooler;
    if (s == "avg4") return PoolingMode::avg_last4;
    if (s == "concat4") return PoolingMode::concat_last4;
    return std::nullopt;
}

namespace {

enum class NameKind { embed, layer, pooler, head };

struct ParsedName {
    NameKind kind;
    int layer = -1;
};

ParsedName parse_param_name(const std::string& name) {
    if (name.starts_with("embed.")) return {NameKind::embed, -1};
    if (name.starts_with("pooler.")) return {NameKind::pooler, -1};
    if (name.starts_with("head.")) return {NameKind::head, -1};
    if (name.starts_with("layer.")) {
        const size_t dot = name.find('.', 6);
        int idx = -1;
        if (dot != std::string::npos) {
            const char* first = name.data() + 6;
            auto [ptr, ec] = std::from_chars(first, name.data() + dot, idx);
            if (ec == std::errc{} && ptr == name.data() + dot && idx >= 0) return {NameKind::layer, idx};
        }
    }
    throw ContractError("unparseable parameter name: " + name);
}

}  // namespace

std::array<int, 3> four_group_layer_split(int num_layers) {
    // as even as possible, earlier groups no larger than later ones
    std::array<int, 3> sizes;
    for (int i = 0; i < 3; ++i) sizes[static_cast<size_t>(i)] = (num_layers + i) / 3;
    return sizes;
}

std::vector<ParamGroup> build_param_groups(const std::vector<std::string>& names, int num_layers, LlrdSetup setup,
                                           double base_lr) {
    if (num_layers < 1) throw ContractError("build_param_groups: num_layers must be positive");
    if (!(base_lr > 0.0)) throw ContractError("build_param_groups: base_lr must be positive");

    std::vector<ParamGroup> groups;
    switch (setup) {
        case LlrdSetup::uniform: {
            groups.push_back({"all", {}, 1.0, base_lr});
            for (const auto& n : names) {
                parse_param_name(n);
                groups[0].param_names.push_back(n);
            }
            break;
        }
        case LlrdSetup::two_group: {
            groups.push_back({"encoder", {}, 1.0, base_lr});
            groups.push_back({"head", {}, kHeadLrMult, base_lr * kHeadLrMult});
            for (const auto& n : names) {
                const ParsedName pn = parse_param_name(n);
                groups[pn.kind == NameKind::head ? 1 : 0].param_names.push_back(n);
            }
            break;
        }
        case LlrdSetup::four_group: {
            const auto sizes = four_group_layer_split(num_layers);
            const int b1 = sizes[0];
            const int b2 = sizes[0] + sizes[1];
            groups.push_back({"group1", {}, kFourGroupMults[0], base_lr * kFourGroupMults[0]});
            groups.push_back({"group2", {}, kFourGroupMults[1], base_lr * kFourGroupMults[1]});
            groups.push_back({"group3", {}, kFourGroupMults[2], base_lr * kFourGroupMults[2]});
            groups.push_back({"head", {}, kFourGroupMults[3], base_lr * kFourGroupMults[3]});
            for (const auto& n : names) {
                const ParsedName pn = parse_param_name(n);
                size_t g = 0;
                switch (pn.kind) {
                    case NameKind::embed: g = 0; break;
                    case NameKind::layer:
                        if (pn.layer >= num_layers) {
                            throw ContractError("layer index " + std::to_string(pn.layer) + " out of range in " + n);
                        }
                        g = pn.layer < b1 ? 0 : (pn.layer < b2 ? 1 : 2);
                        break;
                    case NameKind::pooler: g = 2; break;  // tops out with the upper encoder third
                    case NameKind::head: g = 3; break;
                }
                groups[g].param_names.push_back(n);
            }
            break;
        }
    }
    return groups;
}

void StrategyConfig::validate(int num_layers) const {
    if (mixout_p.has_value() && (*mixout_p < 0.0 || *mixout_p >= 1.0)) {
        throw ConfigError("mixout probability must be in [0, 1)");
    }
    if (mixout_to_zero && !mixout_p.has_value()) {
        throw ConfigError("weight-dropout mode needs a probability (set mixout_p)");
    }
    if (reinit_n < 0 || reinit_n > 3) throw ConfigError("reinit depth must be in {0, 1, 2, 3}");
    if (reinit_n > num_layers) {
        throw ConfigError("reinit depth " + std::to_string(reinit_n) + " exceeds layer count " +
                          std::to_string(num_layers));
    }
    if (pooling != PoolingMode::final_pooler) {
        if (num_layers < 4) {
            throw ConfigError(std::string(to_string(pooling)) + " pooling requires at least 4 encoder layers");
        }
        if (reinit_n > 0) {
            throw ConfigError("pooling mode " + std::string(to_string(pooling)) +
                              " cannot be combined with reinit > 0: intermediate-layer pooling is only meaningful "
                              "over layers that keep their pretrained weights");
        }
    }
    if (class_weights.has_value()) {
        for (double w : *class_weights) {
            if (!(w > 0.0)) throw ConfigError("class weights must be positive");
        }
    }
}

std::string StrategyConfig::describe() const {
    std::ostringstream os;
    os << "llrd=" << to_string(llrd);
    if (mixout_active()) os << (mixout_to_zero ? " wdrop=" : " mixout=") << *mixout_p;
    if (reinit_n > 0) os << " reinit=" << reinit_n;
    if (pooling != PoolingMode::final_pooler) os << " pool=" << to_string(pooling);
    if (class_weights.has_value()) os << " weighted";
    return os.str();
}

bool is_mixout_target(std::string_view name) {
    if (!name.ends_with(".weight")) return false;
    if (name == "head.fc1.weight" || name == "head.fc2.weight") return true;
    return name.starts_with("layer.") && (name.find(".ff.w1.") != std::string_view::npos ||
                                          name.find(".ff.w2.") != std::string_view::npos);
}

std::vector<std::string> mixout_target_names(const NamedTensors& params) {
    std::vector<std::string> out;
    for (const auto& e : params) {
        if (is_mixout_target(e.name)) out.push_back(e.name);
    }
    return out;
}

Tensor mixout_transform(const Tensor& w, const Tensor& w_pre, double p, Rng& rng, Tensor* mask_out) {
    if (!w.same_dims(w_pre)) {
        throw ContractError("mixout: weight " + w.shape_str() + " and snapshot " + w_pre.shape_str() + " differ");
    }
    if (p < 0.0 || p >= 1.0) throw ContractError("mixout: p must be in [0, 1)");
    if (mask_out) *mask_out = Tensor::full(w.dims(), 1.0);
    if (p == 0.0) return w;
    Tensor out(w.dims());
    const double inv_keep = 1.0 / (1.0 - p);
    for (int64_t i = 0; i < w.size(); ++i) {
        const bool replaced = rng.next_double() < p;
        if (mask_out) (*mask_out)[i] = replaced ? 0.0 : 1.0;
        const double m = replaced ? 0.0 : 1.0;
        out[i] = (m * w[i] + (1.0 - m) * w_pre[i] - p * w_pre[i]) * inv_keep;
    }
    return out;
}

Tape::NodeId mixout_node(Tape& tape, Tape::NodeId w, const Tensor& w_pre, double p, Rng& rng) {
    const Tensor& vw = tape.value(w);
    if (!vw.same_dims(w_pre)) {
        throw ContractError("mixout: weight " + vw.shape_str() + " and snapshot " + w_pre.shape_str() + " differ");
    }
    if (p < 0.0 || p >= 1.0) throw ContractError("mixout: p must be in [0, 1)");
    if (p == 0.0) return w;
    const double inv_keep = 1.0 / (1.0 - p);
    Tensor scale(vw.dims());
    Tensor shift(vw.dims());
    for (int64_t i = 0; i < vw.size(); ++i) {
        const bool replaced = rng.next_double() < p;
        const double m = replaced ? 0.0 : 1.0;
        scale[i] = m * inv_keep;
        shift[i] = ((1.0 - m) * w_pre[i] - p * w_pre[i]) * inv_keep;
    }
    return tape.mask_shift(w, std::move(scale), std::move(shift));
}

NamedTensors reinit_top_layers(const NamedTensors& params, int num_layers, int n, double sigma, Rng& rng) {
    if (n < 0 || n > num_layers) {
        throw ContractError("reinit_top_layers: depth " + std::to_string(n) + " out of range for " +
                            std::to_string(num_layers) + " layers");
    }
    NamedTensors out;
    const int first = num_layers - n;
    for (const auto& e : params) {
        bool hit = false;
        if (n > 0 && e.name.starts_with("layer.")) {
            const ParsedName pn = parse_param_name(e.name);
            hit = pn.layer >= first && pn.layer < num_layers;
        }
        if (!hit) {
            out.add(e.name, e.tensor);
            continue;
        }
        if (e.name.find(".norm.gain") != std::string::npos) {
            out.add(e.name, Tensor::full(e.tensor.dims(), 1.0));
        } else if (e.name.find(".norm.bias") != std::string::npos || e.name.ends_with(".bias")) {
            out.add(e.name, Tensor::zeros(e.tensor.dims()));
        } else {
            Tensor w(e.tensor.dims());
            for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.next_normal(0.0, sigma);
            out.add(e.name, std::move(w));
        }
    }
    return out;
}

Tape::NodeId pool_features(Tape& tape, const EncodeResult& enc, PoolingMode mode) {
    const int num_layers = static_cast<int>(enc.states.size()) - 1;
    if (mode == PoolingMode::final_pooler) return enc.pooled;
    if (num_layers < 4) {
        throw ConfigError(std::string(to_string(mode)) + " pooling requires at least 4 encoder layers");
    }
    std::vector<Tape::NodeId> bos;
    for (int i = num_layers - 3; i <= num_layers; ++i) {
        bos.push_back(tape.slice_rows(enc.states[static_cast<size_t>(i)], 0, 1));
    }
    if (mode == PoolingMode::concat_last4) return tape.concat_cols(bos);
    return tape.scale(tape.add(tape.add(bos[0], bos[1]), tape.add(bos[2], bos[3])), 0.25);
}

int pooled_dim(const EncoderConfig& cfg, PoolingMode mode) {
    return mode == PoolingMode::concat_last4 ? 4 * cfg.hidden : cfg.hidden;
}

std::vector<double> class_weights_from_counts(const std::vector<int64_t>& counts) {
    if (counts.empty()) throw DataError("class_weights_from_counts: no classes");
    int64_t total = 0;
    for (size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] <= 0) throw DataError("class " + std::to_string(c) + " has no examples");
        total += counts[c];
    }
    std::vector<double> w(counts.size());
    const double num_classes = static_cast<double>(counts.size());
    for (size_t c = 0; c < counts.size(); ++c) {
        w[c] = static_cast<double>(total) / (num_classes * static_cast<double>(counts[c]));
    }
    return w;
}

}  // namespace ftlab
