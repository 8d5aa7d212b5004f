#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ftlab/encoder.hpp"
#include "ftlab/named_tensors.hpp"
#include "ftlab/rng.hpp"
#include "ftlab/tape.hpp"

namespace ftlab {

enum class LlrdSetup { uniform, two_group, four_group };
enum class PoolingMode { final_pooler, avg_last4, concat_last4 };

const char* to_string(LlrdSetup s);
const char* to_string(PoolingMode m);
std::optional<LlrdSetup> llrd_from_string(std::string_view s);
std::optional<PoolingMode> pooling_from_string(std::string_view s);

// Four-group learning-rate multipliers: lower / middle / upper encoder
// thirds and the classification head.
inline constexpr double kFourGroupMults[4] = {1.0 / 2.6, 1.0, 2.6, 10.0};
// Head multiplier reused for the two-group setup.
inline constexpr double kHeadLrMult = 10.0;

struct ParamGroup {
    std::string name;
    std::vector<std::string> param_names;
    double lr_multiplier = 1.0;
    double lr = 0.0;  // absolute: base_lr * lr_multiplier
};

// Partitions `names` into groups with absolute learning rates.
//   uniform:    one group at base_lr.
//   two_group:  encoder (embed./layer./pooler.) at base_lr, head. at 10x.
//   four_group: embeddings + lower third of layers at 1/2.6, middle third at
//               1x, upper third (plus pooler) at 2.6x, head at 10x. When the
//               layer count is not divisible by 3 the thirds are as even as
//               possible with earlier groups never larger than later ones.
std::vector<ParamGroup> build_param_groups(const std::vector<std::string>& names, int num_layers, LlrdSetup setup,
                                           double base_lr);

// Layer boundaries used by the four-group split: returns sizes of the three
// thirds for `num_layers`.
std::array<int, 3> four_group_layer_split(int num_layers);

struct StrategyConfig {
    LlrdSetup llrd = LlrdSetup::uniform;
    std::optional<double> mixout_p;  // regularize toward the frozen snapshot
    bool mixout_to_zero = false;     // weight-dropout comparison: target 0 instead of the snapshot
    int reinit_n = 0;
    PoolingMode pooling = PoolingMode::final_pooler;
    std::optional<std::vector<double>> class_weights;
    LossReduction reduction = LossReduction::weighted_mean;

    bool mixout_active() const { return mixout_p.has_value() && *mixout_p > 0.0; }
    void validate(int num_layers) const;
    std::string describe() const;
};

// Parameters mixout (and its weight-dropout twin) applies to: feed-forward
// sublayer weight matrices and the head's hidden layers. Never biases,
// norms, embeddings or attention projections.
bool is_mixout_target(std::string_view name);
std::vector<std::string> mixout_target_names(const NamedTensors& params);

// One stochastic mixout draw: per-element Bernoulli mask replaces elements
// with the snapshot value at probability p, rescaled so E[W_eff] = W:
//   W_eff = (M (*) W + (1-M) (*) W_pre - p * W_pre) / (1 - p)
// p = 0 returns w unchanged and draws nothing. mask_out, when given,
// receives the keep mask (1 kept, 0 replaced).
Tensor mixout_transform(const Tensor& w, const Tensor& w_pre, double p, Rng& rng, Tensor* mask_out = nullptr);

// Tape node for the same transform; gradient flows only through kept
// elements, scaled by 1/(1-p).
Tape::NodeId mixout_node(Tape& tape, Tape::NodeId w, const Tensor& w_pre, double p, Rng& rng);

// Re-initializes the top n encoder blocks: weights to N(0, sigma^2), biases
// to zero, norm gains to one, norm biases to zero. Everything else is
// bit-identical to the input.
NamedTensors reinit_top_layers(const NamedTensors& params, int num_layers, int n, double sigma, Rng& rng);

// Feature vector for the classification head:
//   final_pooler: the tanh-affine pooler output [1 x H]
//   avg_last4:    mean of the BOS vectors of the last four layer outputs
//   concat_last4: their concatenation, earliest layer first [1 x 4H]
Tape::NodeId pool_features(Tape& tape, const EncodeResult& enc, PoolingMode mode);
int pooled_dim(const EncoderConfig& cfg, PoolingMode mode);

// Inverse-frequency class weights, mean-one normalized:
//   w_c = total / (C * count_c)
std::vector<double> class_weights_from_counts(const std::vector<int64_t>& counts);

}  // namespace ftlab
