#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftlab/named_tensors.hpp"
#include "ftlab/rng.hpp"
#include "ftlab/tape.hpp"

namespace ftlab {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kDefaultInitSigma = 0.02;

struct EncoderConfig {
    int num_layers = 4;
    int hidden = 32;
    int heads = 4;
    int ff_dim = 128;
    int vocab_size = 0;
    int max_seq_len = 32;
    double dropout_p = 0.1;

    void validate() const;
};

// Classification head: two fixed-width tanh hidden layers into C logits.
struct HeadConfig {
    static constexpr int kHidden = 100;
    int input_dim = 0;
    int num_classes = 2;

    void validate() const;
};

// Parameter naming contract. Every parameter name starts with one of
// embed. / layer.<i>. / pooler. / head. -- the learning-rate grouping and
// re-initialization logic parse these prefixes.
NamedTensors init_encoder_params(const EncoderConfig& cfg, Rng& rng, double sigma = kDefaultInitSigma);
void add_head_params(NamedTensors& params, const HeadConfig& cfg, Rng& rng, double sigma = kDefaultInitSigma);
std::vector<std::string> encoder_param_names(const EncoderConfig& cfg);
int64_t encoder_param_count(const EncoderConfig& cfg);  // closed form
int64_t head_param_count(const HeadConfig& cfg);        // closed form

enum class RunMode { train, eval };

// Tape nodes for a parameter set, aligned with NamedTensors order. Entries
// can be rebound (mixout wraps weights in a mask node); `leaf_of` always
// keeps the original leaf so optimizer gradients read from the right node.
class ParamBinding {
public:
    ParamBinding(Tape& tape, const NamedTensors& params);
    Tape::NodeId node(std::string_view name) const;
    Tape::NodeId leaf(std::string_view name) const;
    void rebind(std::string_view name, Tape::NodeId id);
    const NamedTensors& params() const { return *params_; }

private:
    const NamedTensors* params_;
    std::vector<Tape::NodeId> leaves_;
    std::vector<Tape::NodeId> nodes_;
};

struct EncodeResult {
    std::vector<Tape::NodeId> states;  // num_layers + 1 entries of [seq x hidden]
    Tape::NodeId pooled;               // [1 x hidden]
};

// Pre-norm transformer forward for one sequence. In train mode, activation
// dropout masks are drawn from mask_rng; eval mode is deterministic and
// draws nothing.
EncodeResult encode(Tape& tape, const ParamBinding& binding, const EncoderConfig& cfg, std::span<const int> ids,
                    std::span<const int> mask, RunMode mode, Rng* mask_rng = nullptr);

// features [rows x input_dim] -> logits [rows x num_classes]
Tape::NodeId classify(Tape& tape, const ParamBinding& binding, const HeadConfig& cfg, Tape::NodeId features);

// Value-level eval-mode wrapper.
struct EncoderOutput {
    std::vector<Tensor> states;
    Tensor pooled;
};
EncoderOutput encode_eval(const NamedTensors& params, const EncoderConfig& cfg, std::span<const int> ids,
                          std::span<const int> mask);

}  // namespace ftlab
