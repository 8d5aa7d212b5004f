#include "ftlab/encoder.hpp"

#include <cmath>

#include "ftlab/vocab.hpp"

namespace ftlab {

void EncoderConfig::validate() const {
    if (num_layers < 1) throw ConfigError("encoder: num_layers must be positive");
    if (hidden < 1) throw ConfigError("encoder: hidden must be positive");
    if (heads < 1 || hidden % heads != 0) {
        throw ConfigError("encoder: heads must divide hidden (" + std::to_string(hidden) + " % " +
                          std::to_string(heads) + " != 0)");
    }
    if (ff_dim < 1) throw ConfigError("encoder: ff_dim must be positive");
    if (vocab_size <= Vocabulary::kNumSpecials) throw ConfigError("encoder: vocab_size too small");
    if (max_seq_len < 3) throw ConfigError("encoder: max_seq_len must be at least 3");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("encoder: dropout_p must be in [0, 1)");
}

void HeadConfig::validate() const {
    if (input_dim < 1) throw ConfigError("head: input_dim must be positive");
    if (num_classes < 2) throw ConfigError("head: at least two classes required");
}

namespace {

Tensor normal_tensor(std::vector<int> dims, Rng& rng, double sigma) {
    Tensor t(std::move(dims));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.next_normal(0.0, sigma);
    return t;
}

void add_linear(NamedTensors& p, const std::string& prefix, int in, int out, Rng& rng, double sigma) {
    p.add(prefix + ".weight", normal_tensor({in, out}, rng, sigma));
    p.add(prefix + ".bias", Tensor::zeros({out}));
}

}  // namespace

NamedTensors init_encoder_params(const EncoderConfig& cfg, Rng& rng, double sigma) {
    cfg.validate();
    NamedTensors p;
    const int h = cfg.hidden;
    p.add("embed.tok.weight", normal_tensor({cfg.vocab_size, h}, rng, sigma));
    p.add("embed.pos.weight", normal_tensor({cfg.max_seq_len, h}, rng, sigma));
    p.add("embed.norm.gain", Tensor::full({h}, 1.0));
    p.add("embed.norm.bias", Tensor::zeros({h}));
    for (int i = 0; i < cfg.num_layers; ++i) {
        const std::string lp = "layer." + std::to_string(i) + ".";
        p.add(lp + "attn.norm.gain", Tensor::full({h}, 1.0));
        p.add(lp + "attn.norm.bias", Tensor::zeros({h}));
        add_linear(p, lp + "attn.wq", h, h, rng, sigma);
        // keys carry no bias: softmax removes any per-query constant shift,
        // so a key bias would be a dead parameter
        p.add(lp + "attn.wk.weight", normal_tensor({h, h}, rng, sigma));
        add_linear(p, lp + "attn.wv", h, h, rng, sigma);
        add_linear(p, lp + "attn.wo", h, h, rng, sigma);
        p.add(lp + "ff.norm.gain", Tensor::full({h}, 1.0));
        p.add(lp + "ff.norm.bias", Tensor::zeros({h}));
        add_linear(p, lp + "ff.w1", h, cfg.ff_dim, rng, sigma);
        add_linear(p, lp + "ff.w2", cfg.ff_dim, h, rng, sigma);
    }
    add_linear(p, "pooler", h, h, rng, sigma);
    return p;
}

void add_head_params(NamedTensors& params, const HeadConfig& cfg, Rng& rng, double sigma) {
    cfg.validate();
    add_linear(params, "head.fc1", cfg.input_dim, HeadConfig::kHidden, rng, sigma);
    add_linear(params, "head.fc2", HeadConfig::kHidden, HeadConfig::kHidden, rng, sigma);
    add_linear(params, "head.out", HeadConfig::kHidden, cfg.num_classes, rng, sigma);
}

std::vector<std::string> encoder_param_names(const EncoderConfig& cfg) {
    std::vector<std::string> names = {"embed.tok.weight", "embed.pos.weight", "embed.norm.gain", "embed.norm.bias"};
    for (int i = 0; i < cfg.num_layers; ++i) {
        const std::string lp = "layer." + std::to_string(i) + ".";
        for (const char* s : {"attn.norm.gain", "attn.norm.bias", "attn.wq.weight", "attn.wq.bias", "attn.wk.weight",
                              "attn.wv.weight", "attn.wv.bias", "attn.wo.weight", "attn.wo.bias",
                              "ff.norm.gain", "ff.norm.bias", "ff.w1.weight", "ff.w1.bias", "ff.w2.weight",
                              "ff.w2.bias"}) {
            names.push_back(lp + s);
        }
    }
    names.push_back("pooler.weight");
    names.push_back("pooler.bias");
    return names;
}

int64_t encoder_param_count(const EncoderConfig& cfg) {
    const int64_t h = cfg.hidden, f = cfg.ff_dim;
    const int64_t embed = static_cast<int64_t>(cfg.vocab_size) * h + static_cast<int64_t>(cfg.max_seq_len) * h + 2 * h;
    const int64_t per_layer = 4 * h * h + 3 * h    // attention projections (keys unbiased)
                              + 2 * h              // attention norm
                              + (h * f + f)        // ff in
                              + (f * h + h)        // ff out
                              + 2 * h;             // ff norm
    const int64_t pooler = h * h + h;
    return embed + cfg.num_layers * per_layer + pooler;
}

int64_t head_param_count(const HeadConfig& cfg) {
    const int64_t k = HeadConfig::kHidden;
    return static_cast<int64_t>(cfg.input_dim) * k + k + k * k + k + k * cfg.num_classes + cfg.num_classes;
}

ParamBinding::ParamBinding(Tape& tape, const NamedTensors& params) : params_(&params) {
    leaves_.reserve(params.size());
    for (const auto& e : params) leaves_.push_back(tape.leaf(e.tensor));
    nodes_ = leaves_;
}

Tape::NodeId ParamBinding::node(std::string_view name) const { return nodes_[params_->index_of(name)]; }
Tape::NodeId ParamBinding::leaf(std::string_view name) const { return leaves_[params_->index_of(name)]; }
void ParamBinding::rebind(std::string_view name, Tape::NodeId id) { nodes_[params_->index_of(name)] = id; }

namespace {

// Inverted-dropout mask node over x: keep with probability 1-p, scale kept
// elements by 1/(1-p).
Tape::NodeId dropout_node(Tape& tape, Tape::NodeId x, double p, Rng& rng) {
    const Tensor& v = tape.value(x);
    Tensor scale(v.dims());
    const double keep_scale = 1.0 / (1.0 - p);
    for (int64_t i = 0; i < scale.size(); ++i) scale[i] = rng.next_double() < p ? 0.0 : keep_scale;
    return tape.mask_shift(x, std::move(scale), Tensor::zeros(v.dims()));
}

}  // namespace

EncodeResult encode(Tape& tape, const ParamBinding& binding, const EncoderConfig& cfg, std::span<const int> ids,
                    std::span<const int> mask, RunMode mode, Rng* mask_rng) {
    const int seq = static_cast<int>(ids.size());
    if (seq == 0 || seq != static_cast<int>(mask.size())) {
        throw ShapeError("encode: ids/mask length mismatch or empty sequence");
    }
    if (seq > cfg.max_seq_len) {
        throw ShapeError("encode: sequence length " + std::to_string(seq) + " exceeds max_seq_len " +
                         std::to_string(cfg.max_seq_len));
    }
    const bool train = mode == RunMode::train;
    const bool use_dropout = train && cfg.dropout_p > 0.0;
    if (use_dropout && mask_rng == nullptr) throw ContractError("encode: train mode with dropout needs an rng");

    const int h = cfg.hidden;
    const int head_dim = h / cfg.heads;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    // additive key-mask bias: 0 on attended columns, a large negative on pads
    Tensor mask_bias({seq, seq});
    for (int i = 0; i < seq; ++i) {
        for (int j = 0; j < seq; ++j) mask_bias.at(i, j) = mask[static_cast<size_t>(j)] != 0 ? 0.0 : -1e30;
    }
    const Tape::NodeId mask_bias_node = tape.constant(std::move(mask_bias));

    EncodeResult res;
    Tape::NodeId x = tape.add(tape.gather_rows(binding.node("embed.tok.weight"), std::vector<int>(ids.begin(), ids.end())),
                              tape.slice_rows(binding.node("embed.pos.weight"), 0, seq));
    x = tape.layer_norm(x, binding.node("embed.norm.gain"), binding.node("embed.norm.bias"), kLayerNormEps);
    if (use_dropout) x = dropout_node(tape, x, cfg.dropout_p, *mask_rng);
    res.states.push_back(x);

    for (int layer = 0; layer < cfg.num_layers; ++layer) {
        const std::string lp = "layer." + std::to_string(layer) + ".";
        // self-attention sublayer
        Tape::NodeId hnorm =
            tape.layer_norm(x, binding.node(lp + "attn.norm.gain"), binding.node(lp + "attn.norm.bias"), kLayerNormEps);
        Tape::NodeId q = tape.affine(hnorm, binding.node(lp + "attn.wq.weight"), binding.node(lp + "attn.wq.bias"));
        Tape::NodeId k = tape.matmul(hnorm, binding.node(lp + "attn.wk.weight"));
        Tape::NodeId v = tape.affine(hnorm, binding.node(lp + "attn.wv.weight"), binding.node(lp + "attn.wv.bias"));
        std::vector<Tape::NodeId> ctx_heads;
        ctx_heads.reserve(static_cast<size_t>(cfg.heads));
        for (int a = 0; a < cfg.heads; ++a) {
            Tape::NodeId qa = tape.slice_cols(q, a * head_dim, head_dim);
            Tape::NodeId ka = tape.slice_cols(k, a * head_dim, head_dim);
            Tape::NodeId va = tape.slice_cols(v, a * head_dim, head_dim);
            Tape::NodeId scores = tape.add(tape.scale(tape.matmul_nt(qa, ka), attn_scale), mask_bias_node);
            Tape::NodeId probs = tape.softmax(scores, 1);
            ctx_heads.push_back(tape.matmul(probs, va));
        }
        Tape::NodeId ctx = cfg.heads == 1 ? ctx_heads[0] : tape.concat_cols(ctx_heads);
        Tape::NodeId attn_out = tape.affine(ctx, binding.node(lp + "attn.wo.weight"), binding.node(lp + "attn.wo.bias"));
        if (use_dropout) attn_out = dropout_node(tape, attn_out, cfg.dropout_p, *mask_rng);
        x = tape.add(x, attn_out);

        // feed-forward sublayer
        Tape::NodeId fnorm =
            tape.layer_norm(x, binding.node(lp + "ff.norm.gain"), binding.node(lp + "ff.norm.bias"), kLayerNormEps);
        Tape::NodeId ff = tape.affine(fnorm, binding.node(lp + "ff.w1.weight"), binding.node(lp + "ff.w1.bias"));
        ff = tape.gelu(ff);
        ff = tape.affine(ff, binding.node(lp + "ff.w2.weight"), binding.node(lp + "ff.w2.bias"));
        if (use_dropout) ff = dropout_node(tape, ff, cfg.dropout_p, *mask_rng);
        x = tape.add(x, ff);
        res.states.push_back(x);
    }

    Tape::NodeId bos = tape.slice_rows(res.states.back(), 0, 1);
    res.pooled = tape.tanh(tape.affine(bos, binding.node("pooler.weight"), binding.node("pooler.bias")));
    return res;
}

Tape::NodeId classify(Tape& tape, const ParamBinding& binding, const HeadConfig& cfg, Tape::NodeId features) {
    cfg.validate();
    const Tensor& f = tape.value(features);
    if (f.rank() != 2 || f.dim(1) != cfg.input_dim) {
        throw ShapeError("classify: features " + f.shape_str() + " do not match head input dim " +
                         std::to_string(cfg.input_dim));
    }
    Tape::NodeId z = tape.tanh(tape.affine(features, binding.node("head.fc1.weight"), binding.node("head.fc1.bias")));
    z = tape.tanh(tape.affine(z, binding.node("head.fc2.weight"), binding.node("head.fc2.bias")));
    return tape.affine(z, binding.node("head.out.weight"), binding.node("head.out.bias"));
}

EncoderOutput encode_eval(const NamedTensors& params, const EncoderConfig& cfg, std::span<const int> ids,
                          std::span<const int> mask) {
    Tape tape;
    ParamBinding binding(tape, params);
    EncodeResult r = encode(tape, binding, cfg, ids, mask, RunMode::eval);
    EncoderOutput out;
    out.states.reserve(r.states.size());
    for (Tape::NodeId id : r.states) out.states.push_back(tape.value(id));
    out.pooled = tape.value(r.pooled);
    return out;
}

}  // namespace ftlab
