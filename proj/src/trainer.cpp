#include "ftlab/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "ftlab/kernels.hpp"
#include "ftlab/optimizer.hpp"
#include "ftlab/scheduler.hpp"

namespace ftlab {

namespace {

constexpr int kEvalChunk = 32;

std::vector<int> argmax_rows(const Tensor& logits) {
    std::vector<int> out(static_cast<size_t>(logits.dim(0)));
    for (int i = 0; i < logits.dim(0); ++i) {
        int best = 0;
        for (int j = 1; j < logits.dim(1); ++j) {
            if (logits.at(i, j) > logits.at(i, best)) best = j;
        }
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

Vocabulary vocab_from_meta(const CheckpointMeta& meta) {
    Vocabulary v = Vocabulary::from_tokens(meta.vocab_tokens);
    if (v.size() != meta.encoder.vocab_size) {
        throw CheckpointError("checkpoint vocabulary has " + std::to_string(v.size()) +
                              " entries but the encoder expects " + std::to_string(meta.encoder.vocab_size));
    }
    if (v.hash() != meta.vocab_hash) throw CheckpointError("checkpoint vocabulary hash mismatch");
    return v;
}

// Copies the expected encoder tensors out of a checkpoint, shape-checked.
NamedTensors encoder_params_from(const Checkpoint& ckpt, const EncoderConfig& cfg) {
    NamedTensors out;
    Rng probe(0);
    const NamedTensors reference = init_encoder_params(cfg, probe, 0.0);
    for (const auto& e : reference) {
        if (!ckpt.params.contains(e.name)) throw CheckpointError("missing parameter: " + e.name);
        const Tensor& t = ckpt.params.at(e.name);
        if (t.dims() != e.tensor.dims()) {
            throw CheckpointError("parameter " + e.name + " has shape " + t.shape_str() + ", expected " +
                                  e.tensor.shape_str());
        }
        out.add(e.name, t);
    }
    return out;
}

}  // namespace

int tokenize_length(const std::vector<LabeledExample>& examples, const EncoderConfig& cfg) {
    size_t longest = 0;
    for (const auto& ex : examples) longest = std::max(longest, split_lowercase_tokens(ex.text).size());
    return std::min<int>(cfg.max_seq_len, static_cast<int>(longest) + 2);
}

SplitResult split_dataset(const std::vector<LabeledExample>& examples, uint64_t seed) {
    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < examples.size(); ++i) by_class[examples[i].label].push_back(i);

    const Rng base(seed);
    SplitResult out;
    for (auto& [label, indices] : by_class) {
        if (indices.size() < 5) {
            throw DataError("class " + std::to_string(label) + " has only " + std::to_string(indices.size()) +
                            " examples; at least 5 are required to split");
        }
        Rng class_rng = base.derive("split.class." + std::to_string(label));
        class_rng.shuffle(indices);
        const size_t n = indices.size();
        // val/test at the nearest integer to 20%, the remainder is train;
        // keeps every split within one example of its quota
        const size_t n_val = static_cast<size_t>(std::llround(0.2 * static_cast<double>(n)));
        const size_t n_test = n_val;
        const size_t n_train = n - n_val - n_test;
        for (size_t i = 0; i < n; ++i) {
            const LabeledExample& ex = examples[indices[i]];
            if (i < n_train) {
                out.train.push_back(ex);
            } else if (i < n_train + n_val) {
                out.val.push_back(ex);
            } else {
                out.test.push_back(ex);
            }
        }
    }
    return out;
}

void PretrainConfig::validate() const {
    if (steps < 0) throw ConfigError("pretrain: steps must be non-negative");
    if (batch_size < 1) throw ConfigError("pretrain: batch_size must be positive");
    if (!(peak_lr > 0.0)) throw ConfigError("pretrain: peak_lr must be positive");
    if (mask_prob <= 0.0 || mask_prob >= 1.0) throw ConfigError("pretrain: mask_prob must be in (0, 1)");
}

namespace {

struct MlmBatchLoss {
    Tape::NodeId loss;
    int masked_positions;
};

// Masked-token objective over a batch of sequences already on the tape.
// Masked positions get the <mask> id on input; logits are tied to the token
// embedding. Returns nothing to train on when no position was masked.
MlmBatchLoss mlm_loss(Tape& tape, ParamBinding& binding, const EncoderConfig& cfg,
                      const std::vector<Encoded>& batch, const std::vector<std::vector<int>>& originals,
                      const std::vector<std::vector<int>>& masked_at, Rng& masks_rng) {
    std::vector<Tape::NodeId> gathered;
    std::vector<int> targets;
    for (size_t b = 0; b < batch.size(); ++b) {
        if (masked_at[b].empty()) continue;
        EncodeResult enc = encode(tape, binding, cfg, batch[b].ids, batch[b].mask, RunMode::train, &masks_rng);
        gathered.push_back(tape.gather_rows(enc.states.back(), masked_at[b]));
        for (int pos : masked_at[b]) targets.push_back(originals[b][static_cast<size_t>(pos)]);
    }
    if (gathered.empty()) return {-1, 0};
    Tape::NodeId hidden = gathered.size() == 1 ? gathered[0] : tape.concat_rows(gathered);
    Tape::NodeId logits = tape.matmul_nt(hidden, binding.node("embed.tok.weight"));
    std::vector<double> ones(static_cast<size_t>(cfg.vocab_size), 1.0);
    Tape::NodeId loss = tape.weighted_cross_entropy(logits, targets, ones, LossReduction::mean);
    return {loss, static_cast<int>(targets.size())};
}

}  // namespace

Checkpoint pretrain_toy(const std::vector<std::string>& corpus, const PretrainConfig& cfg) {
    cfg.validate();
    if (corpus.empty()) throw DataError("pretrain: empty corpus");

    Vocabulary vocab = Vocabulary::build(corpus, cfg.encoder.vocab_size > 0 ? cfg.encoder.vocab_size : 1 << 16);
    EncoderConfig enc_cfg = cfg.encoder;
    enc_cfg.vocab_size = vocab.size();
    enc_cfg.validate();

    Rng rng(cfg.seed);
    Rng init_rng = rng.derive("init");
    Rng masks_rng = rng.derive("masks");
    Rng batch_rng = rng.derive("batch");

    NamedTensors params = init_encoder_params(enc_cfg, init_rng);

    // tokenize once
    size_t longest = 0;
    for (const auto& text : corpus) longest = std::max(longest, split_lowercase_tokens(text).size());
    const int max_len = std::min<int>(enc_cfg.max_seq_len, static_cast<int>(longest) + 2);
    std::vector<Encoded> encoded;
    encoded.reserve(corpus.size());
    for (const auto& text : corpus) encoded.push_back(tokenize(vocab, text, max_len));

    std::vector<ParamGroup> groups = build_param_groups(params.names(), enc_cfg.num_layers, LlrdSetup::uniform, cfg.peak_lr);
    AdamW opt(params, groups);

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<Encoded> batch;
        std::vector<std::vector<int>> originals, masked_at;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const size_t pick = batch_rng.next_below(static_cast<uint32_t>(encoded.size()));
            Encoded ex = encoded[pick];
            std::vector<int> orig = ex.ids;
            std::vector<int> positions;
            for (size_t pos = 0; pos < ex.ids.size(); ++pos) {
                const int id = ex.ids[pos];
                if (ex.mask[pos] == 0 || id < Vocabulary::kNumSpecials) continue;
                if (masks_rng.next_double() < cfg.mask_prob) {
                    ex.ids[pos] = Vocabulary::kMask;
                    positions.push_back(static_cast<int>(pos));
                }
            }
            batch.push_back(std::move(ex));
            originals.push_back(std::move(orig));
            masked_at.push_back(std::move(positions));
        }

        const double scale = lr_at_step(step, cfg.steps, 1.0, cfg.warmup_frac);
        Tape tape;
        ParamBinding binding(tape, params);
        const MlmBatchLoss mb = mlm_loss(tape, binding, enc_cfg, batch, originals, masked_at, masks_rng);
        if (mb.masked_positions == 0) continue;  // nothing masked this step
        tape.backward(mb.loss);

        NamedTensors grads;
        for (const auto& e : params) grads.add(e.name, tape.grad_tensor(binding.leaf(e.name)));
        opt.step(params, grads, scale);
    }

    Checkpoint ckpt;
    ckpt.meta.encoder = enc_cfg;
    ckpt.meta.vocab_hash = vocab.hash();
    ckpt.meta.seed = cfg.seed;
    ckpt.meta.pretrained = true;
    ckpt.meta.vocab_tokens = vocab.corpus_tokens();
    ckpt.params = std::move(params);
    return ckpt;
}

double mlm_accuracy(const Checkpoint& ckpt, const std::vector<std::string>& heldout, double mask_prob, uint64_t seed) {
    if (heldout.empty()) throw DataError("mlm_accuracy: empty corpus");
    const Vocabulary vocab = vocab_from_meta(ckpt.meta);
    const EncoderConfig& cfg = ckpt.meta.encoder;
    Rng rng = Rng(seed).derive("masks");

    size_t longest = 0;
    for (const auto& text : heldout) longest = std::max(longest, split_lowercase_tokens(text).size());
    const int max_len = std::min<int>(cfg.max_seq_len, static_cast<int>(longest) + 2);

    int64_t correct = 0, total = 0;
    for (const auto& text : heldout) {
        Encoded ex = tokenize(vocab, text, max_len);
        std::vector<int> orig = ex.ids;
        std::vector<int> positions;
        for (size_t pos = 0; pos < ex.ids.size(); ++pos) {
            if (ex.mask[pos] == 0 || ex.ids[pos] < Vocabulary::kNumSpecials) continue;
            if (rng.next_double() < mask_prob) {
                ex.ids[pos] = Vocabulary::kMask;
                positions.push_back(static_cast<int>(pos));
            }
        }
        if (positions.empty()) continue;
        Tape tape;
        ParamBinding binding(tape, ckpt.params);
        EncodeResult enc = encode(tape, binding, cfg, ex.ids, ex.mask, RunMode::eval);
        Tape::NodeId hidden = tape.gather_rows(enc.states.back(), positions);
        Tape::NodeId logits = tape.matmul_nt(hidden, binding.node("embed.tok.weight"));
        const Tensor& lv = tape.value(logits);
        const auto picks = argmax_rows(lv);
        for (size_t i = 0; i < positions.size(); ++i) {
            total += 1;
            if (picks[i] == orig[static_cast<size_t>(positions[i])]) correct += 1;
        }
    }
    if (total == 0) throw DataError("mlm_accuracy: no positions were masked");
    return static_cast<double>(correct) / static_cast<double>(total);
}

void TrainConfig::validate() const {
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (warmup_frac < 0.0 || warmup_frac >= 1.0) throw ConfigError("warmup fraction must be in [0, 1)");
}

MetricsReport evaluate_model(const NamedTensors& params, const EncoderConfig& enc_cfg, const Vocabulary& vocab,
                             const std::vector<LabeledExample>& examples, int num_classes, PoolingMode pooling,
                             int max_len) {
    if (examples.empty()) throw DataError("evaluate: no examples");
    HeadConfig head_cfg{pooling == PoolingMode::concat_last4 ? 4 * enc_cfg.hidden : enc_cfg.hidden, num_classes};

    std::vector<int> truth(examples.size()), preds(examples.size());
    const int64_t chunks = (static_cast<int64_t>(examples.size()) + kEvalChunk - 1) / kEvalChunk;
    const bool par = kernels::parallel_enabled() && chunks > 1;
#pragma omp parallel for if (par) schedule(dynamic)
    for (int64_t chunk = 0; chunk < chunks; ++chunk) {
        const size_t begin = static_cast<size_t>(chunk) * kEvalChunk;
        const size_t end = std::min(begin + kEvalChunk, examples.size());
        Tape tape;
        ParamBinding binding(tape, params);
        std::vector<Tape::NodeId> feats;
        for (size_t i = begin; i < end; ++i) {
            const Encoded enc = tokenize(vocab, examples[i].text, max_len);
            EncodeResult er = encode(tape, binding, enc_cfg, enc.ids, enc.mask, RunMode::eval);
            feats.push_back(pool_features(tape, er, pooling));
        }
        Tape::NodeId stacked = feats.size() == 1 ? feats[0] : tape.concat_rows(feats);
        Tape::NodeId logits = classify(tape, binding, head_cfg, stacked);
        const auto picks = argmax_rows(tape.value(logits));
        for (size_t i = begin; i < end; ++i) {
            truth[i] = examples[i].label;
            preds[i] = picks[i - begin];
        }
    }

    const ConfusionMatrix cm = confusion(truth, preds, num_classes);
    return num_classes == 2 ? binary_report(cm, 1) : macro_report(cm);
}

FinetuneResult finetune(const Checkpoint& pretrained, const std::vector<LabeledExample>& dataset, int num_classes,
                        const TrainConfig& cfg) {
    cfg.validate();
    const EncoderConfig enc_cfg = pretrained.meta.encoder;
    enc_cfg.validate();
    cfg.strategy.validate(enc_cfg.num_layers);
    if (num_classes < 2) throw ConfigError("finetune: need at least two classes");
    if (cfg.strategy.class_weights.has_value() &&
        static_cast<int>(cfg.strategy.class_weights->size()) != num_classes) {
        throw ConfigError("finetune: class weight count does not match class count");
    }

    const Vocabulary vocab = vocab_from_meta(pretrained.meta);
    const Rng rng(cfg.seed);

    const SplitResult split = split_dataset(dataset, rng.derive_seed("split"));
    const int max_len = tokenize_length(dataset, enc_cfg);

    // assemble parameters: pretrained encoder + fresh head, then re-init
    Rng init_rng = rng.derive("init");
    NamedTensors params = encoder_params_from(pretrained, enc_cfg);
    const HeadConfig head_cfg{pooled_dim(enc_cfg, cfg.strategy.pooling), num_classes};
    add_head_params(params, head_cfg, init_rng, cfg.head_init_sigma);
    params = reinit_top_layers(params, enc_cfg.num_layers, cfg.strategy.reinit_n, cfg.reinit_sigma, init_rng);

    // the frozen target mixout regularizes toward, captured after re-init
    const NamedTensors snapshot = params;
    const std::vector<std::string> mixout_names = mixout_target_names(params);

    const std::vector<double> class_weights =
        cfg.strategy.class_weights.value_or(std::vector<double>(static_cast<size_t>(num_classes), 1.0));

    FinetuneResult result;
    result.groups = build_param_groups(params.names(), enc_cfg.num_layers, cfg.strategy.llrd, cfg.base_lr);
    result.resolved_class_weights = class_weights;

    AdamW opt(params, result.groups);

    std::vector<Encoded> train_enc;
    train_enc.reserve(split.train.size());
    for (const auto& ex : split.train) train_enc.push_back(tokenize(vocab, ex.text, max_len));

    const int64_t steps_per_epoch =
        (static_cast<int64_t>(split.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
    const int64_t total_steps = steps_per_epoch * cfg.epochs;
    result.total_steps = total_steps;

    Rng masks_rng = rng.derive("masks");
    Rng batch_rng = rng.derive("batch");
    const bool mixout_on = cfg.strategy.mixout_active();
    const double mixout_p = mixout_on ? *cfg.strategy.mixout_p : 0.0;

    int64_t global_step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<size_t> order(split.train.size());
        std::iota(order.begin(), order.end(), size_t{0});
        Rng epoch_rng(batch_rng.next_u64());  // batch order re-seeded per epoch
        epoch_rng.shuffle(order);

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            const double scale = lr_at_step(global_step, total_steps, 1.0, cfg.warmup_frac);

            Tape tape;
            ParamBinding binding(tape, params);
            if (mixout_on) {
                for (const auto& name : mixout_names) {
                    const Tensor& target = snapshot.at(name);
                    const Tensor zeros = Tensor::zeros(target.dims());
                    binding.rebind(name, mixout_node(tape, binding.leaf(name),
                                                     cfg.strategy.mixout_to_zero ? zeros : target, mixout_p,
                                                     masks_rng));
                }
            }

            std::vector<Tape::NodeId> feats;
            std::vector<int> targets;
            for (size_t i = start; i < stop; ++i) {
                const size_t idx = order[i];
                EncodeResult er =
                    encode(tape, binding, enc_cfg, train_enc[idx].ids, train_enc[idx].mask, RunMode::train, &masks_rng);
                feats.push_back(pool_features(tape, er, cfg.strategy.pooling));
                targets.push_back(split.train[idx].label);
            }
            Tape::NodeId stacked = feats.size() == 1 ? feats[0] : tape.concat_rows(feats);
            Tape::NodeId logits = classify(tape, binding, head_cfg, stacked);
            Tape::NodeId loss = tape.weighted_cross_entropy(logits, targets, class_weights, cfg.strategy.reduction);
            tape.backward(loss);

            NamedTensors grads;
            for (const auto& e : params) grads.add(e.name, tape.grad_tensor(binding.leaf(e.name)));
            opt.step(params, grads, scale);
            ++global_step;
        }

        result.history.push_back(
            {epoch, evaluate_model(params, enc_cfg, vocab, split.val, num_classes, cfg.strategy.pooling, max_len)});
    }

    result.test = evaluate_model(params, enc_cfg, vocab, split.test, num_classes, cfg.strategy.pooling, max_len);

    result.model.meta = pretrained.meta;
    result.model.meta.seed = cfg.seed;
    result.model.meta.pretrained = false;
    result.model.params = std::move(params);
    return result;
}

VarianceReport variance_study(const Checkpoint& pretrained, const std::vector<LabeledExample>& dataset,
                              int num_classes, const TrainConfig& cfg, const std::vector<uint64_t>& seeds,
                              int jobs) {
    if (seeds.size() < 2) throw ContractError("variance_study: at least 2 seeds required");
    VarianceReport report;
    report.seeds = seeds;
    report.per_seed.resize(seeds.size());

    const auto run_one = [&](size_t i) {
        TrainConfig c = cfg;
        c.seed = seeds[i];
        report.per_seed[i] = finetune(pretrained, dataset, num_classes, c).test;
    };
    if (jobs <= 1) {
        for (size_t i = 0; i < seeds.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        const size_t n_threads = std::min<size_t>(static_cast<size_t>(jobs), seeds.size());
        for (size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) run_one(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    const auto stats_of = [&](auto metric) {
        // Welford
        MetricStats s;
        double mean = 0.0, m2 = 0.0;
        int64_t n = 0;
        for (const auto& r : report.per_seed) {
            const double x = metric(r);
            ++n;
            const double d = x - mean;
            mean += d / static_cast<double>(n);
            m2 += d * (x - mean);
        }
        s.mean = mean;
        s.stdev = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
        return s;
    };
    report.precision = stats_of([](const MetricsReport& r) { return r.precision; });
    report.recall = stats_of([](const MetricsReport& r) { return r.recall; });
    report.accuracy = stats_of([](const MetricsReport& r) { return r.accuracy; });
    report.f_score = stats_of([](const MetricsReport& r) { return r.f_score; });
    return report;
}

}  // namespace ftlab
