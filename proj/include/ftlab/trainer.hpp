#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftlab/checkpoint.hpp"
#include "ftlab/data.hpp"
#include "ftlab/encoder.hpp"
#include "ftlab/metrics.hpp"
#include "ftlab/strategies.hpp"
#include "ftlab/vocab.hpp"

namespace ftlab {

// Stratified 60/20/20 split: per class, shuffle with a class-derived stream
// and cut by count, remainders going to train.
struct SplitResult {
    std::vector<LabeledExample> train, val, test;
};
SplitResult split_dataset(const std::vector<LabeledExample>& examples, uint64_t seed);

struct PretrainConfig {
    EncoderConfig encoder;  // vocab_size is filled from the corpus
    int steps = 400;
    int batch_size = 8;
    double peak_lr = 1e-3;
    double warmup_frac = 0.1;
    double mask_prob = 0.15;
    uint64_t seed = 0;

    void validate() const;
};

// Masked-token toy pretraining: manufactures the "pretrained" snapshot the
// fine-tuning strategies regularize toward. Prediction head is tied to the
// token embedding. Deterministic per seed.
Checkpoint pretrain_toy(const std::vector<std::string>& corpus, const PretrainConfig& cfg);

// Masked-token prediction accuracy on held-out text (argmax over the tied
// embedding logits at masked positions).
double mlm_accuracy(const Checkpoint& ckpt, const std::vector<std::string>& heldout, double mask_prob, uint64_t seed);

struct TrainConfig {
    double base_lr = 3e-5;
    int epochs = 3;
    int batch_size = 8;
    double warmup_frac = 0.1;
    uint64_t seed = 0;
    StrategyConfig strategy;
    double head_init_sigma = kDefaultInitSigma;
    double reinit_sigma = kDefaultInitSigma;

    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;  // 1-based
    MetricsReport val;
};

struct FinetuneResult {
    Checkpoint model;
    std::vector<EpochMetrics> history;  // one entry per epoch
    MetricsReport test;
    std::vector<ParamGroup> groups;           // resolved learning-rate groups
    std::vector<double> resolved_class_weights;
    int64_t total_steps = 0;
};

// Full fine-tuning run: split the dataset, re-initialize the top layers,
// snapshot the result as the mixout target, build learning-rate groups, then
// train with the linear scheduler. The seed drives four named streams
// (split, init, masks, batch), so strategies can be compared on identical
// data order. Bit-deterministic.
FinetuneResult finetune(const Checkpoint& pretrained, const std::vector<LabeledExample>& dataset, int num_classes,
                        const TrainConfig& cfg);

// Eval-mode predictions and the stage-appropriate report (binary report with
// positive class 1 for two classes, macro otherwise).
MetricsReport evaluate_model(const NamedTensors& params, const EncoderConfig& enc_cfg, const Vocabulary& vocab,
                             const std::vector<LabeledExample>& examples, int num_classes, PoolingMode pooling,
                             int max_len);

struct MetricStats {
    double mean = 0.0;
    double stdev = 0.0;  // sample standard deviation
};

struct VarianceReport {
    MetricStats precision, recall, accuracy, f_score;
    std::vector<MetricsReport> per_seed;
    std::vector<uint64_t> seeds;
};

// Runs finetune once per seed and aggregates the final test metrics.
// jobs > 1 runs seeds in parallel; results are keyed by seed order, so the
// report does not depend on completion order.
VarianceReport variance_study(const Checkpoint& pretrained, const std::vector<LabeledExample>& dataset,
                              int num_classes, const TrainConfig& cfg, const std::vector<uint64_t>& seeds,
                              int jobs = 1);

// Shared helper: length to which a corpus is tokenized (longest text plus
// the two specials, capped at the encoder's max).
int tokenize_length(const std::vector<LabeledExample>& examples, const EncoderConfig& cfg);

}  // namespace ftlab
