#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ftlab/checkpoint.hpp"
#include "ftlab/data.hpp"
#include "ftlab/optimizer.hpp"
#include "ftlab/scheduler.hpp"
#include "ftlab/trainer.hpp"

using namespace ftlab;

namespace {

std::vector<LabeledExample> uniform_examples(int n, int classes) {
    std::vector<LabeledExample> out;
    for (int i = 0; i < n; ++i) out.push_back({"w" + std::to_string(i % 7), i % classes, 1});
    return out;
}

PretrainConfig small_pretrain(uint64_t seed) {
    PretrainConfig pc;
    pc.encoder.num_layers = 2;
    pc.encoder.hidden = 16;
    pc.encoder.heads = 2;
    pc.encoder.ff_dim = 32;
    pc.encoder.max_seq_len = 14;
    pc.encoder.vocab_size = 128;
    pc.steps = 40;
    pc.batch_size = 8;
    pc.seed = seed;
    return pc;
}

SynthTaskSpec small_task(uint64_t seed) {
    SynthTaskSpec spec;
    spec.count = 80;
    spec.vocab_size = 40;
    spec.marker_prob = 0.8;
    spec.min_len = 4;
    spec.max_len = 8;
    spec.seed = seed;
    return spec;
}

struct TempPath {
    std::string path;
    explicit TempPath(const std::string& name) : path("ftlab_trainer_" + name) {}
    ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("split_dataset: 100 single-class examples split 60/20/20") {
    const auto ex = uniform_examples(100, 1);
    const SplitResult s = split_dataset(ex, 3);
    CHECK(s.train.size() == 60);
    CHECK(s.val.size() == 20);
    CHECK(s.test.size() == 20);
}

TEST_CASE("split_dataset: deterministic per seed, disjoint and exhaustive") {
    std::vector<LabeledExample> ex;
    for (int i = 0; i < 83; ++i) ex.push_back({"t" + std::to_string(i), i % 3, 1});
    const SplitResult a = split_dataset(ex, 11);
    const SplitResult b = split_dataset(ex, 11);
    CHECK(a.train.size() == b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].text == b.train[i].text);
    for (size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].text == b.test[i].text);

    std::map<std::string, int> seen;
    for (const auto& e : a.train) seen[e.text] += 1;
    for (const auto& e : a.val) seen[e.text] += 1;
    for (const auto& e : a.test) seen[e.text] += 1;
    CHECK(seen.size() == ex.size());
    for (const auto& [text, count] : seen) CHECK(count == 1);

    const SplitResult c = split_dataset(ex, 12);
    bool differs = false;
    for (size_t i = 0; i < a.train.size() && i < c.train.size(); ++i) differs = differs || a.train[i].text != c.train[i].text;
    CHECK(differs);
}

TEST_CASE("split_dataset: per-class proportions within one example of 60/20/20") {
    std::vector<LabeledExample> ex;
    for (int i = 0; i < 37; ++i) ex.push_back({"a" + std::to_string(i), 0, 1});
    for (int i = 0; i < 23; ++i) ex.push_back({"b" + std::to_string(i), 1, 1});
    const SplitResult s = split_dataset(ex, 5);
    const auto count_label = [](const std::vector<LabeledExample>& v, int label) {
        int64_t n = 0;
        for (const auto& e : v) n += e.label == label ? 1 : 0;
        return static_cast<double>(n);
    };
    for (int label : {0, 1}) {
        const double n = label == 0 ? 37.0 : 23.0;
        CHECK(std::fabs(count_label(s.train, label) - 0.6 * n) <= 1.0);
        CHECK(std::fabs(count_label(s.val, label) - 0.2 * n) <= 1.0);
        CHECK(std::fabs(count_label(s.test, label) - 0.2 * n) <= 1.0);
    }
}

TEST_CASE("split_dataset: a class under five examples is a data error naming it") {
    std::vector<LabeledExample> ex = uniform_examples(40, 1);
    for (int i = 0; i < 3; ++i) ex.push_back({"rare" + std::to_string(i), 6, 1});
    CHECK_THROWS_WITH_AS(split_dataset(ex, 1), doctest::Contains("class 6"), DataError);
}

TEST_CASE("lr_at_step boundary and interpolation values") {
    CHECK(lr_at_step(0, 100, 3e-5, 0.1) == 0.0);
    CHECK(lr_at_step(10, 100, 3e-5, 0.1) == 3e-5);          // warmup end hits the peak
    CHECK(lr_at_step(100, 100, 3e-5, 0.1) == 0.0);          // final step decays to zero
    CHECK(lr_at_step(55, 100, 3e-5, 0.1) == doctest::Approx(1.5e-5).epsilon(1e-15));
    CHECK(lr_at_step(5, 100, 3e-5, 0.1) == doctest::Approx(1.5e-5).epsilon(1e-15));
    CHECK(warmup_steps(100, 0.1) == 10);
    CHECK(warmup_steps(113, 0.1) == 12);  // ceil
    // no warmup: starts at the peak
    CHECK(lr_at_step(0, 50, 1e-3, 0.0) == 1e-3);
    CHECK_THROWS_AS(lr_at_step(101, 100, 3e-5, 0.1), ContractError);
    CHECK_THROWS_AS(lr_at_step(-1, 100, 3e-5, 0.1), ContractError);
}

TEST_CASE("scheduler scaling preserves group learning-rate ratios at every step") {
    const auto groups = build_param_groups({"embed.tok.weight", "layer.0.ff.w1.weight", "layer.2.ff.w1.weight",
                                            "layer.3.ff.w2.weight", "head.out.weight"},
                                           4, LlrdSetup::four_group, 3e-5);
    for (int64_t step = 0; step <= 100; step += 7) {
        const double scale = lr_at_step(step, 100, 1.0, 0.1);
        for (size_t i = 0; i + 1 < groups.size(); ++i) {
            const double a = groups[i].lr * scale;
            const double b = groups[i + 1].lr * scale;
            if (scale == 0.0) {
                CHECK(a == 0.0);
                CHECK(b == 0.0);
            } else {
                CHECK(a / b == doctest::Approx(groups[i].lr_multiplier / groups[i + 1].lr_multiplier).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("optimizer: zero gradient and zero decay leave parameters unchanged") {
    NamedTensors params;
    params.add("layer.0.ff.w1.weight", Tensor({2, 2}, {1.0, -2.0, 3.0, -4.0}));
    params.add("layer.0.ff.w1.bias", Tensor({2}, {0.5, -0.5}));
    const auto groups = build_param_groups(params.names(), 1, LlrdSetup::uniform, 1e-3);
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(params, groups, cfg);
    NamedTensors zero_grads;
    for (const auto& e : params) zero_grads.add(e.name, Tensor::zeros(e.tensor.dims()));
    const NamedTensors before = params;
    opt.step(params, zero_grads, 1.0);
    opt.step(params, zero_grads, 0.5);
    CHECK(params.bit_equal(before));
}

TEST_CASE("optimizer: weight decay skips biases and norms") {
    NamedTensors params;
    params.add("layer.0.ff.w1.weight", Tensor({1}, {2.0}));
    params.add("layer.0.ff.w1.bias", Tensor({1}, {2.0}));
    params.add("layer.0.ff.norm.gain", Tensor({1}, {2.0}));
    const auto groups = build_param_groups(params.names(), 1, LlrdSetup::uniform, 1e-2);
    AdamW opt(params, groups);
    NamedTensors zero_grads;
    for (const auto& e : params) zero_grads.add(e.name, Tensor::zeros(e.tensor.dims()));
    opt.step(params, zero_grads, 1.0);
    CHECK(params.at("layer.0.ff.w1.weight")[0] < 2.0);   // decayed
    CHECK(params.at("layer.0.ff.w1.bias")[0] == 2.0);    // untouched
    CHECK(params.at("layer.0.ff.norm.gain")[0] == 2.0);  // untouched
}

TEST_CASE("checkpoint round-trips bit-exactly and saves are byte-stable") {
    Rng rng(99);
    Checkpoint ckpt;
    ckpt.meta.encoder = small_pretrain(0).encoder;
    ckpt.meta.encoder.vocab_size = 8;
    ckpt.meta.vocab_hash = 0xdeadbeefcafef00dull;
    ckpt.meta.seed = 1234567;
    ckpt.meta.pretrained = true;
    ckpt.meta.vocab_tokens = {"alpha", "beta", "gamma"};
    Tensor odd({3, 2});
    odd[0] = -0.0;
    odd[1] = 1e-320;  // subnormal
    odd[2] = -1.5;
    odd[3] = 3.141592653589793;
    odd[4] = 1e300;
    odd[5] = -1e-300;
    ckpt.params.add("embed.tok.weight", odd);
    for (int i = 0; i < 3; ++i) {
        Tensor t({4, 5});
        for (int64_t j = 0; j < t.size(); ++j) t[j] = rng.next_normal();
        ckpt.params.add("layer." + std::to_string(i) + ".ff.w1.weight", t);
    }

    const TempPath file("roundtrip.ftlb");
    save_checkpoint(ckpt, file.path);
    const Checkpoint loaded = load_checkpoint(file.path);
    CHECK(loaded.params.bit_equal(ckpt.params));
    CHECK(loaded.meta.vocab_hash == ckpt.meta.vocab_hash);
    CHECK(loaded.meta.seed == ckpt.meta.seed);
    CHECK(loaded.meta.pretrained == ckpt.meta.pretrained);
    CHECK(loaded.meta.vocab_tokens == ckpt.meta.vocab_tokens);
    CHECK(loaded.meta.encoder.hidden == ckpt.meta.encoder.hidden);

    const TempPath file2("roundtrip2.ftlb");
    save_checkpoint(loaded, file2.path);
    std::ifstream a(file.path, std::ios::binary), b(file2.path, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
}

TEST_CASE("checkpoint corruption is a format error, never a silent misread") {
    Checkpoint ckpt;
    ckpt.meta.encoder = small_pretrain(0).encoder;
    ckpt.meta.encoder.vocab_size = 8;
    ckpt.params.add("embed.tok.weight", Tensor({2, 2}, {1, 2, 3, 4}));
    auto bytes = serialize_checkpoint(ckpt);

    auto corrupt_magic = bytes;
    corrupt_magic[0] = 'X';
    CHECK_THROWS_AS(parse_checkpoint(corrupt_magic), FormatError);

    auto truncated = bytes;
    truncated.resize(bytes.size() / 2);
    CHECK_THROWS_AS(parse_checkpoint(truncated), FormatError);

    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(parse_checkpoint(trailing), FormatError);

    auto bad_version = bytes;
    bad_version[4] = 99;
    CHECK_THROWS_AS(parse_checkpoint(bad_version), FormatError);

    // offsets are reported
    try {
        parse_checkpoint(corrupt_magic);
        CHECK(false);
    } catch (const FormatError& e) {
        CHECK(e.offset == 0);
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
}

TEST_CASE("pretraining is deterministic and a zero-step budget returns the raw init") {
    const auto corpus = texts_of(generate_synth(small_task(31)));
    PretrainConfig pc = small_pretrain(17);

    const Checkpoint a = pretrain_toy(corpus, pc);
    const Checkpoint b = pretrain_toy(corpus, pc);
    CHECK(a.params.bit_equal(b.params));
    CHECK(a.meta.pretrained);
    CHECK(a.meta.vocab_hash == b.meta.vocab_hash);

    PretrainConfig zero = pc;
    zero.steps = 0;
    const Checkpoint init = pretrain_toy(corpus, zero);
    // reproduce the init stream by hand: vocabulary size feeds the config
    Vocabulary vocab = Vocabulary::build(corpus, pc.encoder.vocab_size);
    EncoderConfig cfg = pc.encoder;
    cfg.vocab_size = vocab.size();
    Rng init_rng = Rng(pc.seed).derive("init");
    const NamedTensors expect = init_encoder_params(cfg, init_rng);
    CHECK(init.params.bit_equal(expect));

    // trained checkpoint differs from the init
    CHECK_FALSE(a.params.bit_equal(init.params));
}

TEST_CASE("toy pretraining beats chance by an order of magnitude on held-out text") {
    SynthTaskSpec task = small_task(47);
    task.count = 200;
    task.vocab_size = 100;
    task.markers_per_class = 1;  // the masked marker is inferable from context
    const auto corpus = texts_of(generate_synth(task));
    PretrainConfig pc = small_pretrain(7);
    pc.steps = 200;
    pc.peak_lr = 2e-3;
    const Checkpoint ckpt = pretrain_toy(corpus, pc);

    SynthTaskSpec heldout = task;
    heldout.seed = 48;
    heldout.count = 60;
    const double acc = mlm_accuracy(ckpt, texts_of(generate_synth(heldout)), 0.15, 5);
    const double chance = 1.0 / static_cast<double>(ckpt.meta.encoder.vocab_size);
    CHECK(acc >= 10.0 * chance);
}

TEST_CASE("finetune: zero epochs returns the post-reinit parameters untouched") {
    const auto task = small_task(60);
    const auto data = generate_synth(task);
    const Checkpoint pre = pretrain_toy(texts_of(data), small_pretrain(3));

    TrainConfig tc;
    tc.epochs = 0;
    tc.seed = 9;
    tc.strategy.reinit_n = 1;
    const FinetuneResult r = finetune(pre, data, 2, tc);
    CHECK(r.history.empty());
    // layers below the re-init depth keep the pretrained bits, the top layer differs
    for (const auto& e : pre.params) {
        if (e.name.starts_with("layer.1.")) continue;
        CHECK(r.model.params.at(e.name).values()[0] == e.tensor.values()[0]);
    }
    bool top_changed = false;
    for (const auto& e : r.model.params) {
        if (!e.name.starts_with("layer.1.") || !e.name.ends_with(".weight")) continue;
        top_changed = top_changed || e.tensor.values()[0] != pre.params.at(e.name).values()[0];
    }
    CHECK(top_changed);
    // the fresh head exists with the right shapes
    CHECK(r.model.params.contains("head.fc1.weight"));
    CHECK(r.model.params.at("head.fc1.weight").dims() == std::vector<int>{16, 100});

    // a second zero-epoch run is bit-identical
    const FinetuneResult r2 = finetune(pre, data, 2, tc);
    CHECK(r.model.params.bit_equal(r2.model.params));
}

TEST_CASE("finetune: history length equals the epoch count and runs are bit-deterministic") {
    const auto data = generate_synth(small_task(71));
    const Checkpoint pre = pretrain_toy(texts_of(data), small_pretrain(5));

    TrainConfig tc;
    tc.epochs = 2;
    tc.base_lr = 1e-3;
    tc.seed = 21;
    const FinetuneResult a = finetune(pre, data, 2, tc);
    CHECK(a.history.size() == 2);
    CHECK(a.history[0].epoch == 1);
    CHECK(a.history[1].epoch == 2);

    const FinetuneResult b = finetune(pre, data, 2, tc);
    CHECK(a.model.params.bit_equal(b.model.params));
    CHECK(a.test.accuracy == b.test.accuracy);
    CHECK(a.test.f_score == b.test.f_score);

    TrainConfig other = tc;
    other.seed = 22;
    const FinetuneResult c = finetune(pre, data, 2, other);
    CHECK_FALSE(a.model.params.bit_equal(c.model.params));
}

TEST_CASE("finetune: mixout probability zero is indistinguishable from no mixout") {
    const auto data = generate_synth(small_task(81));
    const Checkpoint pre = pretrain_toy(texts_of(data), small_pretrain(6));

    TrainConfig plain;
    plain.epochs = 1;
    plain.base_lr = 1e-3;
    plain.seed = 4;
    TrainConfig zero_mix = plain;
    zero_mix.strategy.mixout_p = 0.0;

    const FinetuneResult a = finetune(pre, data, 2, plain);
    const FinetuneResult b = finetune(pre, data, 2, zero_mix);
    CHECK(a.model.params.bit_equal(b.model.params));
}

TEST_CASE("finetune: strategy violations surface before any training work") {
    const auto data = generate_synth(small_task(91));
    Checkpoint pre = pretrain_toy(texts_of(data), small_pretrain(8));
    TrainConfig tc;
    tc.strategy.pooling = PoolingMode::avg_last4;
    tc.strategy.reinit_n = 2;
    CHECK_THROWS_AS(finetune(pre, data, 2, tc), ConfigError);

    TrainConfig tc2;
    tc2.strategy.pooling = PoolingMode::avg_last4;  // needs 4 layers, model has 2
    CHECK_THROWS_AS(finetune(pre, data, 2, tc2), ConfigError);
}

TEST_CASE("finetune rejects a checkpoint missing an encoder tensor") {
    const auto data = generate_synth(small_task(95));
    Checkpoint pre = pretrain_toy(texts_of(data), small_pretrain(9));
    Checkpoint broken;
    broken.meta = pre.meta;
    for (const auto& e : pre.params) {
        if (e.name == "layer.0.attn.wq.weight") continue;
        broken.params.add(e.name, e.tensor);
    }
    TrainConfig tc;
    CHECK_THROWS_WITH_AS(finetune(broken, data, 2, tc), doctest::Contains("layer.0.attn.wq.weight"), CheckpointError);
}

TEST_CASE("separability is monotone in the marker insertion probability") {
    // fixed seeds and budget; a more marker-heavy corpus can only help
    std::vector<double> accs;
    for (double prob : {0.1, 0.45, 0.9}) {
        SynthTaskSpec task = small_task(7);
        task.count = 150;
        task.marker_prob = prob;
        task.noise_rate = 0.05;
        const auto data = generate_synth(task);
        PretrainConfig pc = small_pretrain(2);
        pc.steps = 120;
        const Checkpoint pre = pretrain_toy(texts_of(data), pc);
        TrainConfig tc;
        tc.epochs = 3;
        tc.base_lr = 3e-3;
        tc.seed = 3;
        accs.push_back(finetune(pre, data, 2, tc).test.accuracy);
    }
    CHECK(accs[0] <= accs[1]);
    CHECK(accs[1] <= accs[2]);
    CHECK(accs[2] >= 0.9);  // the easy end actually separates
}

TEST_CASE("variance study: identical seeds give zero spread, stats match a two-pass oracle") {
    const auto data = generate_synth(small_task(101));
    const Checkpoint pre = pretrain_toy(texts_of(data), small_pretrain(10));
    TrainConfig tc;
    tc.epochs = 1;
    tc.base_lr = 1e-3;

    const VarianceReport same = variance_study(pre, data, 2, tc, {7, 7});
    CHECK(same.accuracy.stdev == 0.0);
    CHECK(same.f_score.stdev == 0.0);
    CHECK(same.per_seed.size() == 2);

    const VarianceReport r = variance_study(pre, data, 2, tc, {1, 2, 3});
    CHECK(r.per_seed.size() == 3);
    // two-pass oracle
    const auto two_pass = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        return std::pair<double, double>{mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
    };
    std::vector<double> accs, f1s, precs, recs;
    for (const auto& m : r.per_seed) {
        accs.push_back(m.accuracy);
        f1s.push_back(m.f_score);
        precs.push_back(m.precision);
        recs.push_back(m.recall);
    }
    const auto [am, as] = two_pass(accs);
    CHECK(std::fabs(r.accuracy.mean - am) <= 1e-12);
    CHECK(std::fabs(r.accuracy.stdev - as) <= 1e-12);
    const auto [fm, fs] = two_pass(f1s);
    CHECK(std::fabs(r.f_score.mean - fm) <= 1e-12);
    CHECK(std::fabs(r.f_score.stdev - fs) <= 1e-12);
    const auto [pm, ps] = two_pass(precs);
    CHECK(std::fabs(r.precision.mean - pm) <= 1e-12);
    CHECK(std::fabs(r.precision.stdev - ps) <= 1e-12);
    const auto [rm, rs] = two_pass(recs);
    CHECK(std::fabs(r.recall.mean - rm) <= 1e-12);
    CHECK(std::fabs(r.recall.stdev - rs) <= 1e-12);

    CHECK_THROWS_AS(variance_study(pre, data, 2, tc, {1}), ContractError);

    // parallel execution changes nothing
    const VarianceReport par = variance_study(pre, data, 2, tc, {1, 2, 3}, 2);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(par.per_seed[i].accuracy == r.per_seed[i].accuracy);
        CHECK(par.per_seed[i].f_score == r.per_seed[i].f_score);
    }
}
