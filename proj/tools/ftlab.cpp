// Command-line laboratory for the fine-tuning experiments: toy pretraining,
// single fine-tuning runs, hyperparameter grids and cross-seed variance
// studies, all reproducible from (flags, input files, seed).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ftlab/checkpoint.hpp"
#include "ftlab/kernels.hpp"
#include "ftlab/data.hpp"
#include "ftlab/trainer.hpp"

using namespace ftlab;

namespace {

// ---------------------------------------------------------------------------
// exit codes: 0 success, 2 usage/config, 3 data, 4 format
// ---------------------------------------------------------------------------
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitFormat = 4;

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_pct(double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// ---------------------------------------------------------------------------
// shared flag groups
// ---------------------------------------------------------------------------

struct SynthOpts {
    bool enabled = false;
    int n = 500;
    int classes = 2;
    int vocab = 100;
    int markers = 3;
    double marker_prob = 0.8;
    double noise = 0.05;
    std::string priors;  // comma list, empty = uniform
    int min_len = 6;
    int max_len = 12;
    uint64_t seed = 42;

    SynthTaskSpec spec() const {
        SynthTaskSpec s;
        s.count = n;
        s.num_classes = classes;
        s.vocab_size = vocab;
        s.markers_per_class = markers;
        s.marker_prob = marker_prob;
        s.noise_rate = noise;
        s.min_len = min_len;
        s.max_len = max_len;
        s.seed = seed;
        if (!priors.empty()) {
            for (const auto& tok : split_list(priors, ',')) s.priors.push_back(std::stod(tok));
        }
        return s;
    }
};

struct CorpusOpts {
    std::string corpus_path;
    int stage = 1;
    std::string text_col = "text";
    std::string label_col = "label";
    SynthOpts synth;
};

void add_synth_flags(CLI::App* cmd, SynthOpts& o) {
    cmd->add_flag("--synth", o.enabled, "use a generated synthetic corpus instead of --corpus");
    cmd->add_option("--synth-n", o.n, "synthetic corpus size");
    cmd->add_option("--synth-classes", o.classes, "synthetic class count");
    cmd->add_option("--synth-vocab", o.vocab, "synthetic vocabulary size");
    cmd->add_option("--synth-markers", o.markers, "marker tokens per class");
    cmd->add_option("--synth-marker-prob", o.marker_prob, "probability a token is a class marker");
    cmd->add_option("--synth-noise", o.noise, "probability a token is uniform over the vocabulary");
    cmd->add_option("--synth-priors", o.priors, "comma-separated class priors (default uniform)");
    cmd->add_option("--synth-min-len", o.min_len, "minimum token count");
    cmd->add_option("--synth-max-len", o.max_len, "maximum token count");
    cmd->add_option("--synth-seed", o.seed, "corpus generation seed");
}

void add_corpus_flags(CLI::App* cmd, CorpusOpts& o) {
    cmd->add_option("--corpus", o.corpus_path, "labeled TSV corpus (header row, text<TAB>label)");
    cmd->add_option("--stage", o.stage, "label schema: 1 = binary, 2 = six-way")->check(CLI::Range(1, 2));
    cmd->add_option("--text-col", o.text_col, "text column name");
    cmd->add_option("--label-col", o.label_col, "label column name");
    add_synth_flags(cmd, o.synth);
}

struct LoadedCorpus {
    std::vector<LabeledExample> examples;
    int num_classes = 2;
};

LoadedCorpus load_corpus(const CorpusOpts& o) {
    LoadedCorpus out;
    if (o.synth.enabled) {
        const SynthTaskSpec spec = o.synth.spec();
        out.examples = generate_synth(spec);
        out.num_classes = spec.num_classes;
        return out;
    }
    if (o.corpus_path.empty()) {
        throw ConfigError("no corpus given: pass --corpus <file.tsv> or --synth");
    }
    const TsvLoadResult r = load_tsv(o.corpus_path, o.stage, o.text_col, o.label_col);
    if (r.skipped_explicit > 0) {
        std::fprintf(stderr, "note: skipped %lld explicit_hate rows (stage-1 task)\n",
                     static_cast<long long>(r.skipped_explicit));
    }
    out.examples = std::move(r.examples);
    out.num_classes = LabelSchema::for_stage(o.stage).num_classes();
    return out;
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

struct Manifest {
    std::string command;
    std::map<std::string, std::string> entries;
    std::string started = iso_timestamp();

    void set(const std::string& key, const std::string& value) { entries[key] = value; }
    void set(const std::string& key, double v) { entries[key] = format_g(v); }
    void set(const std::string& key, int64_t v) { entries[key] = std::to_string(v); }
    void set(const std::string& key, uint64_t v) { entries[key] = std::to_string(v); }

    uint64_t run_id() const {
        std::string blob = "command=" + command + "\n";
        for (const auto& [k, v] : entries) blob += k + "=" + v + "\n";
        return fnv1a64(blob);
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw DataError("cannot write " + path);
        char hex[24];
        std::snprintf(hex, sizeof hex, "%016" PRIx64, run_id());
        out << "run_id=" << hex << "\n";
        out << "command=" << command << "\n";
        out << "created=" << started << "\n";
        out << "finished=" << iso_timestamp() << "\n";
        for (const auto& [k, v] : entries) out << k << "=" << v << "\n";
    }
};

std::string run_id_hex(const Manifest& m) {
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016" PRIx64, m.run_id());
    return hex;
}

// ---------------------------------------------------------------------------
// table rendering (Model | Precision | Recall | Accuracy | F-Score)
// ---------------------------------------------------------------------------

struct TableRow {
    std::string label;
    std::string precision, recall, accuracy, f_score;
};

void print_table(const std::vector<TableRow>& rows) {
    size_t width = std::string("Model").size();
    for (const auto& r : rows) width = std::max(width, r.label.size());
    const auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                          const std::string& e) {
        std::printf("%-*s | %9s | %9s | %9s | %9s\n", static_cast<int>(width), a.c_str(), b.c_str(), c.c_str(),
                    d.c_str(), e.c_str());
    };
    line("Model", "Precision", "Recall", "Accuracy", "F-Score");
    std::printf("%s\n", std::string(width + 4 * 12 + 1, '-').c_str());
    for (const auto& r : rows) line(r.label, r.precision, r.recall, r.accuracy, r.f_score);
}

// ---------------------------------------------------------------------------
// strategy flags for finetune/grid/variance
// ---------------------------------------------------------------------------

struct StrategyFlags {
    std::string llrd = "uniform";
    double mixout = -1.0;  // <0 = off
    double wdrop = -1.0;   // weight-dropout comparison mode
    int reinit = 0;
    std::string pool = "final";
    bool weighted_loss = false;
    bool plain_mean = false;
};

void add_strategy_flags(CLI::App* cmd, StrategyFlags& s) {
    cmd->add_option("--llrd", s.llrd, "learning-rate grouping: uniform | 2group | 4group")
        ->check(CLI::IsMember({"uniform", "2group", "4group"}));
    cmd->add_option("--mixout", s.mixout, "mixout probability toward the pretrained snapshot");
    cmd->add_option("--wdrop", s.wdrop, "weight-dropout probability (mixout toward zero), for comparisons");
    cmd->add_option("--reinit", s.reinit, "re-initialize the last N encoder layers")->check(CLI::Range(0, 3));
    cmd->add_option("--pool", s.pool, "head features: final | avg4 | concat4")
        ->check(CLI::IsMember({"final", "avg4", "concat4"}));
    cmd->add_flag("--weighted-loss", s.weighted_loss, "inverse-frequency class weights from the train split");
    cmd->add_flag("--plain-mean", s.plain_mean, "divide the loss by the batch size instead of the weight sum");
}

StrategyConfig resolve_strategy(const StrategyFlags& s, const std::vector<LabeledExample>& examples, int num_classes) {
    StrategyConfig cfg;
    cfg.llrd = *llrd_from_string(s.llrd);
    cfg.pooling = *pooling_from_string(s.pool);
    cfg.reinit_n = s.reinit;
    if (s.mixout >= 0.0 && s.wdrop >= 0.0) throw ConfigError("--mixout and --wdrop are mutually exclusive");
    if (s.mixout >= 0.0) cfg.mixout_p = s.mixout;
    if (s.wdrop >= 0.0) {
        cfg.mixout_p = s.wdrop;
        cfg.mixout_to_zero = true;
    }
    if (s.plain_mean) cfg.reduction = LossReduction::mean;
    if (s.weighted_loss) {
        cfg.class_weights = class_weights_from_counts(corpus_stats(examples, num_classes).class_counts);
    }
    return cfg;
}

void describe_strategy_into(const StrategyFlags& s, double lr, Manifest& m) {
    m.set("llrd", s.llrd);
    if (s.mixout >= 0.0) m.set("mixout", s.mixout);
    if (s.wdrop >= 0.0) m.set("wdrop", s.wdrop);
    m.set("reinit", static_cast<int64_t>(s.reinit));
    m.set("pool", s.pool);
    m.set("weighted_loss", static_cast<int64_t>(s.weighted_loss ? 1 : 0));
    m.set("plain_mean", static_cast<int64_t>(s.plain_mean ? 1 : 0));
    m.set("lr", lr);
}

std::string model_label(const StrategyConfig& s, std::optional<double> lr = {}) {
    std::string label;
    switch (s.llrd) {
        case LlrdSetup::uniform: label = "Baseline"; break;
        case LlrdSetup::two_group: label = "LLRD(2-Groups)"; break;
        case LlrdSetup::four_group: label = "LLRD(4-Groups)"; break;
    }
    if (s.reinit_n > 0) label += " + Re-init(" + std::to_string(s.reinit_n) + ")";
    if (s.mixout_active()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", *s.mixout_p);
        label += std::string(" + ") + (s.mixout_to_zero ? "WDrop(" : "Mixout(") + buf + ")";
    }
    if (s.pooling == PoolingMode::avg_last4) label += " + Avg Last 4 Layers";
    if (s.pooling == PoolingMode::concat_last4) label += " + Concat Last 4 Layers";
    if (s.class_weights.has_value()) label += " + Weighted CE";
    if (lr.has_value()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", *lr);
        label += std::string(" @ lr=") + buf;
    }
    return label;
}

void write_history_csv(const std::string& path, const std::string& run_id, uint64_t seed,
                       const FinetuneResult& result) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "run_id,seed,epoch,split,precision,recall,accuracy,f_score\n";
    const auto row = [&](int epoch, const char* split, const MetricsReport& m) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%llu,%d,%s,%.10g,%.10g,%.10g,%.10g", run_id.c_str(),
                      static_cast<unsigned long long>(seed), epoch, split, m.precision, m.recall, m.accuracy,
                      m.f_score);
        out << buf << "\n";
    };
    for (const auto& h : result.history) row(h.epoch, "val", h.val);
    row(result.history.empty() ? 0 : result.history.back().epoch, "test", result.test);
}

// ---------------------------------------------------------------------------
// subcommand drivers
// ---------------------------------------------------------------------------

struct PretrainArgs {
    CorpusOpts corpus;
    int layers = 4, hidden = 32, heads = 4, ff = 128, max_seq = 32;
    int vocab_cap = 512;
    double dropout = 0.1;
    int steps = 400, batch = 8;
    double lr = 1e-3, warmup = 0.1, mask_prob = 0.15;
    uint64_t seed = 0;
    int jobs = 0;
    std::string out_dir = "runs/pretrain";
};

// --jobs 1 pins a command to one thread; 0 leaves the kernels free to use
// whatever OpenMP gives them. Results are bit-identical either way.
void apply_jobs(int jobs) {
    if (jobs == 1) kernels::set_parallel_enabled(false);
}

int run_pretrain(const PretrainArgs& a) {
    apply_jobs(a.jobs);
    const LoadedCorpus corpus = load_corpus(a.corpus);
    PretrainConfig pc;
    pc.encoder.num_layers = a.layers;
    pc.encoder.hidden = a.hidden;
    pc.encoder.heads = a.heads;
    pc.encoder.ff_dim = a.ff;
    pc.encoder.max_seq_len = a.max_seq;
    pc.encoder.vocab_size = a.vocab_cap;
    pc.encoder.dropout_p = a.dropout;
    pc.steps = a.steps;
    pc.batch_size = a.batch;
    pc.peak_lr = a.lr;
    pc.warmup_frac = a.warmup;
    pc.mask_prob = a.mask_prob;
    pc.seed = a.seed;

    const Checkpoint ckpt = pretrain_toy(texts_of(corpus.examples), pc);

    std::filesystem::create_directories(a.out_dir);
    const std::string ckpt_path = a.out_dir + "/pretrained.ftlb";
    save_checkpoint(ckpt, ckpt_path);

    Manifest m;
    m.command = "pretrain";
    m.set("seed", a.seed);
    m.set("steps", static_cast<int64_t>(a.steps));
    m.set("batch", static_cast<int64_t>(a.batch));
    m.set("lr", a.lr);
    m.set("warmup", a.warmup);
    m.set("mask_prob", a.mask_prob);
    m.set("layers", static_cast<int64_t>(a.layers));
    m.set("hidden", static_cast<int64_t>(a.hidden));
    m.set("heads", static_cast<int64_t>(a.heads));
    m.set("ff", static_cast<int64_t>(a.ff));
    m.set("vocab_size", static_cast<int64_t>(ckpt.meta.encoder.vocab_size));
    m.set("corpus", a.corpus.synth.enabled ? std::string("synth") : a.corpus.corpus_path);
    if (a.corpus.synth.enabled) m.set("synth_seed", a.corpus.synth.seed);
    m.write(a.out_dir + "/manifest.txt");

    std::printf("pretrained checkpoint: %s (%zu tensors, vocab %d)\n", ckpt_path.c_str(), ckpt.params.size(),
                ckpt.meta.encoder.vocab_size);
    if (a.corpus.synth.enabled && a.steps > 0) {
        SynthTaskSpec heldout = a.corpus.synth.spec();
        heldout.seed = a.corpus.synth.seed + 1;
        heldout.count = std::max(20, heldout.count / 10);
        const double acc = mlm_accuracy(ckpt, texts_of(generate_synth(heldout)), pc.mask_prob, a.seed + 1);
        std::printf("held-out masked-token accuracy: %.4f (chance %.4f)\n", acc,
                    1.0 / ckpt.meta.encoder.vocab_size);
    }
    return 0;
}

struct FinetuneArgs {
    std::string ckpt_path;
    CorpusOpts corpus;
    StrategyFlags strategy;
    double lr = 3e-5, warmup = 0.1;
    int epochs = 3, batch = 8;
    uint64_t seed = 0;
    int jobs = 0;
    std::string out_dir = "runs/finetune";
};

TrainConfig resolve_train_config(const FinetuneArgs& a, const LoadedCorpus& corpus) {
    TrainConfig tc;
    tc.base_lr = a.lr;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch;
    tc.warmup_frac = a.warmup;
    tc.seed = a.seed;
    tc.strategy = resolve_strategy(a.strategy, corpus.examples, corpus.num_classes);
    return tc;
}

int run_finetune(const FinetuneArgs& a) {
    apply_jobs(a.jobs);
    const LoadedCorpus corpus = load_corpus(a.corpus);
    const Checkpoint pretrained = load_checkpoint(a.ckpt_path);
    const TrainConfig tc = resolve_train_config(a, corpus);

    const FinetuneResult result = finetune(pretrained, corpus.examples, corpus.num_classes, tc);

    std::filesystem::create_directories(a.out_dir);
    Manifest m;
    m.command = "finetune";
    m.set("ckpt", a.ckpt_path);
    m.set("seed", a.seed);
    m.set("epochs", static_cast<int64_t>(a.epochs));
    m.set("batch", static_cast<int64_t>(a.batch));
    m.set("warmup", a.warmup);
    describe_strategy_into(a.strategy, a.lr, m);
    m.set("corpus", a.corpus.synth.enabled ? std::string("synth") : a.corpus.corpus_path);
    m.set("total_steps", result.total_steps);
    for (const auto& g : result.groups) {
        m.set("group_lr." + g.name, g.lr);
    }
    if (tc.strategy.class_weights.has_value()) {
        std::string w;
        for (size_t i = 0; i < result.resolved_class_weights.size(); ++i) {
            if (i) w += ",";
            w += format_g(result.resolved_class_weights[i]);
        }
        m.set("class_weights", w);
    }
    m.write(a.out_dir + "/manifest.txt");
    write_history_csv(a.out_dir + "/history.csv", run_id_hex(m), a.seed, result);
    save_checkpoint(result.model, a.out_dir + "/model.ftlb");

    std::vector<TableRow> rows;
    rows.push_back({model_label(tc.strategy), format_pct(result.test.precision), format_pct(result.test.recall),
                    format_pct(result.test.accuracy), format_pct(result.test.f_score)});
    print_table(rows);
    return 0;
}

struct GridArgs {
    FinetuneArgs base;
    std::string lr_grid, mixout_grid, reinit_grid;
    bool full = false;
};

int run_grid(const GridArgs& g) {
    std::vector<double> lrs, mixouts;
    std::vector<int> reinits;
    const auto parse_doubles = [](const std::string& s, const std::vector<double>& defaults) {
        if (s == "default") return defaults;
        std::vector<double> out;
        for (const auto& tok : split_list(s, ',')) out.push_back(std::stod(tok));
        return out;
    };
    if (g.full || g.lr_grid == "default") lrs = {1e-5, 3e-5, 5e-5};
    if (g.full || g.mixout_grid == "default") mixouts = {0.3, 0.5, 0.7};
    if (g.full || g.reinit_grid == "default") reinits = {0, 1, 2, 3};
    if (!g.lr_grid.empty() && g.lr_grid != "default") lrs = parse_doubles(g.lr_grid, {});
    if (!g.mixout_grid.empty() && g.mixout_grid != "default") mixouts = parse_doubles(g.mixout_grid, {});
    if (!g.reinit_grid.empty() && g.reinit_grid != "default") {
        reinits.clear();
        for (const auto& tok : split_list(g.reinit_grid, ',')) reinits.push_back(std::stoi(tok));
    }
    if (lrs.empty() && mixouts.empty() && reinits.empty()) {
        throw ConfigError("empty grid: pass --lr-grid / --mixout-grid / --reinit-grid (values or 'default'), or --full");
    }
    // absent axes collapse to the base flags
    if (lrs.empty()) lrs = {g.base.lr};
    if (mixouts.empty()) mixouts = {g.base.strategy.mixout};
    if (reinits.empty()) reinits = {g.base.strategy.reinit};

    const LoadedCorpus corpus = load_corpus(g.base.corpus);
    const Checkpoint pretrained = load_checkpoint(g.base.ckpt_path);

    struct Cell {
        double lr;
        double mixout;
        int reinit;
    };
    std::vector<Cell> cells;
    for (double lr : lrs) {
        for (double mx : mixouts) {
            for (int rn : reinits) cells.push_back({lr, mx, rn});
        }
    }

    std::vector<FinetuneResult> results(cells.size());
    std::vector<TrainConfig> configs(cells.size());
    for (size_t i = 0; i < cells.size(); ++i) {
        FinetuneArgs a = g.base;
        a.lr = cells[i].lr;
        a.strategy.mixout = cells[i].mixout;
        a.strategy.reinit = cells[i].reinit;
        configs[i] = resolve_train_config(a, corpus);
    }
    const int jobs = std::max(1, g.base.jobs);
    const auto run_one = [&](size_t i) { results[i] = finetune(pretrained, corpus.examples, corpus.num_classes, configs[i]); };
    if (jobs <= 1) {
        for (size_t i = 0; i < cells.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < std::min<int>(jobs, static_cast<int>(cells.size())); ++t) {
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) run_one(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::filesystem::create_directories(g.base.out_dir);
    Manifest m;
    m.command = "grid";
    m.set("ckpt", g.base.ckpt_path);
    m.set("seed", g.base.seed);
    m.set("rows", static_cast<int64_t>(cells.size()));
    m.write(g.base.out_dir + "/manifest.txt");

    std::ofstream csv(g.base.out_dir + "/grid.csv", std::ios::trunc);
    csv << "run_id,seed,llrd,mixout,reinit,pool,lr,precision,recall,accuracy,f_score\n";
    std::vector<TableRow> rows;
    for (size_t i = 0; i < cells.size(); ++i) {
        const MetricsReport& t = results[i].test;
        rows.push_back({model_label(configs[i].strategy, configs[i].base_lr), format_pct(t.precision),
                        format_pct(t.recall), format_pct(t.accuracy), format_pct(t.f_score)});
        char buf[320];
        std::snprintf(buf, sizeof buf, "%s,%llu,%s,%g,%d,%s,%.10g,%.10g,%.10g,%.10g,%.10g", run_id_hex(m).c_str(),
                      static_cast<unsigned long long>(g.base.seed), to_string(configs[i].strategy.llrd),
                      configs[i].strategy.mixout_p.value_or(0.0), configs[i].strategy.reinit_n,
                      to_string(configs[i].strategy.pooling), configs[i].base_lr, t.precision, t.recall, t.accuracy,
                      t.f_score);
        csv << buf << "\n";
    }
    print_table(rows);
    std::printf("%zu runs -> %s\n", cells.size(), (g.base.out_dir + "/grid.csv").c_str());
    return 0;
}

struct VarianceArgs {
    FinetuneArgs base;
    std::string seeds = "1,2,3,4,5";
    std::vector<std::string> strategies;  // llrd=...,mixout=...,reinit=...,pool=...,weighted tokens
};

StrategyFlags parse_strategy_string(const std::string& s) {
    StrategyFlags f;
    if (s == "baseline") return f;
    for (const auto& tok : split_list(s, ',')) {
        const size_t eq = tok.find('=');
        const std::string key = tok.substr(0, eq == std::string::npos ? tok.size() : eq);
        const std::string val = eq == std::string::npos ? "" : tok.substr(eq + 1);
        if (key == "llrd") {
            f.llrd = val;
        } else if (key == "mixout") {
            f.mixout = std::stod(val);
        } else if (key == "wdrop") {
            f.wdrop = std::stod(val);
        } else if (key == "reinit") {
            f.reinit = std::stoi(val);
        } else if (key == "pool") {
            f.pool = val;
        } else if (key == "weighted") {
            f.weighted_loss = true;
        } else {
            throw ConfigError("unknown strategy token '" + tok + "'");
        }
    }
    return f;
}

int run_variance(const VarianceArgs& v) {
    std::vector<uint64_t> seeds;
    for (const auto& tok : split_list(v.seeds, ',')) seeds.push_back(std::stoull(tok));
    if (seeds.size() < 2) throw ConfigError("variance needs at least two --seeds");

    std::vector<std::string> strategy_specs = v.strategies;
    if (strategy_specs.empty()) {
        strategy_specs = {"baseline", "llrd=4group,mixout=0.7,reinit=1"};
    }

    const LoadedCorpus corpus = load_corpus(v.base.corpus);
    const Checkpoint pretrained = load_checkpoint(v.base.ckpt_path);

    std::filesystem::create_directories(v.base.out_dir);
    Manifest m;
    m.command = "variance";
    m.set("ckpt", v.base.ckpt_path);
    m.set("seeds", v.seeds);
    m.set("lr", v.base.lr);
    m.set("epochs", static_cast<int64_t>(v.base.epochs));
    for (size_t i = 0; i < strategy_specs.size(); ++i) m.set("strategy." + std::to_string(i), strategy_specs[i]);
    m.write(v.base.out_dir + "/manifest.txt");

    std::ofstream csv(v.base.out_dir + "/variance.csv", std::ios::trunc);
    csv << "run_id,strategy,metric,mean,std\n";

    std::vector<TableRow> rows;
    for (const auto& spec : strategy_specs) {
        FinetuneArgs a = v.base;
        a.strategy = parse_strategy_string(spec);
        const TrainConfig tc = resolve_train_config(a, corpus);
        const VarianceReport r =
            variance_study(pretrained, corpus.examples, corpus.num_classes, tc, seeds, std::max(1, v.base.jobs));
        const std::string label = model_label(tc.strategy);
        rows.push_back({label, format_pct(r.precision.mean) + "+-" + format_pct(r.precision.stdev),
                        format_pct(r.recall.mean) + "+-" + format_pct(r.recall.stdev),
                        format_pct(r.accuracy.mean) + "+-" + format_pct(r.accuracy.stdev),
                        format_pct(r.f_score.mean) + "+-" + format_pct(r.f_score.stdev)});
        const auto csv_row = [&](const char* metric, const MetricStats& s) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "%s,%s,%s,%.10g,%.10g", run_id_hex(m).c_str(), spec.c_str(), metric,
                          s.mean, s.stdev);
            csv << buf << "\n";
        };
        csv_row("precision", r.precision);
        csv_row("recall", r.recall);
        csv_row("accuracy", r.accuracy);
        csv_row("f_score", r.f_score);
    }
    print_table(rows);
    return 0;
}

int run_report(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(csv_path + ": empty file");
    const auto header = split_list(line, ',');
    const auto col = [&](const std::string& name) {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    };
    const int c_prec = col("precision"), c_rec = col("recall"), c_acc = col("accuracy"), c_f = col("f_score");
    if (c_prec < 0 || c_rec < 0 || c_acc < 0 || c_f < 0) {
        throw DataError(csv_path + ": expected precision/recall/accuracy/f_score columns");
    }
    // label: whatever identifying columns exist
    std::vector<int> label_cols;
    for (const char* cand : {"strategy", "llrd", "mixout", "reinit", "pool", "lr", "split", "epoch", "seed"}) {
        const int c = col(cand);
        if (c >= 0) label_cols.push_back(c);
    }
    std::vector<TableRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_list(line, ',');
        std::string label;
        for (int c : label_cols) {
            if (!label.empty()) label += " ";
            label += header[static_cast<size_t>(c)] + "=" + fields[static_cast<size_t>(c)];
        }
        rows.push_back({label, format_pct(std::stod(fields[static_cast<size_t>(c_prec)])),
                        format_pct(std::stod(fields[static_cast<size_t>(c_rec)])),
                        format_pct(std::stod(fields[static_cast<size_t>(c_acc)])),
                        format_pct(std::stod(fields[static_cast<size_t>(c_f)]))});
    }
    print_table(rows);
    return 0;
}

// Flat key=value config file support: entries become defaults that explicit
// flags override.
std::vector<std::string> config_file_args(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::vector<std::string> args;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
        args.push_back("--" + line.substr(0, eq));
        args.push_back(line.substr(eq + 1));
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fine-tuning laboratory: variance-aware strategies on a desk-scale encoder"};
    app.require_subcommand(1);
    // config-file entries become defaults; a flag given twice keeps the last value
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    PretrainArgs pa;
    GridArgs ga;
    VarianceArgs va;
    FinetuneArgs fa;
    std::string report_csv;

    CLI::App* pretrain = app.add_subcommand("pretrain", "masked-token toy pretraining to mint a checkpoint");
    add_corpus_flags(pretrain, pa.corpus);
    pretrain->add_option("--layers", pa.layers);
    pretrain->add_option("--hidden", pa.hidden);
    pretrain->add_option("--heads", pa.heads);
    pretrain->add_option("--ff", pa.ff);
    pretrain->add_option("--max-seq", pa.max_seq);
    pretrain->add_option("--vocab-cap", pa.vocab_cap, "vocabulary size limit");
    pretrain->add_option("--dropout", pa.dropout);
    pretrain->add_option("--steps", pa.steps);
    pretrain->add_option("--batch", pa.batch);
    pretrain->add_option("--lr", pa.lr);
    pretrain->add_option("--warmup", pa.warmup);
    pretrain->add_option("--mask-prob", pa.mask_prob);
    pretrain->add_option("--seed", pa.seed);
    pretrain->add_option("--jobs", pa.jobs, "1 = strictly single-threaded");
    pretrain->add_option("--out", pa.out_dir);

    const auto add_finetune_flags = [](CLI::App* cmd, FinetuneArgs& a) {
        cmd->add_option("--ckpt", a.ckpt_path, "pretrained checkpoint")->required();
        add_corpus_flags(cmd, a.corpus);
        add_strategy_flags(cmd, a.strategy);
        cmd->add_option("--lr", a.lr, "peak learning rate");
        cmd->add_option("--epochs", a.epochs);
        cmd->add_option("--batch", a.batch);
        cmd->add_option("--warmup", a.warmup);
        cmd->add_option("--seed", a.seed);
        cmd->add_option("--jobs", a.jobs, "single runs: 1 pins one thread; grid/variance: parallel workers");
        cmd->add_option("--out", a.out_dir);
    };

    CLI::App* finetune_cmd = app.add_subcommand("finetune", "one fine-tuning run with the chosen strategies");
    add_finetune_flags(finetune_cmd, fa);

    CLI::App* grid = app.add_subcommand("grid", "cross-product of lr / mixout / re-init grids");
    add_finetune_flags(grid, ga.base);
    ga.base.out_dir = "runs/grid";
    grid->add_option("--lr-grid", ga.lr_grid, "comma list or 'default' ({1e-5,3e-5,5e-5})");
    grid->add_option("--mixout-grid", ga.mixout_grid, "comma list or 'default' ({0.3,0.5,0.7})");
    grid->add_option("--reinit-grid", ga.reinit_grid, "comma list or 'default' ({0,1,2,3})");
    grid->add_flag("--full", ga.full, "all three default grids");

    CLI::App* variance = app.add_subcommand("variance", "cross-seed mean and spread per strategy");
    add_finetune_flags(variance, va.base);
    va.base.out_dir = "runs/variance";
    variance->add_option("--seeds", va.seeds, "comma-separated seed list (at least two)");
    variance->add_option("--strategy", va.strategies,
                         "strategy spec: 'baseline' or tokens like llrd=4group,mixout=0.7,reinit=1 (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

    CLI::App* report = app.add_subcommand("report", "render a results CSV as an aligned table");
    report->add_option("--csv", report_csv, "grid/variance/history CSV")->required();

    // --config <file>: flat key=value defaults, flags take precedence
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        for (size_t i = 0; i + 1 < args.size(); ++i) {
            if (args[i] == "--config") {
                const auto extra = config_file_args(args[i + 1]);
                args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
                // inject after the subcommand name so flags that follow win
                const size_t insert_at = args.empty() ? 0 : 1;
                args.insert(args.begin() + static_cast<long>(insert_at), extra.begin(), extra.end());
                break;
            }
        }

        std::vector<const char*> cargs;
        cargs.push_back(argv[0]);
        for (const auto& s : args) cargs.push_back(s.c_str());
        app.parse(static_cast<int>(cargs.size()), cargs.data());

        if (pretrain->parsed()) return run_pretrain(pa);
        if (finetune_cmd->parsed()) return run_finetune(fa);
        if (grid->parsed()) return run_grid(ga);
        if (variance->parsed()) return run_variance(va);
        if (report->parsed()) return run_report(report_csv);
        return kExitUsage;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitFormat;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
