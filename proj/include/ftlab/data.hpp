#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ftlab/error.hpp"

namespace ftlab {

struct LabeledExample {
    std::string text;
    int label = 0;
    int stage = 1;
};

// Label ids for the two classification stages. Stage 1 is the coarse binary
// task; rows labeled explicit_hate are not part of it and get skipped by the
// loader. Stage 2 is the six-way fine-grained task.
struct LabelSchema {
    int stage;
    std::vector<std::string> names;  // id -> canonical lowercase name

    static const LabelSchema& stage1();
    static const LabelSchema& stage2();
    static const LabelSchema& for_stage(int stage);

    int num_classes() const { return static_cast<int>(names.size()); }
    std::optional<int> id_of(std::string_view name) const;  // case-insensitive
};

struct TsvLoadResult {
    std::vector<LabeledExample> examples;
    int64_t skipped_explicit = 0;
    int64_t rows = 0;  // data rows seen (header excluded)
};

// Tab-separated file with one header row. Column names are configurable;
// fields must not contain tabs. CRLF and LF endings both accepted.
TsvLoadResult load_tsv(const std::string& path, int stage, const std::string& text_col = "text",
                       const std::string& label_col = "label");

struct SynthTaskSpec {
    int num_classes = 2;
    int vocab_size = 100;
    int markers_per_class = 3;
    double marker_prob = 0.8;   // probability a token is one of the class's markers
    double noise_rate = 0.05;   // probability a token is uniform over the whole vocabulary
    std::vector<double> priors; // empty = uniform
    int min_len = 6;
    int max_len = 12;
    int count = 500;
    uint64_t seed = 0;

    void validate() const;
    std::vector<double> resolved_priors() const;
};

// Synthetic classification corpus: each example draws a class from the
// priors and emits tokens that are class markers with probability
// marker_prob, fully random vocabulary tokens with probability noise_rate,
// and shared filler tokens otherwise. Deterministic per seed.
std::vector<LabeledExample> generate_synth(const SynthTaskSpec& spec);

struct CorpusStats {
    std::vector<int64_t> class_counts;
    std::map<int, int64_t> length_histogram;  // token count -> examples
    int64_t total = 0;
};

CorpusStats corpus_stats(const std::vector<LabeledExample>& examples, int num_classes);

std::vector<std::string> texts_of(const std::vector<LabeledExample>& examples);

}  // namespace ftlab
