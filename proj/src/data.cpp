#include "ftlab/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ftlab/rng.hpp"
#include "ftlab/vocab.hpp"

namespace ftlab {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

}  // namespace

const LabelSchema& LabelSchema::stage1() {
    static const LabelSchema s{1, {"not_hate", "implicit_hate"}};
    return s;
}

const LabelSchema& LabelSchema::stage2() {
    static const LabelSchema s{2, {"grievance", "incitement", "inferiority", "irony", "stereotypical", "threatening"}};
    return s;
}

const LabelSchema& LabelSchema::for_stage(int stage) {
    if (stage == 1) return stage1();
    if (stage == 2) return stage2();
    throw DataError("unknown stage " + std::to_string(stage) + " (expected 1 or 2)");
}

std::optional<int> LabelSchema::id_of(std::string_view name) const {
    const std::string lower = lowercase(name);
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == lower) return static_cast<int>(i);
    }
    return std::nullopt;
}

TsvLoadResult load_tsv(const std::string& path, int stage, const std::string& text_col,
                       const std::string& label_col) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    const LabelSchema& schema = LabelSchema::for_stage(stage);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file, expected a header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_tabs(line);
    int text_idx = -1, label_idx = -1;
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == text_col) text_idx = static_cast<int>(i);
        if (header[i] == label_col) label_idx = static_cast<int>(i);
    }
    if (text_idx < 0) throw DataError(path + ": header has no column named '" + text_col + "'");
    if (label_idx < 0) throw DataError(path + ": header has no column named '" + label_col + "'");

    TsvLoadResult result;
    int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != header.size()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
        }
        ++result.rows;
        const std::string label = lowercase(fields[static_cast<size_t>(label_idx)]);
        if (stage == 1 && label == "explicit_hate") {
            ++result.skipped_explicit;
            continue;
        }
        const auto id = schema.id_of(label);
        if (!id.has_value()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": unknown stage-" + std::to_string(stage) +
                            " label '" + label + "'");
        }
        result.examples.push_back({fields[static_cast<size_t>(text_idx)], *id, stage});
    }
    return result;
}

void SynthTaskSpec::validate() const {
    if (num_classes < 2) throw ConfigError("synth: need at least 2 classes");
    if (markers_per_class < 1) throw ConfigError("synth: need at least 1 marker token per class");
    if (vocab_size <= num_classes * markers_per_class) {
        throw ConfigError("synth: vocab_size must exceed the marker token count");
    }
    if (marker_prob < 0.0 || marker_prob > 1.0 || noise_rate < 0.0 || noise_rate > 1.0 ||
        marker_prob + noise_rate > 1.0) {
        throw ConfigError("synth: marker_prob and noise_rate must be probabilities with sum <= 1");
    }
    if (min_len < 1 || max_len < min_len) throw ConfigError("synth: bad sequence length range");
    if (count < 1) throw ConfigError("synth: count must be positive");
    if (!priors.empty()) {
        if (static_cast<int>(priors.size()) != num_classes) throw ConfigError("synth: one prior per class required");
        double sum = 0.0;
        for (double p : priors) {
            if (!(p > 0.0)) throw ConfigError("synth: priors must be positive");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("synth: priors must sum to 1");
    }
}

std::vector<double> SynthTaskSpec::resolved_priors() const {
    if (!priors.empty()) return priors;
    return std::vector<double>(static_cast<size_t>(num_classes), 1.0 / num_classes);
}

std::vector<LabeledExample> generate_synth(const SynthTaskSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const auto priors = spec.resolved_priors();
    const int marker_span = spec.num_classes * spec.markers_per_class;
    const int filler_span = spec.vocab_size - marker_span;

    std::vector<LabeledExample> out;
    out.reserve(static_cast<size_t>(spec.count));
    for (int e = 0; e < spec.count; ++e) {
        const double u = rng.next_double();
        int cls = spec.num_classes - 1;
        double acc = 0.0;
        for (int c = 0; c < spec.num_classes; ++c) {
            acc += priors[static_cast<size_t>(c)];
            if (u < acc) {
                cls = c;
                break;
            }
        }
        const int len = spec.min_len + static_cast<int>(rng.next_below(static_cast<uint32_t>(spec.max_len - spec.min_len + 1)));
        std::ostringstream text;
        for (int t = 0; t < len; ++t) {
            const double r = rng.next_double();
            int token_id;
            if (r < spec.marker_prob) {
                token_id = cls * spec.markers_per_class + static_cast<int>(rng.next_below(static_cast<uint32_t>(spec.markers_per_class)));
            } else if (r < spec.marker_prob + spec.noise_rate) {
                token_id = static_cast<int>(rng.next_below(static_cast<uint32_t>(spec.vocab_size)));
            } else {
                token_id = marker_span + static_cast<int>(rng.next_below(static_cast<uint32_t>(filler_span)));
            }
            if (t) text << ' ';
            text << 'w' << token_id;
        }
        out.push_back({text.str(), cls, spec.num_classes == 2 ? 1 : 2});
    }
    return out;
}

CorpusStats corpus_stats(const std::vector<LabeledExample>& examples, int num_classes) {
    if (examples.empty()) throw DataError("corpus_stats: empty corpus");
    CorpusStats s;
    s.class_counts.assign(static_cast<size_t>(num_classes), 0);
    for (const auto& ex : examples) {
        if (ex.label < 0 || ex.label >= num_classes) {
            throw DataError("corpus_stats: label " + std::to_string(ex.label) + " out of range");
        }
        s.class_counts[static_cast<size_t>(ex.label)] += 1;
        s.length_histogram[static_cast<int>(split_lowercase_tokens(ex.text).size())] += 1;
        s.total += 1;
    }
    return s;
}

std::vector<std::string> texts_of(const std::vector<LabeledExample>& examples) {
    std::vector<std::string> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(ex.text);
    return out;
}

}  // namespace ftlab
