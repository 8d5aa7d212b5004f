#include "ftlab/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "ftlab/error.hpp"
#include "ftlab/rng.hpp"

namespace ftlab {

namespace {
const char* kSpecialNames[Vocabulary::kNumSpecials] = {"<pad>", "<unk>", "<s>", "</s>", "<mask>"};
}

std::vector<std::string> split_lowercase_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> corpus_tokens) {
    Vocabulary v;
    v.id_to_token_.reserve(corpus_tokens.size() + kNumSpecials);
    for (const char* s : kSpecialNames) v.id_to_token_.emplace_back(s);
    for (auto& t : corpus_tokens) v.id_to_token_.push_back(std::move(t));
    for (size_t i = 0; i < v.id_to_token_.size(); ++i) {
        auto [it, fresh] = v.token_to_id_.emplace(v.id_to_token_[i], static_cast<int>(i));
        if (!fresh) throw DataError("duplicate vocabulary token: " + v.id_to_token_[i]);
    }
    return v;
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, int max_size) {
    if (max_size <= kNumSpecials) throw ConfigError("vocabulary size must exceed the special-token count");
    std::map<std::string, int64_t> counts;  // ordered map keeps tie-breaks deterministic
    for (const auto& text : texts) {
        for (auto& tok : split_lowercase_tokens(text)) counts[tok] += 1;
    }
    std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    const size_t keep = std::min(ranked.size(), static_cast<size_t>(max_size - kNumSpecials));
    std::vector<std::string> tokens;
    tokens.reserve(keep);
    for (size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
    return from_tokens(std::move(tokens));
}

int Vocabulary::id_of(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnk : it->second;
}

std::vector<std::string> Vocabulary::corpus_tokens() const {
    return {id_to_token_.begin() + kNumSpecials, id_to_token_.end()};
}

uint64_t Vocabulary::hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : id_to_token_) {
        for (unsigned char c : t) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        h ^= '\n';
        h *= 0x100000001b3ull;
    }
    return h;
}

Encoded tokenize(const Vocabulary& vocab, std::string_view text, int max_len) {
    if (max_len < 2) throw ContractError("tokenize: max_len must allow BOS and EOS");
    Encoded enc;
    enc.ids.assign(static_cast<size_t>(max_len), Vocabulary::kPad);
    enc.mask.assign(static_cast<size_t>(max_len), 0);
    const auto tokens = split_lowercase_tokens(text);
    const size_t keep = std::min(tokens.size(), static_cast<size_t>(max_len - 2));
    size_t pos = 0;
    enc.ids[pos++] = Vocabulary::kBos;
    for (size_t i = 0; i < keep; ++i) enc.ids[pos++] = vocab.id_of(tokens[i]);
    enc.ids[pos++] = Vocabulary::kEos;
    for (size_t i = 0; i < pos; ++i) enc.mask[i] = 1;
    return enc;
}

}  // namespace ftlab
