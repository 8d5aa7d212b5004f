#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ftlab {

// Whitespace/lowercase vocabulary with fixed special ids.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;
    static constexpr int kEos = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumSpecials = 5;

    // Corpus tokens ranked by (count desc, token asc), capped at
    // max_size - kNumSpecials entries.
    static Vocabulary build(std::span<const std::string> texts, int max_size);
    // Reconstructs a vocabulary from an already-ordered corpus token list
    // (checkpoint metadata round trip).
    static Vocabulary from_tokens(std::vector<std::string> corpus_tokens);

    int size() const { return static_cast<int>(id_to_token_.size()); }
    int id_of(std::string_view token) const;               // kUnk when absent
    const std::string& token_of(int id) const { return id_to_token_[static_cast<size_t>(id)]; }
    bool is_special(int id) const { return id < kNumSpecials; }

    // Corpus tokens in id order (specials excluded).
    std::vector<std::string> corpus_tokens() const;
    uint64_t hash() const;

private:
    Vocabulary() = default;
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

std::vector<std::string> split_lowercase_tokens(std::string_view text);

struct Encoded {
    std::vector<int> ids;   // length max_len
    std::vector<int> mask;  // 1 on non-pad positions
};

// BOS, tokens (truncated to max_len - 2), EOS, then PAD to max_len.
Encoded tokenize(const Vocabulary& vocab, std::string_view text, int max_len);

}  // namespace ftlab
