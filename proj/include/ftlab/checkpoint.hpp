#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftlab/encoder.hpp"
#include "ftlab/named_tensors.hpp"

namespace ftlab {

// Binary model-state file. Layout (all little-endian):
//   magic "FTLB", u32 version, u32 entry count,
//   per entry: u16 name length, name bytes, u8 rank, rank x u32 dims,
//              element count x f64 payload,
//   trailing u32-length-prefixed UTF-8 metadata text (key=value lines).
inline constexpr char kCheckpointMagic[4] = {'F', 'T', 'L', 'B'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    EncoderConfig encoder;
    uint64_t vocab_hash = 0;
    uint64_t seed = 0;
    bool pretrained = false;
    std::vector<std::string> vocab_tokens;  // corpus tokens in id order

    std::string to_text() const;
    static CheckpointMeta from_text(const std::string& text, size_t base_offset);
};

struct Checkpoint {
    CheckpointMeta meta;
    NamedTensors params;
};

std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ftlab
