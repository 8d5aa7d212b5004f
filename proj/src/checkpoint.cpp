#include "ftlab/checkpoint.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ftlab/vocab.hpp"

namespace ftlab {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<uint8_t>& out, double d) {
    const uint64_t bits = std::bit_cast<uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        if (pos + n > bytes.size()) {
            throw FormatError(std::string("truncated checkpoint: expected ") + what, pos);
        }
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return bytes[pos++];
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
    std::string str(size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
};

std::string format_double(double d) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

}  // namespace

std::string CheckpointMeta::to_text() const {
    std::ostringstream os;
    os << "encoder.num_layers=" << encoder.num_layers << "\n";
    os << "encoder.hidden=" << encoder.hidden << "\n";
    os << "encoder.heads=" << encoder.heads << "\n";
    os << "encoder.ff_dim=" << encoder.ff_dim << "\n";
    os << "encoder.vocab_size=" << encoder.vocab_size << "\n";
    os << "encoder.max_seq_len=" << encoder.max_seq_len << "\n";
    os << "encoder.dropout_p=" << format_double(encoder.dropout_p) << "\n";
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016" PRIx64, vocab_hash);
    os << "vocab_hash=" << hex << "\n";
    os << "seed=" << seed << "\n";
    os << "pretrained=" << (pretrained ? 1 : 0) << "\n";
    os << "vocab=";
    for (size_t i = 0; i < vocab_tokens.size(); ++i) {
        if (i) os << ' ';
        os << vocab_tokens[i];
    }
    os << "\n";
    return os.str();
}

CheckpointMeta CheckpointMeta::from_text(const std::string& text, size_t base_offset) {
    CheckpointMeta meta;
    std::istringstream in(text);
    std::string line;
    bool saw_layers = false;
    while (std::getline(in, line)) {
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("metadata line without '='", base_offset);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "encoder.num_layers") {
                meta.encoder.num_layers = std::stoi(val);
                saw_layers = true;
            } else if (key == "encoder.hidden") {
                meta.encoder.hidden = std::stoi(val);
            } else if (key == "encoder.heads") {
                meta.encoder.heads = std::stoi(val);
            } else if (key == "encoder.ff_dim") {
                meta.encoder.ff_dim = std::stoi(val);
            } else if (key == "encoder.vocab_size") {
                meta.encoder.vocab_size = std::stoi(val);
            } else if (key == "encoder.max_seq_len") {
                meta.encoder.max_seq_len = std::stoi(val);
            } else if (key == "encoder.dropout_p") {
                meta.encoder.dropout_p = std::stod(val);
            } else if (key == "vocab_hash") {
                meta.vocab_hash = std::stoull(val, nullptr, 16);
            } else if (key == "seed") {
                meta.seed = std::stoull(val);
            } else if (key == "pretrained") {
                meta.pretrained = val == "1";
            } else if (key == "vocab") {
                std::istringstream toks(val);
                std::string t;
                while (toks >> t) meta.vocab_tokens.push_back(t);
            }
            // unknown keys are ignored for forward compatibility
        } catch (const std::exception&) {
            throw FormatError("bad metadata value for key '" + key + "'", base_offset);
        }
    }
    if (!saw_layers) throw FormatError("metadata is missing the encoder config", base_offset);
    return meta;
}

std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<uint32_t>(ckpt.params.size()));
    for (const auto& e : ckpt.params) {
        if (e.name.size() > 0xffff) throw ContractError("parameter name too long: " + e.name);
        put_u16(out, static_cast<uint16_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.push_back(static_cast<uint8_t>(e.tensor.rank()));
        for (int d : e.tensor.dims()) put_u32(out, static_cast<uint32_t>(d));
        for (int64_t i = 0; i < e.tensor.size(); ++i) put_f64(out, e.tensor[i]);
    }
    const std::string meta = ckpt.meta.to_text();
    put_u32(out, static_cast<uint32_t>(meta.size()));
    out.insert(out.end(), meta.begin(), meta.end());
    return out;
}

Checkpoint parse_checkpoint(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("bad magic, not a checkpoint file", 0);
    }
    r.pos = 4;
    const uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    const uint32_t count = r.u32("entry count");
    Checkpoint ckpt;
    for (uint32_t e = 0; e < count; ++e) {
        const uint16_t name_len = r.u16("entry name length");
        const std::string name = r.str(name_len, "entry name");
        const uint8_t rank = r.u8("entry rank");
        if (rank == 0 || rank > 8) throw FormatError("implausible tensor rank for '" + name + "'", r.pos - 1);
        std::vector<int> dims;
        int64_t n = 1;
        for (int d = 0; d < rank; ++d) {
            const uint32_t dim = r.u32("entry dims");
            if (dim == 0 || dim > (1u << 28)) throw FormatError("implausible dimension for '" + name + "'", r.pos - 4);
            dims.push_back(static_cast<int>(dim));
            n *= dim;
        }
        std::vector<double> values(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) values[static_cast<size_t>(i)] = r.f64("tensor payload");
        ckpt.params.add(name, Tensor(std::move(dims), std::move(values)));
    }
    const size_t meta_at = r.pos;
    const uint32_t meta_len = r.u32("metadata length");
    const std::string meta_text = r.str(meta_len, "metadata");
    if (r.pos != bytes.size()) throw FormatError("trailing data after checkpoint", r.pos);
    ckpt.meta = CheckpointMeta::from_text(meta_text, meta_at);
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

}  // namespace ftlab
