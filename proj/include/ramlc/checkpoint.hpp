// Versioned checkpoint container for both training phases.
//
// Layout (all integers little-endian, tensor data 32-bit floats):
//   magic "RMLCKPT1" | u32 version | u8 phase (0 vanilla, 1 ra)
//   encoder config: u32 dim, enc_layers, enc_heads, ffn_dim, max_seq_len,
//                   vocab_size | f64 dropout
//   u64 vocab fingerprint
//   phase ra only: u32 ca_layers, ca_heads, k | u8 neighbor mode
//                  | u64 repository fingerprint | u64 source fingerprint
//   u32 param count, then per param (name-sorted):
//     string name | u32 rank | u32 extents[rank] | f32 data[numel]
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "ramlc/model_config.hpp"
#include "ramlc/param_store.hpp"
#include "ramlc/serialize.hpp"
#include "ramlc/tensor.hpp"

namespace ramlc {

constexpr char kCheckpointMagic[9] = "RMLCKPT1";
constexpr std::uint32_t kCheckpointVersion = 1;

// Content hash of a parameter set; identifies the encoder that produced a
// repository and the phase-1 source of a phase-2 model.
inline std::uint64_t params_fingerprint(const ParamStore& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& name : params.names()) {
        h = io::fnv1a(name.data(), name.size(), h);
        const auto& t = params.value(name);
        for (std::size_t e : t.shape()) {
            const std::uint32_t ext = static_cast<std::uint32_t>(e);
            h = io::fnv1a(&ext, sizeof(ext), h);
        }
        h = io::fnv1a(t.data(), t.numel() * sizeof(float), h);
    }
    return h;
}

struct Checkpoint {
    std::string phase;  // "vanilla" | "ra"
    EncoderConfig encoder;
    std::uint64_t vocab_fingerprint = 0;
    std::optional<CrossAttentionConfig> ca;   // phase "ra"
    std::uint64_t repo_fingerprint = 0;       // phase "ra"
    std::uint64_t source_fingerprint = 0;     // phase "ra": fingerprint of the phase-1 params
    ParamStore params;

    std::uint64_t fingerprint() const { return params_fingerprint(params); }
    std::size_t label_count() const { return params.value("head.b").numel(); }
};

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io::FormatError("cannot write " + path.string());
    io::write_bytes(out, kCheckpointMagic, 8);
    io::write_u32(out, kCheckpointVersion);
    io::write_u8(out, ckpt.phase == "ra" ? 1 : 0);
    const EncoderConfig& e = ckpt.encoder;
    io::write_u32(out, static_cast<std::uint32_t>(e.dim));
    io::write_u32(out, static_cast<std::uint32_t>(e.enc_layers));
    io::write_u32(out, static_cast<std::uint32_t>(e.enc_heads));
    io::write_u32(out, static_cast<std::uint32_t>(e.ffn_dim));
    io::write_u32(out, static_cast<std::uint32_t>(e.max_seq_len));
    io::write_u32(out, static_cast<std::uint32_t>(e.vocab_size));
    io::write_f64(out, e.dropout);
    io::write_u64(out, ckpt.vocab_fingerprint);
    if (ckpt.phase == "ra") {
        if (!ckpt.ca) throw io::FormatError("ra checkpoint missing cross-attention config");
        io::write_u32(out, static_cast<std::uint32_t>(ckpt.ca->ca_layers));
        io::write_u32(out, static_cast<std::uint32_t>(ckpt.ca->ca_heads));
        io::write_u32(out, static_cast<std::uint32_t>(ckpt.ca->k));
        io::write_u8(out, static_cast<std::uint8_t>(ckpt.ca->mode));
        io::write_u64(out, ckpt.repo_fingerprint);
        io::write_u64(out, ckpt.source_fingerprint);
    }
    const auto names = ckpt.params.names();
    io::write_u32(out, static_cast<std::uint32_t>(names.size()));
    for (const auto& name : names) {
        io::write_string(out, name);
        const Tensor& t = ckpt.params.value(name);
        io::write_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t ext : t.shape()) io::write_u32(out, static_cast<std::uint32_t>(ext));
        io::write_f32_array(out, t.data(), t.numel());
    }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io::FormatError("cannot open " + path.string());
    io::expect_magic(in, kCheckpointMagic, "checkpoint");
    const std::uint32_t version = io::read_u32(in);
    if (version != kCheckpointVersion)
        throw io::FormatError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.phase = io::read_u8(in) == 1 ? "ra" : "vanilla";
    ckpt.encoder.dim = io::read_u32(in);
    ckpt.encoder.enc_layers = io::read_u32(in);
    ckpt.encoder.enc_heads = io::read_u32(in);
    ckpt.encoder.ffn_dim = io::read_u32(in);
    ckpt.encoder.max_seq_len = io::read_u32(in);
    ckpt.encoder.vocab_size = io::read_u32(in);
    ckpt.encoder.dropout = io::read_f64(in);
    ckpt.vocab_fingerprint = io::read_u64(in);
    if (ckpt.phase == "ra") {
        CrossAttentionConfig ca;
        ca.ca_layers = io::read_u32(in);
        ca.ca_heads = io::read_u32(in);
        ca.k = io::read_u32(in);
        ca.mode = static_cast<NeighborMode>(io::read_u8(in));
        ckpt.ca = ca;
        ckpt.repo_fingerprint = io::read_u64(in);
        ckpt.source_fingerprint = io::read_u64(in);
    }
    const std::uint32_t count = io::read_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = io::read_string(in);
        const std::uint32_t rank = io::read_u32(in);
        Shape shape(rank);
        for (auto& e : shape) e = io::read_u32(in);
        Tensor t(shape);
        for (std::size_t j = 0; j < t.numel(); ++j) t[j] = io::read_f32(in);
        ckpt.params.add(name, std::move(t));
    }
    return ckpt;
}

}  // namespace ramlc
