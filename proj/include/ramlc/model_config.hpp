// Model hyperparameter bundles shared by the classifiers and checkpoints.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ramlc {

struct EncoderConfig {
    std::size_t dim = 64;
    std::size_t enc_layers = 2;
    std::size_t enc_heads = 4;
    std::size_t ffn_dim = 128;
    std::size_t max_seq_len = 256;
    std::size_t vocab_size = 0;
    double dropout = 0.1;

    void validate() const {
        if (dim == 0 || enc_layers == 0 || enc_heads == 0 || ffn_dim == 0 || max_seq_len == 0 ||
            vocab_size == 0)
            throw std::invalid_argument("encoder config: all extents must be positive");
        if (dim % enc_heads != 0)
            throw std::invalid_argument("encoder config: dim must be divisible by enc_heads");
        if (dropout < 0.0 || dropout >= 1.0)
            throw std::invalid_argument("encoder config: dropout must be in [0, 1)");
    }
};

enum class NeighborMode : std::uint8_t { kText = 0, kLabels = 1, kTextLabels = 2 };

inline std::string neighbor_mode_name(NeighborMode mode) {
    switch (mode) {
        case NeighborMode::kText: return "text";
        case NeighborMode::kLabels: return "labels";
        case NeighborMode::kTextLabels: return "text+labels";
    }
    throw std::invalid_argument("bad neighbor mode");
}

inline NeighborMode parse_neighbor_mode(const std::string& name) {
    if (name == "text") return NeighborMode::kText;
    if (name == "labels") return NeighborMode::kLabels;
    if (name == "text+labels") return NeighborMode::kTextLabels;
    throw std::invalid_argument("bad neighbor mode: " + name +
                                " (expected text|labels|text+labels)");
}

struct CrossAttentionConfig {
    std::size_t ca_layers = 2;
    std::size_t ca_heads = 2;
    std::size_t k = 4;
    NeighborMode mode = NeighborMode::kText;

    void validate(std::size_t dim) const {
        auto in_grid = [](std::size_t v) { return v == 1 || v == 2 || v == 4; };
        if (!in_grid(ca_layers) || !in_grid(ca_heads))
            throw std::invalid_argument("cross-attention config: layers and heads must be 1, 2 or 4");
        if (k < 1) throw std::invalid_argument("cross-attention config: k must be >= 1");
        if (dim % ca_heads != 0)
            throw std::invalid_argument("cross-attention config: dim must be divisible by ca_heads");
    }
};

}  // namespace ramlc
