// Phase-1 vanilla classifier: pre-norm transformer encoder with CLS pooling
// and one sigmoid head per label.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ramlc/model_config.hpp"
#include "ramlc/param_store.hpp"
#include "ramlc/rng.hpp"
#include "ramlc/tape.hpp"
#include "ramlc/text.hpp"

namespace ramlc {

// Inverted dropout; masks come from the caller's RNG so training stays
// deterministic under any thread schedule.
struct DropoutCtx {
    double rate;
    Rng& rng;
};

namespace nn {

template <typename Real>
typename TapeT<Real>::Id dropout(TapeT<Real>& tape, typename TapeT<Real>::Id x,
                                 DropoutCtx* ctx) {
    if (ctx == nullptr || ctx->rate <= 0.0) return x;
    TensorT<Real> mask(tape.value(x).shape());
    const Real keep = static_cast<Real>(1.0 / (1.0 - ctx->rate));
    for (auto& v : mask.raw()) v = ctx->rng.uniform() >= ctx->rate ? keep : Real(0);
    return tape.mul(x, tape.leaf(std::move(mask)));
}

inline std::string idx(const std::string& stem, std::size_t i) {
    return stem + std::to_string(i);
}

// Multi-head scaled dot-product attention. Queries come from `query_rows`,
// keys/values from `kv_rows`; scores are scaled by sqrt(dim/heads).
// Parameters live under `prefix`: wq{h}, wk{h}, wv{h}, wo, bo.
template <typename Real>
typename TapeT<Real>::Id multi_head_attention(TapeT<Real>& tape, ParamLeaves<Real>& leaves,
                                              const std::string& prefix,
                                              typename TapeT<Real>::Id query_rows,
                                              typename TapeT<Real>::Id kv_rows,
                                              std::size_t heads, std::size_t dim) {
    const std::size_t head_dim = dim / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<typename TapeT<Real>::Id> contexts;
    contexts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        auto q = tape.matmul(query_rows, leaves(prefix + idx(".wq", h)));
        auto k = tape.matmul(kv_rows, leaves(prefix + idx(".wk", h)));
        auto v = tape.matmul(kv_rows, leaves(prefix + idx(".wv", h)));
        auto attn = tape.softmax_rows(tape.scale(tape.matmul_nt(q, k), inv_sqrt));
        contexts.push_back(tape.matmul(attn, v));
    }
    auto merged = contexts.size() == 1 ? contexts[0] : tape.concat_cols(contexts);
    return tape.add(tape.matmul(merged, leaves(prefix + ".wo")), leaves(prefix + ".bo"));
}

}  // namespace nn

// Builds the encoder graph for one document and returns the CLS row (1 x dim)
// after the final layer norm. Shared by the vanilla and the
// retrieval-augmented model, which differ only in what happens after pooling.
template <typename Real>
typename TapeT<Real>::Id encode_on_tape(TapeT<Real>& tape, ParamLeaves<Real>& leaves,
                                        const EncoderConfig& cfg,
                                        std::span<const std::size_t> token_ids,
                                        DropoutCtx* drop = nullptr) {
    if (token_ids.empty()) throw std::invalid_argument("encode: empty token sequence");
    if (token_ids.size() > cfg.max_seq_len)
        throw std::invalid_argument("encode: sequence length " +
                                    std::to_string(token_ids.size()) + " exceeds max_seq_len " +
                                    std::to_string(cfg.max_seq_len) + "; caller must truncate");

    std::vector<std::size_t> positions(token_ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;

    auto h = tape.add(tape.embedding(leaves("emb.tok"), {token_ids.begin(), token_ids.end()}),
                      tape.embedding(leaves("emb.pos"), positions));
    h = nn::dropout(tape, h, drop);

    for (std::size_t layer = 0; layer < cfg.enc_layers; ++layer) {
        const std::string p = nn::idx("enc", layer);
        auto normed = tape.layer_norm(h, leaves(p + ".ln1.g"), leaves(p + ".ln1.b"));
        auto attn = nn::multi_head_attention(tape, leaves, p + ".attn", normed, normed,
                                             cfg.enc_heads, cfg.dim);
        h = tape.add(h, nn::dropout(tape, attn, drop));

        auto ff_in = tape.layer_norm(h, leaves(p + ".ln2.g"), leaves(p + ".ln2.b"));
        auto ff = tape.gelu(tape.add(tape.matmul(ff_in, leaves(p + ".ffn.w1")),
                                     leaves(p + ".ffn.b1")));
        ff = tape.add(tape.matmul(ff, leaves(p + ".ffn.w2")), leaves(p + ".ffn.b2"));
        h = tape.add(h, nn::dropout(tape, ff, drop));
    }

    auto final_norm = tape.layer_norm(h, leaves("enc_out.ln.g"), leaves("enc_out.ln.b"));
    return tape.take_row(final_norm, 0);
}

template <typename Real>
typename TapeT<Real>::Id classify_logits_on_tape(TapeT<Real>& tape, ParamLeaves<Real>& leaves,
                                                 typename TapeT<Real>::Id pooled_row) {
    return tape.add(tape.matmul(pooled_row, leaves("head.w")), leaves("head.b"));
}

// Stable mean BCE over labels; accepts raw logits.
template <typename Real>
Real bce_loss(const TensorT<Real>& logits, const TensorT<Real>& targets) {
    TapeT<Real> tape;
    auto loss = tape.bce_with_logits(tape.leaf(logits), targets);
    return tape.value(loss)[0];
}

template <typename Real>
struct VanillaClassifierT {
    EncoderConfig config;
    std::size_t label_count = 0;
    std::uint64_t vocab_fingerprint = 0;
    ParamStoreT<Real> params;

    static VanillaClassifierT init(const EncoderConfig& cfg, std::size_t label_count,
                                   std::uint64_t vocab_fp, std::uint64_t seed) {
        cfg.validate();
        if (label_count == 0) throw std::invalid_argument("init: label_count must be positive");
        VanillaClassifierT model;
        model.config = cfg;
        model.label_count = label_count;
        model.vocab_fingerprint = vocab_fp;
        Rng rng(derive_seed(seed, 0x11a5));

        auto& p = model.params;
        p.add("emb.tok", normal_init<Real>(Shape{cfg.vocab_size, cfg.dim}, rng));
        p.add("emb.pos", normal_init<Real>(Shape{cfg.max_seq_len, cfg.dim}, rng));
        const std::size_t head_dim = cfg.dim / cfg.enc_heads;
        for (std::size_t layer = 0; layer < cfg.enc_layers; ++layer) {
            const std::string pre = nn::idx("enc", layer);
            p.add(pre + ".ln1.g", TensorT<Real>(Shape{cfg.dim}, Real(1)));
            p.add(pre + ".ln1.b", TensorT<Real>(Shape{cfg.dim}, Real(0)));
            for (std::size_t h = 0; h < cfg.enc_heads; ++h) {
                p.add(pre + nn::idx(".attn.wq", h), normal_init<Real>(Shape{cfg.dim, head_dim}, rng));
                p.add(pre + nn::idx(".attn.wk", h), normal_init<Real>(Shape{cfg.dim, head_dim}, rng));
                p.add(pre + nn::idx(".attn.wv", h), normal_init<Real>(Shape{cfg.dim, head_dim}, rng));
            }
            p.add(pre + ".attn.wo", normal_init<Real>(Shape{cfg.dim, cfg.dim}, rng));
            p.add(pre + ".attn.bo", TensorT<Real>(Shape{cfg.dim}, Real(0)));
            p.add(pre + ".ln2.g", TensorT<Real>(Shape{cfg.dim}, Real(1)));
            p.add(pre + ".ln2.b", TensorT<Real>(Shape{cfg.dim}, Real(0)));
            p.add(pre + ".ffn.w1", normal_init<Real>(Shape{cfg.dim, cfg.ffn_dim}, rng));
            p.add(pre + ".ffn.b1", TensorT<Real>(Shape{cfg.ffn_dim}, Real(0)));
            p.add(pre + ".ffn.w2", normal_init<Real>(Shape{cfg.ffn_dim, cfg.dim}, rng));
            p.add(pre + ".ffn.b2", TensorT<Real>(Shape{cfg.dim}, Real(0)));
        }
        p.add("enc_out.ln.g", TensorT<Real>(Shape{cfg.dim}, Real(1)));
        p.add("enc_out.ln.b", TensorT<Real>(Shape{cfg.dim}, Real(0)));
        p.add("head.w", normal_init<Real>(Shape{cfg.dim, label_count}, rng));
        p.add("head.b", TensorT<Real>(Shape{label_count}, Real(0)));
        return model;
    }

    // Deterministic evaluation-mode document representation, shape (dim).
    TensorT<Real> encode(std::span<const std::size_t> token_ids) const {
        TapeT<Real> tape;
        ParamLeaves<Real> leaves(tape, params);
        auto row = encode_on_tape(tape, leaves, config, token_ids);
        return TensorT<Real>(Shape{config.dim}, tape.value(row).raw());
    }

    TensorT<Real> encode(const Document& doc) const { return encode(std::span(doc.token_ids)); }

    // probabilities = sigmoid(dvec^T O + bias), shape (L)
    TensorT<Real> classify(const TensorT<Real>& dvec) const {
        if (dvec.numel() != config.dim)
            throw ShapeError("classify: dvec " + shape_str(dvec.shape()) + " does not match dim " +
                             std::to_string(config.dim));
        TapeT<Real> tape;
        ParamLeaves<Real> leaves(tape, params);
        auto row = tape.leaf(TensorT<Real>(Shape{1, config.dim}, dvec.raw()));
        auto probs = tape.sigmoid(classify_logits_on_tape(tape, leaves, row));
        return TensorT<Real>(Shape{label_count}, tape.value(probs).raw());
    }

    TensorT<Real> predict(const Document& doc) const { return classify(encode(doc)); }

private:
    template <typename R>
    static TensorT<R> normal_init(Shape shape, Rng& rng, double stddev = 0.02) {
        TensorT<R> t(std::move(shape));
        for (auto& v : t.raw()) v = static_cast<R>(rng.normal() * stddev);
        return t;
    }
};

using VanillaClassifier = VanillaClassifierT<float>;

template <typename Real>
TensorT<Real> multi_hot(const std::vector<std::size_t>& labels, std::size_t label_count) {
    TensorT<Real> t(Shape{label_count}, Real(0));
    for (std::size_t l : labels) t[l] = Real(1);
    return t;
}

}  // namespace ramlc
