// Phase-2 retrieval-augmented classifier. The pooled input representation
// attends over K retrieved neighbor vectors through pre-norm cross-attention
// blocks; the additive context is fused with the encoder output under a
// dedicated layer norm and fed to the inherited classification heads.
//
// Cross-attention output projections start at zero, so a freshly initialized
// phase-2 model computes exactly LN(encode(x)) no matter what the repository
// holds; retrieval only begins to matter once training moves those weights.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ramlc/checkpoint.hpp"
#include "ramlc/encoder.hpp"
#include "ramlc/model_config.hpp"
#include "ramlc/repository.hpp"

namespace ramlc {

template <typename Real>
struct RAClassifierT {
    EncoderConfig config;
    CrossAttentionConfig ca;
    std::size_t label_count = 0;
    std::uint64_t vocab_fingerprint = 0;
    std::uint64_t source_fingerprint = 0;  // phase-1 params this model started from
    ParamStoreT<Real> params;

    static RAClassifierT init_from_vanilla(const VanillaClassifierT<Real>& vanilla,
                                           const CrossAttentionConfig& ca_cfg,
                                           std::uint64_t seed) {
        ca_cfg.validate(vanilla.config.dim);
        RAClassifierT model;
        model.config = vanilla.config;
        model.ca = ca_cfg;
        model.label_count = vanilla.label_count;
        model.vocab_fingerprint = vanilla.vocab_fingerprint;
        model.source_fingerprint = params_fingerprint_of(vanilla);

        // encoder and heads inherit the phase-1 parameters unchanged
        for (const auto& name : vanilla.params.names())
            model.params.add(name, vanilla.params.value(name));

        Rng rng(derive_seed(seed, 0xca0));
        const std::size_t dim = model.config.dim;
        const std::size_t head_dim = dim / ca_cfg.ca_heads;
        auto normal = [&rng](Shape shape) {
            TensorT<Real> t(std::move(shape));
            for (auto& v : t.raw()) v = static_cast<Real>(rng.normal() * 0.02);
            return t;
        };
        auto& p = model.params;
        for (std::size_t layer = 0; layer < ca_cfg.ca_layers; ++layer) {
            const std::string pre = nn::idx("ca", layer);
            p.add(pre + ".ln.g", TensorT<Real>(Shape{dim}, Real(1)));
            p.add(pre + ".ln.b", TensorT<Real>(Shape{dim}, Real(0)));
            for (std::size_t h = 0; h < ca_cfg.ca_heads; ++h) {
                p.add(pre + nn::idx(".wq", h), normal(Shape{dim, head_dim}));
                p.add(pre + nn::idx(".wk", h), normal(Shape{dim, head_dim}));
                p.add(pre + nn::idx(".wv", h), normal(Shape{dim, head_dim}));
            }
            // zero output projection: the phase-2 handoff contract
            p.add(pre + ".wo", TensorT<Real>(Shape{dim, dim}, Real(0)));
            p.add(pre + ".bo", TensorT<Real>(Shape{dim}, Real(0)));
        }
        p.add("fuse.ln.g", TensorT<Real>(Shape{dim}, Real(1)));
        p.add("fuse.ln.b", TensorT<Real>(Shape{dim}, Real(0)));
        if (ca_cfg.mode == NeighborMode::kLabels) {
            p.add("nproj.w", normal(Shape{model.label_count, dim}));
        } else if (ca_cfg.mode == NeighborMode::kTextLabels) {
            p.add("nproj.w", normal(Shape{dim + model.label_count, dim}));
        }
        return model;
    }

    TensorT<Real> encode(std::span<const std::size_t> token_ids) const {
        TapeT<Real> tape;
        ParamLeaves<Real> leaves(tape, params);
        auto row = encode_on_tape(tape, leaves, config, token_ids);
        return TensorT<Real>(Shape{config.dim}, tape.value(row).raw());
    }

    TensorT<Real> encode(const Document& doc) const { return encode(std::span(doc.token_ids)); }
};

using RAClassifier = RAClassifierT<float>;

// Cross-attention over neighbor rows: x_{l+1} = x_l + MHA(LN(x_l), N).
// Returns the additive context, i.e. the final single-token state minus the
// original query.
template <typename Real>
typename TapeT<Real>::Id cross_attend_on_tape(TapeT<Real>& tape, ParamLeaves<Real>& leaves,
                                              const CrossAttentionConfig& ca, std::size_t dim,
                                              typename TapeT<Real>::Id query_row,
                                              typename TapeT<Real>::Id neighbor_rows) {
    auto x = query_row;
    for (std::size_t layer = 0; layer < ca.ca_layers; ++layer) {
        const std::string pre = nn::idx("ca", layer);
        auto normed = tape.layer_norm(x, leaves(pre + ".ln.g"), leaves(pre + ".ln.b"));
        auto attn =
            nn::multi_head_attention(tape, leaves, pre, normed, neighbor_rows, ca.ca_heads, dim);
        x = tape.add(x, attn);
    }
    return tape.add(x, tape.scale(query_row, -1.0));
}

// d = LN(encoder_dvec + context), the fusion step with its own norm params.
template <typename Real>
typename TapeT<Real>::Id fuse_on_tape(TapeT<Real>& tape, ParamLeaves<Real>& leaves,
                                      typename TapeT<Real>::Id encoder_row,
                                      typename TapeT<Real>::Id context_row) {
    return tape.layer_norm(tape.add(encoder_row, context_row), leaves("fuse.ln.g"),
                           leaves("fuse.ln.b"));
}

template <typename Real>
TensorT<Real> cross_attend(const RAClassifierT<Real>& model, const TensorT<Real>& query,
                           const TensorT<Real>& neighbors) {
    const std::size_t dim = model.config.dim;
    if (query.numel() != dim)
        throw ShapeError("cross_attend: query " + shape_str(query.shape()) +
                         " does not match dim " + std::to_string(dim));
    if (neighbors.rank() != 2 || neighbors.cols() != dim || neighbors.rows() == 0)
        throw ShapeError("cross_attend: neighbors " + shape_str(neighbors.shape()) +
                         " must be K x " + std::to_string(dim) + " with K >= 1");
    TapeT<Real> tape;
    ParamLeaves<Real> leaves(tape, model.params);
    auto q = tape.leaf(TensorT<Real>(Shape{1, dim}, query.raw()));
    auto n = tape.leaf(neighbors);
    auto ctx = cross_attend_on_tape(tape, leaves, model.ca, dim, q, n);
    return TensorT<Real>(Shape{dim}, tape.value(ctx).raw());
}

template <typename Real>
TensorT<Real> fuse(const RAClassifierT<Real>& model, const TensorT<Real>& encoder_dvec,
                   const TensorT<Real>& context) {
    const std::size_t dim = model.config.dim;
    if (encoder_dvec.numel() != dim || context.numel() != dim)
        throw ShapeError("fuse: expected two vectors of dim " + std::to_string(dim) + ", got " +
                         shape_str(encoder_dvec.shape()) + " and " + shape_str(context.shape()));
    TapeT<Real> tape;
    ParamLeaves<Real> leaves(tape, model.params);
    auto a = tape.leaf(TensorT<Real>(Shape{1, dim}, encoder_dvec.raw()));
    auto b = tape.leaf(TensorT<Real>(Shape{1, dim}, context.raw()));
    auto fused = fuse_on_tape(tape, leaves, a, b);
    return TensorT<Real>(Shape{dim}, tape.value(fused).raw());
}

// Materializes the K retrieved neighbor rows for the tape. Text mode yields a
// constant; the label modes multiply a constant multi-hot matrix by the
// learned projection so gradients reach "nproj.w".
template <typename Real>
typename TapeT<Real>::Id neighbor_rows_on_tape(TapeT<Real>& tape, ParamLeaves<Real>& leaves,
                                               const RAClassifierT<Real>& model,
                                               const RepositoryT<Real>& repo,
                                               const std::vector<ScoredNeighbor>& hits) {
    const std::size_t dim = model.config.dim;
    const std::size_t L = model.label_count;
    const NeighborMode mode = model.ca.mode;
    if (mode == NeighborMode::kText) {
        TensorT<Real> rows(Shape{hits.size(), dim});
        for (std::size_t i = 0; i < hits.size(); ++i)
            std::copy_n(repo.entries[hits[i].index].vec.data(), dim, rows.data() + i * dim);
        return tape.leaf(std::move(rows));
    }
    const std::size_t width = mode == NeighborMode::kLabels ? L : dim + L;
    TensorT<Real> inputs(Shape{hits.size(), width}, Real(0));
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const auto& entry = repo.entries[hits[i].index];
        if (!entry.labeled())
            throw RepositoryError("neighbor mode " + neighbor_mode_name(mode) +
                                  " requires labeled entry, but " + entry.id + " is unlabeled");
        Real* row = inputs.data() + i * width;
        std::size_t off = 0;
        if (mode == NeighborMode::kTextLabels) {
            std::copy_n(entry.vec.data(), dim, row);
            off = dim;
        }
        for (std::size_t l = 0; l < L; ++l) row[off + l] = static_cast<Real>((*entry.labels)[l]);
    }
    return tape.matmul(tape.leaf(std::move(inputs)), leaves("nproj.w"));
}

struct RAForwardOptions {
    bool exclude_self = false;  // on during training; test docs are absent anyway
    std::size_t k_override = 0;  // 0 = model default
};

// Lower half of the forward pass once the neighbor set is fixed. Used
// directly by gradient checks, which need the retrieved set frozen so finite
// differences cannot cross a top-K switch.
template <typename Real>
typename TapeT<Real>::Id ra_logits_with_hits(TapeT<Real>& tape, ParamLeaves<Real>& leaves,
                                             const RAClassifierT<Real>& model,
                                             const RepositoryT<Real>& repo,
                                             typename TapeT<Real>::Id pooled,
                                             const std::vector<ScoredNeighbor>& hits) {
    auto neighbors = neighbor_rows_on_tape(tape, leaves, model, repo, hits);
    auto context = cross_attend_on_tape(tape, leaves, model.ca, model.config.dim, pooled, neighbors);
    auto fused = fuse_on_tape(tape, leaves, pooled, context);
    return classify_logits_on_tape(tape, leaves, fused);
}

// encode -> topk -> neighbor rows -> cross-attention -> fuse -> heads.
// Retrieval happens outside the tape: gradients flow through the query path
// and the neighbor projection, never through the top-K selection.
template <typename Real>
typename TapeT<Real>::Id ra_logits_on_tape(TapeT<Real>& tape, ParamLeaves<Real>& leaves,
                                           const RAClassifierT<Real>& model,
                                           const RepositoryT<Real>& repo, const Document& doc,
                                           const RAForwardOptions& opts = {},
                                           DropoutCtx* drop = nullptr) {
    if (repo.encoder_fingerprint != model.source_fingerprint)
        throw RepositoryError("repository fingerprint does not match the model's phase-1 source");
    if (repo.entries.empty()) throw RepositoryError("ra_forward: empty repository");

    auto pooled = encode_on_tape(tape, leaves, model.config, std::span(doc.token_ids), drop);
    // live encoder output drives retrieval; the cached keys stay frozen
    TensorT<Real> query(Shape{model.config.dim}, tape.value(pooled).raw());
    const std::size_t k = opts.k_override ? opts.k_override : model.ca.k;
    auto hits = topk(repo, query, k, opts.exclude_self ? doc.id : std::string{});
    if (hits.empty()) throw RepositoryError("ra_forward: retrieval returned no neighbors");
    return ra_logits_with_hits(tape, leaves, model, repo, pooled, hits);
}

template <typename Real>
TensorT<Real> ra_forward(const RAClassifierT<Real>& model, const RepositoryT<Real>& repo,
                         const Document& doc, const RAForwardOptions& opts = {}) {
    TapeT<Real> tape;
    ParamLeaves<Real> leaves(tape, model.params);
    auto probs = tape.sigmoid(ra_logits_on_tape(tape, leaves, model, repo, doc, opts));
    return TensorT<Real>(Shape{model.label_count}, tape.value(probs).raw());
}

}  // namespace ramlc
