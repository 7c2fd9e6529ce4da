// Two-phase training: mini-batch Adam on mean BCE with per-epoch dev macro-F1
// early stopping. Phase 1 trains the vanilla classifier; phase 2 trains the
// retrieval-augmented model initialized from a phase-1 checkpoint, retrieving
// neighbors per example (self excluded) on every forward pass.
//
// Batches are processed with one tape per document; per-document gradients
// land in per-position buffers and are reduced in document order, so results
// are bitwise identical for any worker thread count.
#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "ramlc/adam.hpp"
#include "ramlc/checkpoint.hpp"
#include "ramlc/encoder.hpp"
#include "ramlc/metrics.hpp"
#include "ramlc/ra_model.hpp"
#include "ramlc/repository.hpp"
#include "ramlc/rng.hpp"
#include "ramlc/text.hpp"

namespace ramlc {

struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainConfig {
    double lr = 3e-5;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t patience = 5;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double threshold = 0.5;  // binarization for dev macro-F1 selection

    // from-scratch synthetic corpora need a larger step than fine-tuning
    static TrainConfig desk_scale() {
        TrainConfig cfg;
        cfg.lr = 3e-4;
        cfg.batch_size = 16;
        cfg.max_epochs = 50;
        return cfg;
    }

    void validate() const {
        if (lr <= 0) throw std::invalid_argument("train config: lr must be positive");
        if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
        if (patience > max_epochs)
            throw std::invalid_argument("train config: patience must not exceed max_epochs");
    }
};

struct EpochRow {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;
    double dev_micro_f1 = 0.0;
    double dev_macro_f1 = 0.0;
};

struct TrainLog {
    std::vector<EpochRow> epochs;
    std::size_t best_epoch = 0;  // 1-based; earliest epoch attaining the best dev macro-F1
    std::string stop_reason;     // "early_stopping" | "max_epochs"

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "epoch,loss,dev_micro_f1,dev_macro_f1\n";
        for (const auto& row : epochs)
            out << row.epoch << "," << row.loss << "," << row.dev_micro_f1 << ","
                << row.dev_macro_f1 << "\n";
    }
};

// Stops after `patience` consecutive epochs without improving the best metric.
// Ties keep the earlier epoch.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    // returns true when the metric improved (new best)
    bool update(std::size_t epoch, double metric) {
        if (best_epoch_ == 0 || metric > best_) {
            best_ = metric;
            best_epoch_ = epoch;
            return true;
        }
        return false;
    }

    bool should_stop(std::size_t epoch) const { return epoch - best_epoch_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best() const { return best_; }

private:
    std::size_t patience_;
    double best_ = 0.0;
    std::size_t best_epoch_ = 0;
};

namespace detail {

// per-document loss graph: (tape, leaves, doc, dropout) -> loss id
template <typename Real>
using LossBuilder = std::function<typename TapeT<Real>::Id(
    TapeT<Real>&, ParamLeaves<Real>&, const Document&, DropoutCtx*)>;

// probabilities for one document in evaluation mode
template <typename Real>
using Predictor = std::function<TensorT<Real>(const Document&)>;

template <typename Real>
void extract_flat_grads(const TapeT<Real>& tape, const ParamLeaves<Real>& leaves,
                        const FlatLayout<Real>& layout, std::vector<Real>& out) {
    std::fill(out.begin(), out.end(), Real(0));
    const auto& bound = leaves.bound();
    for (std::size_t n = 0; n < layout.names.size(); ++n) {
        auto it = bound.find(layout.names[n]);
        if (it == bound.end() || !tape.has_grad(it->second)) continue;
        TensorT<Real> g = tape.grad(it->second);
        std::copy(g.raw().begin(), g.raw().end(), out.begin() + layout.offsets[n]);
    }
}

template <typename Real>
PredictionSet evaluate_split(const Predictor<Real>& predict, const std::vector<Document>& docs,
                             std::size_t label_count, double threshold) {
    PredictionSet preds;
    preds.label_count = label_count;
    preds.threshold = threshold;
    preds.probabilities.resize(docs.size());
    preds.gold.resize(docs.size());
    std::exception_ptr failure = nullptr;
    std::int64_t n = static_cast<std::int64_t>(docs.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            const auto& doc = docs[static_cast<std::size_t>(i)];
            TensorT<Real> probs = predict(doc);
            std::vector<float> row(probs.raw().begin(), probs.raw().end());
            std::vector<std::uint8_t> hot(label_count, 0);
            for (std::size_t l : doc.labels) hot[l] = 1;
            preds.probabilities[static_cast<std::size_t>(i)] = std::move(row);
            preds.gold[static_cast<std::size_t>(i)] = std::move(hot);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return preds;
}

// The shared mini-batch loop. Returns the log; `params` ends at the
// best-epoch values.
template <typename Real>
TrainLog run_training(const TrainConfig& cfg, ParamStoreT<Real>& params,
                      const LossBuilder<Real>& build_loss, const Predictor<Real>& predict,
                      const std::vector<Document>& train_docs,
                      const std::vector<Document>& dev_docs, std::size_t label_count,
                      double dropout_rate, std::uint64_t stream_tag) {
    cfg.validate();
    const FlatLayout<Real> layout(params);
    AdamT<Real> adam(layout, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);

    TrainLog log;
    EarlyStopper stopper(cfg.patience);
    ParamStoreT<Real> best_params = params;

    std::vector<std::size_t> order(train_docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<std::vector<Real>> doc_grads(cfg.batch_size,
                                             std::vector<Real>(layout.total, Real(0)));
    std::vector<double> doc_losses(cfg.batch_size, 0.0);
    std::vector<Real> batch_grad(layout.total, Real(0));

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed ^ stream_tag, 0x0d0c, epoch));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        std::size_t bad_batch = 0;
        bool diverged = false;

        for (std::size_t start = 0; start < order.size() && !diverged;
             start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            std::exception_ptr failure = nullptr;
            std::int64_t n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 1)
            for (std::int64_t p = 0; p < n; ++p) {
                try {
                    const Document& doc = train_docs[order[start + static_cast<std::size_t>(p)]];
                    Rng doc_rng(derive_seed(cfg.seed ^ stream_tag, epoch * 1000003,
                                            start + static_cast<std::size_t>(p)));
                    DropoutCtx drop{dropout_rate, doc_rng};
                    TapeT<Real> tape;
                    ParamLeaves<Real> leaves(tape, params);
                    auto loss = build_loss(tape, leaves, doc,
                                           dropout_rate > 0.0 ? &drop : nullptr);
                    doc_losses[static_cast<std::size_t>(p)] = tape.value(loss)[0];
                    tape.backward(loss);
                    extract_flat_grads(tape, leaves, layout,
                                       doc_grads[static_cast<std::size_t>(p)]);
                } catch (...) {
#pragma omp critical
                    if (!failure) failure = std::current_exception();
                }
            }
            if (failure) std::rethrow_exception(failure);

            // reduce in document order, then average
            std::fill(batch_grad.begin(), batch_grad.end(), Real(0));
            for (std::size_t p = 0; p < count; ++p) {
                if (!std::isfinite(doc_losses[p])) {
                    diverged = true;
                    bad_batch = start / cfg.batch_size + 1;
                    break;
                }
                epoch_loss += doc_losses[p];
                ++seen;
                const auto& g = doc_grads[p];
                for (std::size_t i = 0; i < layout.total; ++i) batch_grad[i] += g[i];
            }
            if (diverged) break;
            const Real inv = Real(1) / static_cast<Real>(count);
            for (auto& g : batch_grad) g *= inv;
            adam.step(params, layout, batch_grad);
        }
        if (diverged)
            throw TrainError("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(bad_batch));

        auto dev_preds = evaluate_split<Real>(predict, dev_docs, label_count, cfg.threshold);
        auto dev_f1 = f1_scores(dev_preds);
        log.epochs.push_back(
            {epoch, epoch_loss / static_cast<double>(seen), dev_f1.micro_f1, dev_f1.macro_f1});

        if (stopper.update(epoch, dev_f1.macro_f1)) best_params = params;
        if (stopper.should_stop(epoch)) {
            log.stop_reason = "early_stopping";
            break;
        }
    }
    if (log.stop_reason.empty()) log.stop_reason = "max_epochs";
    log.best_epoch = stopper.best_epoch();
    params = std::move(best_params);
    return log;
}

}  // namespace detail

inline VanillaClassifier vanilla_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.phase != "vanilla")
        throw TrainError("expected a vanilla checkpoint, got phase " + ckpt.phase);
    VanillaClassifier model;
    model.config = ckpt.encoder;
    model.label_count = ckpt.label_count();
    model.vocab_fingerprint = ckpt.vocab_fingerprint;
    model.params = ckpt.params;
    return model;
}

inline RAClassifier ra_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.phase != "ra") throw TrainError("expected an ra checkpoint, got phase " + ckpt.phase);
    RAClassifier model;
    model.config = ckpt.encoder;
    model.ca = *ckpt.ca;
    model.label_count = ckpt.label_count();
    model.vocab_fingerprint = ckpt.vocab_fingerprint;
    model.source_fingerprint = ckpt.source_fingerprint;
    model.params = ckpt.params;
    return model;
}

struct TrainResult {
    Checkpoint checkpoint;
    TrainLog log;
};

// Phase 1: vanilla classifier from random initialization.
inline TrainResult train_vanilla(const TrainConfig& cfg, const Corpus& corpus,
                                 const EncoderConfig& enc_cfg) {
    if (corpus.train.empty()) throw TrainError("train_vanilla: empty train split");
    auto model = VanillaClassifier::init(enc_cfg, corpus.label_count(),
                                         corpus.vocab_fingerprint, cfg.seed);

    detail::LossBuilder<float> build_loss = [&model](Tape& tape, ParamLeaves<float>& leaves,
                                                     const Document& doc, DropoutCtx* drop) {
        auto pooled = encode_on_tape(tape, leaves, model.config, std::span(doc.token_ids), drop);
        auto logits = classify_logits_on_tape(tape, leaves, pooled);
        return tape.bce_with_logits(tape.reshape(logits, Shape{model.label_count}),
                                    multi_hot<float>(doc.labels, model.label_count));
    };
    detail::Predictor<float> predict = [&model](const Document& doc) {
        return model.predict(doc);
    };

    TrainLog log = detail::run_training(cfg, model.params, build_loss, predict, corpus.train,
                                        corpus.dev, model.label_count, enc_cfg.dropout, 0x7a1);

    TrainResult result;
    result.checkpoint.phase = "vanilla";
    result.checkpoint.encoder = model.config;
    result.checkpoint.vocab_fingerprint = model.vocab_fingerprint;
    result.checkpoint.params = std::move(model.params);
    result.log = std::move(log);
    return result;
}

// Phase 2: retrieval-augmented model initialized from the phase-1 checkpoint.
inline TrainResult train_ra(const TrainConfig& cfg, const Corpus& corpus,
                            const Repository& repo, const Checkpoint& vanilla_ckpt,
                            const CrossAttentionConfig& ca_cfg) {
    if (vanilla_ckpt.phase != "vanilla")
        throw TrainError("train_ra: base checkpoint must be phase vanilla");
    if (repo.encoder_fingerprint != vanilla_ckpt.fingerprint())
        throw TrainError("train_ra: repository fingerprint does not match the vanilla checkpoint");
    if (corpus.vocab_fingerprint != vanilla_ckpt.vocab_fingerprint)
        throw TrainError("train_ra: corpus vocab does not match the checkpoint");

    auto vanilla = vanilla_from_checkpoint(vanilla_ckpt);
    auto model = RAClassifier::init_from_vanilla(vanilla, ca_cfg, cfg.seed);

    detail::LossBuilder<float> build_loss = [&model, &repo](Tape& tape,
                                                            ParamLeaves<float>& leaves,
                                                            const Document& doc,
                                                            DropoutCtx* drop) {
        RAForwardOptions opts;
        opts.exclude_self = true;
        auto logits = ra_logits_on_tape(tape, leaves, model, repo, doc, opts, drop);
        return tape.bce_with_logits(tape.reshape(logits, Shape{model.label_count}),
                                    multi_hot<float>(doc.labels, model.label_count));
    };
    detail::Predictor<float> predict = [&model, &repo](const Document& doc) {
        return ra_forward(model, repo, doc);
    };

    TrainLog log = detail::run_training(cfg, model.params, build_loss, predict, corpus.train,
                                        corpus.dev, model.label_count,
                                        model.config.dropout, 0x7a2);

    TrainResult result;
    result.checkpoint.phase = "ra";
    result.checkpoint.encoder = model.config;
    result.checkpoint.ca = model.ca;
    result.checkpoint.vocab_fingerprint = model.vocab_fingerprint;
    result.checkpoint.repo_fingerprint = repo.encoder_fingerprint;
    result.checkpoint.source_fingerprint = model.source_fingerprint;
    result.checkpoint.params = std::move(model.params);
    result.log = std::move(log);
    return result;
}

// Evaluation-mode predictions for a whole split.
inline PredictionSet predict_split(const VanillaClassifier& model,
                                   const std::vector<Document>& docs, double threshold = 0.5) {
    detail::Predictor<float> predict = [&model](const Document& doc) { return model.predict(doc); };
    return detail::evaluate_split<float>(predict, docs, model.label_count, threshold);
}

inline PredictionSet predict_split(const RAClassifier& model, const Repository& repo,
                                   const std::vector<Document>& docs, double threshold = 0.5) {
    detail::Predictor<float> predict = [&model, &repo](const Document& doc) {
        return ra_forward(model, repo, doc);
    };
    return detail::evaluate_split<float>(predict, docs, model.label_count, threshold);
}

}  // namespace ramlc
