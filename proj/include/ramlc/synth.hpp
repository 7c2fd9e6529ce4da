// Synthetic multi-label corpus generator with Zipfian label support. Each
// label owns a small pool of signature tokens; documents mix pool tokens with
// background noise, so label evidence is recoverable from text and the tail
// of the label distribution stays thin, as in real MLC datasets.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ramlc/rng.hpp"
#include "ramlc/text.hpp"

namespace ramlc {

struct SynthParams {
    std::size_t label_count = 50;
    double zipf_exponent = 1.2;
    std::size_t train_size = 2000;
    std::size_t dev_size = 250;
    std::size_t test_size = 250;
    std::size_t unlabeled_size = 0;
    std::size_t len_min = 15;
    std::size_t len_max = 40;
    std::size_t vocab_size = 1200;
    double signal_strength = 0.85;   // fraction of tokens drawn from label pools
    std::size_t pool_size = 10;      // signature tokens per label
    int labels_per_doc_trials = 4;   // labels per doc = 1 + Binomial(trials, p)
    double labels_per_doc_p = 0.4;
    std::uint64_t seed = 0;

    void validate() const {
        if (label_count == 0) throw std::invalid_argument("synth: label_count must be positive");
        if (zipf_exponent <= 0) throw std::invalid_argument("synth: zipf_exponent must be > 0");
        if (train_size < 1 || dev_size < 1 || test_size < 1)
            throw std::invalid_argument("synth: split sizes must be >= 1");
        if (len_min < 1 || len_max < len_min)
            throw std::invalid_argument("synth: bad document length range");
        if (signal_strength <= 0.0 || signal_strength > 1.0)
            throw std::invalid_argument("synth: signal_strength must be in (0, 1]");
        if (vocab_size <= 3 + label_count * pool_size)
            throw std::invalid_argument("synth: vocab_size must exceed 3 + label_count*pool_size");
    }
};

namespace detail {

class ZipfSampler {
public:
    ZipfSampler(std::size_t n, double s) : cdf_(n) {
        double acc = 0.0;
        for (std::size_t r = 1; r <= n; ++r) {
            acc += 1.0 / std::pow(static_cast<double>(r), s);
            cdf_[r - 1] = acc;
        }
        for (double& v : cdf_) v /= acc;
    }

    // zero-based rank
    std::size_t sample(Rng& rng) const {
        const double u = rng.uniform();
        return static_cast<std::size_t>(
            std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    }

private:
    std::vector<double> cdf_;
};

}  // namespace detail

inline std::string synth_label_name(std::size_t rank) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "label%03zu", rank);
    return buf;
}

// Raw text records; feed through load_corpus / synth_corpus for tokenization.
inline RawCorpus synth_generate_raw(const SynthParams& params) {
    params.validate();
    Rng rng(derive_seed(params.seed, 0x5e9d));
    detail::ZipfSampler zipf(params.label_count, params.zipf_exponent);

    RawCorpus raw;
    raw.label_names.reserve(params.label_count);
    for (std::size_t r = 0; r < params.label_count; ++r)
        raw.label_names.push_back(synth_label_name(r));

    const std::size_t background_count =
        params.vocab_size - 3 - params.label_count * params.pool_size;

    auto pool_token = [&](std::size_t label, std::size_t slot) {
        return "l" + std::to_string(label) + "t" + std::to_string(slot);
    };

    auto make_record = [&](const std::string& id, bool keep_labels) {
        // labels: 1 + Binomial(trials, p) draws from the Zipf marginal,
        // de-duplicated, so heads co-occur with tails naturally
        const int draws = 1 + rng.binomial(params.labels_per_doc_trials, params.labels_per_doc_p);
        std::set<std::size_t> label_set;
        for (int i = 0; i < draws; ++i) label_set.insert(zipf.sample(rng));
        std::vector<std::size_t> labels(label_set.begin(), label_set.end());

        const std::size_t len =
            params.len_min + rng.uniform_index(params.len_max - params.len_min + 1);
        std::string text;
        for (std::size_t i = 0; i < len; ++i) {
            if (!text.empty()) text.push_back(' ');
            if (rng.uniform() < params.signal_strength) {
                const std::size_t label = labels[rng.uniform_index(labels.size())];
                text += pool_token(label, rng.uniform_index(params.pool_size));
            } else {
                text += "w" + std::to_string(rng.uniform_index(background_count));
            }
        }

        RawRecord r;
        r.id = id;
        r.text = std::move(text);
        if (keep_labels)
            for (std::size_t l : labels) r.labels.push_back(raw.label_names[l]);
        return r;
    };

    char buf[32];
    for (std::size_t i = 0; i < params.train_size; ++i) {
        std::snprintf(buf, sizeof(buf), "train-%05zu", i);
        raw.train.push_back(make_record(buf, true));
    }
    for (std::size_t i = 0; i < params.dev_size; ++i) {
        std::snprintf(buf, sizeof(buf), "dev-%05zu", i);
        raw.dev.push_back(make_record(buf, true));
    }
    for (std::size_t i = 0; i < params.test_size; ++i) {
        std::snprintf(buf, sizeof(buf), "test-%05zu", i);
        raw.test.push_back(make_record(buf, true));
    }
    for (std::size_t i = 0; i < params.unlabeled_size; ++i) {
        std::snprintf(buf, sizeof(buf), "pool-%05zu", i);
        raw.unlabeled.push_back(make_record(buf, false));
    }
    return raw;
}

// In-memory equivalent of generate -> save -> load, sharing the tokenization
// path with file loading so both routes produce identical corpora.
inline LoadedCorpus synth_corpus(const SynthParams& params, std::size_t max_seq_len = 256) {
    RawCorpus raw = synth_generate_raw(params);
    std::vector<std::string> train_texts;
    train_texts.reserve(raw.train.size());
    for (const auto& r : raw.train) train_texts.push_back(r.text);
    Vocab vocab = Vocab::build(train_texts);

    std::map<std::string, std::size_t> label_ids;
    for (std::size_t i = 0; i < raw.label_names.size(); ++i) label_ids[raw.label_names[i]] = i;

    LoadedCorpus out{Corpus{}, std::move(vocab)};
    out.corpus.label_names = raw.label_names;
    std::unordered_set<std::string> seen;
    out.corpus.train =
        detail::to_documents(raw.train, out.vocab, label_ids, max_seq_len, false, seen);
    out.corpus.dev = detail::to_documents(raw.dev, out.vocab, label_ids, max_seq_len, false, seen);
    out.corpus.test =
        detail::to_documents(raw.test, out.vocab, label_ids, max_seq_len, false, seen);
    out.corpus.unlabeled =
        detail::to_documents(raw.unlabeled, out.vocab, label_ids, max_seq_len, true, seen);
    out.corpus.vocab_fingerprint = out.vocab.fingerprint();
    return out;
}

}  // namespace ramlc
