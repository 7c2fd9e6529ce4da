// Multi-label evaluation: micro/macro-F1 and macro-F1 binned by train-split
// label frequency, the long-tail lens used throughout the experiments.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ramlc/tensor.hpp"

namespace ramlc {

struct PredictionSet {
    std::size_t label_count = 0;
    double threshold = 0.5;
    std::vector<std::vector<float>> probabilities;  // one vector of size L per document
    std::vector<std::vector<std::uint8_t>> gold;    // aligned multi-hot rows

    void add(const std::vector<float>& probs, const std::vector<std::uint8_t>& hot) {
        if (probs.size() != label_count || hot.size() != label_count)
            throw ShapeError("prediction set: row width does not match label count");
        probabilities.push_back(probs);
        gold.push_back(hot);
    }

    std::size_t size() const { return probabilities.size(); }
};

struct LabelScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
};

struct F1Result {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    std::vector<LabelScore> per_label;
};

// Per-label F1 = 2TP/(2TP+FP+FN), defined as 0 when the denominator is 0;
// macro averages over the whole catalog, micro pools the counts.
inline F1Result f1_scores(const PredictionSet& preds) {
    if (preds.probabilities.size() != preds.gold.size())
        throw ShapeError("f1_scores: predictions and gold differ in document count");
    F1Result result;
    result.per_label.resize(preds.label_count);
    std::size_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
    for (std::size_t doc = 0; doc < preds.size(); ++doc) {
        for (std::size_t l = 0; l < preds.label_count; ++l) {
            const bool predicted = preds.probabilities[doc][l] > preds.threshold;
            const bool actual = preds.gold[doc][l] != 0;
            if (predicted && actual) ++result.per_label[l].tp;
            if (predicted && !actual) ++result.per_label[l].fp;
            if (!predicted && actual) ++result.per_label[l].fn;
        }
    }
    double macro_sum = 0.0;
    for (auto& s : result.per_label) {
        const std::size_t pdenom = s.tp + s.fp, rdenom = s.tp + s.fn;
        s.precision = pdenom ? double(s.tp) / double(pdenom) : 0.0;
        s.recall = rdenom ? double(s.tp) / double(rdenom) : 0.0;
        const std::size_t fdenom = 2 * s.tp + s.fp + s.fn;
        s.f1 = fdenom ? 2.0 * double(s.tp) / double(fdenom) : 0.0;
        macro_sum += s.f1;
        pooled_tp += s.tp;
        pooled_fp += s.fp;
        pooled_fn += s.fn;
    }
    result.macro_f1 = preds.label_count ? macro_sum / double(preds.label_count) : 0.0;
    const std::size_t pooled_denom = 2 * pooled_tp + pooled_fp + pooled_fn;
    result.micro_f1 = pooled_denom ? 2.0 * double(pooled_tp) / double(pooled_denom) : 0.0;
    return result;
}

struct FrequencyBin {
    double lo = 0.0, hi = 0.0;          // [lo, hi]; underflow bin has lo = hi = 0
    bool underflow = false;             // zero-frequency labels
    std::vector<std::size_t> labels;
    double macro_f1 = 0.0;
};

struct FrequencyBins {
    std::vector<double> edges;          // strictly increasing, log-spaced
    std::vector<FrequencyBin> bins;     // populated bins only
};

// Log-spaced edges between the smallest and largest positive train frequency;
// zero-frequency labels fall into a dedicated underflow bin. Per-bin macro-F1
// is the unweighted mean of member-label F1. Empty bins are omitted.
inline FrequencyBins binned_macro_f1(const F1Result& scores,
                                     const std::vector<std::size_t>& train_frequencies,
                                     std::size_t bin_count) {
    if (bin_count < 2) throw std::invalid_argument("binned_macro_f1: bin count must be >= 2");
    if (scores.per_label.size() != train_frequencies.size())
        throw ShapeError("binned_macro_f1: frequency vector does not match label count");

    double min_pos = 0.0, max_pos = 0.0;
    for (std::size_t f : train_frequencies) {
        if (f == 0) continue;
        if (min_pos == 0.0 || f < min_pos) min_pos = double(f);
        if (f > max_pos) max_pos = double(f);
    }
    if (max_pos == 0.0)
        throw std::invalid_argument("binned_macro_f1: all labels have zero train frequency");

    FrequencyBins out;
    const double log_lo = std::log(min_pos), log_hi = std::log(max_pos);
    for (std::size_t i = 0; i <= bin_count; ++i)
        out.edges.push_back(std::exp(log_lo + (log_hi - log_lo) * double(i) / double(bin_count)));

    std::vector<FrequencyBin> all(bin_count + 1);
    all[0].underflow = true;
    for (std::size_t i = 0; i < bin_count; ++i) {
        all[i + 1].lo = out.edges[i];
        all[i + 1].hi = out.edges[i + 1];
    }
    for (std::size_t l = 0; l < train_frequencies.size(); ++l) {
        if (train_frequencies[l] == 0) {
            all[0].labels.push_back(l);
            continue;
        }
        std::size_t slot = bin_count;  // max frequency closes the last bin
        if (max_pos > min_pos) {
            const double pos = (std::log(double(train_frequencies[l])) - log_lo) /
                               (log_hi - log_lo) * double(bin_count);
            slot = std::min(bin_count - 1, static_cast<std::size_t>(std::max(0.0, pos))) + 1;
        } else {
            slot = 1;  // degenerate single-value frequency span
        }
        all[slot].labels.push_back(l);
    }
    for (auto& bin : all) {
        if (bin.labels.empty()) continue;
        double sum = 0.0;
        for (std::size_t l : bin.labels) sum += scores.per_label[l].f1;
        bin.macro_f1 = sum / double(bin.labels.size());
        out.bins.push_back(std::move(bin));
    }
    return out;
}

struct MetricsReport {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    std::vector<LabelScore> per_label;
    std::optional<FrequencyBins> bins;
    std::map<std::string, std::string> metadata;

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "metric,value\n";
        out << "micro_f1," << micro_f1 << "\n";
        out << "macro_f1," << macro_f1 << "\n";
        for (const auto& [key, value] : metadata) out << key << "," << value << "\n";
        out << "label,precision,recall,f1,tp,fp,fn\n";
        for (std::size_t l = 0; l < per_label.size(); ++l) {
            const auto& s = per_label[l];
            out << l << "," << s.precision << "," << s.recall << "," << s.f1 << "," << s.tp << ","
                << s.fp << "," << s.fn << "\n";
        }
        if (bins) {
            out << "bin_lo,bin_hi,labels,macro_f1\n";
            for (const auto& bin : bins->bins) {
                out << (bin.underflow ? 0.0 : bin.lo) << "," << (bin.underflow ? 0.0 : bin.hi)
                    << "," << bin.labels.size() << "," << bin.macro_f1 << "\n";
            }
        }
    }
};

}  // namespace ramlc
