#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "ramlc/metrics.hpp"
#include "ramlc/rng.hpp"

using namespace ramlc;

namespace {

PredictionSet from_sets(std::size_t label_count,
                        const std::vector<std::vector<std::size_t>>& gold,
                        const std::vector<std::vector<std::size_t>>& predicted) {
    PredictionSet preds;
    preds.label_count = label_count;
    for (std::size_t doc = 0; doc < gold.size(); ++doc) {
        std::vector<float> probs(label_count, 0.0f);
        std::vector<std::uint8_t> hot(label_count, 0);
        for (std::size_t l : predicted[doc]) probs[l] = 1.0f;
        for (std::size_t l : gold[doc]) hot[l] = 1;
        preds.add(probs, hot);
    }
    return preds;
}

}  // namespace

TEST_CASE("perfect predictions give micro = macro = 1", "[metrics]") {
    auto preds = from_sets(3, {{0, 2}, {1}}, {{0, 2}, {1}});
    auto result = f1_scores(preds);
    REQUIRE(result.micro_f1 == 1.0);
    REQUIRE(result.macro_f1 == 1.0);
}

TEST_CASE("hand-computed mixed case", "[metrics][oracle]") {
    // doc1 gold {0} pred {0,1}; doc2 gold {1} pred {}
    auto preds = from_sets(2, {{0}, {1}}, {{0, 1}, {}});
    auto result = f1_scores(preds);
    REQUIRE(result.micro_f1 == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(result.per_label[0].f1 == 1.0);
    REQUIRE(result.per_label[1].f1 == 0.0);
    REQUIRE(result.macro_f1 == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("all-negative predictions with non-empty gold score zero", "[metrics]") {
    auto preds = from_sets(3, {{0}, {1, 2}}, {{}, {}});
    auto result = f1_scores(preds);
    REQUIRE(result.micro_f1 == 0.0);
    REQUIRE(result.macro_f1 == 0.0);
}

TEST_CASE("f1 matches a naive counting oracle on random instances", "[metrics][oracle]") {
    // 100 random instances, L <= 16, docs <= 50
    Rng rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t L = 1 + rng.uniform_index(16);
        const std::size_t docs = 1 + rng.uniform_index(50);
        PredictionSet preds;
        preds.label_count = L;
        for (std::size_t d = 0; d < docs; ++d) {
            std::vector<float> probs(L);
            std::vector<std::uint8_t> hot(L);
            for (std::size_t l = 0; l < L; ++l) {
                probs[l] = static_cast<float>(rng.uniform());
                hot[l] = rng.uniform() < 0.3 ? 1 : 0;
            }
            preds.add(probs, hot);
        }
        auto result = f1_scores(preds);

        // naive per-document, per-label recount
        double macro = 0;
        std::size_t TP = 0, FP = 0, FN = 0;
        for (std::size_t l = 0; l < L; ++l) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t d = 0; d < docs; ++d) {
                const bool p = preds.probabilities[d][l] > 0.5;
                const bool g = preds.gold[d][l] != 0;
                tp += (p && g);
                fp += (p && !g);
                fn += (!p && g);
            }
            macro += (2 * tp + fp + fn) ? 2.0 * tp / double(2 * tp + fp + fn) : 0.0;
            TP += tp;
            FP += fp;
            FN += fn;
        }
        macro /= double(L);
        const double micro = (2 * TP + FP + FN) ? 2.0 * TP / double(2 * TP + FP + FN) : 0.0;
        REQUIRE(result.macro_f1 == macro);
        REQUIRE(result.micro_f1 == micro);
    }
}

TEST_CASE("macro is label-permutation invariant; micro is doc-permutation invariant",
          "[metrics][property]") {
    Rng rng(11);
    const std::size_t L = 6, docs = 20;
    PredictionSet preds;
    preds.label_count = L;
    for (std::size_t d = 0; d < docs; ++d) {
        std::vector<float> probs(L);
        std::vector<std::uint8_t> hot(L);
        for (std::size_t l = 0; l < L; ++l) {
            probs[l] = static_cast<float>(rng.uniform());
            hot[l] = rng.uniform() < 0.4 ? 1 : 0;
        }
        preds.add(probs, hot);
    }
    auto base = f1_scores(preds);

    std::vector<std::size_t> perm{3, 1, 5, 0, 4, 2};
    PredictionSet label_perm;
    label_perm.label_count = L;
    for (std::size_t d = 0; d < docs; ++d) {
        std::vector<float> probs(L);
        std::vector<std::uint8_t> hot(L);
        for (std::size_t l = 0; l < L; ++l) {
            probs[l] = preds.probabilities[d][perm[l]];
            hot[l] = preds.gold[d][perm[l]];
        }
        label_perm.add(probs, hot);
    }
    REQUIRE(f1_scores(label_perm).macro_f1 == base.macro_f1);

    PredictionSet doc_perm;
    doc_perm.label_count = L;
    for (std::size_t d = docs; d-- > 0;) doc_perm.add(preds.probabilities[d], preds.gold[d]);
    REQUIRE(f1_scores(doc_perm).micro_f1 == base.micro_f1);
}

TEST_CASE("one label per bin for frequencies 1,10,100,1000 with 4 bins", "[metrics][oracle]") {
    auto preds = from_sets(4, {{0, 1, 2, 3}}, {{0, 1}});
    auto scores = f1_scores(preds);
    auto bins = binned_macro_f1(scores, {1, 10, 100, 1000}, 4);
    REQUIRE(bins.bins.size() == 4);
    for (const auto& bin : bins.bins) REQUIRE(bin.labels.size() == 1);
    REQUIRE(bins.bins[0].labels[0] == 0);
    REQUIRE(bins.bins[3].labels[0] == 3);
    // edges are log-spaced over [1, 1000]
    REQUIRE(bins.edges.front() == Catch::Approx(1.0));
    REQUIRE(bins.edges.back() == Catch::Approx(1000.0));
    REQUIRE(bins.edges[1] == Catch::Approx(std::pow(10.0, 0.75)).margin(1e-9));
}

TEST_CASE("degenerate binning: one frequency value, one populated bin", "[metrics]") {
    auto preds = from_sets(3, {{0, 1, 2}}, {{0}});
    auto scores = f1_scores(preds);
    auto bins = binned_macro_f1(scores, {7, 7, 7}, 5);
    REQUIRE(bins.bins.size() == 1);
    REQUIRE(bins.bins[0].labels.size() == 3);
    REQUIRE(bins.bins[0].macro_f1 == Catch::Approx(scores.macro_f1));
}

TEST_CASE("zero-frequency labels land in the underflow bin; partition covers catalog",
          "[metrics][property]") {
    Rng rng(21);
    const std::size_t L = 23;
    std::vector<std::size_t> freqs(L);
    for (auto& f : freqs) f = rng.uniform_index(500);  // some zeros
    freqs[4] = 0;
    auto preds = from_sets(L, {{1, 2}}, {{1}});
    auto scores = f1_scores(preds);
    auto bins = binned_macro_f1(scores, freqs, 5);

    std::vector<std::size_t> seen;
    for (const auto& bin : bins.bins) {
        for (std::size_t l : bin.labels) seen.push_back(l);
        if (bin.underflow)
            for (std::size_t l : bin.labels) REQUIRE(freqs[l] == 0);
    }
    std::sort(seen.begin(), seen.end());
    REQUIRE(seen.size() == L);  // disjoint + complete
    for (std::size_t l = 0; l < L; ++l) REQUIRE(seen[l] == l);
}

TEST_CASE("binning rejects degenerate inputs", "[metrics][errors]") {
    auto preds = from_sets(2, {{0}}, {{0}});
    auto scores = f1_scores(preds);
    REQUIRE_THROWS_AS(binned_macro_f1(scores, {0, 0}, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(binned_macro_f1(scores, {1, 2}, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(binned_macro_f1(scores, {1}, 4), ShapeError);
}
