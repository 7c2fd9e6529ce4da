// Static retrieval repository: cached phase-1 document vectors with
// unit-normalized keys, exact cosine top-K lookup, neighbor representations
// and the label-overlap diagnostic.
//
// Repository file layout (little-endian, 32-bit floats):
//   magic "RMLREPO1" | u32 version | u32 dim | u32 label_dim | u64 entry count
//   | u64 encoder fingerprint | u64 corpus fingerprint | u8 includes_unlabeled
//   per entry: string id | f32 vec[dim] | f32 key[dim] | u8 has_labels
//              | labels as bitmap of ceil(label_dim/8) bytes when present
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ramlc/checkpoint.hpp"
#include "ramlc/encoder.hpp"
#include "ramlc/model_config.hpp"
#include "ramlc/rng.hpp"
#include "ramlc/serialize.hpp"
#include "ramlc/tensor.hpp"
#include "ramlc/text.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ramlc {

struct RepositoryError : std::runtime_error {
    explicit RepositoryError(const std::string& what) : std::runtime_error(what) {}
};

template <typename Real>
struct RepositoryEntryT {
    std::string id;
    TensorT<Real> vec;                              // raw phase-1 dvec, attended over
    TensorT<Real> key;                              // unit-normalized copy, ranked on
    std::optional<std::vector<std::uint8_t>> labels;  // multi-hot, absent for pool docs

    bool labeled() const { return labels.has_value(); }
};

template <typename Real>
struct RepositoryT {
    std::size_t dim = 0;
    std::size_t label_dim = 0;
    std::uint64_t encoder_fingerprint = 0;
    std::uint64_t corpus_fingerprint = 0;  // hash of the cached document ids
    bool includes_unlabeled = false;
    std::vector<RepositoryEntryT<Real>> entries;

    std::size_t size() const { return entries.size(); }
};

using Repository = RepositoryT<float>;

namespace detail {

template <typename Real>
TensorT<Real> unit_normalize(const TensorT<Real>& v, const std::string& doc_id) {
    double norm = 0;
    for (std::size_t i = 0; i < v.numel(); ++i) norm += double(v[i]) * double(v[i]);
    norm = std::sqrt(norm);
    if (norm == 0.0)
        throw RepositoryError("degenerate zero representation for document " + doc_id);
    TensorT<Real> out = v;
    for (auto& x : out.raw()) x = static_cast<Real>(x / norm);
    return out;
}

}  // namespace detail

// fingerprint helper shared with the float-only checkpoint hash
template <typename Real>
std::uint64_t params_fingerprint_of(const VanillaClassifierT<Real>& model) {
    if constexpr (std::is_same_v<Real, float>) {
        return params_fingerprint(model.params);
    } else {
        return params_fingerprint(model.params.template cast<float>());
    }
}

// Encodes every document with the frozen phase-1 model. Entry order follows
// document order (train split first, then the unlabeled pool), so builds are
// reproducible.
template <typename Real>
RepositoryT<Real> build_repository(const VanillaClassifierT<Real>& model, const Corpus& corpus,
                                   bool include_unlabeled) {
    if (model.vocab_fingerprint != corpus.vocab_fingerprint)
        throw RepositoryError("vocab fingerprint mismatch between model and corpus");

    std::vector<const Document*> docs;
    for (const auto& d : corpus.train) docs.push_back(&d);
    if (include_unlabeled)
        for (const auto& d : corpus.unlabeled) docs.push_back(&d);

    RepositoryT<Real> repo;
    repo.dim = model.config.dim;
    repo.label_dim = corpus.label_count();
    repo.encoder_fingerprint = params_fingerprint_of(model);
    repo.includes_unlabeled = include_unlabeled;
    std::uint64_t corpus_fp = 0xcbf29ce484222325ULL;
    for (const auto* d : docs) corpus_fp = io::fnv1a(d->id.data(), d->id.size(), corpus_fp);
    repo.corpus_fingerprint = corpus_fp;
    repo.entries.resize(docs.size());

    std::int64_t n = static_cast<std::int64_t>(docs.size());
    std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            const Document& doc = *docs[static_cast<std::size_t>(i)];
            RepositoryEntryT<Real> entry;
            entry.id = doc.id;
            entry.vec = model.encode(doc);
            entry.key = detail::unit_normalize(entry.vec, doc.id);
            if (!doc.labels.empty()) {
                std::vector<std::uint8_t> hot(corpus.label_count(), 0);
                for (std::size_t l : doc.labels) hot[l] = 1;
                entry.labels = std::move(hot);
            }
            repo.entries[static_cast<std::size_t>(i)] = std::move(entry);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return repo;
}

struct ScoredNeighbor {
    std::size_t index;  // into repository entries
    double similarity;
};

// Exact cosine top-K. Ties break by ascending document id; the entry whose id
// equals `exclude_id` is removed before ranking. Invariant to positive
// rescaling of the query.
template <typename Real>
std::vector<ScoredNeighbor> topk(const RepositoryT<Real>& repo, const TensorT<Real>& query,
                                 std::size_t k, const std::string& exclude_id = "") {
    if (k < 1) throw std::invalid_argument("topk: k must be >= 1");
    if (query.numel() != repo.dim)
        throw ShapeError("topk: query " + shape_str(query.shape()) + " does not match dim " +
                         std::to_string(repo.dim));
    double norm = 0;
    for (std::size_t i = 0; i < query.numel(); ++i) norm += double(query[i]) * double(query[i]);
    norm = std::sqrt(norm);
    if (norm == 0.0) throw std::invalid_argument("topk: zero query vector");

    std::vector<ScoredNeighbor> scored;
    scored.reserve(repo.entries.size());
    for (std::size_t i = 0; i < repo.entries.size(); ++i) {
        const auto& entry = repo.entries[i];
        if (!exclude_id.empty() && entry.id == exclude_id) continue;
        double dot = 0;
        for (std::size_t d = 0; d < repo.dim; ++d) dot += double(entry.key[d]) * double(query[d]);
        scored.push_back({i, dot / norm});
    }
    auto better = [&](const ScoredNeighbor& a, const ScoredNeighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return repo.entries[a.index].id < repo.entries[b.index].id;
    };
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), better);
    scored.resize(take);
    return scored;
}

// The three integration modes of §"retrieved documents representation":
// raw text vector, projected multi-hot labels, or projected concatenation.
template <typename Real>
TensorT<Real> neighbor_representation(const RepositoryEntryT<Real>& entry, NeighborMode mode,
                                      const TensorT<Real>* projection = nullptr) {
    if (mode == NeighborMode::kText) return entry.vec;
    if (!entry.labeled())
        throw RepositoryError("neighbor mode " + neighbor_mode_name(mode) +
                              " requires labeled entry, but " + entry.id + " is unlabeled");
    if (projection == nullptr)
        throw std::invalid_argument("neighbor_representation: projection required for mode " +
                                    neighbor_mode_name(mode));
    const auto& hot = *entry.labels;
    std::vector<Real> input;
    if (mode == NeighborMode::kTextLabels)
        input.assign(entry.vec.raw().begin(), entry.vec.raw().end());
    for (std::uint8_t b : hot) input.push_back(static_cast<Real>(b));
    if (projection->rows() != input.size())
        throw ShapeError("neighbor_representation: projection " + shape_str(projection->shape()) +
                         " does not match input width " + std::to_string(input.size()));
    TensorT<Real> out(Shape{projection->cols()}, Real(0));
    for (std::size_t r = 0; r < input.size(); ++r) {
        if (input[r] == Real(0)) continue;
        for (std::size_t c = 0; c < projection->cols(); ++c)
            out[c] += input[r] * projection->at(r, c);
    }
    return out;
}

// Normalized intersection of one document's labels with each retrieved
// neighbor, averaged over the retrieved count.
template <typename Real>
double overlap_for(const std::vector<std::size_t>& doc_labels, const RepositoryT<Real>& repo,
                   const std::vector<ScoredNeighbor>& neighbors) {
    double acc = 0;
    for (const auto& nb : neighbors) {
        const auto& entry = repo.entries[nb.index];
        if (!entry.labeled())
            throw RepositoryError("label_overlap: neighbor " + entry.id +
                                  " has an empty label set; overlap is undefined");
        const auto& hot = *entry.labels;
        std::size_t nb_count = 0, inter = 0;
        for (std::uint8_t b : hot) nb_count += b;
        if (nb_count == 0)
            throw RepositoryError("label_overlap: neighbor " + entry.id +
                                  " has an empty label set; overlap is undefined");
        for (std::size_t l : doc_labels) inter += hot[l];
        acc += static_cast<double>(inter) /
               static_cast<double>(std::min(doc_labels.size(), nb_count));
    }
    return neighbors.empty() ? 0.0 : acc / static_cast<double>(neighbors.size());
}

// Label Overlap ratio:
//   LO = (1/N) sum_i (1/K) sum_j |L_i ∩ L_j| / min(|L_i|, |L_j|)
// over the top-K neighbors of each train document, self excluded. When fewer
// than K neighbors exist the inner mean runs over the retrieved count.
template <typename Real>
double label_overlap(const VanillaClassifierT<Real>& model, const RepositoryT<Real>& repo,
                     const std::vector<Document>& train_docs, std::size_t k) {
    if (train_docs.empty()) throw std::invalid_argument("label_overlap: no documents");
    std::vector<double> per_doc(train_docs.size(), 0.0);
    std::int64_t n = static_cast<std::int64_t>(train_docs.size());
    std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            const Document& doc = train_docs[static_cast<std::size_t>(i)];
            if (doc.labels.empty())
                throw RepositoryError("label_overlap: document " + doc.id +
                                      " has an empty label set; overlap is undefined");
            auto neighbors = topk(repo, model.encode(doc), k, doc.id);
            per_doc[static_cast<std::size_t>(i)] = overlap_for(doc.labels, repo, neighbors);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    double acc = 0;
    for (double v : per_doc) acc += v;
    return acc / static_cast<double>(train_docs.size());
}

// Chance baseline for the overlap diagnostic: neighbors drawn uniformly
// (without replacement) instead of by cosine rank, self excluded.
template <typename Real>
double label_overlap_random(const RepositoryT<Real>& repo,
                            const std::vector<Document>& train_docs, std::size_t k,
                            std::uint64_t seed) {
    if (train_docs.empty()) throw std::invalid_argument("label_overlap_random: no documents");
    Rng rng(derive_seed(seed, 0x4a11));
    double acc = 0;
    for (const auto& doc : train_docs) {
        if (doc.labels.empty())
            throw RepositoryError("label_overlap: document " + doc.id +
                                  " has an empty label set; Eq. overlap is undefined");
        std::vector<std::size_t> candidates;
        candidates.reserve(repo.entries.size());
        for (std::size_t i = 0; i < repo.entries.size(); ++i)
            if (repo.entries[i].id != doc.id) candidates.push_back(i);
        rng.shuffle(candidates);
        std::vector<ScoredNeighbor> picked;
        for (std::size_t i = 0; i < std::min(k, candidates.size()); ++i)
            picked.push_back({candidates[i], 0.0});
        acc += overlap_for(doc.labels, repo, picked);
    }
    return acc / static_cast<double>(train_docs.size());
}

// ---- serialization (float repositories only) -------------------------------

constexpr char kRepositoryMagic[9] = "RMLREPO1";
constexpr std::uint32_t kRepositoryVersion = 1;

inline void save_repository(const Repository& repo, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io::FormatError("cannot write " + path.string());
    io::write_bytes(out, kRepositoryMagic, 8);
    io::write_u32(out, kRepositoryVersion);
    io::write_u32(out, static_cast<std::uint32_t>(repo.dim));
    io::write_u32(out, static_cast<std::uint32_t>(repo.label_dim));
    io::write_u64(out, repo.entries.size());
    io::write_u64(out, repo.encoder_fingerprint);
    io::write_u64(out, repo.corpus_fingerprint);
    io::write_u8(out, repo.includes_unlabeled ? 1 : 0);
    const std::size_t bitmap_bytes = (repo.label_dim + 7) / 8;
    for (const auto& entry : repo.entries) {
        io::write_string(out, entry.id);
        io::write_f32_array(out, entry.vec.data(), entry.vec.numel());
        io::write_f32_array(out, entry.key.data(), entry.key.numel());
        io::write_u8(out, entry.labeled() ? 1 : 0);
        if (entry.labeled()) {
            std::vector<std::uint8_t> bitmap(bitmap_bytes, 0);
            for (std::size_t l = 0; l < repo.label_dim; ++l)
                if ((*entry.labels)[l]) bitmap[l / 8] |= static_cast<std::uint8_t>(1u << (l % 8));
            io::write_bytes(out, bitmap.data(), bitmap.size());
        }
    }
}

inline Repository load_repository(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io::FormatError("cannot open " + path.string());
    io::expect_magic(in, kRepositoryMagic, "repository");
    const std::uint32_t version = io::read_u32(in);
    if (version != kRepositoryVersion)
        throw io::FormatError("unsupported repository version " + std::to_string(version));
    Repository repo;
    repo.dim = io::read_u32(in);
    repo.label_dim = io::read_u32(in);
    const std::uint64_t count = io::read_u64(in);
    repo.encoder_fingerprint = io::read_u64(in);
    repo.corpus_fingerprint = io::read_u64(in);
    repo.includes_unlabeled = io::read_u8(in) == 1;
    const std::size_t bitmap_bytes = (repo.label_dim + 7) / 8;
    repo.entries.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        RepositoryEntryT<float> entry;
        entry.id = io::read_string(in);
        entry.vec = Tensor(Shape{repo.dim});
        for (std::size_t d = 0; d < repo.dim; ++d) entry.vec[d] = io::read_f32(in);
        entry.key = Tensor(Shape{repo.dim});
        for (std::size_t d = 0; d < repo.dim; ++d) entry.key[d] = io::read_f32(in);
        if (io::read_u8(in) == 1) {
            std::vector<std::uint8_t> bitmap(bitmap_bytes);
            io::read_bytes(in, bitmap.data(), bitmap.size());
            std::vector<std::uint8_t> hot(repo.label_dim, 0);
            for (std::size_t l = 0; l < repo.label_dim; ++l)
                hot[l] = (bitmap[l / 8] >> (l % 8)) & 1u;
            entry.labels = std::move(hot);
        }
        repo.entries.push_back(std::move(entry));
    }
    return repo;
}

}  // namespace ramlc
