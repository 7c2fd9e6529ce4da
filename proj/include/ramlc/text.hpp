// Corpus ingestion: tokenization, vocabulary, JSON-lines loading, label stats.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ramlc/rng.hpp"

namespace ramlc {

struct CorpusError : std::runtime_error {
    explicit CorpusError(const std::string& what) : std::runtime_error(what) {}
};

// Lowercased maximal runs of alphanumeric characters (plus apostrophes);
// everything else is a separator.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '\'') {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

class Vocab {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;
    static constexpr std::size_t kCls = 2;

    Vocab() : tokens_{"<pad>", "<unk>", "<cls>"} { reindex(); }

    // Frequency-then-lexicographic order keeps ids stable across runs.
    static Vocab build(const std::vector<std::string>& texts) {
        std::map<std::string, std::size_t> counts;
        for (const auto& text : texts)
            for (auto& tok : tokenize(text)) ++counts[tok];
        std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        Vocab v;
        for (auto& [tok, cnt] : sorted) {
            v.tokens_.push_back(tok);
        }
        v.reindex();
        return v;
    }

    std::size_t size() const { return tokens_.size(); }

    std::size_t id_of(const std::string& token) const {
        auto it = to_id_.find(token);
        return it == to_id_.end() ? kUnk : it->second;
    }

    const std::string& token(std::size_t id) const { return tokens_.at(id); }

    std::uint64_t fingerprint() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& tok : tokens_) {
            for (char c : tok) {
                h ^= static_cast<unsigned char>(c);
                h *= 0x100000001b3ULL;
            }
            h ^= 0x1f;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    // CLS-prefixed ids, truncated so the total length never exceeds max_seq_len
    std::vector<std::size_t> encode(const std::string& text, std::size_t max_seq_len) const {
        std::vector<std::size_t> ids{kCls};
        for (const auto& tok : tokenize(text)) {
            if (ids.size() >= max_seq_len) break;
            ids.push_back(id_of(tok));
        }
        return ids;
    }

private:
    void reindex() {
        to_id_.clear();
        for (std::size_t i = 0; i < tokens_.size(); ++i) to_id_[tokens_[i]] = i;
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> to_id_;
};

struct Document {
    std::string id;
    std::string text;
    std::vector<std::size_t> token_ids;       // position 0 is always CLS
    std::vector<std::size_t> labels;          // sorted label ids; empty only for pool docs
};

struct Corpus {
    std::vector<std::string> label_names;
    std::vector<Document> train, dev, test, unlabeled;
    std::uint64_t vocab_fingerprint = 0;

    std::size_t label_count() const { return label_names.size(); }

    std::size_t label_id(const std::string& name) const {
        for (std::size_t i = 0; i < label_names.size(); ++i)
            if (label_names[i] == name) return i;
        throw CorpusError("unknown label: " + name);
    }

    const std::vector<Document>& split(const std::string& name) const {
        if (name == "train") return train;
        if (name == "dev") return dev;
        if (name == "test") return test;
        throw CorpusError("unknown split: " + name);
    }
};

// Raw records before tokenization; also the unit the generator emits.
struct RawRecord {
    std::string id;
    std::string text;
    std::vector<std::string> labels;
};

struct RawCorpus {
    std::vector<std::string> label_names;
    std::vector<RawRecord> train, dev, test, unlabeled;
};

namespace detail {

inline std::vector<RawRecord> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open " + path.string());
    std::vector<RawRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw CorpusError(path.filename().string() + ":" + std::to_string(line_no) +
                              ": malformed record: " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j.contains("labels") ||
            !j["id"].is_string() || !j["text"].is_string() || !j["labels"].is_array()) {
            throw CorpusError(path.filename().string() + ":" + std::to_string(line_no) +
                              ": malformed record: expected {\"id\", \"text\", \"labels\"}");
        }
        RawRecord r;
        r.id = j["id"].get<std::string>();
        r.text = j["text"].get<std::string>();
        for (const auto& l : j["labels"]) {
            if (!l.is_string())
                throw CorpusError(path.filename().string() + ":" + std::to_string(line_no) +
                                  ": malformed record: label entries must be strings");
            r.labels.push_back(l.get<std::string>());
        }
        records.push_back(std::move(r));
    }
    return records;
}

inline std::vector<Document> to_documents(const std::vector<RawRecord>& records,
                                          const Vocab& vocab,
                                          const std::map<std::string, std::size_t>& label_ids,
                                          std::size_t max_seq_len, bool allow_unlabeled,
                                          std::unordered_set<std::string>& seen_ids) {
    std::vector<Document> docs;
    docs.reserve(records.size());
    for (const auto& r : records) {
        if (!seen_ids.insert(r.id).second) throw CorpusError("duplicate document id: " + r.id);
        Document d;
        d.id = r.id;
        d.text = r.text;
        d.token_ids = vocab.encode(r.text, max_seq_len);
        std::set<std::size_t> labels;
        for (const auto& name : r.labels) {
            auto it = label_ids.find(name);
            if (it == label_ids.end())
                throw CorpusError("unknown label \"" + name + "\" in document " + r.id);
            labels.insert(it->second);
        }
        if (labels.empty() && !allow_unlabeled)
            throw CorpusError("document " + r.id + " has no labels");
        d.labels.assign(labels.begin(), labels.end());
        docs.push_back(std::move(d));
    }
    return docs;
}

}  // namespace detail

struct LoadedCorpus {
    Corpus corpus;
    Vocab vocab;
};

// Directory layout: labels.txt, train.jsonl, dev.jsonl, test.jsonl and an
// optional unlabeled.jsonl pool. When `vocab` is absent it is built from the
// train split alone.
inline LoadedCorpus load_corpus(const std::filesystem::path& dir,
                                const std::optional<Vocab>& vocab, std::size_t max_seq_len) {
    std::ifstream labels_in(dir / "labels.txt");
    if (!labels_in) throw CorpusError("cannot open " + (dir / "labels.txt").string());
    std::vector<std::string> label_names;
    std::map<std::string, std::size_t> label_ids;
    std::string line;
    while (std::getline(labels_in, line)) {
        if (line.empty()) continue;
        if (label_ids.count(line)) throw CorpusError("duplicate label in catalog: " + line);
        label_ids[line] = label_names.size();
        label_names.push_back(line);
    }

    auto train_raw = detail::read_jsonl(dir / "train.jsonl");
    if (train_raw.empty()) throw CorpusError("empty train split in " + dir.string());
    auto dev_raw = detail::read_jsonl(dir / "dev.jsonl");
    auto test_raw = detail::read_jsonl(dir / "test.jsonl");
    std::vector<RawRecord> pool_raw;
    if (std::filesystem::exists(dir / "unlabeled.jsonl"))
        pool_raw = detail::read_jsonl(dir / "unlabeled.jsonl");

    Vocab v = vocab.has_value() ? *vocab : [&] {
        std::vector<std::string> texts;
        texts.reserve(train_raw.size());
        for (const auto& r : train_raw) texts.push_back(r.text);
        return Vocab::build(texts);
    }();

    LoadedCorpus out{Corpus{}, std::move(v)};
    out.corpus.label_names = std::move(label_names);
    std::unordered_set<std::string> seen;
    out.corpus.train =
        detail::to_documents(train_raw, out.vocab, label_ids, max_seq_len, false, seen);
    out.corpus.dev = detail::to_documents(dev_raw, out.vocab, label_ids, max_seq_len, false, seen);
    out.corpus.test =
        detail::to_documents(test_raw, out.vocab, label_ids, max_seq_len, false, seen);
    out.corpus.unlabeled =
        detail::to_documents(pool_raw, out.vocab, label_ids, max_seq_len, true, seen);
    out.corpus.vocab_fingerprint = out.vocab.fingerprint();
    return out;
}

inline void save_raw_corpus(const RawCorpus& raw, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write_jsonl = [](const std::vector<RawRecord>& records,
                          const std::filesystem::path& path) {
        std::ofstream out(path);
        if (!out) throw CorpusError("cannot write " + path.string());
        for (const auto& r : records) {
            nlohmann::json j{{"id", r.id}, {"text", r.text}, {"labels", r.labels}};
            out << j.dump() << '\n';
        }
    };
    std::ofstream labels_out(dir / "labels.txt");
    for (const auto& name : raw.label_names) labels_out << name << '\n';
    write_jsonl(raw.train, dir / "train.jsonl");
    write_jsonl(raw.dev, dir / "dev.jsonl");
    write_jsonl(raw.test, dir / "test.jsonl");
    if (!raw.unlabeled.empty()) write_jsonl(raw.unlabeled, dir / "unlabeled.jsonl");
}

// Train-split document counts per label id; labels unseen in train map to 0.
inline std::vector<std::size_t> label_frequencies(const Corpus& corpus) {
    if (corpus.train.empty()) throw CorpusError("label_frequencies: empty train split");
    std::vector<std::size_t> counts(corpus.label_count(), 0);
    for (const auto& doc : corpus.train)
        for (std::size_t l : doc.labels) ++counts[l];
    return counts;
}

}  // namespace ramlc
