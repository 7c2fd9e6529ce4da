#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "ramlc/synth.hpp"
#include "ramlc/trainer.hpp"

using namespace ramlc;

namespace {

// one small learnable corpus + trained phase-1/phase-2 artifacts, built once
struct Fixture {
    LoadedCorpus loaded;
    EncoderConfig enc;
    TrainConfig cfg;
    TrainResult vanilla;
    Repository repo;
    TrainResult ra;

    Fixture() {
        SynthParams params;
        params.label_count = 8;
        params.train_size = 300;
        params.dev_size = 60;
        params.test_size = 60;
        params.vocab_size = 150;
        params.pool_size = 8;
        params.len_min = 10;
        params.len_max = 24;
        params.signal_strength = 0.9;
        params.seed = 5;
        loaded = synth_corpus(params, 64);

        enc.dim = 32;
        enc.enc_layers = 1;
        enc.enc_heads = 2;
        enc.ffn_dim = 64;
        enc.max_seq_len = 64;
        enc.vocab_size = loaded.vocab.size();
        enc.dropout = 0.1;

        cfg = TrainConfig::desk_scale();
        cfg.lr = 1e-3;
        cfg.batch_size = 8;
        cfg.max_epochs = 12;
        cfg.patience = 4;
        cfg.seed = 1;

        vanilla = train_vanilla(cfg, loaded.corpus, enc);
        repo = build_repository(vanilla_from_checkpoint(vanilla.checkpoint), loaded.corpus, false);
        CrossAttentionConfig ca;
        ca.ca_layers = 2;
        ca.ca_heads = 2;
        ca.k = 4;
        ra = train_ra(cfg, loaded.corpus, repo, vanilla.checkpoint, ca);
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("early stopper: strictly improving metrics never stop before max", "[trainer]") {
    EarlyStopper stopper(5);
    for (std::size_t epoch = 1; epoch <= 50; ++epoch) {
        REQUIRE(stopper.update(epoch, 0.01 * double(epoch)));
        REQUIRE_FALSE(stopper.should_stop(epoch));
    }
    REQUIRE(stopper.best_epoch() == 50);
}

TEST_CASE("early stopper: stops after patience epochs without improvement", "[trainer]") {
    EarlyStopper stopper(3);
    stopper.update(1, 0.5);
    stopper.update(2, 0.4);
    REQUIRE_FALSE(stopper.should_stop(2));
    stopper.update(3, 0.5);  // tie does not improve
    REQUIRE_FALSE(stopper.should_stop(3));
    stopper.update(4, 0.45);
    REQUIRE(stopper.should_stop(4));  // epochs 2,3,4 failed to improve
    REQUIRE(stopper.best_epoch() == 1);
}

TEST_CASE("train config validation", "[trainer][errors]") {
    TrainConfig cfg;
    cfg.lr = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.patience = cfg.max_epochs + 1;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("phase-1 training reaches dev micro-F1 above 0.6 on a learnable corpus",
          "[trainer][slow]") {
    const auto& f = fixture();
    const auto& best = f.vanilla.log.epochs[f.vanilla.log.best_epoch - 1];
    INFO("best epoch " << f.vanilla.log.best_epoch << " micro " << best.dev_micro_f1);
    REQUIRE(best.dev_micro_f1 > 0.6);

    // log invariant: best_epoch attains the maximum dev macro-F1, ties earliest
    double best_macro = 0;
    std::size_t best_epoch = 0;
    for (const auto& row : f.vanilla.log.epochs) {
        if (row.dev_macro_f1 > best_macro) {
            best_macro = row.dev_macro_f1;
            best_epoch = row.epoch;
        }
    }
    REQUIRE(f.vanilla.log.best_epoch == best_epoch);
    REQUIRE((f.vanilla.log.stop_reason == "early_stopping" ||
             f.vanilla.log.stop_reason == "max_epochs"));
}

TEST_CASE("identical config and seed give bitwise-identical runs", "[trainer][slow]") {
    SynthParams params;
    params.label_count = 4;
    params.train_size = 40;
    params.dev_size = 10;
    params.test_size = 10;
    params.vocab_size = 100;
    params.seed = 3;
    auto loaded = synth_corpus(params, 64);

    EncoderConfig enc;
    enc.dim = 16;
    enc.enc_layers = 1;
    enc.enc_heads = 2;
    enc.ffn_dim = 32;
    enc.max_seq_len = 64;
    enc.vocab_size = loaded.vocab.size();
    enc.dropout = 0.1;  // exercises the dropout rng determinism

    TrainConfig cfg = TrainConfig::desk_scale();
    cfg.batch_size = 8;
    cfg.max_epochs = 3;
    cfg.patience = 3;
    cfg.seed = 9;

    auto a = train_vanilla(cfg, loaded.corpus, enc);
    auto b = train_vanilla(cfg, loaded.corpus, enc);
    REQUIRE(a.log.epochs.size() == b.log.epochs.size());
    for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
        REQUIRE(a.log.epochs[e].loss == b.log.epochs[e].loss);
        REQUIRE(a.log.epochs[e].dev_macro_f1 == b.log.epochs[e].dev_macro_f1);
    }
    REQUIRE(a.checkpoint.fingerprint() == b.checkpoint.fingerprint());

    // and the ra phase as well
    auto repo = build_repository(vanilla_from_checkpoint(a.checkpoint), loaded.corpus, false);
    CrossAttentionConfig ca;
    ca.k = 2;
    auto ra1 = train_ra(cfg, loaded.corpus, repo, a.checkpoint, ca);
    auto ra2 = train_ra(cfg, loaded.corpus, repo, a.checkpoint, ca);
    REQUIRE(ra1.checkpoint.fingerprint() == ra2.checkpoint.fingerprint());
    for (std::size_t e = 0; e < ra1.log.epochs.size(); ++e)
        REQUIRE(ra1.log.epochs[e].loss == ra2.log.epochs[e].loss);
}

TEST_CASE("vanishing learning rate leaves the zero-init model untouched", "[trainer]") {
    // the config invariant requires lr > 0; an lr below float resolution
    // exercises the no-updates contract without violating it
    SynthParams params;
    params.label_count = 4;
    params.train_size = 30;
    params.dev_size = 10;
    params.test_size = 10;
    params.vocab_size = 100;
    params.seed = 4;
    auto loaded = synth_corpus(params, 64);

    EncoderConfig enc;
    enc.dim = 16;
    enc.enc_layers = 1;
    enc.enc_heads = 2;
    enc.ffn_dim = 32;
    enc.max_seq_len = 64;
    enc.vocab_size = loaded.vocab.size();
    enc.dropout = 0.0;

    TrainConfig cfg;
    cfg.lr = 1e-30;
    cfg.batch_size = 8;
    cfg.max_epochs = 2;
    cfg.patience = 2;
    cfg.seed = 2;

    auto vanilla = train_vanilla(cfg, loaded.corpus, enc);
    auto repo = build_repository(vanilla_from_checkpoint(vanilla.checkpoint), loaded.corpus, false);
    CrossAttentionConfig ca;
    ca.k = 2;
    auto ra = train_ra(cfg, loaded.corpus, repo, vanilla.checkpoint, ca);

    // the trained ra model is still the zero-init handoff
    auto fresh = RAClassifier::init_from_vanilla(vanilla_from_checkpoint(vanilla.checkpoint),
                                                 ca, cfg.seed);
    auto trained_preds = predict_split(ra_from_checkpoint(ra.checkpoint), repo, loaded.corpus.dev);
    auto fresh_preds = predict_split(fresh, repo, loaded.corpus.dev);
    auto trained_f1 = f1_scores(trained_preds);
    auto fresh_f1 = f1_scores(fresh_preds);
    REQUIRE(trained_f1.micro_f1 == fresh_f1.micro_f1);
    REQUIRE(trained_f1.macro_f1 == fresh_f1.macro_f1);
    REQUIRE(ra.log.epochs.back().dev_macro_f1 == fresh_f1.macro_f1);
}

TEST_CASE("divergent training aborts naming the epoch and batch", "[trainer][errors]") {
    SynthParams params;
    params.label_count = 4;
    params.train_size = 30;
    params.dev_size = 10;
    params.test_size = 10;
    params.vocab_size = 100;
    params.seed = 6;
    auto loaded = synth_corpus(params, 64);

    EncoderConfig enc;
    enc.dim = 16;
    enc.enc_layers = 1;
    enc.enc_heads = 2;
    enc.ffn_dim = 32;
    enc.max_seq_len = 64;
    enc.vocab_size = loaded.vocab.size();
    enc.dropout = 0.0;

    TrainConfig cfg;
    cfg.lr = 1e25;  // guarantees an overflow within the first epoch
    cfg.batch_size = 8;
    cfg.max_epochs = 3;
    cfg.patience = 3;

    REQUIRE_THROWS_MATCHES(train_vanilla(cfg, loaded.corpus, enc), TrainError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("epoch") &&
                               Catch::Matchers::ContainsSubstring("batch")));
}

TEST_CASE("train_ra validates the repository fingerprint", "[trainer][errors]") {
    const auto& f = fixture();
    auto bad_repo = f.repo;
    bad_repo.encoder_fingerprint ^= 0xdead;
    CrossAttentionConfig ca;
    REQUIRE_THROWS_AS(train_ra(f.cfg, f.loaded.corpus, bad_repo, f.vanilla.checkpoint, ca),
                      TrainError);
}

TEST_CASE("phase-2 training returns an ra checkpoint wired to its source", "[trainer][slow]") {
    const auto& f = fixture();
    REQUIRE(f.ra.checkpoint.phase == "ra");
    REQUIRE(f.ra.checkpoint.ca.has_value());
    REQUIRE(f.ra.checkpoint.repo_fingerprint == f.repo.encoder_fingerprint);
    REQUIRE(f.ra.checkpoint.source_fingerprint == f.vanilla.checkpoint.fingerprint());
    REQUIRE(f.ra.checkpoint.params.has("ca0.wo"));
    REQUIRE(f.ra.checkpoint.params.has("fuse.ln.g"));
    REQUIRE_FALSE(f.ra.log.epochs.empty());
}

TEST_CASE("checkpoint round-trip reproduces dev metrics bitwise", "[trainer][slow]") {
    const auto& f = fixture();
    auto direct = f1_scores(predict_split(vanilla_from_checkpoint(f.vanilla.checkpoint),
                                          f.loaded.corpus.dev));

    auto path = std::filesystem::temp_directory_path() / "ramlc_trainer_ckpt.bin";
    save_checkpoint(f.vanilla.checkpoint, path);
    auto reloaded = load_checkpoint(path);
    auto from_disk = f1_scores(predict_split(vanilla_from_checkpoint(reloaded),
                                             f.loaded.corpus.dev));
    REQUIRE(direct.micro_f1 == from_disk.micro_f1);
    REQUIRE(direct.macro_f1 == from_disk.macro_f1);
    std::filesystem::remove(path);

    auto ra_path = std::filesystem::temp_directory_path() / "ramlc_trainer_ra_ckpt.bin";
    save_checkpoint(f.ra.checkpoint, ra_path);
    auto ra_reloaded = load_checkpoint(ra_path);
    auto ra_direct = f1_scores(predict_split(ra_from_checkpoint(f.ra.checkpoint), f.repo,
                                             f.loaded.corpus.dev));
    auto ra_disk = f1_scores(predict_split(ra_from_checkpoint(ra_reloaded), f.repo,
                                           f.loaded.corpus.dev));
    REQUIRE(ra_direct.macro_f1 == ra_disk.macro_f1);
    std::filesystem::remove(ra_path);
}

TEST_CASE("a trained encoder is sensitive to token positions", "[trainer][slow]") {
    const auto& f = fixture();
    auto model = vanilla_from_checkpoint(f.vanilla.checkpoint);

    // find a train document with at least 3 distinct non-CLS tokens
    const Document* doc = nullptr;
    for (const auto& d : f.loaded.corpus.train) {
        if (d.token_ids.size() >= 4 && d.token_ids[1] != d.token_ids[2]) {
            doc = &d;
            break;
        }
    }
    REQUIRE(doc != nullptr);
    Tensor base = model.encode(*doc);

    Document permuted = *doc;
    std::swap(permuted.token_ids[1], permuted.token_ids[2]);
    Tensor moved = model.encode(permuted);
    double diff = 0;
    for (std::size_t d = 0; d < base.numel(); ++d)
        diff += std::abs(double(base[d]) - double(moved[d]));
    REQUIRE(diff > 1e-6);
}

TEST_CASE("evaluation outputs are independent of batch composition", "[trainer][slow]") {
    const auto& f = fixture();
    auto model = vanilla_from_checkpoint(f.vanilla.checkpoint);

    auto full = predict_split(model, f.loaded.corpus.dev);
    std::vector<Document> solo{f.loaded.corpus.dev[7]};
    auto single = predict_split(model, solo);
    REQUIRE(full.probabilities[7] == single.probabilities[0]);

    std::vector<Document> slice(f.loaded.corpus.dev.begin() + 3, f.loaded.corpus.dev.begin() + 12);
    auto partial = predict_split(model, slice);
    REQUIRE(full.probabilities[7] == partial.probabilities[4]);
}

TEST_CASE("train log CSV has the documented columns", "[trainer]") {
    const auto& f = fixture();
    auto path = std::filesystem::temp_directory_path() / "ramlc_log.csv";
    f.vanilla.log.write_csv(path.string());
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "epoch,loss,dev_micro_f1,dev_macro_f1");
    std::string row;
    std::size_t rows = 0;
    while (std::getline(in, row))
        if (!row.empty()) ++rows;
    REQUIRE(rows == f.vanilla.log.epochs.size());
    std::filesystem::remove(path);
}
