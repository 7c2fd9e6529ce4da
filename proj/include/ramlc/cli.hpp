// Command-line entry point wiring the pipeline stages into reproducible
// commands. Exit codes: 0 success, 1 usage error, 2 runtime failure.
#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ramlc/config.hpp"
#include "ramlc/manifest.hpp"
#include "ramlc/metrics.hpp"
#include "ramlc/repository.hpp"
#include "ramlc/sweep.hpp"
#include "ramlc/synth.hpp"
#include "ramlc/trainer.hpp"

namespace ramlc {

namespace cli_detail {

namespace fs = std::filesystem;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    ConfigFile file;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value config file");
        cmd->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
        cmd->add_option("--seed", seed, "RNG seed (overrides RAMLC_SEED and config)")
            ->each([this](const std::string&) { seed_set = true; });
        cmd->add_option("--threads", threads, "cap worker threads (0 = hardware default)");
    }

    // call after parsing: loads the config file and settles seed/threads
    void resolve() {
        if (!config_path.empty()) file = ConfigFile::load(config_path);
        seed = resolve_option<std::uint64_t>(seed_set, seed, "RAMLC_SEED", file, "seed", seed);
#ifdef _OPENMP
        if (threads > 0) omp_set_num_threads(threads);
#endif
    }

    template <typename T>
    T opt(bool cli_set, T cli_value, const std::string& key, T fallback) const {
        return resolve_option<T>(cli_set, cli_value, nullptr, file, key, fallback);
    }
};

// tracks which CLI options were explicitly passed
struct Flagged {
    CLI::App* cmd;
    template <typename T>
    CLI::Option* add(const std::string& name, T& target, const std::string& help) {
        return cmd->add_option(name, target, help);
    }
};

inline std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct EncoderFlags {
    std::size_t dim = 64, layers = 2, heads = 4, ffn = 128, max_seq = 256;
    double dropout = 0.1;
    bool dim_set = false, layers_set = false, heads_set = false, ffn_set = false,
         max_seq_set = false, dropout_set = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--dim", dim, "model width")->each([this](const std::string&) { dim_set = true; });
        cmd->add_option("--enc-layers", layers, "encoder layers")->each([this](const std::string&) {
            layers_set = true;
        });
        cmd->add_option("--enc-heads", heads, "encoder attention heads")->each([this](const std::string&) {
            heads_set = true;
        });
        cmd->add_option("--ffn", ffn, "feed-forward width")->each([this](const std::string&) {
            ffn_set = true;
        });
        cmd->add_option("--max-seq", max_seq, "maximum sequence length")->each([this](const std::string&) {
            max_seq_set = true;
        });
        cmd->add_option("--dropout", dropout, "dropout rate")->each([this](const std::string&) {
            dropout_set = true;
        });
    }

    EncoderConfig resolve(const CommonOpts& common, std::size_t vocab_size) const {
        EncoderConfig cfg;
        cfg.dim = common.opt(dim_set, dim, "dim", cfg.dim);
        cfg.enc_layers = common.opt(layers_set, layers, "enc_layers", cfg.enc_layers);
        cfg.enc_heads = common.opt(heads_set, heads, "enc_heads", cfg.enc_heads);
        cfg.ffn_dim = common.opt(ffn_set, ffn, "ffn_dim", cfg.ffn_dim);
        cfg.max_seq_len = common.opt(max_seq_set, max_seq, "max_seq_len", cfg.max_seq_len);
        cfg.dropout = common.opt(dropout_set, dropout, "dropout", cfg.dropout);
        cfg.vocab_size = vocab_size;
        cfg.validate();
        return cfg;
    }
};

struct TrainFlags {
    double lr = 3e-4;
    std::size_t batch = 16, epochs = 50, patience = 5;
    bool lr_set = false, batch_set = false, epochs_set = false, patience_set = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--lr", lr, "learning rate")->each([this](const std::string&) { lr_set = true; });
        cmd->add_option("--batch", batch, "batch size")->each([this](const std::string&) { batch_set = true; });
        cmd->add_option("--epochs", epochs, "maximum epochs")->each([this](const std::string&) {
            epochs_set = true;
        });
        cmd->add_option("--patience", patience, "early-stopping patience (epochs)")
            ->each([this](const std::string&) { patience_set = true; });
    }

    TrainConfig resolve(const CommonOpts& common) const {
        TrainConfig cfg = TrainConfig::desk_scale();
        cfg.lr = common.opt(lr_set, lr, "lr", cfg.lr);
        cfg.batch_size = common.opt(batch_set, batch, "batch_size", cfg.batch_size);
        cfg.max_epochs = common.opt(epochs_set, epochs, "max_epochs", cfg.max_epochs);
        cfg.patience = common.opt(patience_set, patience, "patience", cfg.patience);
        cfg.seed = common.seed;
        cfg.validate();
        return cfg;
    }
};

inline void record_encoder(RunManifest& manifest, const EncoderConfig& cfg) {
    manifest.set_config_num("dim", cfg.dim);
    manifest.set_config_num("enc_layers", cfg.enc_layers);
    manifest.set_config_num("enc_heads", cfg.enc_heads);
    manifest.set_config_num("ffn_dim", cfg.ffn_dim);
    manifest.set_config_num("max_seq_len", cfg.max_seq_len);
    manifest.set_config_num("vocab_size", cfg.vocab_size);
    manifest.set_config_num("dropout", cfg.dropout);
}

inline void record_train(RunManifest& manifest, const TrainConfig& cfg) {
    manifest.set_config_num("lr", cfg.lr);
    manifest.set_config_num("batch_size", cfg.batch_size);
    manifest.set_config_num("max_epochs", cfg.max_epochs);
    manifest.set_config_num("patience", cfg.patience);
    manifest.set_config_num("beta1", cfg.beta1);
    manifest.set_config_num("beta2", cfg.beta2);
    manifest.set_config_num("adam_eps", cfg.eps);
    manifest.set_config_num("threshold", cfg.threshold);
}

inline void add_corpus_inputs(RunManifest& manifest, const fs::path& data_dir) {
    for (const char* name :
         {"labels.txt", "train.jsonl", "dev.jsonl", "test.jsonl", "unlabeled.jsonl"})
        manifest.add_input(data_dir / name);
}

// ---- subcommand runners; each returns the process exit code ----------------

struct GenerateArgs {
    CommonOpts common;
    SynthParams params;
};

inline int run_generate(GenerateArgs& args) {
    args.common.resolve();
    args.params.seed = args.common.seed;
    RunManifest manifest("generate-data");
    manifest.set_seed(args.params.seed);
    manifest.set_config_num("labels", args.params.label_count);
    manifest.set_config_num("zipf_s", args.params.zipf_exponent);
    manifest.set_config_num("train", args.params.train_size);
    manifest.set_config_num("dev", args.params.dev_size);
    manifest.set_config_num("test", args.params.test_size);
    manifest.set_config_num("unlabeled", args.params.unlabeled_size);
    manifest.set_config_num("len_min", args.params.len_min);
    manifest.set_config_num("len_max", args.params.len_max);
    manifest.set_config_num("vocab", args.params.vocab_size);
    manifest.set_config_num("signal", args.params.signal_strength);
    manifest.set_config_num("pool", args.params.pool_size);
    const fs::path out = args.common.out_dir;
    try {
        auto raw = synth_generate_raw(args.params);
        save_raw_corpus(raw, out);
        for (const char* name : {"labels.txt", "train.jsonl", "dev.jsonl", "test.jsonl"})
            manifest.add_artifact(out / name);
        if (args.params.unlabeled_size > 0) manifest.add_artifact(out / "unlabeled.jsonl");
        manifest.finish(out / "manifest.json", true);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "generate-data: " << e.what() << "\n";
        manifest.finish(out / "manifest.json", false, e.what());
        return 2;
    }
}

struct TrainVanillaArgs {
    CommonOpts common;
    std::string data_dir;
    EncoderFlags encoder;
    TrainFlags train;
};

inline int run_train_vanilla(TrainVanillaArgs& args) {
    args.common.resolve();
    RunManifest manifest("train-vanilla");
    manifest.set_seed(args.common.seed);
    const fs::path out = args.common.out_dir;
    try {
        auto t0 = std::chrono::steady_clock::now();
        add_corpus_inputs(manifest, args.data_dir);
        EncoderFlags ef = args.encoder;
        auto probe = load_corpus(args.data_dir, std::nullopt,
                                 ef.resolve(args.common, 1).max_seq_len);
        EncoderConfig enc = args.encoder.resolve(args.common, probe.vocab.size());
        TrainConfig cfg = args.train.resolve(args.common);
        record_encoder(manifest, enc);
        record_train(manifest, cfg);
        manifest.add_timing("load", std::chrono::duration<double>(
                                        std::chrono::steady_clock::now() - t0)
                                        .count());

        auto t1 = std::chrono::steady_clock::now();
        auto result = train_vanilla(cfg, probe.corpus, enc);
        manifest.add_timing("train", std::chrono::duration<double>(
                                         std::chrono::steady_clock::now() - t1)
                                         .count());

        fs::create_directories(out);
        save_checkpoint(result.checkpoint, out / "vanilla.ckpt");
        result.log.write_csv((out / "train_log.csv").string());
        manifest.add_artifact(out / "vanilla.ckpt");
        manifest.add_artifact(out / "train_log.csv");
        manifest.set_config("stop_reason", result.log.stop_reason);
        manifest.set_config_num("best_epoch", result.log.best_epoch);
        manifest.finish(out / "manifest.json", true);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "train-vanilla: " << e.what() << "\n";
        manifest.finish(out / "manifest.json", false, e.what());
        return 2;
    }
}

struct BuildRepoArgs {
    CommonOpts common;
    std::string data_dir;
    std::string checkpoint_path;
    bool include_unlabeled = false;
};

inline int run_build_repo(BuildRepoArgs& args) {
    args.common.resolve();
    RunManifest manifest("build-repo");
    manifest.set_seed(args.common.seed);
    const fs::path out = args.common.out_dir;
    try {
        add_corpus_inputs(manifest, args.data_dir);
        manifest.add_input(args.checkpoint_path);
        manifest.set_config("include_unlabeled", args.include_unlabeled ? "true" : "false");
        auto ckpt = load_checkpoint(args.checkpoint_path);
        auto model = vanilla_from_checkpoint(ckpt);
        auto loaded = load_corpus(args.data_dir, std::nullopt, model.config.max_seq_len);
        auto repo = build_repository(model, loaded.corpus, args.include_unlabeled);
        fs::create_directories(out);
        save_repository(repo, out / "repo.bin");
        manifest.add_artifact(out / "repo.bin");
        manifest.set_config_num("entries", repo.size());
        manifest.finish(out / "manifest.json", true);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "build-repo: " << e.what() << "\n";
        manifest.finish(out / "manifest.json", false, e.what());
        return 2;
    }
}

struct TrainRaArgs {
    CommonOpts common;
    std::string data_dir;
    std::string checkpoint_path;
    std::string repo_path;
    TrainFlags train;
    std::size_t k = 4, ca_layers = 2, ca_heads = 2;
    bool k_set = false, layers_set = false, heads_set = false;
    std::string neighbor_mode = "text";
    bool mode_set = false;
};

inline int run_train_ra(TrainRaArgs& args) {
    args.common.resolve();
    RunManifest manifest("train-ra");
    manifest.set_seed(args.common.seed);
    const fs::path out = args.common.out_dir;
    try {
        add_corpus_inputs(manifest, args.data_dir);
        manifest.add_input(args.checkpoint_path);
        manifest.add_input(args.repo_path);

        CrossAttentionConfig ca;
        ca.k = args.common.opt(args.k_set, args.k, "k", ca.k);
        ca.ca_layers = args.common.opt(args.layers_set, args.ca_layers, "ca_layers", ca.ca_layers);
        ca.ca_heads = args.common.opt(args.heads_set, args.ca_heads, "ca_heads", ca.ca_heads);
        ca.mode = parse_neighbor_mode(
            args.common.opt<std::string>(args.mode_set, args.neighbor_mode, "neighbor_mode",
                                         "text"));
        TrainConfig cfg = args.train.resolve(args.common);
        record_train(manifest, cfg);
        manifest.set_config_num("k", ca.k);
        manifest.set_config_num("ca_layers", ca.ca_layers);
        manifest.set_config_num("ca_heads", ca.ca_heads);
        manifest.set_config("neighbor_mode", neighbor_mode_name(ca.mode));

        auto ckpt = load_checkpoint(args.checkpoint_path);
        ca.validate(ckpt.encoder.dim);
        auto loaded = load_corpus(args.data_dir, std::nullopt, ckpt.encoder.max_seq_len);
        auto repo = load_repository(args.repo_path);

        auto t1 = std::chrono::steady_clock::now();
        auto result = train_ra(cfg, loaded.corpus, repo, ckpt, ca);
        manifest.add_timing("train", std::chrono::duration<double>(
                                         std::chrono::steady_clock::now() - t1)
                                         .count());

        fs::create_directories(out);
        save_checkpoint(result.checkpoint, out / "ra.ckpt");
        result.log.write_csv((out / "train_log.csv").string());
        manifest.add_artifact(out / "ra.ckpt");
        manifest.add_artifact(out / "train_log.csv");
        manifest.set_config("stop_reason", result.log.stop_reason);
        manifest.set_config_num("best_epoch", result.log.best_epoch);
        manifest.finish(out / "manifest.json", true);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "train-ra: " << e.what() << "\n";
        manifest.finish(out / "manifest.json", false, e.what());
        return 2;
    }
}

struct EvaluateArgs {
    CommonOpts common;
    std::string data_dir;
    std::string checkpoint_path;
    std::string repo_path;
    std::string split = "test";
    std::size_t bins = 0;
};

inline int run_evaluate(EvaluateArgs& args) {
    args.common.resolve();
    RunManifest manifest("evaluate");
    manifest.set_seed(args.common.seed);
    const fs::path out = args.common.out_dir;
    try {
        add_corpus_inputs(manifest, args.data_dir);
        manifest.add_input(args.checkpoint_path);
        manifest.set_config("split", args.split);
        manifest.set_config_num("bins", args.bins);

        auto ckpt = load_checkpoint(args.checkpoint_path);
        auto loaded = load_corpus(args.data_dir, std::nullopt, ckpt.encoder.max_seq_len);
        const auto& docs = loaded.corpus.split(args.split);

        PredictionSet preds;
        if (ckpt.phase == "ra") {
            if (args.repo_path.empty())
                throw std::runtime_error("evaluating an ra checkpoint requires --repo");
            manifest.add_input(args.repo_path);
            auto repo = load_repository(args.repo_path);
            preds = predict_split(ra_from_checkpoint(ckpt), repo, docs);
        } else {
            preds = predict_split(vanilla_from_checkpoint(ckpt), docs);
        }

        auto scores = f1_scores(preds);
        MetricsReport report;
        report.micro_f1 = scores.micro_f1;
        report.macro_f1 = scores.macro_f1;
        report.per_label = scores.per_label;
        report.metadata["split"] = args.split;
        report.metadata["phase"] = ckpt.phase;
        if (args.bins >= 2)
            report.bins = binned_macro_f1(scores, label_frequencies(loaded.corpus), args.bins);

        fs::create_directories(out);
        report.write_csv((out / "metrics.csv").string());
        manifest.add_artifact(out / "metrics.csv");
        manifest.finish(out / "manifest.json", true);
        std::cout << "split " << args.split << " micro_f1 " << scores.micro_f1 << " macro_f1 "
                  << scores.macro_f1 << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "evaluate: " << e.what() << "\n";
        manifest.finish(out / "manifest.json", false, e.what());
        return 2;
    }
}

struct LabelOverlapArgs {
    CommonOpts common;
    std::string data_dir;
    std::string checkpoint_path;
    std::string repo_path;
    std::size_t k = 4;
    bool k_set = false;
};

inline int run_label_overlap(LabelOverlapArgs& args) {
    args.common.resolve();
    RunManifest manifest("label-overlap");
    manifest.set_seed(args.common.seed);
    const fs::path out = args.common.out_dir;
    try {
        add_corpus_inputs(manifest, args.data_dir);
        manifest.add_input(args.checkpoint_path);
        manifest.add_input(args.repo_path);
        const std::size_t k = args.common.opt(args.k_set, args.k, "k", args.k);
        manifest.set_config_num("k", k);

        auto ckpt = load_checkpoint(args.checkpoint_path);
        auto model = vanilla_from_checkpoint(ckpt);
        auto loaded = load_corpus(args.data_dir, std::nullopt, model.config.max_seq_len);
        auto repo = load_repository(args.repo_path);

        const double lo = label_overlap(model, repo, loaded.corpus.train, k);
        const double lo_random =
            label_overlap_random(repo, loaded.corpus.train, k, args.common.seed);

        fs::create_directories(out);
        std::ofstream csv(out / "label_overlap.csv");
        csv << "k,label_overlap,random_baseline\n";
        csv << k << "," << lo << "," << lo_random << "\n";
        csv.close();
        manifest.add_artifact(out / "label_overlap.csv");
        manifest.finish(out / "manifest.json", true);
        std::cout << "LO(k=" << k << ") " << lo << "  random " << lo_random << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "label-overlap: " << e.what() << "\n";
        manifest.finish(out / "manifest.json", false, e.what());
        return 2;
    }
}

struct SweepArgs {
    CommonOpts common;
    std::string data_dir;
    std::string axis = "k";
    std::string values;
    std::string seeds = "0,1,2,3,4";
    EncoderFlags encoder;
    TrainFlags train;
    std::size_t k = 4, ca_layers = 2, ca_heads = 2;
    std::string neighbor_mode = "text";
};

inline int run_sweep(SweepArgs& args) {
    args.common.resolve();
    RunManifest manifest("sweep");
    manifest.set_seed(args.common.seed);
    const fs::path out = args.common.out_dir;
    try {
        add_corpus_inputs(manifest, args.data_dir);
        manifest.set_config("axis", args.axis);
        manifest.set_config("values", args.values);
        manifest.set_config("seeds", args.seeds);

        SweepSpec spec;
        spec.axis = parse_sweep_axis(args.axis);
        spec.values = split_list(args.values);
        for (const auto& s : split_list(args.seeds)) spec.seeds.push_back(std::stoull(s));

        auto probe = load_corpus(args.data_dir, std::nullopt, 256);
        spec.encoder = args.encoder.resolve(args.common, probe.vocab.size());
        spec.train = args.train.resolve(args.common);
        spec.ca.k = args.k;
        spec.ca.ca_layers = args.ca_layers;
        spec.ca.ca_heads = args.ca_heads;
        spec.ca.mode = parse_neighbor_mode(args.neighbor_mode);
        record_encoder(manifest, spec.encoder);
        record_train(manifest, spec.train);

        auto loaded = load_corpus(args.data_dir, std::nullopt, spec.encoder.max_seq_len);
        auto report = sweep(spec, loaded.corpus);

        fs::create_directories(out);
        report.write_csv((out / "sweep.csv").string());
        report.write_long_csv((out / "sweep_long.csv").string());
        manifest.add_artifact(out / "sweep.csv");
        manifest.add_artifact(out / "sweep_long.csv");
        manifest.finish(out / "manifest.json", true);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "sweep: " << e.what() << "\n";
        manifest.finish(out / "manifest.json", false, e.what());
        return 2;
    }
}

}  // namespace cli_detail

inline int dispatch(int argc, const char* const* argv) {
    using namespace cli_detail;
    CLI::App app{"retrieval-augmented multi-label text classification"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate-data", "generate a synthetic Zipfian corpus");
    gen.common.attach(gen_cmd);
    gen_cmd->add_option("--labels", gen.params.label_count, "label count");
    gen_cmd->add_option("--zipf-s", gen.params.zipf_exponent, "Zipf exponent");
    gen_cmd->add_option("--train", gen.params.train_size, "train split size");
    gen_cmd->add_option("--dev", gen.params.dev_size, "dev split size");
    gen_cmd->add_option("--test", gen.params.test_size, "test split size");
    gen_cmd->add_option("--unlabeled", gen.params.unlabeled_size, "unlabeled pool size");
    gen_cmd->add_option("--len-min", gen.params.len_min, "minimum document length");
    gen_cmd->add_option("--len-max", gen.params.len_max, "maximum document length");
    gen_cmd->add_option("--vocab", gen.params.vocab_size, "generator vocabulary size");
    gen_cmd->add_option("--signal", gen.params.signal_strength,
                        "fraction of tokens drawn from label pools");
    gen_cmd->add_option("--pool", gen.params.pool_size, "signature tokens per label");

    TrainVanillaArgs tv;
    auto* tv_cmd = app.add_subcommand("train-vanilla", "phase 1: train the vanilla classifier");
    tv.common.attach(tv_cmd);
    tv_cmd->add_option("--data", tv.data_dir, "corpus directory")->required();
    tv.encoder.attach(tv_cmd);
    tv.train.attach(tv_cmd);

    BuildRepoArgs br;
    auto* br_cmd = app.add_subcommand("build-repo", "cache document vectors for retrieval");
    br.common.attach(br_cmd);
    br_cmd->add_option("--data", br.data_dir, "corpus directory")->required();
    br_cmd->add_option("--checkpoint", br.checkpoint_path, "phase-1 checkpoint")->required();
    br_cmd->add_flag("--include-unlabeled", br.include_unlabeled,
                     "also cache the unlabeled pool");

    TrainRaArgs tr;
    auto* tr_cmd =
        app.add_subcommand("train-ra", "phase 2: train the retrieval-augmented classifier");
    tr.common.attach(tr_cmd);
    tr_cmd->add_option("--data", tr.data_dir, "corpus directory")->required();
    tr_cmd->add_option("--checkpoint", tr.checkpoint_path, "phase-1 checkpoint")->required();
    tr_cmd->add_option("--repo", tr.repo_path, "retrieval repository")->required();
    tr_cmd->add_option("--k", tr.k, "retrieved neighbors")->each([&tr](const std::string&) {
        tr.k_set = true;
    });
    tr_cmd->add_option("--ca-layers", tr.ca_layers, "cross-attention layers")
        ->each([&tr](const std::string&) { tr.layers_set = true; });
    tr_cmd->add_option("--ca-heads", tr.ca_heads, "cross-attention heads")->each([&tr](const std::string&) {
        tr.heads_set = true;
    });
    tr_cmd->add_option("--neighbor-mode", tr.neighbor_mode, "text|labels|text+labels")
        ->each([&tr](const std::string&) { tr.mode_set = true; });
    tr.train.attach(tr_cmd);

    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "score a checkpoint on a split");
    ev.common.attach(ev_cmd);
    ev_cmd->add_option("--data", ev.data_dir, "corpus directory")->required();
    ev_cmd->add_option("--checkpoint", ev.checkpoint_path, "checkpoint to score")->required();
    ev_cmd->add_option("--repo", ev.repo_path, "repository (required for ra checkpoints)");
    ev_cmd->add_option("--split", ev.split, "dev|test")->capture_default_str();
    ev_cmd->add_option("--bins", ev.bins, "frequency bins for binned macro-F1");

    LabelOverlapArgs lo;
    auto* lo_cmd = app.add_subcommand("label-overlap", "retrieval label-overlap diagnostic");
    lo.common.attach(lo_cmd);
    lo_cmd->add_option("--data", lo.data_dir, "corpus directory")->required();
    lo_cmd->add_option("--checkpoint", lo.checkpoint_path, "phase-1 checkpoint")->required();
    lo_cmd->add_option("--repo", lo.repo_path, "retrieval repository")->required();
    lo_cmd->add_option("--k", lo.k, "retrieved neighbors")->each([&lo](const std::string&) {
        lo.k_set = true;
    });

    SweepArgs sw;
    auto* sw_cmd = app.add_subcommand("sweep", "axis sweeps over k, the CA grid, or data fraction");
    sw.common.attach(sw_cmd);
    sw_cmd->add_option("--data", sw.data_dir, "corpus directory")->required();
    sw_cmd->add_option("--axis", sw.axis, "k|ca|fraction")->capture_default_str();
    sw_cmd->add_option("--values", sw.values, "comma-separated axis values")->required();
    sw_cmd->add_option("--seeds", sw.seeds, "comma-separated seeds")->capture_default_str();
    sw.encoder.attach(sw_cmd);
    sw.train.attach(sw_cmd);
    sw_cmd->add_option("--k", sw.k, "base retrieved neighbors");
    sw_cmd->add_option("--ca-layers", sw.ca_layers, "base cross-attention layers");
    sw_cmd->add_option("--ca-heads", sw.ca_heads, "base cross-attention heads");
    sw_cmd->add_option("--neighbor-mode", sw.neighbor_mode, "text|labels|text+labels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (gen_cmd->parsed()) return run_generate(gen);
        if (tv_cmd->parsed()) return run_train_vanilla(tv);
        if (br_cmd->parsed()) return run_build_repo(br);
        if (tr_cmd->parsed()) return run_train_ra(tr);
        if (ev_cmd->parsed()) return run_evaluate(ev);
        if (lo_cmd->parsed()) return run_label_overlap(lo);
        if (sw_cmd->parsed()) return run_sweep(sw);
    } catch (const std::exception& e) {
        // runners report and write manifests themselves; this is a last resort
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << app.help();
    return 1;
}

}  // namespace ramlc
