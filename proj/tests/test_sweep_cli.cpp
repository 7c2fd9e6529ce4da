#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ramlc/cli.hpp"
#include "ramlc/sweep.hpp"
#include "ramlc/synth.hpp"

using namespace ramlc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("ramlc_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"ramlc"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return dispatch(static_cast<int>(argv.size()), argv.data());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// a corpus small enough that sweep cells train in well under a second
void write_tiny_corpus(const fs::path& dir, std::uint64_t seed = 3) {
    SynthParams params;
    params.label_count = 4;
    params.train_size = 40;
    params.dev_size = 10;
    params.test_size = 10;
    params.vocab_size = 80;
    params.pool_size = 6;
    params.len_min = 6;
    params.len_max = 12;
    params.seed = seed;
    save_raw_corpus(synth_generate_raw(params), dir);
}

std::vector<std::string> tiny_train_flags() {
    return {"--epochs", "2", "--patience", "2", "--batch", "8"};
}

std::vector<std::string> tiny_model_flags() {
    auto flags = tiny_train_flags();
    for (const char* f : {"--dim", "16", "--enc-layers", "1", "--enc-heads", "2", "--ffn", "32",
                          "--max-seq", "32", "--dropout", "0.0"})
        flags.push_back(f);
    return flags;
}

}  // namespace

TEST_CASE("subsample_train keeps dev/test fixed and honors fraction 1", "[sweep]") {
    SynthParams params;
    params.label_count = 4;
    params.train_size = 40;
    params.dev_size = 8;
    params.test_size = 8;
    params.vocab_size = 80;
    params.seed = 1;
    auto loaded = synth_corpus(params, 64);

    auto full = subsample_train(loaded.corpus, 1.0, 7);
    REQUIRE(full.train.size() == 40);
    for (std::size_t i = 0; i < 40; ++i) REQUIRE(full.train[i].id == loaded.corpus.train[i].id);

    auto half = subsample_train(loaded.corpus, 0.5, 7);
    REQUIRE(half.train.size() == 20);
    REQUIRE(half.dev.size() == 8);
    REQUIRE(half.test.size() == 8);
    auto again = subsample_train(loaded.corpus, 0.5, 7);
    for (std::size_t i = 0; i < 20; ++i) REQUIRE(half.train[i].id == again.train[i].id);
    auto other_seed = subsample_train(loaded.corpus, 0.5, 8);
    bool differs = false;
    for (std::size_t i = 0; i < 20; ++i)
        if (half.train[i].id != other_seed.train[i].id) differs = true;
    REQUIRE(differs);

    REQUIRE_THROWS_AS(subsample_train(loaded.corpus, 0.0, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(subsample_train(loaded.corpus, 1.5, 1), std::invalid_argument);
}

TEST_CASE("sweep produces one row per cell plus aggregates", "[sweep][slow]") {
    SynthParams params;
    params.label_count = 4;
    params.train_size = 40;
    params.dev_size = 10;
    params.test_size = 10;
    params.vocab_size = 80;
    params.pool_size = 6;
    params.len_min = 6;
    params.len_max = 12;
    params.seed = 2;
    auto loaded = synth_corpus(params, 32);

    SweepSpec spec;
    spec.axis = SweepAxis::kK;
    spec.values = {"2"};
    spec.seeds = {0};
    spec.encoder.dim = 16;
    spec.encoder.enc_layers = 1;
    spec.encoder.enc_heads = 2;
    spec.encoder.ffn_dim = 32;
    spec.encoder.max_seq_len = 32;
    spec.encoder.vocab_size = loaded.vocab.size();
    spec.encoder.dropout = 0.0;
    spec.train = TrainConfig::desk_scale();
    spec.train.batch_size = 8;
    spec.train.max_epochs = 2;
    spec.train.patience = 2;

    auto report = sweep(spec, loaded.corpus);
    REQUIRE(report.rows.size() == 1);
    REQUIRE(report.aggregates.size() == 1);
    REQUIRE(report.aggregates[0].cells == 1);
    REQUIRE(report.rows[0].axis_value == "2");

    // fraction 1.0 sweep equals a plain run with the same seed
    SweepSpec frac = spec;
    frac.axis = SweepAxis::kTrainFraction;
    frac.values = {"1.0"};
    auto frac_report = sweep(frac, loaded.corpus);
    TrainConfig plain_cfg = spec.train;
    plain_cfg.seed = 0;
    auto plain = train_vanilla(plain_cfg, loaded.corpus, spec.encoder);
    auto plain_dev = f1_scores(predict_split(vanilla_from_checkpoint(plain.checkpoint),
                                             loaded.corpus.dev));
    REQUIRE(frac_report.rows[0].baseline_dev_macro == plain_dev.macro_f1);
}

TEST_CASE("sweep failures identify the cell", "[sweep][errors]") {
    SynthParams params;
    params.label_count = 4;
    params.train_size = 10;
    params.dev_size = 4;
    params.test_size = 4;
    params.vocab_size = 80;
    params.seed = 2;
    auto loaded = synth_corpus(params, 32);

    SweepSpec spec;
    spec.axis = SweepAxis::kCaGrid;
    spec.values = {"2xbogus"};
    spec.seeds = {3};
    spec.encoder.dim = 16;
    spec.encoder.enc_layers = 1;
    spec.encoder.enc_heads = 2;
    spec.encoder.ffn_dim = 32;
    spec.encoder.max_seq_len = 32;
    spec.encoder.vocab_size = loaded.vocab.size();
    spec.train.batch_size = 4;
    spec.train.max_epochs = 1;
    spec.train.patience = 1;

    REQUIRE_THROWS_WITH(sweep(spec, loaded.corpus),
                        Catch::Matchers::ContainsSubstring("value=2xbogus") &&
                            Catch::Matchers::ContainsSubstring("seed=3"));
}

TEST_CASE("generate-data is byte-identical across runs with one seed", "[cli]") {
    auto out1 = temp_dir("gen1");
    auto out2 = temp_dir("gen2");
    std::vector<std::string> base{"generate-data", "--labels", "5",  "--train", "30",
                                  "--dev",         "5",        "--test", "5",   "--vocab",
                                  "80",            "--seed",   "11"};
    auto args1 = base;
    args1.push_back("--out-dir");
    args1.push_back(out1.string());
    auto args2 = base;
    args2.push_back("--out-dir");
    args2.push_back(out2.string());
    REQUIRE(run_cli(args1) == 0);
    REQUIRE(run_cli(args2) == 0);
    for (const char* name : {"labels.txt", "train.jsonl", "dev.jsonl", "test.jsonl"})
        REQUIRE(read_file(out1 / name) == read_file(out2 / name));
    REQUIRE(fs::exists(out1 / "manifest.json"));
}

TEST_CASE("train-ra without a repository is a usage error", "[cli][errors]") {
    REQUIRE(run_cli({"train-ra", "--data", "somewhere", "--checkpoint", "x.ckpt"}) == 1);
}

TEST_CASE("unknown subcommands and flags exit 1", "[cli][errors]") {
    REQUIRE(run_cli({"frobnicate"}) == 1);
    REQUIRE(run_cli({"generate-data", "--nonsense-flag", "3"}) == 1);
    REQUIRE(run_cli({}) == 1);
}

TEST_CASE("runtime failures exit 2 and write a failure manifest", "[cli][errors]") {
    auto out = temp_dir("fail");
    REQUIRE(run_cli({"train-vanilla", "--data", "/nonexistent-dir", "--out-dir",
                     out.string()}) == 2);
    auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
    REQUIRE(manifest["status"] == "failure");
    REQUIRE(manifest["failure_reason"].get<std::string>().find("nonexistent") !=
            std::string::npos);
}

TEST_CASE("full pipeline: generate, train both phases, evaluate, overlap", "[cli][slow]") {
    auto data = temp_dir("pipe_data");
    write_tiny_corpus(data);
    std::map<std::string, std::uint64_t> input_hashes;
    for (const char* name : {"labels.txt", "train.jsonl", "dev.jsonl", "test.jsonl"})
        input_hashes[name] = io::fnv1a_file((data / name).string());

    auto p1 = temp_dir("pipe_p1");
    auto flags = tiny_model_flags();
    std::vector<std::string> tv{"train-vanilla", "--data", data.string(), "--out-dir",
                                p1.string(),     "--seed", "1"};
    tv.insert(tv.end(), flags.begin(), flags.end());
    REQUIRE(run_cli(tv) == 0);
    REQUIRE(fs::exists(p1 / "vanilla.ckpt"));
    REQUIRE(fs::exists(p1 / "train_log.csv"));

    auto repo_dir = temp_dir("pipe_repo");
    REQUIRE(run_cli({"build-repo", "--data", data.string(), "--checkpoint",
                     (p1 / "vanilla.ckpt").string(), "--out-dir", repo_dir.string()}) == 0);
    REQUIRE(fs::exists(repo_dir / "repo.bin"));

    auto p2 = temp_dir("pipe_p2");
    std::vector<std::string> tr{"train-ra", "--data",  data.string(),
                                "--checkpoint", (p1 / "vanilla.ckpt").string(),
                                "--repo",   (repo_dir / "repo.bin").string(),
                                "--out-dir", p2.string(), "--seed", "1",
                                "--k", "2"};
    auto train_flags = tiny_train_flags();
    tr.insert(tr.end(), train_flags.begin(), train_flags.end());
    REQUIRE(run_cli(tr) == 0);
    REQUIRE(fs::exists(p2 / "ra.ckpt"));

    auto ev = temp_dir("pipe_eval");
    REQUIRE(run_cli({"evaluate", "--data", data.string(), "--checkpoint",
                     (p2 / "ra.ckpt").string(), "--repo", (repo_dir / "repo.bin").string(),
                     "--split", "dev", "--bins", "3", "--out-dir", ev.string()}) == 0);
    REQUIRE(fs::exists(ev / "metrics.csv"));
    const std::string metrics = read_file(ev / "metrics.csv");
    REQUIRE(metrics.find("micro_f1") != std::string::npos);
    REQUIRE(metrics.find("bin_lo") != std::string::npos);

    // evaluating the ra checkpoint without --repo is a runtime failure
    auto ev_bad = temp_dir("pipe_eval_bad");
    REQUIRE(run_cli({"evaluate", "--data", data.string(), "--checkpoint",
                     (p2 / "ra.ckpt").string(), "--out-dir", ev_bad.string()}) == 2);

    auto lo = temp_dir("pipe_lo");
    REQUIRE(run_cli({"label-overlap", "--data", data.string(), "--checkpoint",
                     (p1 / "vanilla.ckpt").string(), "--repo",
                     (repo_dir / "repo.bin").string(), "--k", "2", "--out-dir",
                     lo.string()}) == 0);
    const std::string lo_csv = read_file(lo / "label_overlap.csv");
    REQUIRE(lo_csv.find("label_overlap,random_baseline") != std::string::npos);

    // training stages are reproducible: second identical run, identical bytes
    auto p1b = temp_dir("pipe_p1b");
    std::vector<std::string> tvb{"train-vanilla", "--data", data.string(), "--out-dir",
                                 p1b.string(),    "--seed", "1"};
    tvb.insert(tvb.end(), flags.begin(), flags.end());
    REQUIRE(run_cli(tvb) == 0);
    REQUIRE(read_file(p1 / "vanilla.ckpt") == read_file(p1b / "vanilla.ckpt"));
    REQUIRE(read_file(p1 / "train_log.csv") == read_file(p1b / "train_log.csv"));

    // no command mutated its input files
    for (const auto& [name, hash] : input_hashes)
        REQUIRE(io::fnv1a_file((data / name).string()) == hash);
}

TEST_CASE("config file and RAMLC_SEED feed the precedence chain", "[cli]") {
    auto data = temp_dir("cfg_data");
    write_tiny_corpus(data, 4);
    auto cfg_dir = temp_dir("cfg");
    {
        std::ofstream cfg(cfg_dir / "run.cfg");
        cfg << "# tiny settings\n";
        cfg << "dim = 16\nenc_layers = 1\nenc_heads = 2\nffn_dim = 32\nmax_seq_len = 32\n";
        cfg << "dropout = 0.0\nmax_epochs = 1\npatience = 1\nbatch_size = 8\nseed = 21\n";
    }

    auto out_env = temp_dir("cfg_env");
    setenv("RAMLC_SEED", "33", 1);
    REQUIRE(run_cli({"train-vanilla", "--data", data.string(), "--config",
                     (cfg_dir / "run.cfg").string(), "--out-dir", out_env.string()}) == 0);
    auto manifest = nlohmann::json::parse(read_file(out_env / "manifest.json"));
    REQUIRE(manifest["seed"] == 33);  // env beats config file
    REQUIRE(manifest["config"]["dim"] == "16");

    auto out_flag = temp_dir("cfg_flag");
    REQUIRE(run_cli({"train-vanilla", "--data", data.string(), "--config",
                     (cfg_dir / "run.cfg").string(), "--seed", "44", "--out-dir",
                     out_flag.string()}) == 0);
    auto manifest2 = nlohmann::json::parse(read_file(out_flag / "manifest.json"));
    REQUIRE(manifest2["seed"] == 44);  // flag beats env
    unsetenv("RAMLC_SEED");

    auto out_cfg = temp_dir("cfg_only");
    REQUIRE(run_cli({"train-vanilla", "--data", data.string(), "--config",
                     (cfg_dir / "run.cfg").string(), "--out-dir", out_cfg.string()}) == 0);
    auto manifest3 = nlohmann::json::parse(read_file(out_cfg / "manifest.json"));
    REQUIRE(manifest3["seed"] == 21);  // config file beats default
}

TEST_CASE("sweep subcommand writes wide and long CSVs", "[cli][slow]") {
    auto data = temp_dir("sweep_data");
    write_tiny_corpus(data, 5);
    auto out = temp_dir("sweep_out");
    std::vector<std::string> args{"sweep",    "--data",   data.string(), "--axis", "k",
                                  "--values", "2",        "--seeds",     "0",      "--out-dir",
                                  out.string()};
    auto flags = tiny_model_flags();
    args.insert(args.end(), flags.begin(), flags.end());
    REQUIRE(run_cli(args) == 0);
    const std::string wide = read_file(out / "sweep.csv");
    REQUIRE(wide.find("axis_value,seed") != std::string::npos);
    const std::string longf = read_file(out / "sweep_long.csv");
    REQUIRE(longf.find("axis_value,seed,split,metric,value") != std::string::npos);
    REQUIRE(longf.find("ra_macro_f1") != std::string::npos);
}
