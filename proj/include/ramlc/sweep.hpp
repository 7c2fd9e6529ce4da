// Sweep harness over retrieval count, cross-attention grid, or training data
// fraction. Each cell runs the full two-phase pipeline; the phase-1 checkpoint
// is shared across axis values where it stays valid (K and the CA grid), so
// those axes isolate the phase-2 effect.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ramlc/metrics.hpp"
#include "ramlc/repository.hpp"
#include "ramlc/synth.hpp"
#include "ramlc/trainer.hpp"

namespace ramlc {

enum class SweepAxis { kK, kCaGrid, kTrainFraction };

inline SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "k") return SweepAxis::kK;
    if (name == "ca") return SweepAxis::kCaGrid;
    if (name == "fraction") return SweepAxis::kTrainFraction;
    throw std::invalid_argument("bad sweep axis: " + name + " (expected k|ca|fraction)");
}

struct SweepCell {
    std::string axis_value;
    std::uint64_t seed = 0;
    double baseline_dev_micro = 0, baseline_dev_macro = 0;
    double baseline_test_micro = 0, baseline_test_macro = 0;
    double ra_dev_micro = 0, ra_dev_macro = 0;
    double ra_test_micro = 0, ra_test_macro = 0;
};

struct SweepAggregate {
    std::string axis_value;
    double mean_ra_test_macro = 0, std_ra_test_macro = 0;
    double mean_gain_test_macro = 0;  // ra - baseline
    std::size_t cells = 0;
};

struct SweepReport {
    SweepAxis axis = SweepAxis::kK;
    std::vector<SweepCell> rows;
    std::vector<SweepAggregate> aggregates;

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "axis_value,seed,baseline_dev_micro,baseline_dev_macro,baseline_test_micro,"
               "baseline_test_macro,ra_dev_micro,ra_dev_macro,ra_test_micro,ra_test_macro\n";
        for (const auto& r : rows)
            out << r.axis_value << "," << r.seed << "," << r.baseline_dev_micro << ","
                << r.baseline_dev_macro << "," << r.baseline_test_micro << ","
                << r.baseline_test_macro << "," << r.ra_dev_micro << "," << r.ra_dev_macro << ","
                << r.ra_test_micro << "," << r.ra_test_macro << "\n";
        out << "axis_value,cells,mean_ra_test_macro,std_ra_test_macro,mean_gain_test_macro\n";
        for (const auto& a : aggregates)
            out << a.axis_value << "," << a.cells << "," << a.mean_ra_test_macro << ","
                << a.std_ra_test_macro << "," << a.mean_gain_test_macro << "\n";
    }

    // plot-ready long format: axis_value,seed,split,metric,value
    void write_long_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "axis_value,seed,split,metric,value\n";
        auto emit = [&](const SweepCell& r, const char* split, const char* metric, double v) {
            out << r.axis_value << "," << r.seed << "," << split << "," << metric << "," << v
                << "\n";
        };
        for (const auto& r : rows) {
            emit(r, "dev", "baseline_micro_f1", r.baseline_dev_micro);
            emit(r, "dev", "baseline_macro_f1", r.baseline_dev_macro);
            emit(r, "test", "baseline_micro_f1", r.baseline_test_micro);
            emit(r, "test", "baseline_macro_f1", r.baseline_test_macro);
            emit(r, "dev", "ra_micro_f1", r.ra_dev_micro);
            emit(r, "dev", "ra_macro_f1", r.ra_dev_macro);
            emit(r, "test", "ra_micro_f1", r.ra_test_micro);
            emit(r, "test", "ra_macro_f1", r.ra_test_macro);
        }
    }
};

// Deterministic train-split subsample; dev/test stay fixed. fraction == 1
// returns the corpus unchanged, so a fraction-1 sweep cell matches a plain run.
inline Corpus subsample_train(const Corpus& corpus, double fraction, std::uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("train fraction must be in (0, 1]");
    if (fraction == 1.0) return corpus;
    Corpus out = corpus;
    std::vector<std::size_t> order(corpus.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, 0xf7ac));
    rng.shuffle(order);
    const std::size_t keep =
        std::max<std::size_t>(1, static_cast<std::size_t>(fraction * double(order.size()) + 0.5));
    order.resize(keep);
    std::sort(order.begin(), order.end());  // preserve original document order
    out.train.clear();
    for (std::size_t i : order) out.train.push_back(corpus.train[i]);
    return out;
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::kK;
    std::vector<std::string> values;   // "2","4"... or "2x2" for the CA grid, or "0.25"
    std::vector<std::uint64_t> seeds;
    TrainConfig train;
    EncoderConfig encoder;
    CrossAttentionConfig ca;           // base config; the axis overrides one field
};

namespace detail {

struct CellScores {
    double dev_micro, dev_macro, test_micro, test_macro;
};

template <typename Model, typename... Extra>
CellScores score_model(const Model& model, const Corpus& corpus, const Extra&... extra) {
    auto dev = f1_scores(predict_split(model, extra..., corpus.dev));
    auto test = f1_scores(predict_split(model, extra..., corpus.test));
    return {dev.micro_f1, dev.macro_f1, test.micro_f1, test.macro_f1};
}

inline CrossAttentionConfig apply_axis(const SweepSpec& spec, const std::string& value) {
    CrossAttentionConfig ca = spec.ca;
    if (spec.axis == SweepAxis::kK) {
        ca.k = std::stoul(value);
    } else if (spec.axis == SweepAxis::kCaGrid) {
        const auto x = value.find('x');
        if (x == std::string::npos)
            throw std::invalid_argument("ca grid value must look like LxH, got " + value);
        ca.ca_layers = std::stoul(value.substr(0, x));
        ca.ca_heads = std::stoul(value.substr(x + 1));
    }
    return ca;
}

}  // namespace detail

// Runs every (axis value, seed) cell and aggregates mean/stddev per value.
// Any inner failure aborts the sweep naming the failing cell.
inline SweepReport sweep(const SweepSpec& spec, const Corpus& corpus) {
    if (spec.values.empty() || spec.seeds.empty())
        throw std::invalid_argument("sweep: values and seeds must be non-empty");
    SweepReport report;
    report.axis = spec.axis;

    for (std::uint64_t seed : spec.seeds) {
        TrainConfig cfg = spec.train;
        cfg.seed = seed;

        // phase-1 checkpoints shared per seed where the axis allows it
        Checkpoint shared_p1;
        Repository shared_repo;
        bool have_shared = false;

        for (const std::string& value : spec.values) {
            try {
                const Corpus* active = &corpus;
                Corpus subsampled;
                if (spec.axis == SweepAxis::kTrainFraction) {
                    subsampled = subsample_train(corpus, std::stod(value), seed);
                    active = &subsampled;
                }

                if (spec.axis == SweepAxis::kTrainFraction || !have_shared) {
                    auto p1 = train_vanilla(cfg, *active, spec.encoder);
                    shared_p1 = std::move(p1.checkpoint);
                    shared_repo = build_repository(vanilla_from_checkpoint(shared_p1), *active,
                                                   false);
                    have_shared = true;
                }

                auto ca = detail::apply_axis(spec, value);
                auto p2 = train_ra(cfg, *active, shared_repo, shared_p1, ca);

                auto vanilla = vanilla_from_checkpoint(shared_p1);
                auto ra_model = ra_from_checkpoint(p2.checkpoint);
                auto base = detail::score_model(vanilla, *active);
                auto aug = detail::score_model(ra_model, *active, shared_repo);

                SweepCell cell;
                cell.axis_value = value;
                cell.seed = seed;
                cell.baseline_dev_micro = base.dev_micro;
                cell.baseline_dev_macro = base.dev_macro;
                cell.baseline_test_micro = base.test_micro;
                cell.baseline_test_macro = base.test_macro;
                cell.ra_dev_micro = aug.dev_micro;
                cell.ra_dev_macro = aug.dev_macro;
                cell.ra_test_micro = aug.test_micro;
                cell.ra_test_macro = aug.test_macro;
                report.rows.push_back(std::move(cell));
            } catch (const std::exception& e) {
                throw std::runtime_error("sweep cell (value=" + value +
                                         ", seed=" + std::to_string(seed) + ") failed: " +
                                         e.what());
            }
        }
    }

    for (const std::string& value : spec.values) {
        SweepAggregate agg;
        agg.axis_value = value;
        double sum = 0, sum_sq = 0, gain = 0;
        for (const auto& r : report.rows) {
            if (r.axis_value != value) continue;
            sum += r.ra_test_macro;
            sum_sq += r.ra_test_macro * r.ra_test_macro;
            gain += r.ra_test_macro - r.baseline_test_macro;
            ++agg.cells;
        }
        const double n = double(agg.cells);
        agg.mean_ra_test_macro = sum / n;
        agg.std_ra_test_macro =
            agg.cells > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1))) : 0.0;
        agg.mean_gain_test_macro = gain / n;
        report.aggregates.push_back(std::move(agg));
    }
    return report;
}

}  // namespace ramlc
