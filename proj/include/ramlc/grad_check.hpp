// Central finite-difference verification of analytic gradients.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "ramlc/param_store.hpp"
#include "ramlc/rng.hpp"
#include "ramlc/tape.hpp"

namespace ramlc {

struct GradCheckEntry {
    std::string param;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double max_rel_err = 0.0;
    bool passed = false;
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

// `forward` builds the loss on the given tape using leaves bound from `params`
// and returns the loss id. It must be deterministic; two evaluations that
// disagree bitwise are a hard error.
template <typename Real, typename Forward>
GradCheckReport grad_check(Forward&& forward, ParamStoreT<Real>& params, int probe_count,
                           double step, double tolerance, std::uint64_t seed = 0) {
    if (step <= 0) throw std::invalid_argument("grad_check: step must be positive");

    auto eval_loss = [&]() -> Real {
        TapeT<Real> tape;
        ParamLeaves<Real> leaves(tape, params);
        auto loss = forward(tape, leaves);
        return tape.value(loss).data()[0];
    };

    const Real probe_a = eval_loss();
    const Real probe_b = eval_loss();
    if (std::memcmp(&probe_a, &probe_b, sizeof(Real)) != 0) {
        throw std::runtime_error("grad_check: forward fn is not deterministic");
    }

    // analytic gradients
    TapeT<Real> tape;
    ParamLeaves<Real> leaves(tape, params);
    auto loss = forward(tape, leaves);
    params.zero_grads();
    backward(tape, loss, params, leaves);

    Rng rng(derive_seed(seed, 0xdeadbeef));
    GradCheckReport report;
    report.max_rel_err = 0.0;
    for (const std::string& name : params.names()) {
        TensorT<Real>& value = params.value(name);
        const TensorT<Real>& analytic = params.grad(name);
        GradCheckEntry entry{name, 0.0};
        const int probes = std::min<std::size_t>(probe_count, value.numel());
        for (int p = 0; p < probes; ++p) {
            const std::size_t i = rng.uniform_index(value.numel());
            const Real saved = value.data()[i];
            value.data()[i] = saved + static_cast<Real>(step);
            const double plus = eval_loss();
            value.data()[i] = saved - static_cast<Real>(step);
            const double minus = eval_loss();
            value.data()[i] = saved;
            const double numeric = (plus - minus) / (2.0 * step);
            entry.max_rel_err =
                std::max(entry.max_rel_err, relative_error(analytic.data()[i], numeric));
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.per_param.push_back(std::move(entry));
    }
    report.passed = report.max_rel_err < tolerance;
    return report;
}

}  // namespace ramlc
