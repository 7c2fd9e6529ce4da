// Adaptive-moment optimizer over a flattened parameter vector.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ramlc/param_store.hpp"

namespace ramlc {

// Name-sorted flat layout shared by gradients and optimizer state.
template <typename Real>
struct FlatLayout {
    std::vector<std::string> names;
    std::vector<std::size_t> offsets;  // names.size() + 1 entries, last = total
    std::size_t total = 0;

    explicit FlatLayout(const ParamStoreT<Real>& params) {
        names = params.names();
        offsets.reserve(names.size() + 1);
        for (const auto& name : names) {
            offsets.push_back(total);
            total += params.value(name).numel();
        }
        offsets.push_back(total);
    }
};

template <typename Real>
class AdamT {
public:
    AdamT(const FlatLayout<Real>& layout, double lr, double beta1, double beta2, double eps)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(layout.total, Real(0)),
          v_(layout.total, Real(0)) {}

    // grad is laid out per FlatLayout; parameters update in place.
    void step(ParamStoreT<Real>& params, const FlatLayout<Real>& layout,
              const std::vector<Real>& grad) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t n = 0; n < layout.names.size(); ++n) {
            TensorT<Real>& value = params.value(layout.names[n]);
            const std::size_t off = layout.offsets[n];
            for (std::size_t i = 0; i < value.numel(); ++i) {
                const double g = grad[off + i];
                m_[off + i] = static_cast<Real>(beta1_ * m_[off + i] + (1.0 - beta1_) * g);
                v_[off + i] = static_cast<Real>(beta2_ * v_[off + i] + (1.0 - beta2_) * g * g);
                const double mhat = m_[off + i] / bc1;
                const double vhat = v_[off + i] / bc2;
                value.data()[i] -= static_cast<Real>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    std::int64_t steps_taken() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Real> m_, v_;
};

}  // namespace ramlc
