// Named parameter tensors with matching gradient accumulators.
#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ramlc/tape.hpp"
#include "ramlc/tensor.hpp"

namespace ramlc {

template <typename Real>
class ParamStoreT {
public:
    void add(const std::string& name, TensorT<Real> value) {
        if (params_.count(name)) throw std::invalid_argument("param exists: " + name);
        Param p;
        p.grad = TensorT<Real>(value.shape(), Real(0));
        p.value = std::move(value);
        params_.emplace(name, std::move(p));
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    TensorT<Real>& value(const std::string& name) { return at(name).value; }
    const TensorT<Real>& value(const std::string& name) const { return at(name).value; }
    TensorT<Real>& grad(const std::string& name) { return at(name).grad; }
    const TensorT<Real>& grad(const std::string& name) const { return at(name).grad; }

    std::size_t size() const { return params_.size(); }

    std::size_t total_numel() const {
        std::size_t n = 0;
        for (const auto& [name, p] : params_) n += p.value.numel();
        return n;
    }

    // sorted by name, so iteration order is deterministic
    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& [name, p] : params_) out.push_back(name);
        return out;
    }

    void zero_grads() {
        for (auto& [name, p] : params_)
            std::fill(p.grad.raw().begin(), p.grad.raw().end(), Real(0));
    }

    template <typename Other>
    ParamStoreT<Other> cast() const {
        ParamStoreT<Other> out;
        for (const auto& [name, p] : params_) out.add(name, p.value.template cast<Other>());
        return out;
    }

private:
    struct Param {
        TensorT<Real> value;
        TensorT<Real> grad;
    };

    Param& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::out_of_range("no such param: " + name);
        return it->second;
    }
    const Param& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::out_of_range("no such param: " + name);
        return it->second;
    }

    std::map<std::string, Param> params_;
};

using ParamStore = ParamStoreT<float>;
using ParamStore64 = ParamStoreT<double>;

// Lazily binds parameters onto a tape as borrowed leaves, one per name.
// Records which parameters a forward pass actually touched.
template <typename Real>
class ParamLeaves {
public:
    ParamLeaves(TapeT<Real>& tape, const ParamStoreT<Real>& store) : tape_(tape), store_(store) {}

    typename TapeT<Real>::Id operator()(const std::string& name) {
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        auto id = tape_.borrowed_leaf(store_.value(name));
        ids_.emplace(name, id);
        return id;
    }

    const std::map<std::string, typename TapeT<Real>::Id>& bound() const { return ids_; }

    // After tape.backward(), pours d(loss)/d(param) into the store's
    // accumulators, scaled by `factor`.
    void accumulate_grads(ParamStoreT<Real>& store, Real factor = Real(1)) const {
        for (const auto& [name, id] : ids_) {
            if (!tape_.has_grad(id)) continue;
            TensorT<Real> g = tape_.grad(id);
            auto& acc = store.grad(name);
            for (std::size_t i = 0; i < acc.numel(); ++i) acc.data()[i] += factor * g.data()[i];
        }
    }

private:
    TapeT<Real>& tape_;
    const ParamStoreT<Real>& store_;
    std::map<std::string, typename TapeT<Real>::Id> ids_;
};

// Spec-facing entry point: runs the VJP sweep from `loss` and fills the
// store's gradient accumulators for every bound parameter.
template <typename Real>
void backward(TapeT<Real>& tape, typename TapeT<Real>::Id loss, ParamStoreT<Real>& store,
              const ParamLeaves<Real>& leaves) {
    tape.backward(loss);
    leaves.accumulate_grads(store);
}

}  // namespace ramlc
