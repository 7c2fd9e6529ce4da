// Reverse-mode automatic differentiation on a linear tape.
//
// Every primitive evaluates eagerly and appends a record; backward() walks the
// records in reverse, propagating vector-Jacobian products. Tensors live on the
// tape and are addressed by integer ids, so graphs stay cheap to build per
// document and trivially replayable.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ramlc/tensor.hpp"

namespace ramlc {

enum class Op : std::uint8_t {
    kMatmul,       // (m x k) * (k x n)
    kMatmulNT,     // (m x k) * (n x k)^T
    kAdd,          // same shape, or matrix + row vector
    kMul,          // elementwise, same shape
    kScale,        // multiply by compile-time constant scalar
    kSigmoid,
    kGelu,
    kSoftmaxRows,  // softmax over the last axis of a matrix / vector
    kLayerNorm,    // row-wise normalization with learned gain and bias
    kEmbedding,    // gather rows of a table by constant indices
    kConcatCols,   // concatenate matrices with equal row counts
    kTakeRow,      // extract one row of a matrix as a 1 x n matrix
    kReshape,
    kMean,         // mean over all elements -> shape (1)
    kSum,          // sum over all elements -> shape (1)
    kBceLogits,    // mean binary cross-entropy against a constant multi-hot target
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::kMatmul: return "matmul";
        case Op::kMatmulNT: return "matmul_nt";
        case Op::kAdd: return "add";
        case Op::kMul: return "mul";
        case Op::kScale: return "scale";
        case Op::kSigmoid: return "sigmoid";
        case Op::kGelu: return "gelu";
        case Op::kSoftmaxRows: return "softmax_rows";
        case Op::kLayerNorm: return "layer_norm";
        case Op::kEmbedding: return "embedding";
        case Op::kConcatCols: return "concat_cols";
        case Op::kTakeRow: return "take_row";
        case Op::kReshape: return "reshape";
        case Op::kMean: return "mean";
        case Op::kSum: return "sum";
        case Op::kBceLogits: return "bce_logits";
    }
    return "unknown";
}

// Per-record attributes for primitives that need more than tensor inputs.
template <typename Real>
struct OpAttrs {
    double scalar = 0.0;               // kScale factor
    std::size_t index = 0;             // kTakeRow row
    std::vector<std::size_t> indices;  // kEmbedding gather ids, kReshape target shape
    TensorT<Real> constant;            // kBceLogits target vector
};

template <typename Real>
class TapeT {
public:
    using Id = std::int32_t;

    // ---- leaves ---------------------------------------------------------

    Id leaf(TensorT<Real> value) {
        values_.push_back(std::move(value));
        borrowed_.push_back(nullptr);
        producer_.push_back(-1);
        return static_cast<Id>(values_.size() - 1);
    }

    // Non-owning leaf; `value` must outlive the tape. Used for model
    // parameters so per-document graphs do not copy the embedding table.
    Id borrowed_leaf(const TensorT<Real>& value) {
        values_.emplace_back();
        borrowed_.push_back(&value);
        producer_.push_back(-1);
        return static_cast<Id>(values_.size() - 1);
    }

    const TensorT<Real>& value(Id id) const {
        return borrowed_[static_cast<std::size_t>(id)] != nullptr
                   ? *borrowed_[static_cast<std::size_t>(id)]
                   : values_[static_cast<std::size_t>(id)];
    }

    std::size_t size() const { return values_.size(); }
    std::size_t node_count() const { return nodes_.size(); }
    bool on_tape(Id id) const { return id >= 0 && static_cast<std::size_t>(id) < values_.size(); }

    void set_check_finite(bool on) { check_finite_ = on; }

    // ---- generic dispatch ------------------------------------------------

    Id apply(Op op, const std::vector<Id>& inputs, OpAttrs<Real> attrs = {}) {
        for (Id id : inputs) {
            if (!on_tape(id)) throw std::out_of_range("apply: input id not on tape");
        }
        TensorT<Real> out = eval(op, inputs, attrs);
        if (check_finite_ && !out.all_finite()) {
            throw std::runtime_error(std::string("non-finite output from primitive ") + op_name(op));
        }
        Id out_id = leaf(std::move(out));
        producer_.back() = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(Node{op, inputs, out_id, std::move(attrs)});
        return out_id;
    }

    // ---- named primitives --------------------------------------------------

    Id matmul(Id a, Id b) { return apply(Op::kMatmul, {a, b}); }
    Id matmul_nt(Id a, Id b) { return apply(Op::kMatmulNT, {a, b}); }
    Id add(Id a, Id b) { return apply(Op::kAdd, {a, b}); }
    Id mul(Id a, Id b) { return apply(Op::kMul, {a, b}); }

    Id scale(Id a, double factor) {
        OpAttrs<Real> attrs;
        attrs.scalar = factor;
        return apply(Op::kScale, {a}, std::move(attrs));
    }

    Id sigmoid(Id a) { return apply(Op::kSigmoid, {a}); }
    Id gelu(Id a) { return apply(Op::kGelu, {a}); }
    Id softmax_rows(Id a) { return apply(Op::kSoftmaxRows, {a}); }
    Id layer_norm(Id x, Id gain, Id bias) { return apply(Op::kLayerNorm, {x, gain, bias}); }

    Id embedding(Id table, std::vector<std::size_t> ids) {
        OpAttrs<Real> attrs;
        attrs.indices = std::move(ids);
        return apply(Op::kEmbedding, {table}, std::move(attrs));
    }

    Id concat_cols(const std::vector<Id>& parts) { return apply(Op::kConcatCols, parts); }

    Id take_row(Id x, std::size_t row) {
        OpAttrs<Real> attrs;
        attrs.index = row;
        return apply(Op::kTakeRow, {x}, std::move(attrs));
    }

    Id reshape(Id x, const Shape& shape) {
        OpAttrs<Real> attrs;
        attrs.indices.assign(shape.begin(), shape.end());
        return apply(Op::kReshape, {x}, std::move(attrs));
    }

    Id mean(Id a) { return apply(Op::kMean, {a}); }
    Id sum(Id a) { return apply(Op::kSum, {a}); }

    Id bce_with_logits(Id logits, TensorT<Real> targets) {
        OpAttrs<Real> attrs;
        attrs.constant = std::move(targets);
        return apply(Op::kBceLogits, {logits}, std::move(attrs));
    }

    // ---- backward ------------------------------------------------------------

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients for every tensor on
    // the tape. Ids never reached from `loss` keep an empty gradient, which
    // grad() reports as zeros.
    void backward(Id loss) {
        if (!on_tape(loss)) throw std::out_of_range("backward: loss not on tape");
        if (value(loss).numel() != 1) {
            throw ShapeError("backward: loss must be scalar, got " + shape_str(value(loss).shape()));
        }
        grads_.assign(values_.size(), TensorT<Real>{});
        grads_[static_cast<std::size_t>(loss)] = TensorT<Real>(value(loss).shape(), Real(1));
        for (std::size_t n = nodes_.size(); n-- > 0;) {
            const Node& node = nodes_[n];
            TensorT<Real>& out_grad = grads_[static_cast<std::size_t>(node.output)];
            if (out_grad.numel() == 0) continue;
            propagate(node, out_grad);
        }
    }

    // Gradient of the last backward() pass; zeros for unreached ids.
    TensorT<Real> grad(Id id) const {
        const TensorT<Real>& g = grads_[static_cast<std::size_t>(id)];
        if (g.numel() == 0) return TensorT<Real>(value(id).shape(), Real(0));
        return g;
    }

    bool has_grad(Id id) const { return grads_[static_cast<std::size_t>(id)].numel() != 0; }

    // ---- replay ---------------------------------------------------------------

    // Re-evaluates every record against the stored inputs and checks the
    // outputs are reproduced bit for bit.
    bool replay_verify() const {
        for (const Node& node : nodes_) {
            TensorT<Real> again = eval(node.op, node.inputs, node.attrs);
            const TensorT<Real>& recorded = value(node.output);
            if (again.shape() != recorded.shape()) return false;
            if (!std::equal(again.raw().begin(), again.raw().end(), recorded.raw().begin()))
                return false;
        }
        return true;
    }

private:
    struct Node {
        Op op;
        std::vector<Id> inputs;
        Id output;
        OpAttrs<Real> attrs;
    };

    [[noreturn]] static void shape_fail(Op op, const std::string& detail) {
        throw ShapeError(std::string(op_name(op)) + ": " + detail);
    }

    static void require_rank12(Op op, const TensorT<Real>& t, const char* role) {
        if (t.rank() != 1 && t.rank() != 2)
            shape_fail(op, std::string(role) + " must be rank 1 or 2, got " + shape_str(t.shape()));
    }

    TensorT<Real> eval(Op op, const std::vector<Id>& in, const OpAttrs<Real>& attrs) const {
        switch (op) {
            case Op::kMatmul: return eval_matmul(value(in[0]), value(in[1]), false);
            case Op::kMatmulNT: return eval_matmul(value(in[0]), value(in[1]), true);
            case Op::kAdd: return eval_add(value(in[0]), value(in[1]));
            case Op::kMul: return eval_mul(value(in[0]), value(in[1]));
            case Op::kScale: {
                TensorT<Real> out = value(in[0]);
                const Real f = static_cast<Real>(attrs.scalar);
                for (Real& v : out.raw()) v *= f;
                return out;
            }
            case Op::kSigmoid: {
                TensorT<Real> out = value(in[0]);
                for (Real& v : out.raw()) v = sigmoid_scalar(v);
                return out;
            }
            case Op::kGelu: {
                TensorT<Real> out = value(in[0]);
                for (Real& v : out.raw()) v = gelu_scalar(v);
                return out;
            }
            case Op::kSoftmaxRows: return eval_softmax(value(in[0]));
            case Op::kLayerNorm: return eval_layer_norm(value(in[0]), value(in[1]), value(in[2]));
            case Op::kEmbedding: return eval_embedding(value(in[0]), attrs.indices);
            case Op::kConcatCols: {
                std::vector<const TensorT<Real>*> parts;
                parts.reserve(in.size());
                for (Id id : in) parts.push_back(&value(id));
                return eval_concat(parts);
            }
            case Op::kTakeRow: return eval_take_row(value(in[0]), attrs.index);
            case Op::kReshape: {
                Shape shape(attrs.indices.begin(), attrs.indices.end());
                if (shape_numel(shape) != value(in[0]).numel())
                    shape_fail(op, "cannot reshape " + shape_str(value(in[0]).shape()) + " to " +
                                       shape_str(shape));
                return TensorT<Real>(shape, value(in[0]).raw());
            }
            case Op::kMean:
            case Op::kSum: {
                const TensorT<Real>& x = value(in[0]);
                Real acc = 0;
                for (Real v : x.raw()) acc += v;
                if (op == Op::kMean) acc /= static_cast<Real>(x.numel());
                return TensorT<Real>(Shape{1}, std::vector<Real>{acc});
            }
            case Op::kBceLogits: return eval_bce(value(in[0]), attrs.constant);
        }
        throw UnsupportedPrimitiveError("apply: unsupported primitive id " +
                                        std::to_string(static_cast<int>(op)));
    }

    // ---- forward kernels ----

    static Real sigmoid_scalar(Real x) {
        if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
        const Real e = std::exp(x);
        return e / (Real(1) + e);
    }

    static constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

    static Real gelu_scalar(Real x) {
        const Real u = static_cast<Real>(kGeluC) * (x + Real(0.044715) * x * x * x);
        return Real(0.5) * x * (Real(1) + std::tanh(u));
    }

    static Real gelu_grad_scalar(Real x) {
        const Real u = static_cast<Real>(kGeluC) * (x + Real(0.044715) * x * x * x);
        const Real t = std::tanh(u);
        const Real du = static_cast<Real>(kGeluC) * (Real(1) + Real(3) * Real(0.044715) * x * x);
        return Real(0.5) * (Real(1) + t) + Real(0.5) * x * (Real(1) - t * t) * du;
    }

    static TensorT<Real> eval_matmul(const TensorT<Real>& a, const TensorT<Real>& b, bool b_t) {
        if (a.rank() != 2 || b.rank() != 2)
            shape_fail(b_t ? Op::kMatmulNT : Op::kMatmul,
                       "expects two matrices, got " + shape_str(a.shape()) + " and " +
                           shape_str(b.shape()));
        const std::size_t m = a.rows(), k = a.cols();
        const std::size_t n = b_t ? b.rows() : b.cols();
        const std::size_t bk = b_t ? b.cols() : b.rows();
        if (k != bk)
            shape_fail(b_t ? Op::kMatmulNT : Op::kMatmul,
                       "inner extents differ: " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
        TensorT<Real> out(Shape{m, n});
        if (!b_t) {
            // ikj ordering keeps the inner loop contiguous in b and out
            for (std::size_t i = 0; i < m; ++i) {
                Real* orow = out.data() + i * n;
                const Real* arow = a.data() + i * k;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const Real av = arow[kk];
                    const Real* brow = b.data() + kk * n;
                    for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
                }
            }
        } else {
            for (std::size_t i = 0; i < m; ++i) {
                const Real* arow = a.data() + i * k;
                Real* orow = out.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) {
                    const Real* brow = b.data() + j * k;
                    Real acc = 0;
                    for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
                    orow[j] = acc;
                }
            }
        }
        return out;
    }

    // matrix + matrix (same shape) or matrix + broadcast row vector
    static TensorT<Real> eval_add(const TensorT<Real>& a, const TensorT<Real>& b) {
        if (a.shape() == b.shape()) {
            TensorT<Real> out = a;
            const Real* bp = b.data();
            Real* op = out.data();
            for (std::size_t i = 0; i < out.numel(); ++i) op[i] += bp[i];
            return out;
        }
        if ((b.rank() == 1 || (b.rank() == 2 && b.rows() == 1)) && a.rank() == 2 &&
            b.numel() == a.cols()) {
            TensorT<Real> out = a;
            for (std::size_t i = 0; i < a.rows(); ++i) {
                Real* orow = out.data() + i * a.cols();
                for (std::size_t j = 0; j < a.cols(); ++j) orow[j] += b.data()[j];
            }
            return out;
        }
        shape_fail(Op::kAdd, "incompatible shapes " + shape_str(a.shape()) + " and " +
                                 shape_str(b.shape()));
    }

    static TensorT<Real> eval_mul(const TensorT<Real>& a, const TensorT<Real>& b) {
        if (a.shape() != b.shape())
            shape_fail(Op::kMul, "shapes differ: " + shape_str(a.shape()) + " vs " +
                                     shape_str(b.shape()));
        TensorT<Real> out = a;
        for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] *= b.data()[i];
        return out;
    }

    static TensorT<Real> eval_softmax(const TensorT<Real>& x) {
        require_rank12(Op::kSoftmaxRows, x, "input");
        TensorT<Real> out = x;
        const std::size_t rows = x.rank() == 2 ? x.rows() : 1;
        const std::size_t cols = x.rank() == 2 ? x.cols() : x.numel();
        for (std::size_t i = 0; i < rows; ++i) {
            Real* row = out.data() + i * cols;
            Real mx = row[0];
            for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
            Real denom = 0;
            for (std::size_t j = 0; j < cols; ++j) {
                row[j] = std::exp(row[j] - mx);
                denom += row[j];
            }
            for (std::size_t j = 0; j < cols; ++j) row[j] /= denom;
        }
        return out;
    }

    static constexpr double kLayerNormEps = 1e-5;

    static TensorT<Real> eval_layer_norm(const TensorT<Real>& x, const TensorT<Real>& gain,
                                         const TensorT<Real>& bias) {
        require_rank12(Op::kLayerNorm, x, "input");
        const std::size_t rows = x.rank() == 2 ? x.rows() : 1;
        const std::size_t cols = x.rank() == 2 ? x.cols() : x.numel();
        if (gain.numel() != cols || bias.numel() != cols)
            shape_fail(Op::kLayerNorm, "gain/bias " + shape_str(gain.shape()) + "/" +
                                           shape_str(bias.shape()) + " do not match width " +
                                           std::to_string(cols));
        TensorT<Real> out = x;
        for (std::size_t i = 0; i < rows; ++i) {
            Real* row = out.data() + i * cols;
            Real mean = 0;
            for (std::size_t j = 0; j < cols; ++j) mean += row[j];
            mean /= static_cast<Real>(cols);
            Real var = 0;
            for (std::size_t j = 0; j < cols; ++j) {
                const Real d = row[j] - mean;
                var += d * d;
            }
            var /= static_cast<Real>(cols);
            const Real inv = Real(1) / std::sqrt(var + static_cast<Real>(kLayerNormEps));
            for (std::size_t j = 0; j < cols; ++j)
                row[j] = (row[j] - mean) * inv * gain.data()[j] + bias.data()[j];
        }
        return out;
    }

    static TensorT<Real> eval_embedding(const TensorT<Real>& table,
                                        const std::vector<std::size_t>& ids) {
        if (table.rank() != 2)
            shape_fail(Op::kEmbedding, "table must be a matrix, got " + shape_str(table.shape()));
        if (ids.empty()) shape_fail(Op::kEmbedding, "empty index list");
        const std::size_t dim = table.cols();
        TensorT<Real> out(Shape{ids.size(), dim});
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] >= table.rows())
                shape_fail(Op::kEmbedding, "index " + std::to_string(ids[i]) +
                                               " out of range for table " +
                                               shape_str(table.shape()));
            std::copy_n(table.data() + ids[i] * dim, dim, out.data() + i * dim);
        }
        return out;
    }

    static TensorT<Real> eval_concat(const std::vector<const TensorT<Real>*>& parts) {
        if (parts.empty()) shape_fail(Op::kConcatCols, "no inputs");
        const std::size_t rows = parts[0]->rows();
        std::size_t total = 0;
        for (const auto* p : parts) {
            require_rank12(Op::kConcatCols, *p, "input");
            if (p->rows() != rows)
                shape_fail(Op::kConcatCols, "row counts differ: " + shape_str(parts[0]->shape()) +
                                                " vs " + shape_str(p->shape()));
            total += p->cols();
        }
        TensorT<Real> out(Shape{rows, total});
        std::size_t col = 0;
        for (const auto* p : parts) {
            for (std::size_t i = 0; i < rows; ++i)
                std::copy_n(p->data() + i * p->cols(), p->cols(),
                            out.data() + i * total + col);
            col += p->cols();
        }
        return out;
    }

    static TensorT<Real> eval_take_row(const TensorT<Real>& x, std::size_t row) {
        if (x.rank() != 2)
            shape_fail(Op::kTakeRow, "input must be a matrix, got " + shape_str(x.shape()));
        if (row >= x.rows())
            shape_fail(Op::kTakeRow, "row " + std::to_string(row) + " out of range for " +
                                         shape_str(x.shape()));
        TensorT<Real> out(Shape{1, x.cols()});
        std::copy_n(x.data() + row * x.cols(), x.cols(), out.data());
        return out;
    }

    // Numerically stable mean BCE over labels:
    //   loss_l = max(z,0) - z*t + log(1 + exp(-|z|))
    static TensorT<Real> eval_bce(const TensorT<Real>& logits, const TensorT<Real>& targets) {
        if (logits.numel() != targets.numel())
            shape_fail(Op::kBceLogits, "logits " + shape_str(logits.shape()) + " vs targets " +
                                           shape_str(targets.shape()));
        Real acc = 0;
        for (std::size_t i = 0; i < logits.numel(); ++i) {
            const Real t = targets.data()[i];
            if (t != Real(0) && t != Real(1))
                throw std::invalid_argument("bce_logits: target values must be 0 or 1");
            const Real z = logits.data()[i];
            acc += std::max(z, Real(0)) - z * t + std::log1p(std::exp(-std::abs(z)));
        }
        acc /= static_cast<Real>(logits.numel());
        return TensorT<Real>(Shape{1}, std::vector<Real>{acc});
    }

    // ---- backward kernels ----

    void accumulate(Id id, const TensorT<Real>& delta) {
        TensorT<Real>& g = grads_[static_cast<std::size_t>(id)];
        if (g.numel() == 0) {
            g = delta;
            return;
        }
        for (std::size_t i = 0; i < g.numel(); ++i) g.data()[i] += delta.data()[i];
    }

    void propagate(const Node& node, const TensorT<Real>& gy) {
        switch (node.op) {
            case Op::kMatmul: {
                const TensorT<Real>& a = value(node.inputs[0]);
                const TensorT<Real>& b = value(node.inputs[1]);
                accumulate(node.inputs[0], eval_matmul(gy, b, true));        // gy * b^T
                accumulate(node.inputs[1], matmul_tn(a, gy));                // a^T * gy
                return;
            }
            case Op::kMatmulNT: {
                const TensorT<Real>& a = value(node.inputs[0]);
                const TensorT<Real>& b = value(node.inputs[1]);
                accumulate(node.inputs[0], eval_matmul(gy, b, false));       // gy * b
                accumulate(node.inputs[1], matmul_tn(gy, a));                // gy^T * a
                return;
            }
            case Op::kAdd: {
                const TensorT<Real>& a = value(node.inputs[0]);
                const TensorT<Real>& b = value(node.inputs[1]);
                accumulate(node.inputs[0], gy);
                if (a.shape() == b.shape()) {
                    accumulate(node.inputs[1], gy);
                } else {
                    TensorT<Real> gb(b.shape());
                    for (std::size_t i = 0; i < a.rows(); ++i)
                        for (std::size_t j = 0; j < a.cols(); ++j)
                            gb.data()[j] += gy.data()[i * a.cols() + j];
                    accumulate(node.inputs[1], gb);
                }
                return;
            }
            case Op::kMul: {
                accumulate(node.inputs[0], eval_mul(gy, value(node.inputs[1])));
                accumulate(node.inputs[1], eval_mul(gy, value(node.inputs[0])));
                return;
            }
            case Op::kScale: {
                TensorT<Real> gx = gy;
                const Real f = static_cast<Real>(node.attrs.scalar);
                for (Real& v : gx.raw()) v *= f;
                accumulate(node.inputs[0], gx);
                return;
            }
            case Op::kSigmoid: {
                const TensorT<Real>& y = value(node.output);
                TensorT<Real> gx = gy;
                for (std::size_t i = 0; i < gx.numel(); ++i)
                    gx.data()[i] *= y.data()[i] * (Real(1) - y.data()[i]);
                accumulate(node.inputs[0], gx);
                return;
            }
            case Op::kGelu: {
                const TensorT<Real>& x = value(node.inputs[0]);
                TensorT<Real> gx = gy;
                for (std::size_t i = 0; i < gx.numel(); ++i)
                    gx.data()[i] *= gelu_grad_scalar(x.data()[i]);
                accumulate(node.inputs[0], gx);
                return;
            }
            case Op::kSoftmaxRows: {
                const TensorT<Real>& y = value(node.output);
                TensorT<Real> gx = gy;
                const std::size_t rows = y.rank() == 2 ? y.rows() : 1;
                const std::size_t cols = y.rank() == 2 ? y.cols() : y.numel();
                for (std::size_t i = 0; i < rows; ++i) {
                    const Real* yr = y.data() + i * cols;
                    Real* gr = gx.data() + i * cols;
                    Real dot = 0;
                    for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
                    for (std::size_t j = 0; j < cols; ++j) gr[j] = yr[j] * (gr[j] - dot);
                }
                accumulate(node.inputs[0], gx);
                return;
            }
            case Op::kLayerNorm: {
                propagate_layer_norm(node, gy);
                return;
            }
            case Op::kEmbedding: {
                const TensorT<Real>& table = value(node.inputs[0]);
                TensorT<Real> gt(table.shape());
                const std::size_t dim = table.cols();
                for (std::size_t i = 0; i < node.attrs.indices.size(); ++i) {
                    Real* dst = gt.data() + node.attrs.indices[i] * dim;
                    const Real* src = gy.data() + i * dim;
                    for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
                }
                accumulate(node.inputs[0], gt);
                return;
            }
            case Op::kConcatCols: {
                const std::size_t rows = gy.rows();
                std::size_t col = 0;
                for (Id in : node.inputs) {
                    const TensorT<Real>& part = value(in);
                    TensorT<Real> gp(part.shape());
                    for (std::size_t i = 0; i < rows; ++i)
                        std::copy_n(gy.data() + i * gy.cols() + col, part.cols(),
                                    gp.data() + i * part.cols());
                    accumulate(in, gp);
                    col += part.cols();
                }
                return;
            }
            case Op::kTakeRow: {
                const TensorT<Real>& x = value(node.inputs[0]);
                TensorT<Real> gx(x.shape());
                std::copy_n(gy.data(), x.cols(), gx.data() + node.attrs.index * x.cols());
                accumulate(node.inputs[0], gx);
                return;
            }
            case Op::kReshape: {
                const TensorT<Real>& x = value(node.inputs[0]);
                accumulate(node.inputs[0], TensorT<Real>(x.shape(), gy.raw()));
                return;
            }
            case Op::kMean:
            case Op::kSum: {
                const TensorT<Real>& x = value(node.inputs[0]);
                Real g = gy.data()[0];
                if (node.op == Op::kMean) g /= static_cast<Real>(x.numel());
                accumulate(node.inputs[0], TensorT<Real>(x.shape(), g));
                return;
            }
            case Op::kBceLogits: {
                const TensorT<Real>& z = value(node.inputs[0]);
                const TensorT<Real>& t = node.attrs.constant;
                TensorT<Real> gx(z.shape());
                const Real g = gy.data()[0] / static_cast<Real>(z.numel());
                for (std::size_t i = 0; i < z.numel(); ++i)
                    gx.data()[i] = g * (sigmoid_scalar(z.data()[i]) - t.data()[i]);
                accumulate(node.inputs[0], gx);
                return;
            }
        }
    }

    void propagate_layer_norm(const Node& node, const TensorT<Real>& gy) {
        const TensorT<Real>& x = value(node.inputs[0]);
        const TensorT<Real>& gain = value(node.inputs[1]);
        const std::size_t rows = x.rank() == 2 ? x.rows() : 1;
        const std::size_t cols = x.rank() == 2 ? x.cols() : x.numel();
        TensorT<Real> gx(x.shape());
        TensorT<Real> gg(gain.shape());
        TensorT<Real> gb(value(node.inputs[2]).shape());
        std::vector<Real> xhat(cols);
        for (std::size_t i = 0; i < rows; ++i) {
            const Real* xr = x.data() + i * cols;
            const Real* gr = gy.data() + i * cols;
            Real mean = 0;
            for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
            mean /= static_cast<Real>(cols);
            Real var = 0;
            for (std::size_t j = 0; j < cols; ++j) {
                const Real d = xr[j] - mean;
                var += d * d;
            }
            var /= static_cast<Real>(cols);
            const Real inv = Real(1) / std::sqrt(var + static_cast<Real>(kLayerNormEps));
            Real sum_dxhat = 0, sum_dxhat_xhat = 0;
            for (std::size_t j = 0; j < cols; ++j) {
                xhat[j] = (xr[j] - mean) * inv;
                const Real dxhat = gr[j] * gain.data()[j];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat[j];
                gg.data()[j] += gr[j] * xhat[j];
                gb.data()[j] += gr[j];
            }
            const Real inv_n = Real(1) / static_cast<Real>(cols);
            Real* gxr = gx.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) {
                const Real dxhat = gr[j] * gain.data()[j];
                gxr[j] = inv * (dxhat - inv_n * sum_dxhat - xhat[j] * inv_n * sum_dxhat_xhat);
            }
        }
        accumulate(node.inputs[0], gx);
        accumulate(node.inputs[1], gg);
        accumulate(node.inputs[2], gb);
    }

    // a^T * b for gradients; a (m x k), b (m x n) -> (k x n)
    static TensorT<Real> matmul_tn(const TensorT<Real>& a, const TensorT<Real>& b) {
        const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
        TensorT<Real> out(Shape{k, n});
        for (std::size_t i = 0; i < m; ++i) {
            const Real* arow = a.data() + i * k;
            const Real* brow = b.data() + i * n;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const Real av = arow[kk];
                if (av == Real(0)) continue;
                Real* orow = out.data() + kk * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
        return out;
    }

    std::vector<TensorT<Real>> values_;
    std::vector<const TensorT<Real>*> borrowed_;
    std::vector<std::int32_t> producer_;
    std::vector<Node> nodes_;
    std::vector<TensorT<Real>> grads_;
    bool check_finite_ = false;
};

using Tape = TapeT<float>;
using Tape64 = TapeT<double>;

}  // namespace ramlc
