// Dense row-major tensor storage shared by every model component.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ramlc {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct UnsupportedPrimitiveError : std::runtime_error {
    explicit UnsupportedPrimitiveError(const std::string& what) : std::runtime_error(what) {}
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

template <typename Real>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(Shape shape, Real fill = Real(0))
        : shape_(std::move(shape)), data_(check_extents(shape_), fill) {}

    TensorT(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != check_extents(shape_)) {
            throw ShapeError("tensor: " + std::to_string(data_.size()) + " elements for shape " +
                             shape_str(shape_));
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }

    // rank-2 helpers; a rank-1 tensor reads as a single row
    std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
    std::size_t cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : numel()); }

    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }
    std::vector<Real>& raw() { return data_; }
    const std::vector<Real>& raw() const { return data_; }

    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }
    Real& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    Real at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (Real v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <typename Other>
    TensorT<Other> cast() const {
        std::vector<Other> out(data_.begin(), data_.end());
        return TensorT<Other>(shape_, std::move(out));
    }

private:
    static std::size_t check_extents(const Shape& shape) {
        for (std::size_t e : shape) {
            if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
        }
        return shape_numel(shape);
    }

    Shape shape_;
    std::vector<Real> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace ramlc
