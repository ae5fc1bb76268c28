#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bridgekit/error.hpp"

namespace bridgekit {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

// Dense row-major array. The first axis is the batch axis; the remaining axes are
// either (d) for vector tasks or (C, H, W) for image tasks.
template <class S>
class BasicTensor {
  public:
    BasicTensor() = default;
    explicit BasicTensor(Shape shape, S fill = S{})
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
    BasicTensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_numel(shape_)) {
            fail(ErrorCategory::Shape, "tensor data size " + std::to_string(data_.size()) +
                                           " does not match shape " + shape_string(shape_));
        }
    }

    static BasicTensor zeros_like(const BasicTensor& other) { return BasicTensor(other.shape_); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t batch() const { return shape_.empty() ? 0 : shape_[0]; }
    // Number of scalars per batch element.
    std::size_t row_size() const {
        if (shape_.empty()) return 0;
        return shape_numel(Shape(shape_.begin() + 1, shape_.end()));
    }

    std::span<S> data() noexcept { return data_; }
    std::span<const S> data() const noexcept { return data_; }
    std::vector<S>& storage() noexcept { return data_; }
    const std::vector<S>& storage() const noexcept { return data_; }

    std::span<S> row(std::size_t i) { return std::span<S>(data_).subspan(i * row_size(), row_size()); }
    std::span<const S> row(std::size_t i) const {
        return std::span<const S>(data_).subspan(i * row_size(), row_size());
    }

    S& operator[](std::size_t i) { return data_[i]; }
    const S& operator[](std::size_t i) const { return data_[i]; }

    void reshape(Shape s) {
        if (shape_numel(s) != data_.size()) {
            fail(ErrorCategory::Shape, "cannot reshape " + shape_string(shape_) + " to " + shape_string(s));
        }
        shape_ = std::move(s);
    }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

  private:
    Shape shape_;
    std::vector<S> data_;
};

using Tensor = BasicTensor<double>;

// Batch of data samples; same container as any other tensor.
using TensorBatch = Tensor;

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b) {
        fail(ErrorCategory::Shape,
             std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
    }
}

bool all_finite(std::span<const double> v) noexcept;

double l2_norm(std::span<const double> v) noexcept;

}  // namespace bridgekit
