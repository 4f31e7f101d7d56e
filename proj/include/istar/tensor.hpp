#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "istar/errors.hpp"

namespace istar {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/**
 * Dense row-major tensor. Image data uses NCHW order with width innermost.
 *
 * Every extent is >= 1 and data().size() == product of extents. The scalar
 * type is float for training and double for gradient checking.
 */
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() : shape_{1}, data_(1, T(0)) {}
    explicit BasicTensor(Shape shape, T fill = T(0));
    BasicTensor(Shape shape, std::vector<T> data);

    static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
    static BasicTensor full(Shape shape, T v) { return BasicTensor(std::move(shape), v); }
    static BasicTensor scalar(T v) { return BasicTensor(Shape{1}, v); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t numel() const noexcept { return data_.size(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    T* ptr() noexcept { return data_.data(); }
    const T* ptr() const noexcept { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    /// NCHW element access; requires rank 4.
    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
    const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

    void fill(T v);
    BasicTensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;
    /// Throws NumericError naming `what` if any element is NaN or Inf.
    void ensure_finite(const std::string& what) const;

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

} // namespace istar
