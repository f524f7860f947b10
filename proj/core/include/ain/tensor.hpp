#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "ain/errors.hpp"

namespace ain {

using Shape = std::vector<std::size_t>;

enum class Precision { Standard, Extended };

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

/// 64-byte aligned storage. Vectorized kernels split work into scalar and
/// packet parts by address alignment, so fixing the alignment keeps results
/// bit-identical from run to run.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

template <typename T>
constexpr Precision precision_of() {
    return sizeof(T) >= 8 ? Precision::Extended : Precision::Standard;
}

/// Dense row-major N-d array; the last axis is contiguous.
///
/// Feature maps are batched NHWC: (batch, height, width, channels). One-
/// dimensional sequences use width 1, i.e. (batch, length, 1, channels).
template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>);

public:
    using value_type = T;
    static constexpr Precision precision = precision_of<T>();

    /// Rank-0 scalar holding 0.
    Tensor() : data_(1, T{0}) {}

    explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
        check_extents();
        data_.assign(numel(shape_), fill);
    }

    Tensor(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        check_extents();
        if (data_.size() != numel(shape_))
            throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                              " does not match shape " + to_string(shape_));
    }

    static Tensor scalar(T v) {
        Tensor t;
        t.data_[0] = v;
        return t;
    }

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    T* raw() noexcept { return data_.data(); }
    const T* raw() const noexcept { return data_.data(); }
    std::vector<T> to_vector() const { return {data_.begin(), data_.end()}; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    template <typename... Idx>
    T& at(Idx... idx) {
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }
    template <typename... Idx>
    const T& at(Idx... idx) const {
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }

    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size()) throw ContractError("index rank mismatch");
        std::size_t off = 0;
        std::size_t axis = 0;
        for (std::size_t i : idx) {
            if (i >= shape_[axis]) throw std::out_of_range("tensor index out of range");
            off = off * shape_[axis] + i;
            ++axis;
        }
        return off;
    }

    Tensor reshaped(Shape shape) const {
        if (numel(shape) != data_.size())
            throw ConfigError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
        Tensor out = *this;
        out.shape_ = std::move(shape);
        return out;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        if (shape_.empty()) return Tensor<U>::scalar(out[0]);
        return Tensor<U>(shape_, std::move(out));
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    T sum() const { return std::accumulate(data_.begin(), data_.end(), T{0}); }

    T max_abs() const {
        T m{0};
        for (T v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    Tensor& operator+=(const Tensor& other) {
        if (other.shape_ != shape_)
            throw ContractError("shape mismatch in += : " + to_string(shape_) + " vs " + to_string(other.shape_));
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    Tensor& operator*=(T s) {
        for (T& v : data_) v *= s;
        return *this;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void check_extents() const {
        for (std::size_t e : shape_)
            if (e == 0) throw DomainError("zero-sized extent in shape " + to_string(shape_));
    }

    Shape shape_;
    AlignedVector<T> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace ain
