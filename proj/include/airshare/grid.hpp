#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace airshare {

/// Row-major 2-D array, indexed (row, col). Used for per-(entity, step) data.
template <class T>
class Grid2 {
public:
    Grid2() = default;
    Grid2(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    T& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    const T& operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::span<T> flat() { return data_; }
    std::span<const T> flat() const { return data_; }

    friend bool operator==(const Grid2&, const Grid2&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// Row-major 3-D array, indexed (a, b, c). Allocation plans use (user, subchannel, step).
template <class T>
class Grid3 {
public:
    Grid3() = default;
    Grid3(std::size_t d0, std::size_t d1, std::size_t d2, T fill = T{})
        : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, fill) {}

    T& operator()(std::size_t a, std::size_t b, std::size_t c) {
        assert(a < d0_ && b < d1_ && c < d2_);
        return data_[(a * d1_ + b) * d2_ + c];
    }
    const T& operator()(std::size_t a, std::size_t b, std::size_t c) const {
        assert(a < d0_ && b < d1_ && c < d2_);
        return data_[(a * d1_ + b) * d2_ + c];
    }

    std::size_t dim0() const { return d0_; }
    std::size_t dim1() const { return d1_; }
    std::size_t dim2() const { return d2_; }
    std::span<T> flat() { return data_; }
    std::span<const T> flat() const { return data_; }

    friend bool operator==(const Grid3&, const Grid3&) = default;

private:
    std::size_t d0_ = 0;
    std::size_t d1_ = 0;
    std::size_t d2_ = 0;
    std::vector<T> data_;
};

}  // namespace airshare
