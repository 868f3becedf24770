#pragma once

#include <cstdint>
#include <vector>

#include "octseg/common.hpp"

namespace octseg {

// Row-major 2-D grid; rows = axial (top to bottom), cols = transversal.
template <typename T>
class Grid2D {
public:
    Grid2D() = default;
    Grid2D(int rows, int cols, T fill = T{})
        : rows_(rows), cols_(cols),
          data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
        if (rows < 0 || cols < 0) throw ValidationError("Grid2D: negative shape");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }
    template <typename U>
    bool same_shape(const Grid2D<U>& o) const {
        return rows_ == o.rows() && cols_ == o.cols();
    }

    T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    const T& operator()(int r, int c) const {
        return data_[static_cast<std::size_t>(r) * cols_ + c];
    }
    T* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
    const T* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool operator==(const Grid2D& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

using ImageF = Grid2D<double>;
using LabelGrid = Grid2D<std::uint8_t>;
using MaskGrid = Grid2D<std::uint8_t>;

// Dense C x H x W feature stack, channel planes contiguous.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int channels, int height, int width, double fill = 0.0)
        : channels_(channels), height_(height), width_(width),
          data_(static_cast<std::size_t>(channels) * height * width, fill) {
        if (channels < 0 || height < 0 || width < 0)
            throw ValidationError("FeatureMap: negative shape");
    }

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    double* plane(int c) { return data_.data() + plane_offset(c); }
    const double* plane(int c) const { return data_.data() + plane_offset(c); }
    double* row(int c, int y) { return plane(c) + static_cast<std::size_t>(y) * width_; }
    const double* row(int c, int y) const {
        return plane(c) + static_cast<std::size_t>(y) * width_;
    }
    double& at(int c, int y, int x) {
        return data_[plane_offset(c) + static_cast<std::size_t>(y) * width_ + x];
    }
    double at(int c, int y, int x) const {
        return data_[plane_offset(c) + static_cast<std::size_t>(y) * width_ + x];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    bool same_shape(const FeatureMap& o) const {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }

private:
    std::size_t plane_offset(int c) const {
        return static_cast<std::size_t>(c) * height_ * width_;
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

}  // namespace octseg
