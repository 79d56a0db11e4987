#pragma once

// Channel-major feature grids and the continuous coordinate conventions used
// across the pipeline. Coordinates are expressed in low-resolution pixel units
// with cell-center alignment: cell (x, y) is centred on the integer point
// (x, y), so a scale of 1 maps every query exactly onto a cell centre.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bfstvsr {

template <class T>
class FeatureGrid {
 public:
  FeatureGrid() = default;

  FeatureGrid(int channels, int height, int width, T fill = T(0))
      : channels_(channels), height_(height), width_(width) {
    check_shape(channels, height, width);
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  FeatureGrid(int channels, int height, int width, std::vector<T> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    check_shape(channels, height, width);
    if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
      throw std::invalid_argument("FeatureGrid: data length does not match shape");
    }
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  T& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
  const T& operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::span<T> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const T> plane(int c) const { return {data_.data() + c * plane_size(), plane_size()}; }

  bool same_shape(const FeatureGrid& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  template <class U>
  FeatureGrid<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return FeatureGrid<U>(channels_, height_, width_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(static_cast<double>(v)); });
  }

  friend bool operator==(const FeatureGrid& a, const FeatureGrid& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  static void check_shape(int c, int h, int w) {
    if (c <= 0 || h <= 0 || w <= 0) {
      throw std::invalid_argument("FeatureGrid: dimensions must be positive, got " + std::to_string(c) + "x" +
                                  std::to_string(h) + "x" + std::to_string(w));
    }
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Stacks the channels of `a` followed by the channels of `b`.
template <class T>
FeatureGrid<T> concat_channels(const FeatureGrid<T>& a, const FeatureGrid<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("concat_channels: spatial shapes differ");
  }
  std::vector<T> data;
  data.reserve(a.size() + b.size());
  data.insert(data.end(), a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return FeatureGrid<T>(a.channels() + b.channels(), a.height(), a.width(), std::move(data));
}

struct QueryPoint {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;
};

/// Builds a query clamped to the sampling domain of a height x width grid.
inline QueryPoint make_query(double x, double y, double t, int height, int width) {
  return {std::clamp(x, -0.5, width - 0.5), std::clamp(y, -0.5, height - 0.5), std::clamp(t, 0.0, 1.0)};
}

struct LocalLookup {
  int cell_x = 0;
  int cell_y = 0;
  double delta_x = 0.0;
  double delta_y = 0.0;
};

/// High-resolution extent for a low-resolution extent at scale s.
inline int scaled_extent(int extent, double scale) {
  // The epsilon absorbs representation error, e.g. 2.2 * 10 = 22.000000000000004.
  return static_cast<int>(std::ceil(scale * extent - 1e-9));
}

inline void check_scale(double scale) {
  if (!(scale >= 1.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("scale must be finite and >= 1, got " + std::to_string(scale));
  }
}

/// Low-resolution coordinate of high-resolution pixel index i at scale s.
inline double hr_to_lr(int i, double scale) { return (i + 0.5) / scale - 0.5; }

/// Row-major lattice of high-resolution queries over a low-resolution grid.
inline std::vector<QueryPoint> make_query_grid(int lr_height, int lr_width, double scale) {
  if (lr_height < 2 || lr_width < 2) {
    throw std::invalid_argument("make_query_grid: low-resolution shape must be at least 2x2");
  }
  check_scale(scale);
  const int hr_h = scaled_extent(lr_height, scale);
  const int hr_w = scaled_extent(lr_width, scale);
  std::vector<QueryPoint> queries;
  queries.reserve(static_cast<std::size_t>(hr_h) * hr_w);
  for (int i = 0; i < hr_h; ++i) {
    for (int j = 0; j < hr_w; ++j) {
      queries.push_back(make_query(hr_to_lr(j, scale), hr_to_lr(i, scale), 0.0, lr_height, lr_width));
    }
  }
  return queries;
}

/// Nearest cell centre with round-half-up tie-breaking, clamped to the grid.
inline LocalLookup nearest_cell(const QueryPoint& q, int height, int width) {
  const int cx = std::clamp(static_cast<int>(std::floor(q.x + 0.5)), 0, width - 1);
  const int cy = std::clamp(static_cast<int>(std::floor(q.y + 0.5)), 0, height - 1);
  return {cx, cy, q.x - cx, q.y - cy};
}

template <class T>
LocalLookup nearest_cell(const QueryPoint& q, const FeatureGrid<T>& grid) {
  return nearest_cell(q, grid.height(), grid.width());
}

/// Four-neighbour bilinear interpolation with clamp-to-edge.
template <class T>
std::vector<T> bilinear_sample(const FeatureGrid<T>& grid, const QueryPoint& q) {
  const double x = std::clamp(q.x, 0.0, static_cast<double>(grid.width() - 1));
  const double y = std::clamp(q.y, 0.0, static_cast<double>(grid.height() - 1));
  const int x0 = std::min(static_cast<int>(std::floor(x)), grid.width() - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), grid.height() - 1);
  const int x1 = std::min(x0 + 1, grid.width() - 1);
  const int y1 = std::min(y0 + 1, grid.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  std::vector<T> out(grid.channels());
  for (int c = 0; c < grid.channels(); ++c) {
    const double top = (1.0 - fx) * grid(c, y0, x0) + fx * grid(c, y0, x1);
    const double bottom = (1.0 - fx) * grid(c, y1, x0) + fx * grid(c, y1, x1);
    out[c] = static_cast<T>((1.0 - fy) * top + fy * bottom);
  }
  return out;
}

/// Bilinear resampling onto the high-resolution query lattice at scale s.
template <class T>
FeatureGrid<T> bilinear_upsample(const FeatureGrid<T>& grid, double scale) {
  check_scale(scale);
  const int hr_h = scaled_extent(grid.height(), scale);
  const int hr_w = scaled_extent(grid.width(), scale);
  FeatureGrid<T> out(grid.channels(), hr_h, hr_w);
  for (int i = 0; i < hr_h; ++i) {
    for (int j = 0; j < hr_w; ++j) {
      const auto v = bilinear_sample(
          grid, make_query(hr_to_lr(j, scale), hr_to_lr(i, scale), 0.0, grid.height(), grid.width()));
      for (int c = 0; c < grid.channels(); ++c) out(c, i, j) = v[c];
    }
  }
  return out;
}

template <class T>
FeatureGrid<T> nearest_upsample(const FeatureGrid<T>& grid, double scale) {
  check_scale(scale);
  const int hr_h = scaled_extent(grid.height(), scale);
  const int hr_w = scaled_extent(grid.width(), scale);
  FeatureGrid<T> out(grid.channels(), hr_h, hr_w);
  for (int i = 0; i < hr_h; ++i) {
    for (int j = 0; j < hr_w; ++j) {
      const auto cell = nearest_cell(
          make_query(hr_to_lr(j, scale), hr_to_lr(i, scale), 0.0, grid.height(), grid.width()), grid);
      for (int c = 0; c < grid.channels(); ++c) out(c, i, j) = grid(c, cell.cell_y, cell.cell_x);
    }
  }
  return out;
}

}  // namespace bfstvsr
