#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "alignkit/error.hpp"

namespace alignkit {

using Shape = std::vector<int>;

std::string shape_to_string(const Shape& s);

/// Dense row-major float32 array. The last axis is contiguous.
///
/// Image-like tensors are (C,H,W). Every extent is at least 1 and the
/// payload length equals the product of the extents. A default-constructed
/// tensor is empty (rank 0, no data) and only useful as a placeholder.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, float fill = 0.0f);
  Tensor(Shape dims, std::vector<float> data);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.dims()); }

  const Shape& dims() const noexcept { return dims_; }
  int rank() const noexcept { return static_cast<int>(dims_.size()); }
  int dim(int axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  float* raw() noexcept { return data_.data(); }
  const float* raw() const noexcept { return data_.data(); }
  const std::vector<float>& vec() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  // (C,H,W) accessors; callers guarantee rank 3.
  int channels() const { return dims_.at(0); }
  int height() const { return dims_.at(1); }
  int width() const { return dims_.at(2); }
  float& at(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * dims_[1] + y) * dims_[2] + x];
  }
  float at(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * dims_[1] + y) * dims_[2] + x];
  }
  std::span<float> plane(int c);
  std::span<const float> plane(int c) const;

  /// Same payload, new extents with identical element count.
  Tensor reshaped(Shape dims) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  Shape dims_;
  std::vector<float> data_;
};

/// Throws ShapeError unless `t` is rank 3.
void require_chw(const Tensor& t, const char* what);
/// Throws ShapeError naming the first axis where the two tensors differ.
void require_same_dims(const Tensor& a, const Tensor& b, const char* what);
/// Throws ShapeError unless height and width agree.
void require_same_hw(const Tensor& a, const Tensor& b, const char* what);

/// Per-pixel displacement (dx, dy) in pixels of this field's own resolution.
/// Channel 0 is horizontal, channel 1 vertical. Values are always finite.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int height, int width);
  /// Validates the two-channel layout and finiteness.
  explicit FlowField(Tensor t);

  static FlowField uniform(int height, int width, float dx, float dy);

  int height() const { return t_.height(); }
  int width() const { return t_.width(); }
  float& dx(int y, int x) noexcept { return t_.at(0, y, x); }
  float& dy(int y, int x) noexcept { return t_.at(1, y, x); }
  float dx(int y, int x) const noexcept { return t_.at(0, y, x); }
  float dy(int y, int x) const noexcept { return t_.at(1, y, x); }

  const Tensor& tensor() const noexcept { return t_; }
  /// Mutable access; callers must keep the values finite.
  Tensor& tensor_mut() noexcept { return t_; }

  friend bool operator==(const FlowField& a, const FlowField& b) { return a.t_ == b.t_; }

 private:
  Tensor t_;
};

// Elementwise helpers used across modules.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, float s);
FlowField operator+(const FlowField& a, const FlowField& b);
FlowField operator-(const FlowField& a, const FlowField& b);

/// Stacks (C_i,H,W) tensors along the channel axis.
Tensor concat_channels(std::initializer_list<const Tensor*> parts);
/// Channels [begin, end) of a (C,H,W) tensor.
Tensor slice_channels(const Tensor& t, int begin, int end);

double sum(const Tensor& t);
double mean(const Tensor& t);
float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace alignkit
