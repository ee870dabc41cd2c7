#include "alignkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace alignkit {

namespace {

std::size_t element_count(const Shape& dims) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 1) {
      throw ShapeError("tensor: extent of axis " + std::to_string(i) + " must be >= 1, got " +
                       std::to_string(dims[i]));
    }
    n *= static_cast<std::size_t>(dims[i]);
  }
  return n;
}

const char* axis_name(int rank, int axis) {
  if (rank == 3) {
    static const char* names[] = {"channel", "height", "width"};
    return names[axis];
  }
  return "axis";
}

}  // namespace

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape dims, float fill) : dims_(std::move(dims)) {
  data_.assign(element_count(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<float> data) : dims_(std::move(dims)), data_(std::move(data)) {
  if (element_count(dims_) != data_.size()) {
    throw ShapeError("tensor: payload length " + std::to_string(data_.size()) +
                     " does not match extents " + shape_to_string(dims_));
  }
}

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank()));
  }
  return dims_[axis];
}

std::span<float> Tensor::plane(int c) {
  const std::size_t n = static_cast<std::size_t>(dims_[1]) * dims_[2];
  return {data_.data() + c * n, n};
}

std::span<const float> Tensor::plane(int c) const {
  const std::size_t n = static_cast<std::size_t>(dims_[1]) * dims_[2];
  return {data_.data() + c * n, n};
}

Tensor Tensor::reshaped(Shape dims) const { return Tensor(std::move(dims), data_); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void require_chw(const Tensor& t, const char* what) {
  if (t.rank() != 3) {
    throw ShapeError(std::string(what) + ": expected a (C,H,W) tensor, got rank " +
                     std::to_string(t.rank()));
  }
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rank() != b.rank()) {
    throw ShapeError(std::string(what) + ": rank mismatch " + shape_to_string(a.dims()) + " vs " +
                     shape_to_string(b.dims()));
  }
  for (int i = 0; i < a.rank(); ++i) {
    if (a.dims()[i] != b.dims()[i]) {
      throw ShapeError(std::string(what) + ": " + axis_name(a.rank(), i) + " mismatch (axis " +
                       std::to_string(i) + ": " + std::to_string(a.dims()[i]) + " vs " +
                       std::to_string(b.dims()[i]) + ")");
    }
  }
}

void require_same_hw(const Tensor& a, const Tensor& b, const char* what) {
  require_chw(a, what);
  require_chw(b, what);
  if (a.height() != b.height()) {
    throw ShapeError(std::string(what) + ": height mismatch (" + std::to_string(a.height()) +
                     " vs " + std::to_string(b.height()) + ")");
  }
  if (a.width() != b.width()) {
    throw ShapeError(std::string(what) + ": width mismatch (" + std::to_string(a.width()) +
                     " vs " + std::to_string(b.width()) + ")");
  }
}

FlowField::FlowField(int height, int width) : t_({2, height, width}) {}

FlowField::FlowField(Tensor t) : t_(std::move(t)) {
  if (t_.rank() != 3 || t_.channels() != 2) {
    throw ShapeError("flow: expected (2,H,W), got " + shape_to_string(t_.dims()));
  }
  if (!t_.all_finite()) throw NonFiniteError("flow: non-finite displacement");
}

FlowField FlowField::uniform(int height, int width, float dx, float dy) {
  FlowField f(height, width);
  std::fill(f.t_.plane(0).begin(), f.t_.plane(0).end(), dx);
  std::fill(f.t_.plane(1).begin(), f.t_.plane(1).end(), dy);
  return f;
}

namespace {

template <class Op>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, Op op) {
  require_same_dims(a, b, what);
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
  return out;
}

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) { return zip(a, b, "add", std::plus<float>{}); }
Tensor operator-(const Tensor& a, const Tensor& b) { return zip(a, b, "sub", std::minus<float>{}); }

Tensor operator*(const Tensor& a, float s) {
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

FlowField operator+(const FlowField& a, const FlowField& b) {
  return FlowField(a.tensor() + b.tensor());
}
FlowField operator-(const FlowField& a, const FlowField& b) {
  return FlowField(a.tensor() - b.tensor());
}

Tensor concat_channels(std::initializer_list<const Tensor*> parts) {
  if (parts.size() == 0) throw ShapeError("concat: no inputs");
  const Tensor& first = **parts.begin();
  require_chw(first, "concat");
  int channels = 0;
  for (const Tensor* p : parts) {
    require_same_hw(first, *p, "concat");
    channels += p->channels();
  }
  Tensor out({channels, first.height(), first.width()});
  float* dst = out.raw();
  for (const Tensor* p : parts) dst = std::copy(p->data().begin(), p->data().end(), dst);
  return out;
}

Tensor slice_channels(const Tensor& t, int begin, int end) {
  require_chw(t, "slice");
  if (begin < 0 || end > t.channels() || begin >= end) {
    throw ShapeError("slice: channel range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + std::to_string(t.channels()) + " channels");
  }
  const std::size_t n = static_cast<std::size_t>(t.height()) * t.width();
  std::vector<float> data(t.data().begin() + begin * n, t.data().begin() + end * n);
  return Tensor({end - begin, t.height(), t.width()}, std::move(data));
}

double sum(const Tensor& t) {
  double s = 0.0;
  for (float v : t.data()) s += v;
  return s;
}

double mean(const Tensor& t) { return t.empty() ? 0.0 : sum(t) / static_cast<double>(t.size()); }

float max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "max_abs_diff");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace alignkit
