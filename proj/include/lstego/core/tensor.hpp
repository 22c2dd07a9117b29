#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lstego {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Dense row-major tensor. Images and feature maps use NCHW.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    for (int d : shape_)
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
  }
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_))
      throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape_));
  }

  const Shape& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape s) const {
    if (shape_numel(s) != size())
      throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
    return Tensor(std::move(s), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  Tensor& operator+=(const Tensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  void check_same(const Tensor& o) const {
    if (o.shape_ != shape_)
      throw std::invalid_argument("shape mismatch " + shape_str(shape_) + " vs " + shape_str(o.shape_));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Extract sample `n` of a batch as a [1, ...] tensor.
template <typename T>
Tensor<T> batch_slice(const Tensor<T>& t, int n) {
  Shape s = t.shape();
  const std::size_t per = t.size() / static_cast<std::size_t>(s[0]);
  s[0] = 1;
  std::vector<T> v(t.data() + n * per, t.data() + (n + 1) * per);
  return Tensor<T>(s, std::move(v));
}

template <typename T>
Tensor<T> batch_stack(std::span<const Tensor<T>> items) {
  if (items.empty()) throw std::invalid_argument("batch_stack of nothing");
  Shape s = items[0].shape();
  const int per_n = s[0];
  std::vector<T> v;
  v.reserve(items[0].size() * items.size());
  for (const auto& it : items) {
    if (it.shape() != items[0].shape()) throw std::invalid_argument("batch_stack shape mismatch");
    v.insert(v.end(), it.vec().begin(), it.vec().end());
  }
  s[0] = per_n * static_cast<int>(items.size());
  return Tensor<T>(s, std::move(v));
}

}  // namespace lstego
