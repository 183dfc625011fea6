#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaplab {

using Vec = std::vector<double>;

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "squared_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline Vec subtract(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "subtract");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Vec scaled(std::span<const double> a, double k) {
  Vec out(a.begin(), a.end());
  for (double& v : out) v *= k;
  return out;
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Row-major point cloud of `size()` points in `dim` dimensions.
class Samples {
 public:
  Samples() = default;
  explicit Samples(std::size_t dim) : dim_(dim) {}
  Samples(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
    if (dim_ == 0 || data_.size() % dim_ != 0)
      throw std::invalid_argument("Samples: data length is not a multiple of dim");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return size() == 0; }

  std::span<const double> operator[](std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  void push_back(std::span<const double> x) {
    require_same_dim(x.size(), dim_, "Samples::push_back");
    data_.insert(data_.end(), x.begin(), x.end());
  }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

}  // namespace gaplab
