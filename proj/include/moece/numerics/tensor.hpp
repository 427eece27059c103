#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace moece::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense real-valued array of rank 1..4 stored row-major. The trailing extent
// is the fastest-varying one, so an [H, W, C] activation keeps the channels
// of one pixel contiguous.
class Tensor {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  // Gaussian entries with the given standard deviation.
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j, std::size_t k);
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  // Gradient slot. Empty means "no gradient has reached this tensor since
  // the last clear", which the optimizer uses to skip unselected experts.
  bool has_grad() const { return !grad_.empty(); }
  std::span<const double> grad() const { return grad_; }
  std::span<double> grad_mut();
  void accumulate_grad(std::span<const double> g);
  void clear_grad() { grad_.clear(); }

  bool all_finite() const;
  double squared_norm() const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::vector<double> grad_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace moece::numerics
