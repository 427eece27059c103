#include "moece/numerics/tensor.hpp"

#include <cmath>
#include <sstream>

#include "moece/error.hpp"

namespace moece::numerics {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
void check_rank(const Shape& shape) {
  if (shape.empty() || shape.size() > Tensor::kMaxRank)
    throw ShapeError("tensor rank must be 1.." + std::to_string(Tensor::kMaxRank) +
                     ", got shape " + shape_to_string(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_rank(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_rank(shape_);
  if (shape_size(shape_) != data_.size())
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_to_string(shape_));
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data_) v = dist(rng);
  return t;
}

double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

std::span<double> Tensor::grad_mut() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

void Tensor::accumulate_grad(std::span<const double> g) {
  if (g.size() != data_.size())
    throw ShapeError("gradient length " + std::to_string(g.size()) +
                     " does not match tensor " + shape_to_string(shape_));
  auto dst = grad_mut();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  for (double v : grad_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
}

}  // namespace moece::numerics
