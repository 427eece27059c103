#include "moece/numerics/fft.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>
#include <string>

#include "moece/error.hpp"

namespace moece::numerics {

ComplexGrid::ComplexGrid(std::size_t n_ant, std::size_t n_pf, cdouble fill)
    : n_ant_(n_ant), n_pf_(n_pf), entries_(n_ant * n_pf, fill) {}

double ComplexGrid::squared_norm() const {
  double s = 0.0;
  for (const auto& z : entries_) s += std::norm(z);
  return s;
}

bool ComplexGrid::all_finite() const {
  for (const auto& z : entries_)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

namespace {
bool is_power_of_two(std::size_t n) { return n && (n & (n - 1)) == 0; }
}  // namespace

DftPlan::DftPlan(std::size_t n) : n_(n), radix2_(is_power_of_two(n)) {
  if (n == 0) throw ShapeError("DFT length must be positive");
  twiddle_.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double phase = -2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
    twiddle_[m] = {std::cos(phase), std::sin(phase)};
  }
  if (radix2_) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    bitrev_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bitrev_[i] = r;
    }
  }
}

void DftPlan::inverse(std::span<cdouble> x) const {
  transform(x, true);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& z : x) z *= scale;
}

void DftPlan::transform(std::span<cdouble> x, bool conjugate) const {
  if (x.size() != n_)
    throw ShapeError("DFT plan of length " + std::to_string(n_) + " applied to " +
                     std::to_string(x.size()) + " samples");
  if (radix2_)
    radix2_in_place(x, conjugate);
  else
    direct(x, conjugate);
}

void DftPlan::radix2_in_place(std::span<cdouble> x, bool conjugate) const {
  for (std::size_t i = 0; i < n_; ++i)
    if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        cdouble w = twiddle_[j * stride];
        if (conjugate) w = std::conj(w);
        const cdouble t = w * x[start + j + half];
        x[start + j + half] = x[start + j] - t;
        x[start + j] += t;
      }
    }
  }
}

void DftPlan::direct(std::span<cdouble> x, bool conjugate) const {
  std::vector<cdouble> out(n_);
  for (std::size_t k = 0; k < n_; ++k) {
    cdouble acc{};
    std::size_t m = 0;  // (j * k) mod n, advanced incrementally
    for (std::size_t j = 0; j < n_; ++j) {
      const cdouble w = conjugate ? std::conj(twiddle_[m]) : twiddle_[m];
      acc += x[j] * w;
      m += k;
      if (m >= n_) m -= n_;
    }
    out[k] = acc;
  }
  std::copy(out.begin(), out.end(), x.begin());
}

namespace {
ComplexGrid apply_rows(const ComplexGrid& grid, bool inverse) {
  if (grid.n_pf() == 0 || grid.n_ant() == 0) throw ShapeError("frequency axis transform on empty grid");
  DftPlan plan(grid.n_pf());
  ComplexGrid out = grid;
  for (std::size_t a = 0; a < out.n_ant(); ++a) {
    if (inverse)
      plan.inverse(out.row(a));
    else
      plan.forward(out.row(a));
  }
  return out;
}
}  // namespace

ComplexGrid fft_freq_axis(const ComplexGrid& grid) { return apply_rows(grid, false); }
ComplexGrid ifft_freq_axis(const ComplexGrid& grid) { return apply_rows(grid, true); }

}  // namespace moece::numerics
