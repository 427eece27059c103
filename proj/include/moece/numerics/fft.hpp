#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "moece/numerics/complex_grid.hpp"

namespace moece::numerics {

// Precomputed 1-D DFT of a fixed length. Powers of two use an iterative
// radix-2 Cooley-Tukey transform; every other length falls back to a direct
// O(N^2) summation over an exact twiddle table (index j*k reduced mod N
// before the lookup, so no phase drift accumulates).
//
// Convention: forward is unnormalized, inverse carries the 1/N factor.
class DftPlan {
 public:
  explicit DftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  bool radix2() const { return radix2_; }

  void forward(std::span<cdouble> x) const { transform(x, false); }
  void inverse(std::span<cdouble> x) const;

 private:
  void transform(std::span<cdouble> x, bool conjugate) const;
  void radix2_in_place(std::span<cdouble> x, bool conjugate) const;
  void direct(std::span<cdouble> x, bool conjugate) const;

  std::size_t n_;
  bool radix2_;
  std::vector<cdouble> twiddle_;  // exp(-2*pi*i*m/N), m in [0, N)
  std::vector<std::size_t> bitrev_;
};

// Per-antenna transforms along the subcarrier (frequency) axis.
ComplexGrid fft_freq_axis(const ComplexGrid& grid);
ComplexGrid ifft_freq_axis(const ComplexGrid& grid);

}  // namespace moece::numerics
