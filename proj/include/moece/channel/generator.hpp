#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "moece/channel/profile.hpp"
#include "moece/numerics/complex_grid.hpp"
#include "moece/numerics/tensor.hpp"

namespace moece::channel {

using numerics::ComplexGrid;

inline constexpr double kNoiseFreeSnr = std::numeric_limits<double>::infinity();

struct LinkConfig {
  std::size_t n_ant = 4;
  std::size_t n_rb = 4;
  std::size_t pilots_per_rb = 6;
  double pilot_spacing_hz = 60e3;
  double snr_db = 10.0;

  std::size_t n_pf() const { return n_rb * pilots_per_rb; }
  void validate() const;
};

// Linear noise variance for a dB SNR at unit channel power; 0 at +inf.
double noise_variance(double snr_db);

// H[a, f] = sum_p g[a, p] * exp(-i 2 pi f spacing tau_p), with g[a, p] the
// sum of a unit-phase LOS term of power P_p K/(K+1) and a circular complex
// Gaussian of variance P_p/(K+1). Average per-entry power is 1.
ComplexGrid synth_channel(const ProfileSpec& profile, const LinkConfig& link, std::mt19937_64& rng);

// Unit-modulus QPSK symbols (+-1 +-i)/sqrt(2).
ComplexGrid qpsk_pilots(std::size_t n_ant, std::size_t n_pf, std::mt19937_64& rng);
// Circular complex Gaussian noise with per-entry variance `variance`.
ComplexGrid awgn(std::size_t n_ant, std::size_t n_pf, double variance, std::mt19937_64& rng);
// Y = H o X + W, returned as Y / X.
ComplexGrid ls_from_observation(const ComplexGrid& h, const ComplexGrid& pilots, const ComplexGrid& noise);
ComplexGrid ls_estimate(const ComplexGrid& h, double snr_db, std::mt19937_64& rng);

struct ChannelSample {
  ComplexGrid h_clean;
  ComplexGrid h_ls;
  double snr_db = 0.0;
  std::string profile_name;
  std::size_t n_rb = 0;
  double delay_spread_s = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const ChannelSample&) const = default;
};

// Pure function of (profile, link, seed): channel first, then pilots and
// noise, all from one engine seeded with `seed`.
ChannelSample make_sample(const ProfileSpec& profile, const LinkConfig& link, std::uint64_t seed);

// [n_ant, n_pf, 2] with the real parts in channel 0 and the imaginary parts
// in channel 1.
numerics::Tensor to_real_tensor(const ComplexGrid& grid);
ComplexGrid from_real_tensor(const numerics::Tensor& tensor);

}  // namespace moece::channel
