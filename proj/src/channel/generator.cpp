#include "moece/channel/generator.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "moece/error.hpp"

namespace moece::channel {

using numerics::cdouble;

void LinkConfig::validate() const {
  if (n_ant == 0) throw ConfigError("link: n_ant must be positive");
  if (n_rb == 0) throw ConfigError("link: n_rb must be positive");
  if (pilots_per_rb == 0) throw ConfigError("link: pilots_per_rb must be positive");
  if (!(pilot_spacing_hz > 0.0)) throw ConfigError("link: pilot_spacing_hz must be positive");
  if (std::isnan(snr_db)) throw ConfigError("link: snr_db is NaN");
}

double noise_variance(double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return std::pow(10.0, -snr_db / 10.0);
}

ComplexGrid synth_channel(const ProfileSpec& profile, const LinkConfig& link, std::mt19937_64& rng) {
  profile.validate();
  link.validate();
  const std::size_t n_ant = link.n_ant, n_pf = link.n_pf();
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexGrid h(n_ant, n_pf);

  // Per-tap phase ramp across pilots, shared by all antennas.
  std::vector<cdouble> ramp(profile.taps.size() * n_pf);
  for (std::size_t p = 0; p < profile.taps.size(); ++p) {
    const double tau = profile.taps[p].delay_s;
    for (std::size_t f = 0; f < n_pf; ++f) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(f) * link.pilot_spacing_hz * tau;
      ramp[p * n_pf + f] = std::polar(1.0, phase);
    }
  }

  for (std::size_t a = 0; a < n_ant; ++a) {
    for (std::size_t p = 0; p < profile.taps.size(); ++p) {
      const Tap& tap = profile.taps[p];
      double los_power = 0.0;
      double diffuse_power = tap.power;
      if (tap.rician_k > 0.0) {
        if (std::isinf(tap.rician_k)) {
          los_power = tap.power;
          diffuse_power = 0.0;
        } else {
          los_power = tap.power * tap.rician_k / (tap.rician_k + 1.0);
          diffuse_power = tap.power / (tap.rician_k + 1.0);
        }
      }
      const double sd = std::sqrt(diffuse_power / 2.0);
      const double re = normal(rng), im = normal(rng);
      const cdouble gain = std::sqrt(los_power) + cdouble(sd * re, sd * im);
      for (std::size_t f = 0; f < n_pf; ++f) h(a, f) += gain * ramp[p * n_pf + f];
    }
  }
  return h;
}

ComplexGrid qpsk_pilots(std::size_t n_ant, std::size_t n_pf, std::mt19937_64& rng) {
  ComplexGrid x(n_ant, n_pf);
  const double amp = 1.0 / std::numbers::sqrt2;
  for (auto& z : x.entries()) {
    const auto bits = rng();
    z = {(bits & 1u) ? amp : -amp, (bits & 2u) ? amp : -amp};
  }
  return x;
}

ComplexGrid awgn(std::size_t n_ant, std::size_t n_pf, double variance, std::mt19937_64& rng) {
  ComplexGrid w(n_ant, n_pf);
  if (variance == 0.0) return w;
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  for (auto& z : w.entries()) {
    const double re = normal(rng);
    const double im = normal(rng);
    z = {re, im};
  }
  return w;
}

ComplexGrid ls_from_observation(const ComplexGrid& h, const ComplexGrid& pilots, const ComplexGrid& noise) {
  if (h.n_ant() != pilots.n_ant() || h.n_pf() != pilots.n_pf() || h.n_ant() != noise.n_ant() ||
      h.n_pf() != noise.n_pf())
    throw ShapeError("ls_from_observation: grid shapes differ");
  ComplexGrid out(h.n_ant(), h.n_pf());
  for (std::size_t i = 0; i < h.size(); ++i) {
    // (H X + W) / X, written as H + W / X so a noiseless observation is exact.
    out.entries()[i] = h.entries()[i] + noise.entries()[i] / pilots.entries()[i];
  }
  return out;
}

ComplexGrid ls_estimate(const ComplexGrid& h, double snr_db, std::mt19937_64& rng) {
  const ComplexGrid x = qpsk_pilots(h.n_ant(), h.n_pf(), rng);
  const ComplexGrid w = awgn(h.n_ant(), h.n_pf(), noise_variance(snr_db), rng);
  return ls_from_observation(h, x, w);
}

ChannelSample make_sample(const ProfileSpec& profile, const LinkConfig& link, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ChannelSample s;
  s.h_clean = synth_channel(profile, link, rng);
  s.h_ls = ls_estimate(s.h_clean, link.snr_db, rng);
  s.snr_db = link.snr_db;
  s.profile_name = profile.name;
  s.n_rb = link.n_rb;
  s.delay_spread_s = profile.nominal_delay_spread_s;
  s.seed = seed;
  return s;
}

numerics::Tensor to_real_tensor(const ComplexGrid& grid) {
  numerics::Tensor t({grid.n_ant(), grid.n_pf(), 2});
  for (std::size_t a = 0; a < grid.n_ant(); ++a)
    for (std::size_t f = 0; f < grid.n_pf(); ++f) {
      t.at(a, f, 0) = grid(a, f).real();
      t.at(a, f, 1) = grid(a, f).imag();
    }
  return t;
}

ComplexGrid from_real_tensor(const numerics::Tensor& tensor) {
  if (tensor.rank() != 3 || tensor.extent(2) != 2)
    throw ShapeError("from_real_tensor expects [n_ant, n_pf, 2], got " +
                     numerics::shape_to_string(tensor.shape()));
  ComplexGrid g(tensor.extent(0), tensor.extent(1));
  for (std::size_t a = 0; a < g.n_ant(); ++a)
    for (std::size_t f = 0; f < g.n_pf(); ++f) g(a, f) = {tensor.at(a, f, 0), tensor.at(a, f, 1)};
  return g;
}

}  // namespace moece::channel
