#include "moece/channel/profile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "moece/error.hpp"

namespace moece::channel {

void ProfileSpec::validate() const {
  if (taps.empty()) throw ConfigError("profile '" + name + "' has no taps");
  double total = 0.0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const Tap& t = taps[i];
    if (!(t.delay_s >= 0.0) || !std::isfinite(t.delay_s))
      throw ConfigError("profile '" + name + "': tap delays must be finite and non-negative");
    if (i > 0 && !(t.delay_s > taps[i - 1].delay_s))
      throw ConfigError("profile '" + name + "': tap delays must be strictly increasing");
    if (!(t.power >= 0.0)) throw ConfigError("profile '" + name + "': tap powers must be non-negative");
    if (!(t.rician_k >= 0.0)) throw ConfigError("profile '" + name + "': Rician K must be non-negative");
    if (i > 0 && t.rician_k > 0.0)
      throw ConfigError("profile '" + name + "': only the first tap may be Rician");
    total += t.power;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("profile '" + name + "': tap powers must sum to 1");
}

double ProfileSpec::rms_delay_spread() const {
  double mean = 0.0;
  double second = 0.0;
  for (const auto& t : taps) {
    mean += t.power * t.delay_s;
    second += t.power * t.delay_s * t.delay_s;
  }
  return std::sqrt(std::max(0.0, second - mean * mean));
}

ProfileSpec ProfileSpec::scaled_to(double delay_spread_s) const {
  if (!(delay_spread_s > 0.0)) throw ConfigError("delay spread must be positive");
  const double current = rms_delay_spread();
  ProfileSpec out = *this;
  if (current > 0.0)
    for (auto& t : out.taps) t.delay_s *= delay_spread_s / current;
  const double ns = delay_spread_s * 1e9;
  if (std::abs(ns - nominal_delay_spread_s * 1e9) > 1e-6) {
    std::ostringstream os;
    os << base_profile_name(name) << '@' << std::llround(ns) << "ns";
    out.name = os.str();
  }
  out.nominal_delay_spread_s = delay_spread_s;
  return out;
}

std::string base_profile_name(std::string_view label) {
  const auto at = label.find('@');
  return std::string(label.substr(0, at));
}

namespace {

// Exponential PDP with `n` evenly spaced taps on [0, 1] and decay rate
// `decay` (power ~ exp(-decay * t)), rescaled to the requested RMS spread.
ProfileSpec exponential_profile(std::string name, std::size_t n, double decay, double spread_s,
                                double first_tap_k = 0.0) {
  ProfileSpec p;
  p.name = std::move(name);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    const double pw = std::exp(-decay * t);
    p.taps.push_back({t, pw, 0.0});
    total += pw;
  }
  for (auto& tap : p.taps) tap.power /= total;
  p.taps.front().rician_k = first_tap_k;
  if (first_tap_k > 0.0) {
    // The LOS component adds K times the diffuse power on the first tap.
    const double diffuse = p.taps.front().power;
    p.taps.front().power = diffuse * (1.0 + first_tap_k);
    double sum = 0.0;
    for (const auto& tap : p.taps) sum += tap.power;
    for (auto& tap : p.taps) tap.power /= sum;
  }
  p.nominal_delay_spread_s = spread_s;
  const double rms = p.rms_delay_spread();
  for (auto& tap : p.taps) tap.delay_s *= spread_s / rms;
  return p;
}

}  // namespace

ProfileSpec builtin_profile(std::string_view name) {
  if (name == "umi-like") return exponential_profile("umi-like", 8, 4.0, 300e-9);
  if (name == "uma-like") return exponential_profile("uma-like", 12, 2.5, 300e-9);
  if (name == "cdlb-like") return exponential_profile("cdlb-like", 20, 1.5, 600e-9);
  if (name == "cdld-like") return exponential_profile("cdld-like", 5, 3.0, 10e-9, 10.0);
  throw ConfigError("unknown channel profile '" + std::string(name) + "'");
}

std::vector<std::string> builtin_profile_names() {
  return {"umi-like", "uma-like", "cdlb-like", "cdld-like"};
}

}  // namespace moece::channel
