#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace moece::channel {

struct Tap {
  double delay_s = 0.0;
  double power = 0.0;     // linear, total (LOS + diffuse) power of the tap
  double rician_k = 0.0;  // LOS-to-diffuse power ratio; +inf means pure LOS
};

// Tapped-delay-line power delay profile.
//
// Invariants: taps non-empty, powers sum to 1, delays non-negative and
// strictly increasing, only the first tap may carry a Rician K factor.
struct ProfileSpec {
  std::string name;
  std::vector<Tap> taps;
  double nominal_delay_spread_s = 0.0;

  void validate() const;
  double rms_delay_spread() const;
  // Copy with every delay multiplied so the RMS spread becomes
  // `delay_spread_s`. The label gains an "@<ns>ns" suffix when the spread
  // differs from the nominal one.
  ProfileSpec scaled_to(double delay_spread_s) const;
};

// Built-in stand-ins for the 3GPP profiles:
//   umi-like   300 ns, 8-tap exponential PDP
//   uma-like   300 ns, 12-tap exponential PDP with a slower decay
//   cdlb-like  600 ns, 20-tap rich multipath
//   cdld-like   10 ns, 5 taps, first tap Rician with K = 10 dB
ProfileSpec builtin_profile(std::string_view name);
std::vector<std::string> builtin_profile_names();

// Strips a "@<ns>ns" suffix.
std::string base_profile_name(std::string_view label);

}  // namespace moece::channel
