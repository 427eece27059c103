#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "moece/channel/generator.hpp"
#include "moece/channel/profile.hpp"

namespace moece::channel {

struct GroupKey {
  double snr_db = 0.0;
  std::string profile;
  std::size_t n_rb = 0;

  auto operator<=>(const GroupKey&) const = default;
};

struct Dataset {
  std::vector<ChannelSample> samples;
  std::map<GroupKey, std::size_t> summary;

  void add(ChannelSample sample);
  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  // Recomputes the summary from the samples.
  void rebuild_summary();
};

// Cartesian product profiles x links x samples_per_config. The i-th generated
// sample (profile-major, then link, then repetition) is seeded with
// derive_seed(master_seed, i), so the result is a pure function of the
// arguments and independent of `threads`.
Dataset build_dataset(const std::vector<ProfileSpec>& profiles, const std::vector<LinkConfig>& links,
                      std::size_t samples_per_config, std::uint64_t master_seed, unsigned threads = 1);

// Binary container, little-endian:
//   "MOECEDS\0", u32 version, u32 n_ant, u32 n_pf (0 when mixed), u32 D (=2),
//   u64 sample count
// then per sample:
//   u32 n_ant, u32 n_pf, f64 snr_db, u32 n_rb, f64 delay_spread_s, u64 seed,
//   u32 name length, name bytes,
//   f32 planes: clean re, clean im, ls re, ls im (each n_ant*n_pf, row-major)
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Debug CSV for one sample:
// antenna,subcarrier,re_clean,im_clean,re_ls,im_ls
void export_sample_csv(const ChannelSample& sample, const std::filesystem::path& path);
// Returns (clean, ls) grids.
std::pair<ComplexGrid, ComplexGrid> import_sample_csv(const std::filesystem::path& path);

}  // namespace moece::channel
