#include "moece/channel/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "moece/error.hpp"
#include "moece/numerics/binary_io.hpp"
#include "moece/numerics/parallel.hpp"
#include "moece/numerics/random.hpp"

namespace moece::channel {

namespace {
constexpr std::string_view kMagic{"MOECEDS\0", 8};

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}
}  // namespace

void Dataset::add(ChannelSample sample) {
  ++summary[GroupKey{sample.snr_db, sample.profile_name, sample.n_rb}];
  samples.push_back(std::move(sample));
}

void Dataset::rebuild_summary() {
  summary.clear();
  for (const auto& s : samples) ++summary[GroupKey{s.snr_db, s.profile_name, s.n_rb}];
}

Dataset build_dataset(const std::vector<ProfileSpec>& profiles, const std::vector<LinkConfig>& links,
                      std::size_t samples_per_config, std::uint64_t master_seed, unsigned threads) {
  if (profiles.empty() || links.empty()) throw ConfigError("build_dataset: empty configuration grid");
  if (samples_per_config == 0) throw ConfigError("build_dataset: samples_per_config must be positive");
  for (const auto& p : profiles) p.validate();
  for (const auto& l : links) l.validate();

  const std::size_t total = profiles.size() * links.size() * samples_per_config;
  std::vector<ChannelSample> out(total);
  numerics::parallel_for(total, threads, [&](std::size_t i) {
    const std::size_t link = (i / samples_per_config) % links.size();
    const std::size_t prof = i / (samples_per_config * links.size());
    out[i] = make_sample(profiles[prof], links[link], numerics::derive_seed(master_seed, i));
  });
  Dataset ds;
  for (auto& s : out) ds.add(std::move(s));
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  numerics::BinaryWriter w;
  w.put_bytes(kMagic);
  w.put(kDatasetFormatVersion);
  std::uint32_t n_ant = 0, n_pf = 0;
  if (!dataset.empty()) {
    n_ant = static_cast<std::uint32_t>(dataset.samples.front().h_clean.n_ant());
    n_pf = static_cast<std::uint32_t>(dataset.samples.front().h_clean.n_pf());
    for (const auto& s : dataset.samples) {
      if (s.h_clean.n_ant() != n_ant) n_ant = 0;
      if (s.h_clean.n_pf() != n_pf) n_pf = 0;
    }
  }
  w.put(n_ant);
  w.put(n_pf);
  w.put(std::uint32_t{2});
  w.put(static_cast<std::uint64_t>(dataset.size()));
  for (const auto& s : dataset.samples) {
    w.put(static_cast<std::uint32_t>(s.h_clean.n_ant()));
    w.put(static_cast<std::uint32_t>(s.h_clean.n_pf()));
    w.put(s.snr_db);
    w.put(static_cast<std::uint32_t>(s.n_rb));
    w.put(s.delay_spread_s);
    w.put(s.seed);
    w.put_string(s.profile_name);
    for (const ComplexGrid* g : {&s.h_clean, &s.h_ls}) {
      for (const auto& z : g->entries()) w.put(static_cast<float>(z.real()));
      for (const auto& z : g->entries()) w.put(static_cast<float>(z.imag()));
    }
  }
  write_file(path, w.bytes());
}

Dataset load_dataset(const std::filesystem::path& path) {
  numerics::BinaryReader r(read_file(path), "dataset " + path.string());
  if (r.get_bytes(kMagic.size()) != kMagic) throw ParseError(path.string() + ": not a dataset file");
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetFormatVersion)
    throw ParseError(path.string() + ": unsupported dataset version " + std::to_string(version));
  const auto hdr_ant = r.get<std::uint32_t>();
  const auto hdr_pf = r.get<std::uint32_t>();
  const auto d = r.get<std::uint32_t>();
  if (d != 2) throw ParseError(path.string() + ": unsupported trailing extent D=" + std::to_string(d));
  const auto count = r.get<std::uint64_t>();
  Dataset ds;
  for (std::uint64_t i = 0; i < count; ++i) {
    ChannelSample s;
    const auto n_ant = r.get<std::uint32_t>();
    const auto n_pf = r.get<std::uint32_t>();
    if ((hdr_ant && n_ant != hdr_ant) || (hdr_pf && n_pf != hdr_pf))
      throw ParseError(path.string() + ": sample " + std::to_string(i) + " disagrees with header shape");
    if (static_cast<std::uint64_t>(n_ant) * n_pf * 16 > r.remaining())
      throw ParseError(path.string() + ": truncated file");
    s.snr_db = r.get<double>();
    s.n_rb = r.get<std::uint32_t>();
    s.delay_spread_s = r.get<double>();
    s.seed = r.get<std::uint64_t>();
    s.profile_name = r.get_string(4096);
    for (ComplexGrid* g : {&s.h_clean, &s.h_ls}) {
      *g = ComplexGrid(n_ant, n_pf);
      for (auto& z : g->entries()) z.real(r.get<float>());
      for (auto& z : g->entries()) z.imag(r.get<float>());
    }
    ds.add(std::move(s));
  }
  if (!r.at_end()) throw ParseError(path.string() + ": trailing bytes after last sample");
  return ds;
}

void export_sample_csv(const ChannelSample& sample, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "antenna,subcarrier,re_clean,im_clean,re_ls,im_ls\n";
  char line[256];
  for (std::size_t a = 0; a < sample.h_clean.n_ant(); ++a)
    for (std::size_t f = 0; f < sample.h_clean.n_pf(); ++f) {
      const auto c = sample.h_clean(a, f);
      const auto l = sample.h_ls(a, f);
      std::snprintf(line, sizeof line, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", a, f, c.real(), c.imag(),
                    l.real(), l.imag());
      out << line;
    }
}

std::pair<ComplexGrid, ComplexGrid> import_sample_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  if (header != "antenna,subcarrier,re_clean,im_clean,re_ls,im_ls")
    throw ParseError(path.string() + ": unexpected sample CSV header");
  struct Row {
    std::size_t a, f;
    double rc, ic, rl, il;
  };
  std::vector<Row> rows;
  std::size_t n_ant = 0, n_pf = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row r{};
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf,%lf,%lf", &r.a, &r.f, &r.rc, &r.ic, &r.rl, &r.il) != 6)
      throw ParseError(path.string() + ": malformed row '" + line + "'");
    n_ant = std::max(n_ant, r.a + 1);
    n_pf = std::max(n_pf, r.f + 1);
    rows.push_back(r);
  }
  if (rows.size() != n_ant * n_pf) throw ParseError(path.string() + ": incomplete grid");
  ComplexGrid clean(n_ant, n_pf), ls(n_ant, n_pf);
  for (const auto& r : rows) {
    clean(r.a, r.f) = {r.rc, r.ic};
    ls(r.a, r.f) = {r.rl, r.il};
  }
  return {clean, ls};
}

}  // namespace moece::channel
