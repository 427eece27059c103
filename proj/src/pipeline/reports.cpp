#include "moece/pipeline/reports.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "moece/error.hpp"

namespace moece::pipeline {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ParseError(std::string(what) + ": bad number '" + s + "'");
  return v;
}

std::size_t to_size(const std::string& s, const char* what) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw ParseError(std::string(what) + ": bad integer '" + s + "'");
  return static_cast<std::size_t>(v);
}

// Splits CSV text into data rows after checking the header (exact match, or
// prefix match when `prefix_only`).
std::vector<std::vector<std::string>> rows_of(const std::string& text, const std::string& header, const char* what,
                                              bool prefix_only = false) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(std::string(what) + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (prefix_only ? line.rfind(header, 0) != 0 : line != header)
    throw ParseError(std::string(what) + ": unexpected header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split(line, ','));
  }
  return rows;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += f(v[i]);
  }
  return s;
}

}  // namespace

std::string eval_csv(const std::vector<EvalRow>& rows) {
  std::string s = "snr_db,profile,n_rb,nmse_linear,nmse_db,samples\n";
  for (const auto& r : rows)
    s += fmt(r.snr_db) + ',' + r.profile + ',' + std::to_string(r.n_rb) + ',' + fmt(r.nmse_linear) + ',' +
         fmt(r.nmse_db) + ',' + std::to_string(r.samples) + '\n';
  return s;
}

std::vector<EvalRow> parse_eval_csv(const std::string& text) {
  std::vector<EvalRow> out;
  for (const auto& f : rows_of(text, "snr_db,profile,n_rb,nmse_linear,nmse_db,samples", "eval csv")) {
    if (f.size() != 6) throw ParseError("eval csv: expected 6 fields");
    out.push_back({to_double(f[0], "eval csv"), f[1], to_size(f[2], "eval csv"), to_double(f[3], "eval csv"),
                   to_double(f[4], "eval csv"), to_size(f[5], "eval csv")});
  }
  return out;
}

std::string usage_csv(const std::vector<UsageRow>& rows) {
  const std::size_t r = rows.empty() ? 0 : rows.front().frequencies.size();
  std::string s = "snr_db";
  for (std::size_t e = 0; e < r; ++e) s += ",expert_" + std::to_string(e);
  s += '\n';
  for (const auto& row : rows) {
    s += fmt(row.snr_db);
    for (double f : row.frequencies) s += ',' + fmt(f);
    s += '\n';
  }
  return s;
}

std::vector<UsageRow> parse_usage_csv(const std::string& text) {
  std::vector<UsageRow> out;
  const auto header_end = text.find('\n');
  const auto header = split(text.substr(0, header_end), ',');
  const std::size_t r = header.size() - 1;
  for (std::size_t e = 0; e < r; ++e)
    if (header[e + 1] != "expert_" + std::to_string(e)) throw ParseError("usage csv: unexpected header");
  for (const auto& f : rows_of(text, "snr_db", "usage csv", true)) {
    if (f.size() != r + 1) throw ParseError("usage csv: ragged row");
    UsageRow row{to_double(f[0], "usage csv"), {}};
    for (std::size_t e = 0; e < r; ++e) row.frequencies.push_back(to_double(f[e + 1], "usage csv"));
    out.push_back(std::move(row));
  }
  return out;
}

std::string history_csv(const std::vector<EpochRecord>& rows) {
  std::string s = "epoch,train_nmse,val_nmse,max_usage,min_usage\n";
  for (const auto& r : rows)
    s += std::to_string(r.epoch) + ',' + fmt(r.train_nmse) + ',' + fmt(r.val_nmse) + ',' + fmt(r.max_usage) + ',' +
         fmt(r.min_usage) + '\n';
  return s;
}

std::vector<EpochRecord> parse_history_csv(const std::string& text) {
  std::vector<EpochRecord> out;
  for (const auto& f : rows_of(text, "epoch,train_nmse,val_nmse,max_usage,min_usage", "history csv")) {
    if (f.size() != 5) throw ParseError("history csv: expected 5 fields");
    out.push_back({to_size(f[0], "history csv"), to_double(f[1], "history csv"), to_double(f[2], "history csv"),
                   to_double(f[3], "history csv"), to_double(f[4], "history csv")});
  }
  return out;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string s = "sample_id,snr_db,profile,selected,w\n";
  for (const auto& r : rows)
    s += std::to_string(r.sample_id) + ',' + fmt(r.snr_db) + ',' + r.profile + ',' +
         join(r.selected, [](std::size_t i) { return std::to_string(i); }) + ',' + join(r.w, fmt) + '\n';
  return s;
}

std::vector<TraceRow> parse_trace_csv(const std::string& text) {
  std::vector<TraceRow> out;
  for (const auto& f : rows_of(text, "sample_id,snr_db,profile,selected,w", "trace csv")) {
    if (f.size() != 5) throw ParseError("trace csv: expected 5 fields");
    TraceRow row{to_size(f[0], "trace csv"), to_double(f[1], "trace csv"), f[2], {}, {}};
    for (const auto& s : split(f[3], ';')) row.selected.push_back(to_size(s, "trace csv"));
    for (const auto& s : split(f[4], ';')) row.w.push_back(to_double(s, "trace csv"));
    out.push_back(std::move(row));
  }
  return out;
}

std::string complexity_csv(const std::vector<models::ComplexityReport>& rows) {
  std::string s = "model,macs,flops,params,model_size_bytes\n";
  for (const auto& r : rows)
    s += r.model + ',' + std::to_string(r.macs) + ',' + std::to_string(r.flops) + ',' + std::to_string(r.params) +
         ',' + std::to_string(r.model_size_bytes) + '\n';
  return s;
}

std::vector<models::ComplexityReport> parse_complexity_csv(const std::string& text) {
  std::vector<models::ComplexityReport> out;
  for (const auto& f : rows_of(text, "model,macs,flops,params,model_size_bytes", "complexity csv")) {
    if (f.size() != 5) throw ParseError("complexity csv: expected 5 fields");
    out.push_back({f[0], to_size(f[1], "complexity csv"), to_size(f[2], "complexity csv"),
                   to_size(f[3], "complexity csv"), to_size(f[4], "complexity csv")});
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace moece::pipeline
