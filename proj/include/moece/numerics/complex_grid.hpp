#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace moece::numerics {

using cdouble = std::complex<double>;

// Complex matrix over receive antennas x pilot subcarriers, row-major with
// one antenna per row.
class ComplexGrid {
 public:
  ComplexGrid() = default;
  ComplexGrid(std::size_t n_ant, std::size_t n_pf, cdouble fill = {});

  std::size_t n_ant() const { return n_ant_; }
  std::size_t n_pf() const { return n_pf_; }
  std::size_t size() const { return entries_.size(); }

  cdouble& operator()(std::size_t ant, std::size_t f) { return entries_[ant * n_pf_ + f]; }
  cdouble operator()(std::size_t ant, std::size_t f) const { return entries_[ant * n_pf_ + f]; }

  std::span<cdouble> row(std::size_t ant) { return {entries_.data() + ant * n_pf_, n_pf_}; }
  std::span<const cdouble> row(std::size_t ant) const {
    return {entries_.data() + ant * n_pf_, n_pf_};
  }
  std::span<cdouble> entries() { return entries_; }
  std::span<const cdouble> entries() const { return entries_; }

  double squared_norm() const;
  bool all_finite() const;

  bool operator==(const ComplexGrid&) const = default;

 private:
  std::size_t n_ant_ = 0;
  std::size_t n_pf_ = 0;
  std::vector<cdouble> entries_;
};

}  // namespace moece::numerics
