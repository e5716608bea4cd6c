#pragma once

// Randomized invariant checks shared by the unit tests and the acceptance
// binary.

#include <cstddef>
#include <cstdint>
#include <string>

namespace railpf {

struct PropertyReport {
  std::size_t cases = 0;
  std::size_t weight_normalization = 0;
  std::size_t neff_bounds = 0;
  std::size_t offspring_counts = 0;
  std::size_t covariance_psd = 0;

  std::size_t failures() const {
    return weight_normalization + neff_bounds + offspring_counts + covariance_psd;
  }
  std::string describe() const;
};

/// Runs `cases` randomized cases for each property.
PropertyReport run_property_checks(std::size_t cases, std::uint64_t seed);

}  // namespace railpf
