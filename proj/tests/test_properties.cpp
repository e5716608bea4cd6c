#include <doctest.h>

#include "property_checks.hpp"

using namespace railpf;

TEST_CASE("randomized invariants hold over 1000 cases each") {
  const PropertyReport r = run_property_checks(1000, 1);
  INFO(r.describe());
  CHECK(r.weight_normalization == 0);
  CHECK(r.neff_bounds == 0);
  CHECK(r.offspring_counts == 0);
  CHECK(r.covariance_psd == 0);
}
