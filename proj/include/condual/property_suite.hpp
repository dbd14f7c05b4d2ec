#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace condual {

struct PropertyOutcome {
  std::string name;
  int cases = 0;
  int failures = 0;
  /// Largest observed violation, compared against `tolerance`.
  double worst = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string note;  // first failing case, or a remark
  bool passed() const { return cases > 0 && failures == 0; }
};

struct PropertyReport {
  std::uint64_t seed = 0;
  std::vector<PropertyOutcome> outcomes;
  double seconds = 0.0;
  bool passed() const;
};

const std::vector<std::string>& property_names();

/// One property; each name derives its own RNG stream from the seed.
PropertyOutcome run_property(const std::string& name, std::uint64_t seed);

/// The named subset (all when empty), in property_names() order.
PropertyReport run_property_suite(std::uint64_t seed, const std::vector<std::string>& only = {});

}  // namespace condual
