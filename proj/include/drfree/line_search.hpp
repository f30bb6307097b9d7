#pragma once

#include <functional>

namespace drfree {

struct GoldenResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
  bool at_lower = false;  // lower end of the bracket never moved
  bool at_upper = false;  // upper end of the bracket never moved
};

/// Golden-section minimization of a unimodal f on [a, b] with a fixed
/// iteration budget. The returned point is the best probe seen.
GoldenResult golden_section_minimize(const std::function<double(double)>& f, double a,
                                     double b, int iterations);

}  // namespace drfree
