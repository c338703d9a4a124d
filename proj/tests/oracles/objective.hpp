#pragma once
#include <vector>

#include "naive_fk.hpp"
#include "supportseg/marker_fit.hpp"

namespace oracle {

// Sum of squared marker errors, term by term through the naive FK.
inline double StraightSumObjective(const supportseg::KinematicModel& model, const std::vector<double>& x,
                                   const supportseg::MarkerFrame& frame) {
  double sum = 0;
  for (std::size_t i = 0; i < model.markers().size(); ++i) {
    if (!frame.positions[i]) continue;
    const auto& m = model.markers()[i];
    const auto v = Apply(SegmentMatrix(model, x, m.segment), m.offset.x(), m.offset.y(), m.offset.z());
    for (int c = 0; c < 3; ++c) {
      const double d = (*frame.positions[i])[c] - v[c];
      sum += d * d;
    }
  }
  return sum;
}

}  // namespace oracle
