#pragma once

#include <cmath>

#include "twostream/rng.hpp"
#include "twostream/tensor.hpp"

namespace twostream {

/// Glorot-uniform fill in flat (row-major) order: U(-l, l), l = sqrt(6/(fan_in+fan_out)).
inline void glorot_fill(Tensor& t, Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  for (Index k = 0; k < t.size(); ++k) t[k] = Real(rng.uniform(-limit, limit));
}

}  // namespace twostream
