#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "twostream/rng.hpp"
#include "twostream/tensor.hpp"

namespace twostream {

struct GradcheckEntry {
  std::string layer;
  std::string shape;
  double max_rel_error = 0;
  std::string worst;  // "<tensor>[<flat index>]" of the worst coordinate
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 1e-4;

  bool passed() const;
  std::string text() const;
};

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// |a - n| / max(|a|, |n|, floor): keeps coordinates whose true gradient is
  /// ~0 from turning round-off into a large relative error.
  double floor = 1e-5;
  /// Coordinates probed per tensor; larger tensors are sampled.
  Index max_coords = 48;
};

/// One differentiable variable: a name, the tensor the loss reads, and the
/// analytic gradient for it.
struct GradVariable {
  std::string name;
  Tensor* value;
  Tensor analytic;
};

/// Central differences of `loss` against every variable's analytic gradient.
GradcheckEntry check_gradient(const std::string& layer, const std::string& shape,
                              std::vector<GradVariable> variables, const std::function<double()>& loss,
                              Rng& rng, const GradcheckOptions& options = {});

/// Every layer type on randomized small shapes.
GradcheckReport gradcheck_all(Rng& rng, const GradcheckOptions& options = {});

}  // namespace twostream
