#pragma once

#include <functional>

#include "mran/tensor.hpp"

namespace mran {

// A deterministic scalar-valued function of the current tensor values. The
// callable rebuilds its computation in the graph it is given; gradcheck calls
// it repeatedly while perturbing one tensor's entries in place.
using LossFn = std::function<Tensor(Graph&)>;

// Central-difference check of the analytic gradient of f with respect to x.
// Returns max over coordinates of |analytic - numeric| / max(1e-8,
// |analytic| + |numeric|). x must require grad; its gradient buffer is
// clobbered. f must be deterministic given fixed tensor values.
double finite_diff_check(const LossFn& f, Tensor x, double step);

}  // namespace mran
