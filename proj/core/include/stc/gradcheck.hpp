#pragma once

#include <functional>

#include "stc/tensor.hpp"

namespace stc {

// Compares the backward() gradient of f at x against central finite
// differences. Returns the max relative error with denominator
// max(|analytic|, |numeric|, 1e-8). f must be deterministic and must build
// its graph from the tensor it is handed.
double finite_difference_check(const std::function<Tensor(Graph&, Tensor&)>& f, Tensor& x,
                               double eps = 1e-5);

}  // namespace stc
