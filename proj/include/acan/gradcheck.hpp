#pragma once

#include <functional>

#include "acan/tensor.hpp"

namespace acan {

// Compares the backward gradient of loss = f() w.r.t. leaf x against central
// finite differences. f must rebuild the graph on every call and close over x
// so that perturbing x.mutable_data() changes the result. Returns the max of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over elements.
//
// f is evaluated twice up front; if the two values differ bitwise, f is not
// deterministic and DeterminismError is thrown.
double finite_diff_check(const std::function<Tensor()>& f, Tensor x, double eps = 1e-5);

}  // namespace acan
