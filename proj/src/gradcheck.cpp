#include "acan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace acan {

double finite_diff_check(const std::function<Tensor()>& f, Tensor x, double eps) {
  if (eps < 1e-6 || eps > 1e-3)
    throw UsageError("finite_diff_check: eps must lie in [1e-6, 1e-3]");

  double v1 = f().value();
  double v2 = f().value();
  if (std::memcmp(&v1, &v2, sizeof(double)) != 0)
    throw DeterminismError("finite_diff_check: two evaluations of f disagree");

  bool had_rg = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  backward(f());
  std::vector<double> analytic(x.grad().begin(), x.grad().end());
  x.zero_grad();
  x.set_requires_grad(had_rg);

  auto data = x.mutable_data();
  double max_rel = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    double saved = data[i];
    data[i] = saved + eps;
    double fp = f().value();
    data[i] = saved - eps;
    double fm = f().value();
    data[i] = saved;
    double numeric = (fp - fm) / (2.0 * eps);
    double rel = std::abs(analytic[i] - numeric) /
                 std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace acan
