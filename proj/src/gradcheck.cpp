#include "mran/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "mran/error.hpp"

namespace mran {

double finite_diff_check(const LossFn& f, Tensor x, double step) {
  if (!x.requires_grad()) throw UsageError("finite_diff_check requires a requires_grad tensor");
  if (step <= 0.0) throw UsageError("finite_diff_check requires step > 0");

  x.zero_grad();
  {
    Graph g;
    Tensor loss = f(g);
    g.backward(loss);
  }
  std::vector<double> analytic(x.grad().begin(), x.grad().end());

  auto eval = [&]() {
    Graph g;
    return f(g).item();
  };

  double max_err = 0.0;
  auto vals = x.values();
  for (size_t i = 0; i < vals.size(); ++i) {
    const double saved = vals[i];
    vals[i] = saved + step;
    const double f_plus = eval();
    vals[i] = saved - step;
    const double f_minus = eval();
    vals[i] = saved;
    const double numeric = (f_plus - f_minus) / (2.0 * step);
    const double a = analytic[i];
    // Central differences carry cancellation noise of order eps*|f|/step;
    // a discrepancy below that scale is rounding, not gradient disagreement
    // (it otherwise dominates coordinates whose true gradient is ~0).
    const double noise =
        16.0 * 2.220446049250313e-16 * std::max({1.0, std::abs(f_plus), std::abs(f_minus)}) / step;
    if (std::abs(a - numeric) <= noise) continue;
    const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace mran
