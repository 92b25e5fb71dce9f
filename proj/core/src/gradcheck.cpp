#include "stc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stc {

double finite_difference_check(const std::function<Tensor(Graph&, Tensor&)>& f, Tensor& x,
                               double eps) {
  if (eps <= 0) throw std::invalid_argument("finite_difference_check: eps must be > 0");
  x.set_requires_grad(true);
  x.zero_grad();
  {
    Graph g;
    Tensor y = f(g, x);
    if (y.numel() != 1) throw std::invalid_argument("finite_difference_check: f must be scalar");
    g.backward(y);
  }
  std::vector<real> analytic(x.grad().begin(), x.grad().end());

  auto eval = [&]() {
    Graph g;
    g.set_grad_enabled(false);
    return static_cast<double>(f(g, x).item());
  };

  double max_rel = 0.0;
  auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const real saved = xv[i];
    xv[i] = saved + static_cast<real>(eps);
    const double fp = eval();
    xv[i] = saved - static_cast<real>(eps);
    const double fm = eval();
    xv[i] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = static_cast<double>(analytic[i]);
    // the floor absorbs central-difference rounding noise (~|f|*1e-16/eps)
    // on entries whose true gradient is exactly zero
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
    max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
  }
  return max_rel;
}

}  // namespace stc
