#pragma once

#include <cmath>
#include <functional>

namespace pam {

// Adaptive Simpson. Integrands with an endpoint singularity should be split
// by the caller first; the recursion only refines, it does not regularize.
inline double adaptive_simpson_impl(const std::function<double(double)>& f, double a, double b,
                                    double fa, double fm, double fb, double whole, double tol,
                                    int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_impl(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_impl(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-11, int depth = 48) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_impl(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Integral over [a,b] with an integrable power singularity at `a`:
// geometric panels toward the endpoint.
inline double integrate_singular_left(const std::function<double(double)>& f, double a, double b,
                                      double tol = 1e-11) {
  double total = 0.0;
  double hi = b;
  double span = b - a;
  for (int k = 0; k < 60 && span > 0; ++k) {
    double lo = a + span * 0.25;
    if (hi - lo < 1e-300) break;
    total += integrate(f, lo, hi, tol * 0.1);
    hi = lo;
    span *= 0.25;
  }
  return total;
}

}  // namespace pam
