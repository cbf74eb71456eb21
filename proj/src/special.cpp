#include "pam/special.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pam::special {

StirlingSandwich stirling_bounds(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("stirling_bounds: x must be > 0");
  const double sqrt2pi = 2.5066282746310005;
  double lower = sqrt2pi * std::pow(x, x - 0.5) * std::exp(-x);
  double upper = lower * std::exp(1.0 / (12.0 * x));
  return {lower, std::tgamma(x), upper};
}

double mittag_leffler(double alpha, double z, const MLParams& params) {
  if (z < 0.0) throw std::invalid_argument("mittag_leffler: z must be >= 0");
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("mittag_leffler: alpha must be in (0,2)");
  if (z == 0.0) return 1.0;
  const double logz = std::log(z);
  double sum = 0.0;
  for (std::size_t n = 0; n < params.max_terms; ++n) {
    double term = std::exp(static_cast<double>(n) * logz - std::lgamma(alpha * n + 1.0));
    sum += term;
    if (n > 0 && term < params.tolerance * sum) return sum;
  }
  throw std::runtime_error("mittag_leffler: series did not converge within max_terms");
}

namespace {

// scans q(n) = LHS(n)/RHS0(n) in log space and picks (c1, c2) with
// log c1 + n log c2 >= log q(n) on the whole range
GammaRatioScan fit_envelope(const std::vector<double>& logq, int n_lo) {
  GammaRatioScan out;
  if (logq.empty()) return out;
  for (double v : logq)
    if (!std::isfinite(v)) return out;
  double max_slope = 0.0;
  for (std::size_t i = 0; i + 1 < logq.size(); ++i)
    max_slope = std::max(max_slope, logq[i + 1] - logq[i]);
  double logc2 = max_slope;
  double logc1 = -1e300;
  for (std::size_t i = 0; i < logq.size(); ++i) {
    double n = static_cast<double>(n_lo + static_cast<int>(i));
    logc1 = std::max(logc1, logq[i] - n * logc2);
  }
  out.c1 = std::exp(logc1);
  out.c2 = std::exp(logc2);
  out.found = std::isfinite(out.c1) && std::isfinite(out.c2);
  return out;
}

}  // namespace

GammaRatioScan gamma_ratio_product_scan(double a1, double a2, double b1, double b2,
                                        double g1, double g2, int n_lo, int n_hi) {
  std::vector<double> logq;
  for (int n = n_lo; n <= n_hi; ++n) {
    double lhs = 0.0;
    if (b1 != 0.0) lhs += b1 * std::lgamma(a1 * n + g1);
    if (b2 != 0.0) lhs += b2 * std::lgamma(a2 * n + g2);
    double rhs = std::lgamma((a1 * b1 + a2 * b2) * n + 1.0);
    logq.push_back(lhs - rhs);
  }
  return fit_envelope(logq, n_lo);
}

GammaRatioScan gamma_ratio_quotient_scan(double a1, double a2, double b1, double b2,
                                         double g1, double g2, int n_lo, int n_hi) {
  if (!(a1 * b1 < a2 * b2))
    throw std::invalid_argument("gamma_ratio_quotient_scan: needs a1*b1 < a2*b2");
  std::vector<double> logq;
  for (int n = n_lo; n <= n_hi; ++n) {
    double lhs = b1 * std::lgamma(a1 * n + g1) - b2 * std::lgamma(a2 * n + g2);
    double rhs = -std::lgamma((a2 * b2 - a1 * b1) * n + 1.0);
    logq.push_back(lhs - rhs);
  }
  return fit_envelope(logq, n_lo);
}

}  // namespace pam::special
