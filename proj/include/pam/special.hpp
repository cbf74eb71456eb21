#pragma once

#include <cstddef>
#include <stdexcept>

namespace pam::special {

struct StirlingSandwich {
  double lower;
  double value;
  double upper;
};

// sqrt(2*pi) x^{x-1/2} e^{-x}  <=  Gamma(x)  <=  same * e^{1/(12x)}, x > 0
StirlingSandwich stirling_bounds(double x);

struct MLParams {
  double tolerance = 1e-14;
  std::size_t max_terms = 4000;
};

// E_alpha(z) = sum_n z^n / Gamma(alpha*n + 1), z >= 0, alpha in (0,2)
double mittag_leffler(double alpha, double z, const MLParams& params = {});

struct GammaRatioScan {
  double c1 = 0.0;
  double c2 = 0.0;
  bool found = false;
};

// Product form: Gamma(a1 n + g1)^b1 * Gamma(a2 n + g2)^b2 <= c1 c2^n Gamma((a1 b1 + a2 b2) n + 1)
GammaRatioScan gamma_ratio_product_scan(double a1, double a2, double b1, double b2,
                                        double g1, double g2, int n_lo, int n_hi);

// Ratio form (requires a1 b1 < a2 b2):
// Gamma(a1 n + g1)^b1 / Gamma(a2 n + g2)^b2 <= c1 c2^n / Gamma((a2 b2 - a1 b1) n + 1)
GammaRatioScan gamma_ratio_quotient_scan(double a1, double a2, double b1, double b2,
                                         double g1, double g2, int n_lo, int n_hi);

}  // namespace pam::special
