#include "pam/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pam/rng.hpp"

namespace pam::kernels {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

double heat_kernel_r2(double t, double x2, int d) {
  if (!(t > 0.0)) throw std::invalid_argument("heat_kernel: t must be > 0");
  return std::pow(kTwoPi * t, -0.5 * d) * std::exp(-0.5 * x2 / t);
}

double heat_kernel(double t, double x, int d) { return heat_kernel_r2(t, x * x, d); }

TiltPair tilt_check(double t, double s, double a, double b) {
  if (!(t > 0.0 && s > 0.0)) throw std::invalid_argument("tilt_check: t, s must be > 0");
  TiltPair out;
  out.lhs = heat_kernel(t, a) * heat_kernel(s, b) / heat_kernel(t + s, a + b);
  out.rhs = heat_kernel(s * t / (t + s), b - s / (s + t) * (a + b));
  return out;
}

double delta_inc(double t, double x, double xp) {
  return heat_kernel(t, x + xp) - heat_kernel(t, x);
}

double rect_inc(double t, double x, double xp, double xpp) {
  return heat_kernel(t, x + xp - xpp) - heat_kernel(t, x + xp) - heat_kernel(t, x - xpp) +
         heat_kernel(t, x);
}

double n_weight_exponent(double t, double x, double e) {
  if (!(t > 0.0)) throw std::invalid_argument("n_weight: t must be > 0");
  double ax = std::abs(x), rt = std::sqrt(t);
  if (ax > rt) return 1.0;
  if (ax == 0.0) return e > 0.0 ? 0.0 : 1.0;
  return std::pow(ax / rt, e);
}

double n_weight(double t, double x, double H0) {
  if (!(H0 >= 0.5 && H0 < 1.0)) throw std::invalid_argument("n_weight: H0 must be in [1/2, 1)");
  return n_weight_exponent(t, x, H0 - 0.25);
}

double n_weight_integral(double t, double H1) {
  if (!(t > 0.0)) throw std::invalid_argument("n_weight_integral: t must be > 0");
  if (!(H1 > 0.0 && H1 < 0.5))
    throw std::invalid_argument("n_weight_integral: H1 must be in (0, 1/2)");
  return 4.0 * (1.0 - H1) / (1.0 - 2.0 * H1) * std::pow(t, H1 - 0.5);
}

Tabulated Tabulated::sample(const std::function<double(double)>& f, double lo, double hi, int n) {
  if (!(lo < hi) || n < 2) throw std::invalid_argument("Tabulated: bad range");
  Tabulated t;
  t.lo = lo;
  t.hi = hi;
  t.values.resize(n + 1);
  for (int i = 0; i <= n; ++i) t.values[i] = f(lo + (hi - lo) * i / n);
  return t;
}

double Tabulated::operator()(double x) const {
  if (x < lo || x > hi) throw std::out_of_range("Tabulated: evaluation outside range");
  const int n = static_cast<int>(values.size()) - 1;
  double u = (x - lo) / (hi - lo) * n;
  int i = std::min(static_cast<int>(u), n - 1);
  double f = u - i;
  return values[i] * (1.0 - f) + values[i + 1] * f;
}

namespace {
template <typename G>
double phi_apply_impl(const PhiParams& p, const G& g, double x) {
  if (!(p.t > 0.0)) throw std::invalid_argument("phi_apply: t must be > 0");
  if (p.beta < 0.0 || p.beta > 1.0) throw std::invalid_argument("phi_apply: beta must be in [0,1]");
  double rt = std::sqrt(p.t);
  if (std::abs(p.shift) > rt) return g(x + p.shift) + g(x);
  return std::pow(std::abs(p.shift) / rt, p.beta) * g(x);
}
}  // namespace

double phi_apply(const PhiParams& p, const Tabulated& g, double x) {
  return phi_apply_impl(p, g, x);
}
double phi_apply_fn(const PhiParams& p, const std::function<double(double)>& g, double x) {
  return phi_apply_impl(p, g, x);
}

double lambda_apply(double r, double zp, double s, double yp, double t,
                    const std::function<double(double)>& g1,
                    const std::function<double(double)>& g2, double x, double y, double H0) {
  if (!(0.0 < r && r < s && s < t)) throw std::invalid_argument("lambda_apply: need 0 < r < s < t");
  double beta = H0 - 0.25;
  PhiParams phi_sr_yp{s - r, yp, beta};
  PhiParams phi_sr_mzp{s - r, -zp, beta};
  PhiParams phi_ts_myp{t - s, -yp, beta};
  double nr = n_weight(r, zp, H0);

  std::function<double(double)> inner = [&](double v) { return phi_apply_fn(phi_sr_mzp, g2, v); };
  double term1 = g1(x) * phi_apply_fn(phi_sr_yp, g2, y) * nr;
  double term2 = g1(x) * phi_apply_fn(phi_sr_yp, inner, y);
  double term3 = phi_apply_fn(phi_ts_myp, g1, x) * g2(y + yp) * nr;
  double term4 = phi_apply_fn(phi_ts_myp, g1, x) * inner(y + yp);
  return term1 + term2 + term3 + term4;
}

double chaos_kernel(double t, double x, int n, const std::vector<double>& s_vec,
                    const std::vector<double>& y_vec, int d) {
  if (n < 1) throw std::invalid_argument("chaos_kernel: n must be >= 1");
  if (static_cast<int>(s_vec.size()) != n || static_cast<int>(y_vec.size()) != n)
    throw std::invalid_argument("chaos_kernel: argument count mismatch");
  for (double s : s_vec)
    if (s <= 0.0 || s >= t) return 0.0;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return s_vec[a] < s_vec[b]; });
  for (int i = 0; i + 1 < n; ++i)
    if (s_vec[order[i]] == s_vec[order[i + 1]])
      throw std::invalid_argument("chaos_kernel: repeated time coordinates");
  double logfact = std::lgamma(n + 1.0);
  double v = heat_kernel(t - s_vec[order[n - 1]], x - y_vec[order[n - 1]], d);
  for (int i = n - 1; i >= 1; --i) {
    v *= heat_kernel(s_vec[order[i]] - s_vec[order[i - 1]],
                     y_vec[order[i]] - y_vec[order[i - 1]], d);
  }
  return v * std::exp(-logfact);
}

SweepReport tl1_bound_sweep(double beta, long samples, std::uint64_t seed) {
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("tl1_bound_sweep: beta in [0,1]");
  if (samples <= 0) throw std::invalid_argument("tl1_bound_sweep: samples must be > 0");
  Rng rng(seed);
  SweepReport rep;
  auto p4t = [](double t) {
    return std::function<double(double)>([t](double v) { return heat_kernel(4.0 * t, v); });
  };
  for (long i = 0; i < samples; ++i) {
    double t = std::exp(rng.uniform() * (std::log(5.0) - std::log(0.05)) + std::log(0.05));
    double scale = std::sqrt(2.0 * t);
    double x = rng.normal() * scale;
    double xp = rng.normal() * scale;
    double xpp = rng.normal() * scale;
    PhiParams phi_xp{t, xp, beta};
    PhiParams phi_mxpp{t, -xpp, beta};
    auto p = p4t(t);
    double denom_d = phi_apply_fn(phi_xp, p, x);
    if (denom_d > 0.0) rep.max_ratio_delta = std::max(rep.max_ratio_delta,
                                                      std::abs(delta_inc(t, x, xp)) / denom_d);
    std::function<double(double)> inner = [&](double v) { return phi_apply_fn(phi_mxpp, p, v); };
    double denom_r = phi_apply_fn(phi_xp, inner, x);
    if (denom_r > 0.0) rep.max_ratio_rect = std::max(rep.max_ratio_rect,
                                                     std::abs(rect_inc(t, x, xp, xpp)) / denom_r);
  }
  return rep;
}

}  // namespace pam::kernels
