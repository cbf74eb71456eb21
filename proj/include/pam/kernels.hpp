#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace pam::kernels {

// p_t(x) = (2 pi t)^{-d/2} exp(-|x|^2 / (2t)); x2 is the squared norm
double heat_kernel_r2(double t, double x2, int d);
double heat_kernel(double t, double x, int d = 1);

struct TiltPair {
  double lhs;  // p_t(a) p_s(b) / p_{t+s}(a+b)
  double rhs;  // p_{st/(t+s)}(b - s/(s+t) (a+b))
};
TiltPair tilt_check(double t, double s, double a, double b);

// p_t(x + xp) - p_t(x)
double delta_inc(double t, double x, double xp);

// p_t(x+xp-xpp) - p_t(x+xp) - p_t(x-xpp) + p_t(x)
double rect_inc(double t, double x, double xp, double xpp);

// (|x|/sqrt(t))^{H0 - 1/4} inside |x| <= sqrt(t), 1 outside
double n_weight(double t, double x, double H0);
// same weight family with an arbitrary inner exponent e
double n_weight_exponent(double t, double x, double e);

// closed form of int_R [(|x|/sqrt(t))^{1-H1} ^ 1]^2 |x|^{2H1-2} dx
//   = 4 (1-H1)/(1-2H1) * t^{H1 - 1/2}
// (the weight's inner exponent 1-H1 is the one that makes this exact)
double n_weight_integral(double t, double H1);

// tabulated function on a uniform grid with linear interpolation; evaluation
// outside the range is an error, not a clamp
struct Tabulated {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> values;

  static Tabulated sample(const std::function<double(double)>& f, double lo, double hi, int n);
  double operator()(double x) const;
};

struct PhiParams {
  double t;      // > 0
  double shift;  // x'
  double beta;   // in [0, 1]
};

// (Phi^beta_{t,x'} g)(x): shift-plus-identity outside |x'| <= sqrt(t),
// (|x'|/sqrt(t))^beta damping inside
double phi_apply(const PhiParams& p, const Tabulated& g, double x);
double phi_apply_fn(const PhiParams& p, const std::function<double(double)>& g, double x);

// Lambda operator acting on a pair of functions; beta is fixed to H0 - 1/4,
// the terminal time t enters through the (t-s)-scale factor on g1
double lambda_apply(double r, double zp, double s, double yp, double t,
                    const std::function<double(double)>& g1,
                    const std::function<double(double)>& g2, double x, double y, double H0);

// f_{t,x,n}(s_vec, y_vec) = (1/n!) * time-ordered chain of heat kernels
double chaos_kernel(double t, double x, int n, const std::vector<double>& s_vec,
                    const std::vector<double>& y_vec, int d = 1);

struct SweepReport {
  double max_ratio_delta = 0.0;
  double max_ratio_rect = 0.0;
};

// empirical constants for |Delta_t| <= c (Phi p_{4t}) and
// |R_t| <= c (Phi Phi p_{4t}) over random draws
SweepReport tl1_bound_sweep(double beta, long samples, std::uint64_t seed);

}  // namespace pam::kernels
