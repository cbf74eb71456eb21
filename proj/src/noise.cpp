#include "pam/noise.hpp"

#include <algorithm>
#include <cmath>

#include "pam/quadrature.hpp"

namespace pam::noise {

namespace {
constexpr double kPi = 3.14159265358979323846;

double surface_coef(int d) { return d == 1 ? 2.0 : 2.0 * kPi; }  // |S^{d-1}|

// Riesz spectral constant: |z|^{-beta} has mu(dxi) = riesz_c |xi|^{beta-d} dxi
double riesz_spectral_constant(int d, double beta) {
  return std::pow(2.0, -beta) * std::pow(kPi, -0.5 * d) *
         std::tgamma(0.5 * (d - beta)) / std::tgamma(0.5 * beta);
}
}  // namespace

SpatialKernel SpatialKernel::gaussian_bump(int d, double amplitude, double width) {
  if (!(amplitude > 0.0 && width > 0.0))
    throw std::invalid_argument("gaussian_bump: amplitude and width must be > 0");
  SpatialKernel k;
  k.kind = SpatialKind::Integrable;
  k.d = d;
  k.r_max = 10.0 * width;
  const int n = 2048;
  k.table.resize(n + 1);
  for (int i = 0; i <= n; ++i) {
    double r = k.r_max * i / n;
    k.table[i] = amplitude * std::exp(-0.5 * r * r / (width * width));
  }
  double l1 = amplitude * std::pow(2.0 * kPi * width * width, 0.5 * d);
  k.l1_norm = l1;
  return k;
}

SpatialKernel SpatialKernel::tabulated(int d, std::vector<double> radial, double r_max) {
  if (radial.size() < 2 || !(r_max > 0.0))
    throw std::invalid_argument("tabulated: need >= 2 samples and r_max > 0");
  for (double v : radial)
    if (v < 0.0) throw std::invalid_argument("tabulated: radial profile must be nonnegative");
  SpatialKernel k;
  k.kind = SpatialKind::Integrable;
  k.d = d;
  k.table = std::move(radial);
  k.r_max = r_max;
  // trapezoid L1 norm of the radial extension
  double s = 0.0;
  const int n = static_cast<int>(k.table.size()) - 1;
  double dr = r_max / n;
  for (int i = 0; i < n; ++i) {
    double r0 = i * dr, r1 = (i + 1) * dr;
    double w0 = d == 1 ? 2.0 : 2.0 * kPi * r0;
    double w1 = d == 1 ? 2.0 : 2.0 * kPi * r1;
    s += 0.5 * dr * (w0 * k.table[i] + w1 * k.table[i + 1]);
  }
  k.l1_norm = s;
  if (!(k.l1_norm > 0.0)) throw std::invalid_argument("tabulated: L1 norm must be > 0");
  return k;
}

double SpatialKernel::eval_radial(double r) const {
  if (kind != SpatialKind::Integrable)
    throw std::logic_error("eval_radial: only tabulated kernels");
  r = std::abs(r);
  if (r >= r_max) return 0.0;
  const int n = static_cast<int>(table.size()) - 1;
  double u = r / r_max * n;
  int i = std::min(static_cast<int>(u), n - 1);
  double f = u - i;
  return table[i] * (1.0 - f) + table[i + 1] * f;
}

NoiseSpec NoiseSpec::make(TemporalKernel t, SpatialKernel s) {
  NoiseSpec spec;
  spec.temporal = t;
  spec.spatial = s;
  spec.tag = s.kind == SpatialKind::RoughFbm ? HypothesisTag::Rough : HypothesisTag::Regular;
  spec.validate();
  return spec;
}

void NoiseSpec::validate() const {
  if (spatial.kind == SpatialKind::RoughFbm) {
    if (tag != HypothesisTag::Rough) throw std::invalid_argument("rough_fbm spatial kernel requires the rough tag");
    if (spatial.d != 1) throw std::invalid_argument("rough case requires d = 1");
    if (!(spatial.H1 > 0.0 && spatial.H1 < 0.5))
      throw std::invalid_argument("rough case requires H1 in (0, 1/2)");
    double H0 = temporal.hurst();
    if (!(H0 + spatial.H1 > 0.75)) {
      throw std::invalid_argument("H0+H1 <= 3/4 (H0=" + std::to_string(H0) +
                                  ", H1=" + std::to_string(spatial.H1) + ")");
    }
  } else {
    if (tag != HypothesisTag::Regular)
      throw std::invalid_argument("rough tag requires a rough_fbm spatial kernel");
    if (spatial.kind == SpatialKind::Riesz) {
      double cap = std::min(2.0, static_cast<double>(spatial.d));
      if (!(spatial.beta > 0.0 && spatial.beta < cap))
        throw std::invalid_argument("riesz kernel requires beta in (0, min(2,d)), got beta=" +
                                    std::to_string(spatial.beta));
    }
    if (spatial.kind == SpatialKind::Integrable && !(spatial.l1_norm > 0.0))
      throw std::invalid_argument("integrable kernel requires 0 < ||gamma1||_L1 < inf");
  }
}

// ---------------------------------------------------------------------------

double gamma0_cell_integral(double a_lo, double a_hi, double b_lo, double b_hi,
                            const TemporalKernel& k) {
  if (!(a_lo < a_hi) || !(b_lo < b_hi) || a_lo < 0.0 || b_lo < 0.0)
    throw std::invalid_argument("gamma0_cell_integral: invalid intervals");
  if (k.kind == TemporalKind::Dirac) {
    return std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
  }
  // double antiderivative of |u|^{2H0-2}
  double h = 2.0 * k.H0;
  auto F = [h](double u) { return std::pow(std::abs(u), h) / (h * (h - 1.0)); };
  return F(a_hi - b_lo) + F(a_lo - b_hi) - F(a_hi - b_hi) - F(a_lo - b_lo);
}

double capital_gamma(double t, const TemporalKernel& k) {
  if (!(t > 0.0)) throw std::invalid_argument("capital_gamma: t must be > 0");
  if (k.kind == TemporalKind::Dirac) return 1.0;
  return 2.0 * std::pow(t, 2.0 * k.H0 - 1.0) / (2.0 * k.H0 - 1.0);
}

// ---------------------------------------------------------------------------

namespace {

// exact closed form for 1d cells against |z|^{-beta}
double riesz_interval_integral(double a_lo, double a_hi, double b_lo, double b_hi, double beta) {
  std::function<double(double)> F;
  if (std::abs(beta - 1.0) < 1e-12) {
    F = [](double u) {
      double r = std::abs(u);
      return r == 0.0 ? 0.0 : r * (std::log(r) - 1.0);
    };
  } else {
    double e = 2.0 - beta;
    F = [e, beta](double u) { return std::pow(std::abs(u), e) / (e * (1.0 - beta)); };
  }
  return F(a_hi - b_lo) + F(a_lo - b_hi) - F(a_hi - b_hi) - F(a_lo - b_lo);
}

// interval overlap length of A and (B + u)
double shifted_overlap(double a_lo, double a_hi, double b_lo, double b_hi, double u) {
  return std::max(0.0, std::min(a_hi, b_hi + u) - std::max(a_lo, b_lo + u));
}

double integrable_cell_cov_1d(const Box& a, const Box& b, const SpatialKernel& k) {
  // int gamma1(u) * |A cap (B+u)| du, trapezoid over the difference range
  double lo = a.lo[0] - b.hi[0], hi = a.hi[0] - b.lo[0];
  const int n = 512;
  double du = (hi - lo) / n, s = 0.0;
  for (int i = 0; i <= n; ++i) {
    double u = lo + i * du;
    double w = (i == 0 || i == n) ? 0.5 : 1.0;
    s += w * k.eval_radial(u) * shifted_overlap(a.lo[0], a.hi[0], b.lo[0], b.hi[0], u);
  }
  return s * du;
}

double overlap_area(const Box& a, const Box& b, double u0, double u1) {
  double o0 = shifted_overlap(a.lo[0], a.hi[0], b.lo[0], b.hi[0], u0);
  double o1 = shifted_overlap(a.lo[1], a.hi[1], b.lo[1], b.hi[1], u1);
  return o0 * o1;
}

// 2d cells against a radial kernel, polar form around the kernel origin:
// int_0^inf r^{...} dr int dtheta kernel(r) * overlap(u(r,theta))
double radial_cell_cov_2d(const Box& a, const Box& b,
                          const std::function<double(double)>& kernel_of_r) {
  double r_hi = 0.0;
  for (int i = 0; i < 2; ++i) {
    double m = std::max(std::abs(a.hi[i] - b.lo[i]), std::abs(a.lo[i] - b.hi[i]));
    r_hi += m * m;
  }
  r_hi = std::sqrt(r_hi);
  const int ntheta = 256;
  auto ring = [&](double r) {
    double s = 0.0;
    for (int j = 0; j < ntheta; ++j) {
      double th = 2.0 * kPi * (j + 0.5) / ntheta;
      s += overlap_area(a, b, r * std::cos(th), r * std::sin(th));
    }
    return s * (2.0 * kPi / ntheta) * kernel_of_r(r) * r;
  };
  return integrate_singular_left(ring, 0.0, r_hi, 1e-9);
}

}  // namespace

double spatial_cell_cov(const Box& a, const Box& b, const SpatialKernel& k) {
  if (a.d != b.d || a.d != k.d) throw std::invalid_argument("spatial_cell_cov: dimension mismatch");
  for (int i = 0; i < a.d; ++i)
    if (!(a.lo[i] < a.hi[i]) || !(b.lo[i] < b.hi[i]))
      throw std::invalid_argument("spatial_cell_cov: degenerate box");

  switch (k.kind) {
    case SpatialKind::RoughFbm: {
      if (k.d != 1) throw UnsupportedCase("rough_fbm cells only in d = 1");
      double h = 2.0 * k.H1;
      auto p = [h](double u) { return std::pow(std::abs(u), h); };
      return 0.5 * (p(a.hi[0] - b.lo[0]) + p(a.lo[0] - b.hi[0]) - p(a.hi[0] - b.hi[0]) -
                    p(a.lo[0] - b.lo[0]));
    }
    case SpatialKind::Riesz: {
      if (k.d == 1) return riesz_interval_integral(a.lo[0], a.hi[0], b.lo[0], b.hi[0], k.beta);
      double beta = k.beta;
      return radial_cell_cov_2d(a, b, [beta](double r) { return std::pow(r, -beta); });
    }
    case SpatialKind::Integrable: {
      if (k.d == 1) return integrable_cell_cov_1d(a, b, k);
      return radial_cell_cov_2d(a, b, [&k](double r) { return k.eval_radial(r); });
    }
  }
  throw std::logic_error("spatial_cell_cov: unknown kind");
}

// ---------------------------------------------------------------------------

double fbm_spectral_constant(double H1) {
  return std::tgamma(2.0 * H1 + 1.0) * std::sin(kPi * H1) / (2.0 * kPi);
}

std::function<double(double)> spectral_density(const SpatialKernel& k) {
  switch (k.kind) {
    case SpatialKind::Riesz: {
      double c = riesz_spectral_constant(k.d, k.beta);
      double e = k.beta - k.d;
      return [c, e](double rho) { return c * std::pow(rho, e); };
    }
    case SpatialKind::RoughFbm: {
      double c = fbm_spectral_constant(k.H1);
      double e = 1.0 - 2.0 * k.H1;
      return [c, e](double rho) { return c * std::pow(rho, e); };
    }
    case SpatialKind::Integrable: {
      // mu density = (2pi)^{-d} FT(gamma1); d = 1 by cosine transform of the
      // table, d = 2 by a Hankel-type transform of the radial profile
      SpatialKernel kk = k;
      if (k.d == 1) {
        return [kk](double rho) {
          auto f = [&kk, rho](double z) { return kk.eval_radial(z) * std::cos(rho * z); };
          return integrate(f, 0.0, kk.r_max, 1e-10) / kPi;
        };
      }
      return [kk](double rho) {
        auto f = [&kk, rho](double r) {
          return kk.eval_radial(r) * r * std::cyl_bessel_j(0, rho * r);
        };
        return integrate(f, 0.0, kk.r_max, 1e-10) / (2.0 * kPi);
      };
    }
  }
  throw std::logic_error("spectral_density: unknown kind");
}

DalangReport dalang_check(const NoiseSpec& spec, double cutoff) {
  if (!(cutoff > 0.0)) throw std::invalid_argument("dalang_check: cutoff must be > 0");
  DalangReport rep;
  const auto& k = spec.spatial;
  switch (k.kind) {
    case SpatialKind::Riesz:
      rep.admissible = k.beta < 2.0;
      break;
    case SpatialKind::RoughFbm:
    case SpatialKind::Integrable:
      rep.admissible = true;
      break;
  }
  auto dens = spectral_density(k);
  double sd = surface_coef(k.d);
  auto f = [&](double rho) {
    return sd * dens(rho) * std::pow(rho, k.d - 1) / (1.0 + rho * rho);
  };
  rep.tail_value = integrate_singular_left(f, 0.0, cutoff, 1e-9);
  return rep;
}

CnDn cn_dn_density(double N, const std::function<double(double)>& density, int d) {
  if (!(N > 0.0)) throw std::invalid_argument("cn_dn: N must be > 0");
  CnDn out;
  double sd = surface_coef(d);
  auto fd = [&](double rho) { return sd * density(rho) * std::pow(rho, d - 1); };
  out.D_N = integrate_singular_left(fd, 0.0, N, 1e-10);
  // tail in blocks until negligible
  auto fc = [&](double rho) { return sd * density(rho) * std::pow(rho, d - 3); };
  double lo = N, total = 0.0, span = std::max(N, 1.0);
  for (int i = 0; i < 64; ++i) {
    double part = integrate(fc, lo, lo + span, 1e-12);
    total += part;
    lo += span;
    span *= 2.0;
    if (std::abs(part) < 1e-13 * (1.0 + std::abs(total))) break;
  }
  out.C_N = total;
  return out;
}

CnDn cn_dn(double N, const NoiseSpec& spec) {
  if (spec.tag == HypothesisTag::Rough)
    throw UnsupportedCase("cn_dn: rough spectral measure not supported here");
  const auto& k = spec.spatial;
  if (k.kind == SpatialKind::Riesz) {
    // closed forms; beta < 2 makes both finite
    double kappa = riesz_spectral_constant(k.d, k.beta) * surface_coef(k.d);
    CnDn out;
    out.C_N = kappa * std::pow(N, k.beta - 2.0) / (2.0 - k.beta);
    out.D_N = kappa * std::pow(N, k.beta) / k.beta;
    return out;
  }
  return cn_dn_density(N, spectral_density(k), k.d);
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd temporal_gram(const Grid& grid, const TemporalKernel& k) {
  Eigen::MatrixXd T(grid.nt, grid.nt);
  double dt = grid.dt();
  // stationary: value depends on |i-j| only
  std::vector<double> byGap(grid.nt);
  for (int g = 0; g < grid.nt; ++g)
    byGap[g] = gamma0_cell_integral(0.0, dt, g * dt, (g + 1) * dt, k);
  for (int i = 0; i < grid.nt; ++i)
    for (int j = 0; j < grid.nt; ++j) T(i, j) = byGap[std::abs(i - j)];
  return T;
}

Eigen::MatrixXd spatial_gram(const Grid& grid, const SpatialKernel& k) {
  if (k.d != grid.d) throw std::invalid_argument("spatial_gram: dimension mismatch");
  long ns = grid.nspace();
  Eigen::MatrixXd S(ns, ns);
  double dx = grid.dx();
  if (grid.d == 1) {
    std::vector<double> byGap(grid.nx);
    for (int g = 0; g < grid.nx; ++g) {
      Box a = Box::interval(0.0, dx);
      Box b = Box::interval(g * dx, (g + 1) * dx);
      byGap[g] = spatial_cell_cov(a, b, k);
    }
    for (long i = 0; i < ns; ++i)
      for (long j = 0; j < ns; ++j) S(i, j) = byGap[std::abs(i - j)];
    return S;
  }
  // d = 2: distinct offsets, symmetry in both axes
  std::vector<double> byGap(static_cast<size_t>(grid.nx) * grid.nx);
  for (int gi = 0; gi < grid.nx; ++gi)
    for (int gj = 0; gj < grid.nx; ++gj) {
      Box a = Box::square(0.0, dx, 0.0, dx);
      Box b = Box::square(gi * dx, (gi + 1) * dx, gj * dx, (gj + 1) * dx);
      byGap[static_cast<size_t>(gi) * grid.nx + gj] = spatial_cell_cov(a, b, k);
    }
  for (long i = 0; i < ns; ++i)
    for (long j = 0; j < ns; ++j) {
      int gi = std::abs(static_cast<int>(i / grid.nx) - static_cast<int>(j / grid.nx));
      int gj = std::abs(static_cast<int>(i % grid.nx) - static_cast<int>(j % grid.nx));
      S(i, j) = byGap[static_cast<size_t>(gi) * grid.nx + gj];
    }
  return S;
}

double inner_product_H(const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                       const NoiseSpec& spec, const Grid& grid) {
  if (phi.size() != grid.ncells() || psi.size() != grid.ncells())
    throw std::invalid_argument("inner_product_H: size mismatch with grid");
  Eigen::MatrixXd T = temporal_gram(grid, spec.temporal);
  Eigen::MatrixXd S = spatial_gram(grid, spec.spatial);
  long ns = grid.nspace();
  // sum_{tt'} T(t,t') phi_t^T S psi_t'
  Eigen::MatrixXd P(ns, grid.nt), Q(ns, grid.nt);
  for (int t = 0; t < grid.nt; ++t) {
    P.col(t) = phi.segment(static_cast<long>(t) * ns, ns);
    Q.col(t) = psi.segment(static_cast<long>(t) * ns, ns);
  }
  Eigen::MatrixXd SQ = S * Q;
  double acc = 0.0;
  for (int t = 0; t < grid.nt; ++t)
    for (int u = 0; u < grid.nt; ++u) acc += T(t, u) * P.col(t).dot(SQ.col(u));
  return acc;
}

EmbeddingPair embedding_bound(const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                              const NoiseSpec& spec, const Grid& grid, double c_H0) {
  if (spec.temporal.kind != TemporalKind::RieszTime)
    throw UnsupportedCase("embedding_bound: requires a riesz_time temporal kernel");
  if (!(c_H0 > 0.0)) throw std::invalid_argument("embedding_bound: c_H0 must be > 0");
  EmbeddingPair out;
  out.lhs = std::abs(inner_product_H(phi, psi, spec, grid));
  Eigen::MatrixXd S = spatial_gram(grid, spec.spatial);
  long ns = grid.nspace();
  double H0 = spec.temporal.H0;
  auto mixed_norm = [&](const Eigen::VectorXd& f) {
    double acc = 0.0;
    for (int t = 0; t < grid.nt; ++t) {
      Eigen::VectorXd slice = f.segment(static_cast<long>(t) * ns, ns);
      double n2 = std::max(0.0, slice.dot(S * slice));
      acc += grid.dt() * std::pow(std::sqrt(n2), 1.0 / H0);
    }
    return std::pow(acc, H0);
  };
  out.rhs = c_H0 * mixed_norm(phi) * mixed_norm(psi);
  return out;
}

}  // namespace pam::noise
