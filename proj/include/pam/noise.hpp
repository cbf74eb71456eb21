#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pam/grid.hpp"

namespace pam::noise {

struct UnsupportedCase : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// kernel families

enum class TemporalKind { Dirac, RieszTime };

struct TemporalKernel {
  TemporalKind kind = TemporalKind::Dirac;
  double H0 = 0.5;  // only meaningful for RieszTime, in (1/2, 1)

  static TemporalKernel dirac() { return {TemporalKind::Dirac, 0.5}; }
  static TemporalKernel riesz_time(double H0) {
    if (!(H0 > 0.5 && H0 < 1.0))
      throw std::invalid_argument("riesz_time: H0 must be in (1/2, 1)");
    return {TemporalKind::RieszTime, H0};
  }
  // effective Hurst index: 1/2 for dirac
  double hurst() const { return kind == TemporalKind::Dirac ? 0.5 : H0; }
};

enum class SpatialKind { Integrable, Riesz, RoughFbm };

struct SpatialKernel {
  SpatialKind kind = SpatialKind::Integrable;
  int d = 1;
  double beta = 0.0;  // Riesz exponent
  double H1 = 0.0;    // rough Hurst index

  // tabulated radial profile for Integrable, uniform in r on [0, r_max],
  // zero beyond r_max
  std::vector<double> table;
  double r_max = 0.0;
  double l1_norm = 0.0;

  static SpatialKernel gaussian_bump(int d, double amplitude = 1.0, double width = 1.0);
  static SpatialKernel tabulated(int d, std::vector<double> radial, double r_max);
  // beta is range-checked against hypothesis constraints only when the kernel
  // is wrapped in a NoiseSpec; diagnostics may probe any beta > 0
  static SpatialKernel riesz(int d, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("riesz: beta must be > 0");
    SpatialKernel k;
    k.kind = SpatialKind::Riesz;
    k.d = d;
    k.beta = beta;
    return k;
  }
  static SpatialKernel rough_fbm(double H1) {
    if (!(H1 > 0.0 && H1 < 0.5))
      throw std::invalid_argument("rough_fbm: H1 must be in (0, 1/2)");
    SpatialKernel k;
    k.kind = SpatialKind::RoughFbm;
    k.d = 1;
    k.H1 = H1;
    return k;
  }

  double eval_radial(double r) const;  // Integrable only
};

enum class HypothesisTag { Regular, Rough };

struct NoiseSpec {
  TemporalKernel temporal;
  SpatialKernel spatial;
  HypothesisTag tag = HypothesisTag::Regular;

  static NoiseSpec make(TemporalKernel t, SpatialKernel s);
  // throws std::invalid_argument naming the violated clause
  void validate() const;
};

// ---------------------------------------------------------------------------
// temporal cell integrals

// int_{[a_lo,a_hi]} int_{[b_lo,b_hi]} gamma0(t - s) dt ds
double gamma0_cell_integral(double a_lo, double a_hi, double b_lo, double b_hi,
                            const TemporalKernel& k);

// Gamma_t = int_{[-t,t]} gamma0(s) ds
double capital_gamma(double t, const TemporalKernel& k);

// ---------------------------------------------------------------------------
// spatial cell integrals

struct Box {
  int d = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{0.0, 0.0};
  static Box interval(double a, double b) { return {1, {a, 0.0}, {b, 0.0}}; }
  static Box square(double ax, double bx, double ay, double by) {
    return {2, {ax, ay}, {bx, by}};
  }
};

// Cov(W(1_A), W(1_B)) spatial factor for cells A, B
double spatial_cell_cov(const Box& a, const Box& b, const SpatialKernel& k);

// ---------------------------------------------------------------------------
// spectral diagnostics

// radial density of the spectral measure: mu(dxi) = density(|xi|) dxi
std::function<double(double)> spectral_density(const SpatialKernel& k);

// standard fBm-noise spectral constant in mu(dxi) = c |xi|^{1-2H} dxi,
// normalized so that ||1_[0,1]||^2 = 1
double fbm_spectral_constant(double H1);

struct DalangReport {
  bool admissible = false;
  double tail_value = 0.0;  // int_{|xi| <= cutoff} mu(dxi) / (1 + |xi|^2)
};

DalangReport dalang_check(const NoiseSpec& spec, double cutoff);

struct CnDn {
  double C_N = 0.0;  // int_{|xi| >= N} mu(dxi)/|xi|^2
  double D_N = 0.0;  // mu({|xi| <= N})
};

CnDn cn_dn(double N, const NoiseSpec& spec);
// same integrals for an arbitrary radial density (diagnostic/testing surface)
CnDn cn_dn_density(double N, const std::function<double(double)>& density, int d);

// ---------------------------------------------------------------------------
// cell Gram matrices over a grid (shared by the covariance assembly and the
// inner products below)

Eigen::MatrixXd temporal_gram(const Grid& grid, const TemporalKernel& k);
Eigen::MatrixXd spatial_gram(const Grid& grid, const SpatialKernel& k);

// <phi, psi> over the full grid for cell-averaged functions (length = ncells)
double inner_product_H(const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                       const NoiseSpec& spec, const Grid& grid);

struct EmbeddingPair {
  double lhs = 0.0;
  double rhs = 0.0;
};

// |<phi,psi>| vs c_H0 * ||phi||_{L^{1/H0}(H1)} * ||psi||_{L^{1/H0}(H1)}
EmbeddingPair embedding_bound(const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                              const NoiseSpec& spec, const Grid& grid, double c_H0);

}  // namespace pam::noise
