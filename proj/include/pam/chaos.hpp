#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "pam/field.hpp"
#include "pam/grid.hpp"

namespace pam::chaos {

struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// dense tensors in cell-indicator coordinates (oracle-scale instances)

struct DenseTensor {
  int order = 0;
  long M = 0;
  std::vector<double> v;

  DenseTensor() = default;
  DenseTensor(int n, long m);
  long size() const { return static_cast<long>(v.size()); }
  double& at(const std::vector<long>& idx);
  double at(const std::vector<long>& idx) const;
  DenseTensor symmetrized() const;
};

// all partial pairings of n slots: k disjoint pairs plus singletons
struct WickPattern {
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> singles;
};

struct WickPlan {
  int order = 0;
  std::vector<WickPattern> patterns;
  static WickPlan enumerate(int n);
  static long expected_count(int n);  // sum_k C(n,2k)(2k-1)!!
};

// I_n of a dense tensor against a correlated Gaussian vector W with Cov = cov;
// non-symmetric tensors are handled implicitly (the value is that of the
// symmetrization)
double multiple_integral_dense(const DenseTensor& f, const Eigen::MatrixXd& cov,
                               const Eigen::VectorXd& W);

// independent check: whiten slot-by-slot with L^T (cov = L L^T, W = L xi) and
// evaluate the iid multiple integral through Hermite polynomials
double multiple_integral_oracle(const DenseTensor& f, const Eigen::MatrixXd& L,
                                const Eigen::VectorXd& xi);

// E[I_n(f)^2] = n! ||sym f||^2 with slots paired through cov
double second_moment_dense(const DenseTensor& f, const Eigen::MatrixXd& cov);

// r-fold contraction of f and g through cov
DenseTensor contraction(const DenseTensor& f, const DenseTensor& g, int r,
                        const Eigen::MatrixXd& cov);

struct ProductCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

// I_n(f) I_m(g) vs sum_r r! C(n,r) C(m,r) I_{n+m-2r}(f tensor_r g)
ProductCheck product_formula_check(const DenseTensor& f, const DenseTensor& g,
                                   const Eigen::MatrixXd& cov, const Eigen::VectorXd& W);

// ---------------------------------------------------------------------------
// chain kernels: the time-ordered heat-kernel factorization of the chaos
// coefficients. Only the top leg is stored per cell; inner transitions are
// generated from the grid. Cells on the same time slab never co-occur.

struct ChainKernel {
  Grid grid;
  int order = 1;
  double t = 0.0;
  Eigen::VectorXd top;  // per-cell top-leg value, zero on slabs at or past t
  bool averaged = false;
  std::array<double, 2> x{0.0, 0.0};
  double R = 0.0;
};

// point target (t, x)
ChainKernel discretize_kernel(double t, const std::array<double, 2>& x, int n, const Grid& grid);
ChainKernel discretize_kernel(double t, double x, int n, const Grid& grid);
// ball-averaged target: top(c) = int_{B_R} p_{t-s_c}(x - x_c) dx (midpoint sum)
ChainKernel averaged_kernel(double t, double R, int n, const Grid& grid);

// inner transition value p_{(slab gap) dt}(x_to - x_from); to must be on a
// strictly later slab
double propagator_value(const Grid& grid, long cell_to, long cell_from);

// n! f on a strictly time-ordered cell tuple (ascending slabs)
double chain_value_ordered(const ChainKernel& k, const std::vector<long>& cells);

// dense expansion of the symmetrized kernel (tiny grids only)
DenseTensor expand_chain(const ChainKernel& k);

// ---------------------------------------------------------------------------
// evaluation engine

// per-slab spatial fields
using SlabField = std::vector<Eigen::VectorXd>;

// banded heat-transition convolutions between slabs of one grid
class ChainOps {
 public:
  explicit ChainOps(const Grid& grid, double band_sigmas = 10.0);

  const Grid& grid() const { return grid_; }
  SlabField zero_field() const;

  // out[b] += sum_{a < b} K_{b-a} * in[a]
  void propagate(const SlabField& in, SlabField& out) const;
  // out[a] += sum_{b > a} K_{b-a} * in[b]
  void propagate_back(const SlabField& in, SlabField& out) const;
  // single source slab a -> all later slabs
  void propagate_from(int slab_a, const Eigen::VectorXd& in, SlabField& out) const;
  // evaluate sum_{a: s_a < t} p_{t - s_a}(x_target - x_c) * in[a] on all
  // spatial targets of a virtual slab at time t
  Eigen::VectorXd target_apply(double t, const SlabField& in) const;

  void apply_space(const Eigen::VectorXd& in, Eigen::VectorXd& out, int gap) const;

 private:
  Grid grid_;
  std::vector<std::vector<double>> kern_;  // per gap, one-sided [0..bw]
  std::vector<int> bw_;
};

// forward Wick sweep, valid when the temporal factor is diagonal: level-n
// fields G_n with G_1 = W and G_k = W .* propagate(G_{k-1})
std::vector<SlabField> forward_sweep(const ChainOps& ops, const Eigen::VectorXd& W, int N);

// per-level values I_n(kernel), n = 1..N, from one noise sample
std::vector<double> chain_levels(const ChainKernel& k, const field::NoiseSample& w,
                                 const field::CellCov& cov, int N);

// I_n for the kernel's own order
double multiple_integral(const ChainKernel& k, const field::NoiseSample& w,
                         const field::CellCov& cov);

// deterministic E[I_n^2] for n = 1..N (shares one ladder sweep)
std::vector<double> chain_second_moments(const ChainKernel& k, const field::CellCov& cov, int N);
double second_moment(const ChainKernel& k, const field::CellCov& cov);

// 1 + sum_{n<=N} I_n at a point
double solve_u(double t, double x, int N, const Grid& grid, const field::NoiseSample& w,
               const field::CellCov& cov);

struct ChaosSolution {
  double t = 0.0;
  int N = 0;
  // levels[n] over spatial cells, n = 1..N; u = 1 + sum
  std::vector<Eigen::VectorXd> levels;
  Eigen::VectorXd u() const;
};

ChaosSolution solve_slice(double t, int N, const Grid& grid, const field::NoiseSample& w,
                          const field::CellCov& cov);

// geometric tail certificate for sum_{n > N} E[I_n^2]
struct TailBound {
  double bound = 0.0;
  double retained = 0.0;  // sum_{n <= N} E[I_n^2]
  double ratio = 0.0;     // last observed moment ratio
  bool converged = false;
};

TailBound truncation_tail_bound(int N, double t, const noise::NoiseSpec& spec, const Grid& grid);
TailBound truncation_tail_bound(int N, const ChainKernel& kernel, const field::CellCov& cov);
// smallest N with bound <= rel_target * retained (capped)
int choose_truncation_order(double rel_target, const ChainKernel& kernel,
                            const field::CellCov& cov, int cap = 12);

// ---------------------------------------------------------------------------
// Malliavin derivatives (density convention: plugged slots carry kernel
// values at the cell center). Same-slab plug pairs are a time-diagonal
// degeneracy and evaluate to zero.

double malliavin_D(long cell, double t, double x, int N, const Grid& grid,
                   const field::NoiseSample& w, const field::CellCov& cov);
double malliavin_D2(long cell1, long cell2, double t, double x, int N, const Grid& grid,
                    const field::NoiseSample& w, const field::CellCov& cov);

// batched per-replica derivative bundle for a fixed target functional
class DerivativeSweep {
 public:
  // top describes the target: a chain kernel of any order with time t
  DerivativeSweep(const ChainOps& ops, const ChainKernel& target, int N,
                  const Eigen::VectorXd& W, bool need_second);

  int order() const { return N_; }
  // u-levels of the target functional itself
  double level(int n) const;
  double value_sum() const;  // sum of levels 1..N

  double D(long cell) const;
  // D^2 for e1 fixed, all cells on slabs after slab(e1): returned as fields
  // indexed by the second cell; entries on slabs <= slab(e1) are zero
  SlabField D2_row(long e1) const;
  double D2(long e1, long e2) const;

 private:
  const ChainOps& ops_;
  int N_;
  double t_;
  std::vector<SlabField> G_;    // 1..N
  std::vector<SlabField> A_;    // 1..N-1 (A_0 == 1 handled implicitly)
  std::vector<SlabField> tau_;  // 0..N-1
  Eigen::VectorXd W_;
  std::vector<double> levels_;
};

}  // namespace pam::chaos
