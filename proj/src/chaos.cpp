#include "pam/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "pam/kernels.hpp"

namespace pam::chaos {

namespace {
double binom(int n, int k) {
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}
double factorial(int n) { return std::round(std::exp(std::lgamma(n + 1.0))); }
}  // namespace

// ---------------------------------------------------------------------------
// dense tensors

DenseTensor::DenseTensor(int n, long m) : order(n), M(m) {
  if (n < 0 || m < 1) throw std::invalid_argument("DenseTensor: bad shape");
  double sz = std::pow(static_cast<double>(m), n);
  if (sz > 2.5e7) throw ResourceError("DenseTensor: M^n too large");
  v.assign(static_cast<size_t>(sz), 0.0);
}

double& DenseTensor::at(const std::vector<long>& idx) {
  long off = 0;
  for (int k = 0; k < order; ++k) off = off * M + idx[k];
  return v[off];
}
double DenseTensor::at(const std::vector<long>& idx) const {
  long off = 0;
  for (int k = 0; k < order; ++k) off = off * M + idx[k];
  return v[off];
}

DenseTensor DenseTensor::symmetrized() const {
  DenseTensor out(order, M);
  if (order <= 1) {
    out.v = v;
    return out;
  }
  std::vector<int> perm(order);
  std::iota(perm.begin(), perm.end(), 0);
  double count = 0.0;
  std::vector<long> idx(order), pidx(order);
  do {
    count += 1.0;
    for (long off = 0; off < size(); ++off) {
      long rem = off;
      for (int k = order - 1; k >= 0; --k) {
        idx[k] = rem % M;
        rem /= M;
      }
      for (int k = 0; k < order; ++k) pidx[k] = idx[perm[k]];
      long poff = 0;
      for (int k = 0; k < order; ++k) poff = poff * M + pidx[k];
      out.v[off] += v[poff];
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (auto& x : out.v) x /= count;
  return out;
}

// ---------------------------------------------------------------------------
// Wick pattern enumeration

namespace {
void enumerate_rec(int n, std::vector<int>& state, WickPattern& cur, std::vector<WickPattern>& out) {
  int first = -1;
  for (int i = 0; i < n; ++i)
    if (state[i] == 0) {
      first = i;
      break;
    }
  if (first < 0) {
    out.push_back(cur);
    return;
  }
  state[first] = 1;
  cur.singles.push_back(first);
  enumerate_rec(n, state, cur, out);
  cur.singles.pop_back();
  for (int j = first + 1; j < n; ++j) {
    if (state[j] != 0) continue;
    state[j] = 1;
    cur.pairs.emplace_back(first, j);
    enumerate_rec(n, state, cur, out);
    cur.pairs.pop_back();
    state[j] = 0;
  }
  state[first] = 0;
}
}  // namespace

WickPlan WickPlan::enumerate(int n) {
  if (n < 0 || n > 12) throw std::invalid_argument("WickPlan: order out of range");
  WickPlan plan;
  plan.order = n;
  std::vector<int> state(n, 0);
  WickPattern cur;
  enumerate_rec(n, state, cur, plan.patterns);
  return plan;
}

long WickPlan::expected_count(int n) {
  long total = 0;
  for (int k = 0; 2 * k <= n; ++k) {
    double dd = 1.0;
    for (int j = 2 * k - 1; j >= 1; j -= 2) dd *= j;
    total += static_cast<long>(std::round(binom(n, 2 * k) * dd));
  }
  return total;
}

// ---------------------------------------------------------------------------
// dense evaluation paths

double multiple_integral_dense(const DenseTensor& f, const Eigen::MatrixXd& cov,
                               const Eigen::VectorXd& W) {
  if (cov.rows() != f.M || W.size() != f.M)
    throw std::invalid_argument("multiple_integral_dense: size mismatch");
  if (f.order == 0) return f.v[0];
  WickPlan plan = WickPlan::enumerate(f.order);
  const int n = f.order;
  std::vector<long> idx(n);
  double total = 0.0;
  for (const auto& pat : plan.patterns) {
    double sign = (pat.pairs.size() % 2 == 0) ? 1.0 : -1.0;
    double acc = 0.0;
    for (long off = 0; off < f.size(); ++off) {
      double val = f.v[off];
      if (val == 0.0) continue;
      long rem = off;
      for (int k = n - 1; k >= 0; --k) {
        idx[k] = rem % f.M;
        rem /= f.M;
      }
      double w = 1.0;
      for (auto [i, j] : pat.pairs) w *= cov(idx[i], idx[j]);
      for (int s : pat.singles) w *= W[idx[s]];
      acc += val * w;
    }
    total += sign * acc;
  }
  return total;
}

namespace {
double hermite(int k, double x) {
  double h0 = 1.0, h1 = x;
  if (k == 0) return h0;
  for (int j = 1; j < k; ++j) {
    double h2 = x * h1 - j * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}
}  // namespace

double multiple_integral_oracle(const DenseTensor& f, const Eigen::MatrixXd& L,
                                const Eigen::VectorXd& xi) {
  if (L.rows() != f.M || xi.size() != f.M)
    throw std::invalid_argument("multiple_integral_oracle: size mismatch");
  if (f.order == 0) return f.v[0];
  // whiten each slot with L^T
  DenseTensor g = f;
  long block = 1;
  for (int slot = f.order - 1; slot >= 0; --slot) {
    // axis `slot` has stride `block`
    DenseTensor h(f.order, f.M);
    long outer = f.size() / (f.M * block);
    for (long o = 0; o < outer; ++o)
      for (long b = 0; b < block; ++b) {
        long base = o * f.M * block + b;
        for (long jnew = 0; jnew < f.M; ++jnew) {
          double acc = 0.0;
          for (long jold = 0; jold < f.M; ++jold)
            acc += g.v[base + jold * block] * L(jold, jnew);
          h.v[base + jnew * block] = acc;
        }
      }
    g = std::move(h);
    block *= f.M;
  }
  // iid multiple integral via Hermite products per index multiplicity
  std::vector<long> idx(f.order);
  std::vector<int> mult(f.M);
  double total = 0.0;
  for (long off = 0; off < g.size(); ++off) {
    if (g.v[off] == 0.0) continue;
    long rem = off;
    for (int k = f.order - 1; k >= 0; --k) {
      idx[k] = rem % f.M;
      rem /= f.M;
    }
    std::fill(mult.begin(), mult.end(), 0);
    for (int k = 0; k < f.order; ++k) mult[idx[k]]++;
    double w = 1.0;
    for (long m = 0; m < f.M; ++m)
      if (mult[m] > 0) w *= hermite(mult[m], xi[m]);
    total += g.v[off] * w;
  }
  return total;
}

namespace {
// apply cov to one slot of a dense tensor
DenseTensor apply_cov_slot(const DenseTensor& f, const Eigen::MatrixXd& cov, int slot) {
  DenseTensor h(f.order, f.M);
  long block = 1;
  for (int k = f.order - 1; k > slot; --k) block *= f.M;
  long outer = f.size() / (f.M * block);
  for (long o = 0; o < outer; ++o)
    for (long b = 0; b < block; ++b) {
      long base = o * f.M * block + b;
      for (long jn = 0; jn < f.M; ++jn) {
        double acc = 0.0;
        for (long jo = 0; jo < f.M; ++jo) acc += cov(jn, jo) * f.v[base + jo * block];
        h.v[base + jn * block] = acc;
      }
    }
  return h;
}
}  // namespace

double second_moment_dense(const DenseTensor& f, const Eigen::MatrixXd& cov) {
  DenseTensor s = f.symmetrized();
  DenseTensor g = s;
  for (int slot = 0; slot < f.order; ++slot) g = apply_cov_slot(g, cov, slot);
  double acc = 0.0;
  for (long off = 0; off < s.size(); ++off) acc += s.v[off] * g.v[off];
  return factorial(f.order) * acc;
}

DenseTensor contraction(const DenseTensor& f, const DenseTensor& g, int r,
                        const Eigen::MatrixXd& cov) {
  if (r < 0 || r > std::min(f.order, g.order))
    throw std::invalid_argument("contraction: r out of range");
  if (f.M != g.M) throw std::invalid_argument("contraction: M mismatch");
  // hit the last r slots of f with cov, then sum them against g's last r slots
  DenseTensor fc = f;
  for (int k = 0; k < r; ++k) fc = apply_cov_slot(fc, cov, f.order - 1 - k);
  int outn = f.order - r, outm = g.order - r;
  DenseTensor out(outn + outm, f.M);
  long rblock = 1;
  for (int k = 0; k < r; ++k) rblock *= f.M;
  long fouter = fc.size() / rblock, gouter = g.size() / rblock;
  for (long a = 0; a < fouter; ++a)
    for (long b = 0; b < gouter; ++b) {
      double acc = 0.0;
      for (long q = 0; q < rblock; ++q) acc += fc.v[a * rblock + q] * g.v[b * rblock + q];
      out.v[a * (gouter) + b] = acc;
    }
  return out;
}

ProductCheck product_formula_check(const DenseTensor& f, const DenseTensor& g,
                                   const Eigen::MatrixXd& cov, const Eigen::VectorXd& W) {
  ProductCheck out;
  out.lhs = multiple_integral_dense(f, cov, W) * multiple_integral_dense(g, cov, W);
  double rhs = 0.0;
  for (int r = 0; r <= std::min(f.order, g.order); ++r) {
    DenseTensor h = contraction(f, g, r, cov);
    rhs += factorial(r) * binom(f.order, r) * binom(g.order, r) *
           multiple_integral_dense(h, cov, W);
  }
  out.rhs = rhs;
  return out;
}

// ---------------------------------------------------------------------------
// chain kernels

ChainKernel discretize_kernel(double t, const std::array<double, 2>& x, int n, const Grid& grid) {
  if (n < 1) throw std::invalid_argument("discretize_kernel: n must be >= 1");
  if (!(t > 0.0) || t > grid.T + 1e-12)
    throw std::invalid_argument("discretize_kernel: t outside the grid");
  for (int k = 0; k < grid.d; ++k)
    if (std::abs(x[k]) > grid.L) throw std::invalid_argument("discretize_kernel: x outside the grid");
  ChainKernel kern;
  kern.grid = grid;
  kern.order = n;
  kern.t = t;
  kern.x = x;
  kern.top = Eigen::VectorXd::Zero(grid.ncells());
  for (int a = 0; a < grid.nt; ++a) {
    double gap = t - grid.slab_center(a);
    if (gap <= 0.0) continue;
    for (long s = 0; s < grid.nspace(); ++s) {
      auto c = grid.space_center(s);
      double d0 = x[0] - c[0], d1 = grid.d == 2 ? x[1] - c[1] : 0.0;
      kern.top[grid.cell_id(a, s)] = kernels::heat_kernel_r2(gap, d0 * d0 + d1 * d1, grid.d);
    }
  }
  return kern;
}

ChainKernel discretize_kernel(double t, double x, int n, const Grid& grid) {
  return discretize_kernel(t, {x, 0.0}, n, grid);
}

ChainKernel averaged_kernel(double t, double R, int n, const Grid& grid) {
  if (!(R > 0.0) || R > grid.L) throw std::invalid_argument("averaged_kernel: need 0 < R <= L");
  ChainKernel kern = discretize_kernel(t, {0.0, 0.0}, n, grid);
  kern.averaged = true;
  kern.R = R;
  kern.top.setZero();
  double vol = std::pow(grid.dx(), grid.d);
  std::vector<long> ball;
  for (long s = 0; s < grid.nspace(); ++s) {
    auto c = grid.space_center(s);
    if (c[0] * c[0] + c[1] * c[1] <= R * R) ball.push_back(s);
  }
  for (int a = 0; a < grid.nt; ++a) {
    double gap = t - grid.slab_center(a);
    if (gap <= 0.0) continue;
    for (long s = 0; s < grid.nspace(); ++s) {
      auto cs = grid.space_center(s);
      double acc = 0.0;
      for (long b : ball) {
        auto cb = grid.space_center(b);
        double d0 = cb[0] - cs[0], d1 = cb[1] - cs[1];
        acc += kernels::heat_kernel_r2(gap, d0 * d0 + d1 * d1, grid.d);
      }
      kern.top[grid.cell_id(a, s)] = acc * vol;
    }
  }
  return kern;
}

double propagator_value(const Grid& grid, long cell_to, long cell_from) {
  int a = grid.slab_of(cell_from), b = grid.slab_of(cell_to);
  if (b <= a) throw std::invalid_argument("propagator_value: needs ascending slabs");
  double gap = (b - a) * grid.dt();
  double r2 = grid.center_dist2(grid.space_of(cell_to), grid.space_of(cell_from));
  return kernels::heat_kernel_r2(gap, r2, grid.d);
}

double chain_value_ordered(const ChainKernel& k, const std::vector<long>& cells) {
  if (static_cast<int>(cells.size()) != k.order)
    throw std::invalid_argument("chain_value_ordered: arity mismatch");
  double v = k.top[cells.back()];
  for (size_t i = cells.size() - 1; i >= 1; --i) v *= propagator_value(k.grid, cells[i], cells[i - 1]);
  return v;
}

DenseTensor expand_chain(const ChainKernel& k) {
  long M = k.grid.ncells();
  DenseTensor out(k.order, M);
  std::vector<long> idx(k.order);
  std::function<void(int)> rec = [&](int pos) {
    if (pos == k.order) {
      std::vector<long> sorted = idx;
      std::sort(sorted.begin(), sorted.end(),
                [&](long a, long b) { return k.grid.slab_of(a) < k.grid.slab_of(b); });
      for (int i = 0; i + 1 < k.order; ++i)
        if (k.grid.slab_of(sorted[i]) == k.grid.slab_of(sorted[i + 1])) return;
      out.at(idx) = chain_value_ordered(k, sorted) / factorial(k.order);
      return;
    }
    for (long c = 0; c < M; ++c) {
      idx[pos] = c;
      rec(pos + 1);
    }
  };
  rec(0);
  return out;
}

// ---------------------------------------------------------------------------
// ChainOps

ChainOps::ChainOps(const Grid& grid, double band_sigmas) : grid_(grid) {
  kern_.resize(grid.nt);
  bw_.assign(grid.nt, 0);
  for (int gap = 1; gap < grid.nt; ++gap) {
    double tt = gap * grid.dt();
    int bw = static_cast<int>(std::ceil(band_sigmas * std::sqrt(tt) / grid.dx()));
    bw = std::min(bw, grid.nx - 1);
    bw_[gap] = bw;
    kern_[gap].resize(bw + 1);
    for (int j = 0; j <= bw; ++j)
      kern_[gap][j] = kernels::heat_kernel(tt, j * grid.dx(), 1);
  }
}

SlabField ChainOps::zero_field() const {
  SlabField f(grid_.nt);
  for (auto& v : f) v = Eigen::VectorXd::Zero(grid_.nspace());
  return f;
}

namespace {
// one-axis banded symmetric convolution of length-n arrays
inline void conv1d(const double* in, double* out, long n, const double* K, int bw) {
  for (long y = 0; y < n; ++y) {
    long jlo = std::max<long>(0, y - bw), jhi = std::min<long>(n - 1, y + bw);
    double acc = 0.0;
    for (long j = jlo; j <= jhi; ++j) acc += K[std::labs(y - j)] * in[j];
    out[y] += acc;
  }
}
inline void conv1d_strided(const double* in, double* out, long n, long stride, const double* K,
                           int bw) {
  for (long y = 0; y < n; ++y) {
    long jlo = std::max<long>(0, y - bw), jhi = std::min<long>(n - 1, y + bw);
    double acc = 0.0;
    for (long j = jlo; j <= jhi; ++j) acc += K[std::labs(y - j)] * in[j * stride];
    out[y * stride] += acc;
  }
}

void apply_space_kernel(const Grid& grid, const Eigen::VectorXd& in, Eigen::VectorXd& out,
                        const std::vector<double>& K, int bw) {
  if (grid.d == 1) {
    conv1d(in.data(), out.data(), grid.nx, K.data(), bw);
    return;
  }
  // separable: rows (contiguous) then columns (strided)
  Eigen::VectorXd tmp = Eigen::VectorXd::Zero(in.size());
  for (int r = 0; r < grid.nx; ++r)
    conv1d(in.data() + static_cast<long>(r) * grid.nx, tmp.data() + static_cast<long>(r) * grid.nx,
           grid.nx, K.data(), bw);
  for (int c = 0; c < grid.nx; ++c)
    conv1d_strided(tmp.data() + c, out.data() + c, grid.nx, grid.nx, K.data(), bw);
}
}  // namespace

void ChainOps::apply_space(const Eigen::VectorXd& in, Eigen::VectorXd& out, int gap) const {
  apply_space_kernel(grid_, in, out, kern_[gap], bw_[gap]);
}

void ChainOps::propagate(const SlabField& in, SlabField& out) const {
  for (int b = 1; b < grid_.nt; ++b)
    for (int a = 0; a < b; ++a) apply_space(in[a], out[b], b - a);
}

void ChainOps::propagate_back(const SlabField& in, SlabField& out) const {
  for (int a = 0; a < grid_.nt - 1; ++a)
    for (int b = a + 1; b < grid_.nt; ++b) apply_space(in[b], out[a], b - a);
}

void ChainOps::propagate_from(int slab_a, const Eigen::VectorXd& in, SlabField& out) const {
  for (int b = slab_a + 1; b < grid_.nt; ++b) apply_space(in, out[b], b - slab_a);
}

Eigen::VectorXd ChainOps::target_apply(double t, const SlabField& in) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid_.nspace());
  for (int a = 0; a < grid_.nt; ++a) {
    double gap = t - grid_.slab_center(a);
    if (gap <= 0.0) continue;
    int bw = std::min(grid_.nx - 1,
                      static_cast<int>(std::ceil(10.0 * std::sqrt(gap) / grid_.dx())));
    std::vector<double> K(bw + 1);
    for (int j = 0; j <= bw; ++j) K[j] = kernels::heat_kernel(gap, j * grid_.dx(), 1);
    apply_space_kernel(grid_, in[a], out, K, bw);
  }
  return out;
}

void ChainOps::conv_axis(const double*, double*, int, long, long, long) const {}

// ---------------------------------------------------------------------------
// sampling evaluation

namespace {
SlabField to_slabs(const Grid& g, const Eigen::VectorXd& v) {
  SlabField f(g.nt);
  for (int a = 0; a < g.nt; ++a) f[a] = v.segment(static_cast<long>(a) * g.nspace(), g.nspace());
  return f;
}

double dot_field(const Grid& g, const Eigen::VectorXd& cellvec, const SlabField& f) {
  double acc = 0.0;
  for (int a = 0; a < g.nt; ++a)
    acc += cellvec.segment(static_cast<long>(a) * g.nspace(), g.nspace()).dot(f[a]);
  return acc;
}
}  // namespace

std::vector<SlabField> forward_sweep(const ChainOps& ops, const Eigen::VectorXd& W, int N) {
  const Grid& g = ops.grid();
  std::vector<SlabField> G(N + 1);
  G[0] = ops.zero_field();  // placeholder, unused
  if (N >= 1) G[1] = to_slabs(g, W);
  for (int k = 2; k <= N; ++k) {
    SlabField next = ops.zero_field();
    ops.propagate(G[k - 1], next);
    for (int a = 0; a < g.nt; ++a)
      next[a].array() *= W.segment(static_cast<long>(a) * g.nspace(), g.nspace()).array();
    G[k] = std::move(next);
  }
  return G;
}

namespace {

// colored-time evaluation of one Wick pattern by a frontier DP whose state
// carries one frozen cell axis per open pair
double eval_pattern_colored(const ChainKernel& k, const ChainOps& ops, const Eigen::VectorXd& W,
                            const field::CellCov& cov, const WickPattern& pat) {
  const Grid& g = k.grid;
  const long M = g.ncells();
  const int n = k.order;
  std::vector<int> role(n, 0);          // 0 single, 1 open, 2 close
  std::vector<int> close_partner(n, -1);
  for (auto [i, j] : pat.pairs) {
    role[i] = 1;
    role[j] = 2;
    close_partner[j] = i;
  }
  // resource check: max simultaneous opens
  int open_now = 0, open_max = 0;
  for (int i = 0; i < n; ++i) {
    if (role[i] == 1) open_max = std::max(open_max, ++open_now);
    if (role[i] == 2) --open_now;
  }
  double state_doubles = std::pow(static_cast<double>(M), open_max + 1);
  if (state_doubles > 3.0e7)
    throw ResourceError("multiple_integral: colored-time pattern state too large");

  std::vector<double> state(M, 1.0);
  std::vector<int> open_positions;  // pattern positions of current frozen axes
  auto propagate_slice = [&](std::vector<double>& s) {
    long slices = static_cast<long>(s.size()) / M;
    std::vector<double> out(s.size(), 0.0);
    for (long sl = 0; sl < slices; ++sl) {
      for (int b = 1; b < g.nt; ++b)
        for (int a = 0; a < b; ++a) {
          Eigen::Map<const Eigen::VectorXd> in(&s[sl * M + static_cast<long>(a) * g.nspace()],
                                               g.nspace());
          Eigen::Map<Eigen::VectorXd> o(&out[sl * M + static_cast<long>(b) * g.nspace()],
                                        g.nspace());
          Eigen::VectorXd tmp = Eigen::VectorXd::Zero(g.nspace());
          ops.apply_space(in, tmp, b - a);
          o += tmp;
        }
    }
    s = std::move(out);
  };

  for (int pos = 0; pos < n; ++pos) {
    if (pos > 0) propagate_slice(state);
    if (role[pos] == 0) {
      long slices = static_cast<long>(state.size()) / M;
      for (long sl = 0; sl < slices; ++sl)
        for (long c = 0; c < M; ++c) state[sl * M + c] *= W[c];
    } else if (role[pos] == 1) {
      // grow a frozen axis equal to the current cell
      std::vector<double> grown(state.size() * M, 0.0);
      long slices = static_cast<long>(state.size()) / M;
      for (long sl = 0; sl < slices; ++sl)
        for (long c = 0; c < M; ++c) grown[(sl * M + c) * M + c] = state[sl * M + c];
      state = std::move(grown);
      open_positions.push_back(pos);
    } else {
      // contract the frozen axis of the partner against the current cell
      int axis = -1;
      for (size_t a = 0; a < open_positions.size(); ++a)
        if (open_positions[a] == close_partner[pos]) axis = static_cast<int>(a);
      long nfro = static_cast<long>(open_positions.size());
      long below = 1;  // product of axis sizes after `axis` (frozen axes after it, then cell)
      for (long a = axis + 1; a < nfro; ++a) below *= M;
      below *= M;
      long above = static_cast<long>(state.size()) / (below * M);
      std::vector<double> shrunk(state.size() / M, 0.0);
      for (long hi = 0; hi < above; ++hi)
        for (long f = 0; f < M; ++f)
          for (long lo = 0; lo < below; ++lo) {
            long c = lo % M;  // cell is the fastest axis
            shrunk[hi * below + lo] +=
                state[(hi * M + f) * below + lo] * cov.entry(f, c);
          }
      state = std::move(shrunk);
      open_positions.erase(open_positions.begin() + axis);
    }
  }
  double acc = 0.0;
  for (long c = 0; c < M; ++c) acc += k.top[c] * state[c];
  return (pat.pairs.size() % 2 == 0 ? 1.0 : -1.0) * acc;
}

double eval_chain_colored(const ChainKernel& k, const ChainOps& ops, const Eigen::VectorXd& W,
                          const field::CellCov& cov, int n) {
  ChainKernel kn = k;
  kn.order = n;
  WickPlan plan = WickPlan::enumerate(n);
  double total = 0.0;
  for (const auto& pat : plan.patterns) total += eval_pattern_colored(kn, ops, W, cov, pat);
  return total;
}

}  // namespace

std::vector<double> chain_levels(const ChainKernel& k, const field::NoiseSample& w,
                                 const field::CellCov& cov, int N) {
  ChainOps ops(k.grid);
  std::vector<double> out(N + 1, 0.0);
  if (cov.diag_time) {
    auto G = forward_sweep(ops, w.values, N);
    for (int n = 1; n <= N; ++n) out[n] = dot_field(k.grid, k.top, G[n]);
  } else {
    for (int n = 1; n <= N; ++n) out[n] = eval_chain_colored(k, ops, w.values, cov, n);
  }
  return out;
}

double multiple_integral(const ChainKernel& k, const field::NoiseSample& w,
                         const field::CellCov& cov) {
  return chain_levels(k, w, cov, k.order)[k.order];
}

// ---------------------------------------------------------------------------
// second moments

namespace {
std::vector<double> ladder_moments_diag(const ChainKernel& k, const field::CellCov& cov, int N) {
  const Grid& g = k.grid;
  ChainOps ops(g);
  long ns = g.nspace();
  // R[a] carries the rung at the current level; advance both chain copies
  std::vector<Eigen::MatrixXd> R(g.nt);
  std::vector<double> moments(N + 1, 0.0);
  for (int a = 0; a < g.nt; ++a) R[a] = cov.T(a, a) * cov.S;
  auto contract_top = [&](const std::vector<Eigen::MatrixXd>& RR) {
    double acc = 0.0;
    for (int a = 0; a < g.nt; ++a) {
      Eigen::Map<const Eigen::VectorXd> q(k.top.data() + static_cast<long>(a) * ns, ns);
      acc += q.dot(RR[a] * q);
    }
    return acc;
  };
  moments[1] = contract_top(R);
  for (int lvl = 2; lvl <= N; ++lvl) {
    std::vector<Eigen::MatrixXd> A(g.nt);
    for (int b = 0; b < g.nt; ++b) A[b] = Eigen::MatrixXd::Zero(ns, ns);
    for (int b = 1; b < g.nt; ++b) {
      Eigen::MatrixXd half = Eigen::MatrixXd::Zero(ns, ns);
      for (int a = 0; a < b; ++a) {
        // convolve both tensor legs with the same heat kernel
        Eigen::MatrixXd tmp = Eigen::MatrixXd::Zero(ns, ns);
        for (long col = 0; col < ns; ++col) {
          Eigen::VectorXd o = Eigen::VectorXd::Zero(ns);
          ops.apply_space(R[a].col(col), o, b - a);
          tmp.col(col) = o;
        }
        for (long row = 0; row < ns; ++row) {
          Eigen::VectorXd o = Eigen::VectorXd::Zero(ns);
          ops.apply_space(tmp.row(row).transpose(), o, b - a);
          half.row(row) += o.transpose();
        }
      }
      A[b] = half;
    }
    for (int b = 0; b < g.nt; ++b) R[b] = (cov.T(b, b) * cov.S).cwiseProduct(A[b]);
    moments[lvl] = contract_top(R);
  }
  return moments;
}
}  // namespace

std::vector<double> chain_second_moments(const ChainKernel& k, const field::CellCov& cov, int N) {
  if (cov.diag_time) return ladder_moments_diag(k, cov, N);
  // general temporal Gram: dense fallback at oracle scale
  long M = k.grid.ncells();
  std::vector<double> out(N + 1, 0.0);
  Eigen::MatrixXd C = cov.full();
  for (int n = 1; n <= N; ++n) {
    if (std::pow(static_cast<double>(M), n) > 2.5e7)
      throw ResourceError("chain_second_moments: colored-time order too large for dense path");
    ChainKernel kn = k;
    kn.order = n;
    out[n] = second_moment_dense(expand_chain(kn), C);
  }
  return out;
}

double second_moment(const ChainKernel& k, const field::CellCov& cov) {
  return chain_second_moments(k, cov, k.order)[k.order];
}

// ---------------------------------------------------------------------------

double solve_u(double t, double x, int N, const Grid& grid, const field::NoiseSample& w,
               const field::CellCov& cov) {
  if (N < 0) throw std::invalid_argument("solve_u: N must be >= 0");
  if (N == 0) return 1.0;
  ChainKernel k = discretize_kernel(t, x, N, grid);
  auto lv = chain_levels(k, w, cov, N);
  return 1.0 + std::accumulate(lv.begin() + 1, lv.end(), 0.0);
}

Eigen::VectorXd ChaosSolution::u() const {
  Eigen::VectorXd out = Eigen::VectorXd::Ones(levels.empty() ? 0 : levels[1].size());
  for (size_t n = 1; n < levels.size(); ++n) out += levels[n];
  return out;
}

ChaosSolution solve_slice(double t, int N, const Grid& grid, const field::NoiseSample& w,
                          const field::CellCov& cov) {
  if (!cov.diag_time)
    throw ResourceError("solve_slice: colored-time slices are not supported; evaluate pointwise");
  ChainOps ops(grid);
  auto G = forward_sweep(ops, w.values, N);
  ChaosSolution sol;
  sol.t = t;
  sol.N = N;
  sol.levels.resize(N + 1);
  sol.levels[0] = Eigen::VectorXd::Ones(grid.nspace());
  for (int n = 1; n <= N; ++n) sol.levels[n] = ops.target_apply(t, G[n]);
  return sol;
}

// ---------------------------------------------------------------------------

TailBound truncation_tail_bound(int N, const ChainKernel& kernel, const field::CellCov& cov) {
  if (N < 1) throw std::invalid_argument("truncation_tail_bound: N must be >= 1");
  int K = N + 4;
  std::vector<double> m;
  if (cov.diag_time) {
    m = chain_second_moments(kernel, cov, K);
  } else {
    // take as many orders as the dense path affords
    while (K > N) {
      try {
        m = chain_second_moments(kernel, cov, K);
        break;
      } catch (const ResourceError&) {
        --K;
      }
    }
    if (m.empty()) throw ResourceError("truncation_tail_bound: colored-time grid too large");
  }
  TailBound tb;
  for (int n = 1; n <= N && n <= K; ++n) tb.retained += m[n];
  double tail = 0.0;
  for (int n = N + 1; n <= K; ++n) tail += m[n];
  double ratio = m[K] > 0.0 && m[K - 1] > 0.0 ? m[K] / m[K - 1] : 0.0;
  tb.ratio = ratio;
  tb.converged = ratio < 1.0;
  if (!tb.converged) {
    tb.bound = std::numeric_limits<double>::infinity();
    return tb;
  }
  tb.bound = tail + m[K] * ratio / (1.0 - ratio);
  return tb;
}

TailBound truncation_tail_bound(int N, double t, const noise::NoiseSpec& spec, const Grid& grid) {
  field::CellCov cov = field::build_covariance(grid, spec);
  ChainKernel k = discretize_kernel(t, 0.0, 1, grid);
  return truncation_tail_bound(N, k, cov);
}

int choose_truncation_order(double rel_target, const ChainKernel& kernel,
                            const field::CellCov& cov, int cap) {
  for (int N = 1; N <= cap; ++N) {
    TailBound tb = truncation_tail_bound(N, kernel, cov);
    if (tb.converged && tb.bound <= rel_target * tb.retained) return N;
  }
  return cap;
}

// ---------------------------------------------------------------------------
// Malliavin derivatives

DerivativeSweep::DerivativeSweep(const ChainOps& ops, const ChainKernel& target, int N,
                                 const Eigen::VectorXd& W, bool need_second)
    : ops_(ops), N_(N), t_(target.t), W_(W) {
  (void)need_second;
  const Grid& g = ops.grid();
  G_ = forward_sweep(ops, W, N);
  A_.resize(N);
  for (int k = 1; k <= N - 1; ++k) {
    A_[k] = ops.zero_field();
    ops.propagate(G_[k], A_[k]);
  }
  tau_.resize(N);
  tau_[0] = to_slabs(g, target.top);
  for (int m = 1; m <= N - 1; ++m) {
    SlabField src = tau_[m - 1];
    for (int a = 0; a < g.nt; ++a)
      src[a].array() *= W.segment(static_cast<long>(a) * g.nspace(), g.nspace()).array();
    tau_[m] = ops.zero_field();
    ops.propagate_back(src, tau_[m]);
  }
  levels_.assign(N + 1, 0.0);
  for (int n = 1; n <= N; ++n) levels_[n] = dot_field(g, target.top, G_[n]);
}

double DerivativeSweep::level(int n) const { return levels_.at(n); }

double DerivativeSweep::value_sum() const {
  return std::accumulate(levels_.begin() + 1, levels_.end(), 0.0);
}

double DerivativeSweep::D(long cell) const {
  const Grid& g = ops_.grid();
  int a = g.slab_of(cell);
  long s = g.space_of(cell);
  double acc = 0.0;
  for (int k = 0; k <= N_ - 1; ++k) {
    double ak = k == 0 ? 1.0 : A_[k][a][s];
    if (ak == 0.0) continue;
    double tsum = 0.0;
    for (int m = 0; m <= N_ - 1 - k; ++m) tsum += tau_[m][a][s];
    acc += ak * tsum;
  }
  return acc;
}

SlabField DerivativeSweep::D2_row(long e1) const {
  const Grid& g = ops_.grid();
  int a1 = g.slab_of(e1);
  // middle chains from e1: M_0[c] = p(c <- e1), M_j = propagate(W .* M_{j-1})
  std::vector<SlabField> Mj(std::max(0, N_ - 1));
  if (N_ >= 2) {
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(g.nspace());
    delta[g.space_of(e1)] = 1.0;
    Mj[0] = ops_.zero_field();
    ops_.propagate_from(a1, delta, Mj[0]);
    for (int j = 1; j <= N_ - 2; ++j) {
      SlabField src = Mj[j - 1];
      for (int b = 0; b < g.nt; ++b)
        src[b].array() *= W_.segment(static_cast<long>(b) * g.nspace(), g.nspace()).array();
      Mj[j] = ops_.zero_field();
      ops_.propagate(src, Mj[j]);
    }
  }
  SlabField row = ops_.zero_field();
  if (N_ < 2) return row;
  for (int b = a1 + 1; b < g.nt; ++b) {
    for (long s2 = 0; s2 < g.nspace(); ++s2) {
      double acc = 0.0;
      for (int j = 0; j <= N_ - 2; ++j) {
        double mj = Mj[j][b][s2];
        if (mj == 0.0) continue;
        double inner = 0.0;
        for (int k = 0; k <= N_ - 2 - j; ++k) {
          double ak = k == 0 ? 1.0 : A_[k][g.slab_of(e1)][g.space_of(e1)];
          double tsum = 0.0;
          for (int m = 0; m <= N_ - 2 - j - k; ++m) tsum += tau_[m][b][s2];
          inner += ak * tsum;
        }
        acc += mj * inner;
      }
      row[b][s2] = acc;
    }
  }
  return row;
}

double DerivativeSweep::D2(long e1, long e2) const {
  const Grid& g = ops_.grid();
  if (g.slab_of(e1) == g.slab_of(e2)) return 0.0;
  if (g.slab_of(e1) > g.slab_of(e2)) std::swap(e1, e2);
  SlabField row = D2_row(e1);
  return row[g.slab_of(e2)][g.space_of(e2)];
}

namespace {
void check_cell_before(double t, long cell, const Grid& g, const char* who) {
  if (cell < 0 || cell >= g.ncells()) throw std::invalid_argument(std::string(who) + ": bad cell");
  if (!(g.slab_center(g.slab_of(cell)) < t))
    throw std::invalid_argument(std::string(who) + ": cell at or after the target time");
}
}  // namespace

double malliavin_D(long cell, double t, double x, int N, const Grid& grid,
                   const field::NoiseSample& w, const field::CellCov& cov) {
  check_cell_before(t, cell, grid, "malliavin_D");
  if (!cov.diag_time)
    throw ResourceError("malliavin_D: colored-time derivatives are not supported");
  ChainOps ops(grid);
  ChainKernel k = discretize_kernel(t, x, 1, grid);
  DerivativeSweep sweep(ops, k, std::max(1, N), w.values, false);
  return sweep.D(cell);
}

double malliavin_D2(long cell1, long cell2, double t, double x, int N, const Grid& grid,
                    const field::NoiseSample& w, const field::CellCov& cov) {
  check_cell_before(t, cell1, grid, "malliavin_D2");
  check_cell_before(t, cell2, grid, "malliavin_D2");
  if (N < 2) throw std::invalid_argument("malliavin_D2: N must be >= 2");
  if (!cov.diag_time)
    throw ResourceError("malliavin_D2: colored-time derivatives are not supported");
  ChainOps ops(grid);
  ChainKernel k = discretize_kernel(t, x, 1, grid);
  DerivativeSweep sweep(ops, k, N, w.values, true);
  return sweep.D2(cell1, cell2);
}

}  // namespace pam::chaos
