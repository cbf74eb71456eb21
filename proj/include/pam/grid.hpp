#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>

namespace pam {

// Rectangular space-time lattice on [0,T] x [-L,L]^d. Cell (i, j) is the
// product of time slab [i*dt, (i+1)*dt) and the spatial box indexed by j.
// Flat cell ids are time-major: id = slab * nspace + spatial.
struct Grid {
  double T = 1.0;
  int nt = 1;
  double L = 1.0;
  int nx = 1;
  int d = 1;

  Grid() = default;
  Grid(double T_, int nt_, double L_, int nx_, int d_) : T(T_), nt(nt_), L(L_), nx(nx_), d(d_) {
    if (!(T > 0.0) || !(L > 0.0)) throw std::invalid_argument("Grid: T and L must be > 0");
    if (nt < 1 || nx < 1) throw std::invalid_argument("Grid: nt and nx must be >= 1");
    if (d != 1 && d != 2) throw std::invalid_argument("Grid: d must be 1 or 2");
  }

  double dt() const { return T / nt; }
  double dx() const { return 2.0 * L / nx; }
  long nspace() const {
    long n = nx;
    for (int k = 1; k < d; ++k) n *= nx;
    return n;
  }
  long ncells() const { return static_cast<long>(nt) * nspace(); }
  double cell_volume() const {
    double v = dt();
    for (int k = 0; k < d; ++k) v *= dx();
    return v;
  }

  int slab_of(long cell) const { return static_cast<int>(cell / nspace()); }
  long space_of(long cell) const { return cell % nspace(); }
  long cell_id(int slab, long spatial) const { return static_cast<long>(slab) * nspace() + spatial; }

  double slab_center(int slab) const { return (slab + 0.5) * dt(); }
  double slab_lo(int slab) const { return slab * dt(); }

  double axis_center(long idx) const { return -L + (idx + 0.5) * dx(); }

  std::array<double, 2> space_center(long spatial) const {
    if (d == 1) return {axis_center(spatial), 0.0};
    return {axis_center(spatial / nx), axis_center(spatial % nx)};
  }

  // squared distance between spatial cell centers
  double center_dist2(long sa, long sb) const {
    auto a = space_center(sa), b = space_center(sb);
    double dx0 = a[0] - b[0], dx1 = a[1] - b[1];
    return dx0 * dx0 + dx1 * dx1;
  }
};

}  // namespace pam
