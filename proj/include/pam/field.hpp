#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "pam/grid.hpp"
#include "pam/noise.hpp"

namespace pam::field {

// Kronecker-factored cell covariance: cov = T (x) S with time-major cell ids.
struct CellCov {
  Grid grid;
  Eigen::MatrixXd T;  // nt x nt
  Eigen::MatrixXd S;  // nspace x nspace
  bool diag_time = false;

  double entry(long a, long b) const {
    return T(grid.slab_of(a), grid.slab_of(b)) * S(grid.space_of(a), grid.space_of(b));
  }
  Eigen::MatrixXd full() const;
};

CellCov build_covariance(const Grid& grid, const noise::NoiseSpec& spec);

struct GaussianLattice {
  CellCov cov;
  Eigen::MatrixXd Lt;  // lower-triangular, Lt Lt^T ~ T
  Eigen::MatrixXd Ls;
  double jitter_t = 0.0;  // absolute jitter added to the diagonals
  double jitter_s = 0.0;
};

// pivot-free Cholesky with an escalating jitter ladder; throws with the
// smallest-eigenvalue diagnostic if PSD cannot be reached at 1e-8 relative
GaussianLattice factorize(const CellCov& cov);

struct NoiseSample {
  Eigen::VectorXd values;  // length ncells, cell-integrated noise W(1_cell)
  std::uint64_t seed = 0;
};

NoiseSample sample(const GaussianLattice& lattice, std::uint64_t seed);

// debugging dump: small header + row-major float64 blocks (cov, factor)
void write_lattice_dump(const GaussianLattice& lattice, const std::string& path);

}  // namespace pam::field
