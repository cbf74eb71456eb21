#include "pam/field.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "pam/rng.hpp"

namespace pam::field {

Eigen::MatrixXd CellCov::full() const {
  long n = grid.ncells();
  if (n > 4096) throw std::runtime_error("CellCov::full: grid too large to materialize");
  Eigen::MatrixXd C(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) C(i, j) = entry(i, j);
  return C;
}

CellCov build_covariance(const Grid& grid, const noise::NoiseSpec& spec) {
  spec.validate();
  if (spec.spatial.d != grid.d)
    throw noise::UnsupportedCase("build_covariance: spec dimension does not match grid");
  CellCov cov;
  cov.grid = grid;
  cov.T = noise::temporal_gram(grid, spec.temporal);
  cov.S = noise::spatial_gram(grid, spec.spatial);
  cov.diag_time = spec.temporal.kind == noise::TemporalKind::Dirac;
  return cov;
}

namespace {

// returns the factor and the jitter that succeeded
std::pair<Eigen::MatrixXd, double> chol_with_jitter(const Eigen::MatrixXd& A, const char* what) {
  double scale = A.diagonal().maxCoeff();
  if (!(scale > 0.0)) scale = 1.0;
  const double ladder[] = {0.0, 1e-14, 1e-12, 1e-10, 1e-8};
  for (double rel : ladder) {
    Eigen::MatrixXd B = A;
    if (rel > 0.0) B.diagonal().array() += rel * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      // guard against a silent non-failure on indefinite input
      if (L.diagonal().minCoeff() >= 0.0 && ((L * L.transpose()) - B).norm() <=
                                               1e-8 * B.norm() + 1e-300)
        return {L, rel * scale};
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  throw std::runtime_error(std::string("factorize: ") + what +
                           " factor not PSD within jitter cap; smallest eigenvalue " +
                           std::to_string(es.eigenvalues().minCoeff()));
}

}  // namespace

GaussianLattice factorize(const CellCov& cov) {
  GaussianLattice lat;
  lat.cov = cov;
  auto [lt, jt] = chol_with_jitter(cov.T, "temporal");
  auto [ls, js] = chol_with_jitter(cov.S, "spatial");
  lat.Lt = lt;
  lat.jitter_t = jt;
  lat.Ls = ls;
  lat.jitter_s = js;
  return lat;
}

NoiseSample sample(const GaussianLattice& lattice, std::uint64_t seed) {
  const Grid& g = lattice.cov.grid;
  long ns = g.nspace();
  Rng rng(seed);
  Eigen::MatrixXd xi(ns, g.nt);
  for (int t = 0; t < g.nt; ++t)
    for (long i = 0; i < ns; ++i) xi(i, t) = rng.normal();
  // W = (Lt (x) Ls) xi with time-major ids: W[t*ns + s] = (Ls xi Lt^T)(s, t)
  Eigen::MatrixXd W = lattice.Ls * xi * lattice.Lt.transpose();
  NoiseSample out;
  out.seed = seed;
  out.values.resize(g.ncells());
  for (int t = 0; t < g.nt; ++t)
    for (long i = 0; i < ns; ++i) out.values[g.cell_id(t, i)] = W(i, t);
  return out;
}

void write_lattice_dump(const GaussianLattice& lattice, const std::string& path) {
  const Grid& g = lattice.cov.grid;
  long n = g.ncells();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_lattice_dump: cannot open " + path);
  double header[8] = {0x70616d64, static_cast<double>(n), static_cast<double>(g.nt),
                      static_cast<double>(g.nx), static_cast<double>(g.d), g.T, g.L,
                      lattice.jitter_t + lattice.jitter_s};
  std::fwrite(header, sizeof(double), 8, f);
  Eigen::MatrixXd C = lattice.cov.full();
  for (long i = 0; i < n; ++i) std::fwrite(C.row(i).eval().data(), sizeof(double), n, f);
  // factor of the full covariance in the same Kronecker order
  Eigen::MatrixXd Lfull(n, n);
  for (long a = 0; a < n; ++a)
    for (long b = 0; b < n; ++b)
      Lfull(a, b) = lattice.Lt(g.slab_of(a), g.slab_of(b)) * lattice.Ls(g.space_of(a), g.space_of(b));
  for (long i = 0; i < n; ++i) std::fwrite(Lfull.row(i).eval().data(), sizeof(double), n, f);
  std::fclose(f);
}

}  // namespace pam::field
