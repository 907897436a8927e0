#include "dte/nullspace.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cmath>

namespace dte {

NullBasis null_space_basis(const SpMat& Msp) {
  Mat M = Mat(Msp);
  Eigen::BDCSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  double smax = sv.size() ? sv[0] : 0.0;
  double cutoff = 1e-9 * smax;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (std::abs(sv[i] - cutoff) <= 1e-9)
      throw std::runtime_error(
          "null_space_basis: singular value within 1e-9 of the rank cutoff");
    if (sv[i] > cutoff) ++rank;
  }
  NullBasis b;
  int n = static_cast<int>(M.cols());
  b.T = n - rank;
  b.N = svd.matrixV().rightCols(b.T);
  b.U = svd.matrixU().leftCols(rank);
  b.S = sv.head(rank);
  b.Vr = svd.matrixV().leftCols(rank);
  return b;
}

Vec BasisFlowOps::project_null(const Vec& v) const {
  if (basis_.T == 0) return Vec::Zero(v.size());
  return basis_.N * (basis_.N.transpose() * v);
}

Vec BasisFlowOps::base_flow(const Vec& B) const {
  // pinv(M) B = Vr diag(1/S) U' B
  Vec t = basis_.U.transpose() * B;
  t.array() /= basis_.S.array();
  return basis_.Vr * t;
}

struct LaplacianFlowOps::Impl {
  SpMat M;                                      // m x n incidence
  SpMat Lg;                                     // grounded Laplacian (m-1)
  Eigen::SimplicialLDLT<SpMat> chol;

  // Solves L x = b for b orthogonal to ones (always true for b = M v),
  // grounding node 0.
  Vec solve_laplacian(const Vec& b) const {
    int m = static_cast<int>(M.rows());
    Vec x = Vec::Zero(m);
    x.tail(m - 1) = chol.solve(b.tail(m - 1));
    return x;
  }
};

LaplacianFlowOps::LaplacianFlowOps(const Topology& t) {
  if (!t.weakly_connected())
    throw InputError("LaplacianFlowOps requires a weakly connected graph");
  impl_ = std::make_unique<Impl>();
  impl_->M = incidence_matrix(t);
  n_ = t.num_edges();
  null_dim_ = n_ - (t.num_nodes() - 1);
  SpMat L = (impl_->M * SpMat(impl_->M.transpose())).pruned();
  int m = t.num_nodes();
  impl_->Lg = L.block(1, 1, m - 1, m - 1);
  impl_->chol.compute(impl_->Lg);
  if (impl_->chol.info() != Eigen::Success)
    throw std::runtime_error("LaplacianFlowOps: Cholesky factorization failed");
  version = t.version();
}

LaplacianFlowOps::~LaplacianFlowOps() = default;

Vec LaplacianFlowOps::project_null(const Vec& v) const {
  Vec mv = impl_->M * v;
  Vec y = impl_->solve_laplacian(mv);
  return v - impl_->M.transpose() * y;
}

Vec LaplacianFlowOps::base_flow(const Vec& B) const {
  // pinv(M) B = M' (M M')^+ B; consistent since B sums to zero.
  Vec y = impl_->solve_laplacian(B);
  Vec x = impl_->M.transpose() * y;
  // Grounding leaves an additive constant in y; it cancels in M' y only up to
  // the ones-component, so remove the residual explicitly.
  Vec r = B - impl_->M * x;
  if (r.lpNorm<Eigen::Infinity>() > 1e-8 * std::max(1.0, B.lpNorm<Eigen::Infinity>())) {
    Vec y2 = impl_->solve_laplacian(r);
    x += impl_->M.transpose() * y2;
  }
  return x;
}

std::shared_ptr<FlowOps> make_flow_ops(const Topology& t, bool prefer_basis) {
  if (prefer_basis) {
    auto ops = std::make_shared<BasisFlowOps>(null_space_basis(incidence_matrix(t)));
    ops->version = t.version();
    return ops;
  }
  return std::make_shared<LaplacianFlowOps>(t);
}

Vec base_flow_shortest_path(const Topology& t, NodeId src, NodeId dst,
                            double demand) {
  auto path = t.shortest_path(src, dst);
  if (!path) throw std::runtime_error("base_flow_shortest_path: sink unreachable");
  Vec x = Vec::Zero(t.num_edges());
  for (EdgeId e : *path) x[e] = demand;
  return x;
}

}  // namespace dte
