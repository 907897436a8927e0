#pragma once

#include <memory>

#include "dte/topology.hpp"
#include "dte/types.hpp"

namespace dte {

// Orthonormal basis of the null space of the node-edge incidence matrix,
// obtained from one SVD. For a weakly connected bidirected graph,
// T = n - m + 1.
struct NullBasis {
  Mat N;  // n x T, N'N = I
  int T = 0;
  // Kept for pseudo-inverse base flows: M = U diag(S) V', thin factors.
  Mat U;    // m x r
  Vec S;    // r
  Mat Vr;   // n x r (range-space right factor)
};

// SVD with rank cutoff: a singular value below 1e-9 * sigma_max counts as
// zero. Values within 1e-9 of the cutoff are ambiguous and raise instead of
// guessing a rank.
NullBasis null_space_basis(const SpMat& M);

// Shared interface for the two interchangeable null-space backends: the
// explicit orthonormal basis (exact per-coordinate access) and a sparse
// Laplacian-solve projector (same operator, much cheaper at WAN scale).
class FlowOps {
 public:
  virtual ~FlowOps() = default;
  virtual int num_edges() const = 0;
  virtual int null_dim() const = 0;
  // Orthogonal projection onto null(M).
  virtual Vec project_null(const Vec& v) const = 0;
  // Least-squares (Moore-Penrose) base flow: X0 = pinv(M) B. Satisfies
  // M X0 = B and N' X0 = 0.
  virtual Vec base_flow(const Vec& B) const = 0;
  // Topology version the factorization was computed against.
  std::uint64_t version = 0;
};

class BasisFlowOps : public FlowOps {
 public:
  explicit BasisFlowOps(NullBasis basis) : basis_(std::move(basis)) {}
  int num_edges() const override { return static_cast<int>(basis_.N.rows()); }
  int null_dim() const override { return basis_.T; }
  Vec project_null(const Vec& v) const override;
  Vec base_flow(const Vec& B) const override;
  const NullBasis& basis() const { return basis_; }

 private:
  NullBasis basis_;
};

// Projector backend: P v = v - M' L^+ (M v) with L = M M' solved through a
// grounded sparse Cholesky factor. Identical operator to N N' up to solver
// precision; no SVD involved, so it scales to large edge counts.
class LaplacianFlowOps : public FlowOps {
 public:
  explicit LaplacianFlowOps(const Topology& t);
  ~LaplacianFlowOps() override;
  int num_edges() const override { return n_; }
  int null_dim() const override { return null_dim_; }
  Vec project_null(const Vec& v) const override;
  Vec base_flow(const Vec& B) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int n_ = 0;
  int null_dim_ = 0;
};

std::shared_ptr<FlowOps> make_flow_ops(const Topology& t, bool prefer_basis);

// Shortest-path base flow: routes the full demand along one latency-shortest
// path. Sparse, but N' X0 != 0 in general.
Vec base_flow_shortest_path(const Topology& t, NodeId src, NodeId dst,
                            double demand);

}  // namespace dte
