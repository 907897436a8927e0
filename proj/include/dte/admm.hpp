#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "dte/types.hpp"

namespace dte::admm {

struct AdmmConfig {
  double rho = 1.0;    // outer ADMM step
  double eta = 1.0;    // inner (sharing) ADMM step
  double gamma = 1.0;  // switch-problem step; path mode derives 1/lambda_k
  double eps = 1e-4;   // l2 regularization coefficient
  double kappa = 0.0;  // l1 sparsity coefficient
  int inner_iters_per_outer = 10;
  int pgd_iters = 50;
  double tol_rel = 0.01;
  // Slope of the linear utilization cost g(U), expressed for a unit-mean-
  // capacity instance; coordinators scale it by rho * mean(C)^2 so the
  // trajectory is invariant to the instance's flow units. The default keeps
  // the utilization descent inside a ~2% overshoot band.
  double g_slope = 0.2;

  void validate() const {
    if (!(rho > 0) || !(eta > 0) || !(gamma > 0))
      throw InputError("step sizes must be positive");
    if (!(tol_rel > 0 && tol_rel < 1))
      throw InputError("tol_rel must be in (0, 1)");
    if (eps < 0 || kappa < 0) throw InputError("eps/kappa must be >= 0");
    if (inner_iters_per_outer < 1 || pgd_iters < 1)
      throw InputError("iteration budgets must be >= 1");
  }
};

// Aggregate flow target per edge, its scaled dual, and the utilization
// variable revised by the outer loop.
struct OuterState {
  Vec Z;
  Vec r;
  double U = 0.0;
};

// Mean consensus of the sharing problem, its dual, and the latest column
// mean of the switch assignments.
struct InnerState {
  Vec Pbar;
  Vec u;
  Vec Xbar;
};

// Optional terms turning the flat Z-update into the hierarchical domain
// optimization: a reservation R[!d] tightening capacity, quadratic anchors
// toward the inter-region consensus, and the 1/D objective scaling.
struct ZUpdateExtras {
  Vec reserved;      // R[!d]; empty = zero
  Vec z_anchor;      // R[d] - l[d]; empty = unused
  double beta_step = 0.0;  // weight of the Z anchor (flow units)
  double beta_u = 0.0;     // weight of the U anchor (utilization units)
  double u_anchor = 0.0;   // O - v[d]
  double g_scale = 1.0;
  // Pluggable convex per-edge cost f_e with derivative; identically zero by
  // default (the only case exercised by the experiments).
  std::function<double(int, double)> f_e_deriv;
};

// argmin over {0 <= Z <= U*C - R[!d], U >= 0} of
//   g_scale*g_slope*U + (rho/2)||A - Z||^2
//   + (beta_u/2)(U - u_anchor)^2 + (beta_step/2)||Z - z_anchor||^2
// For fixed U the Z minimization is an elementwise clamp; U is found by
// bisection on the convex 1-D subgradient to 1e-9.
std::pair<Vec, double> z_update_mlu(const Vec& A, const Vec& C, double rho,
                                    double g_slope,
                                    const ZUpdateExtras* extras = nullptr);

// Max-flow variant: no utilization variable, Z clamps to the capacity box.
Vec z_update_maxflow(const Vec& A, const Vec& C, double rho,
                     const ZUpdateExtras* extras = nullptr);

// Pbar = (F/K + (eta/rho)(u + Xbar)) / (1 + eta/rho), with F = Z - r.
Vec inner_pbar_update(const Vec& F, int K, double eta, double rho,
                      const Vec& u, const Vec& xbar_new);

inline Vec inner_dual_update(const Vec& u, const Vec& xbar_new,
                             const Vec& pbar_new) {
  return u + xbar_new - pbar_new;
}

inline Vec outer_dual_update(const Vec& r, const Vec& sum_x_new,
                             const Vec& z_new) {
  return r + sum_x_new - z_new;
}

// sign(v) * max(|v| - lambda, 0), elementwise.
Vec soft_threshold(const Vec& v, double lambda);

// Euclidean projection onto {y >= 0, sum y = 1, y_i = 0 for pinned i};
// sort-and-threshold.
Vec project_simplex(const Vec& v, const std::vector<int>& pinned = {});

// max(v, 0) elementwise, then pinned indices zeroed.
Vec project_nonneg_pinned(const Vec& v, const std::vector<int>& pinned = {});

// Convergence test. With a reference objective: fires when
// |objective - reference| <= tol_rel * reference. Without one: fires when the
// primal residual ||Xbar - Pbar|| and dual residual eta*||Pbar - Pbar_prev||
// both stay below tol_rel * scale for 3 consecutive outer rounds.
class ConvergenceTracker {
 public:
  ConvergenceTracker(std::optional<double> reference, double tol_rel)
      : reference_(reference), tol_rel_(tol_rel) {}

  bool check_objective(double objective);
  bool check_residuals(const Vec& xbar, const Vec& pbar, double eta,
                       double scale);
  bool has_reference() const { return reference_.has_value(); }
  void reset();

 private:
  std::optional<double> reference_;
  double tol_rel_;
  int streak_ = 0;
  Vec prev_pbar_;
  bool has_prev_ = false;
};

}  // namespace dte::admm
