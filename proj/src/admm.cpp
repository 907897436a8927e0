#include "dte/admm.hpp"

#include <algorithm>
#include <cmath>

namespace dte::admm {

namespace {

// Unconstrained elementwise Z minimizer of
// (rho/2)(A - Z)^2 + (beta/2)(Z - anchor)^2.
inline double z_unconstrained(double a, double anchor, double rho,
                              double beta) {
  if (beta == 0.0) return a;
  return (rho * a + beta * anchor) / (rho + beta);
}

// 1-D bisection for the prox of a pluggable f_e over [0, hi]:
// argmin f_e(z) + (rho/2)(a-z)^2 + (beta/2)(z-anchor)^2.
double prox_with_fe(const std::function<double(int, double)>& fd, int e,
                    double a, double anchor, double rho, double beta,
                    double hi) {
  auto deriv = [&](double z) {
    return fd(e, z) + rho * (z - a) + beta * (z - anchor);
  };
  double lo = 0.0;
  if (deriv(lo) >= 0) return lo;
  if (deriv(hi) <= 0) return hi;
  for (int i = 0; i < 100 && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
    double mid = 0.5 * (lo + hi);
    (deriv(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::pair<Vec, double> z_update_mlu(const Vec& A, const Vec& C, double rho,
                                    double g_slope,
                                    const ZUpdateExtras* extras) {
  const int n = static_cast<int>(A.size());
  const bool hier = extras && extras->beta_step > 0.0;
  const double beta = hier ? extras->beta_step : 0.0;
  const double beta_u = hier ? extras->beta_u : 0.0;
  const double g_scale = extras ? extras->g_scale : 1.0;
  const bool has_reserved = extras && extras->reserved.size() == n;
  const bool has_fe = extras && bool(extras->f_e_deriv);

  auto reserved = [&](int e) { return has_reserved ? extras->reserved[e] : 0.0; };
  auto anchor = [&](int e) {
    return (hier && extras->z_anchor.size() == n) ? extras->z_anchor[e] : 0.0;
  };

  auto z_at = [&](double U, int e) {
    double bound = U * C[e] - reserved(e);
    if (bound <= 0.0) return 0.0;
    if (has_fe)
      return prox_with_fe(extras->f_e_deriv, e, A[e], anchor(e), rho, beta, bound);
    return std::clamp(z_unconstrained(A[e], anchor(e), rho, beta), 0.0, bound);
  };

  // Subgradient of the partially minimized objective in U. Convex, so
  // non-decreasing; envelope theorem gives -C_e * mu_e per active bound.
  auto dh = [&](double U) {
    double g = g_scale * g_slope + (hier ? beta_u * (U - extras->u_anchor) : 0.0);
    for (int e = 0; e < n; ++e) {
      double bound = U * C[e] - reserved(e);
      if (bound < 0.0) continue;  // below the feasible region of this edge
      double z = z_at(U, e);
      if (z >= bound - 1e-15 * std::max(1.0, bound)) {
        double mu = rho * (A[e] - z) + beta * (anchor(e) - z);
        if (has_fe) mu -= extras->f_e_deriv(e, z);
        if (mu > 0.0) g -= C[e] * mu;
      }
    }
    return g;
  };

  // Feasibility needs U >= R[!d]_e / C_e on every edge.
  double lo = 0.0;
  if (has_reserved)
    for (int e = 0; e < n; ++e) lo = std::max(lo, reserved(e) / C[e]);

  double hi = lo;
  for (int e = 0; e < n; ++e)
    hi = std::max(hi, (std::max(A[e], anchor(e)) + reserved(e)) / C[e]);
  if (hier) hi = std::max(hi, extras->u_anchor);
  hi = std::max(hi, lo + 1.0);
  int guard = 0;
  while (dh(hi) < 0.0 && guard++ < 60) hi *= 2.0;

  double U;
  if (dh(lo) >= 0.0) {
    U = lo;
  } else {
    double a = lo, b = hi;
    for (int i = 0; i < 200 && b - a > 1e-9; ++i) {
      double mid = 0.5 * (a + b);
      (dh(mid) >= 0.0 ? b : a) = mid;
    }
    U = 0.5 * (a + b);
  }

  Vec Z(n);
  for (int e = 0; e < n; ++e) Z[e] = z_at(U, e);
  return {Z, U};
}

Vec z_update_maxflow(const Vec& A, const Vec& C, double rho,
                     const ZUpdateExtras* extras) {
  const int n = static_cast<int>(A.size());
  const bool hier = extras && extras->beta_step > 0.0;
  const double beta = hier ? extras->beta_step : 0.0;
  const bool has_reserved = extras && extras->reserved.size() == n;
  Vec Z(n);
  for (int e = 0; e < n; ++e) {
    double anchor =
        (hier && extras->z_anchor.size() == n) ? extras->z_anchor[e] : 0.0;
    double bound = C[e] - (has_reserved ? extras->reserved[e] : 0.0);
    Z[e] = std::clamp(z_unconstrained(A[e], anchor, rho, beta), 0.0,
                      std::max(0.0, bound));
  }
  return Z;
}

Vec inner_pbar_update(const Vec& F, int K, double eta, double rho,
                      const Vec& u, const Vec& xbar_new) {
  double w = eta / rho;
  return (F / double(K) + w * (u + xbar_new)) / (1.0 + w);
}

Vec soft_threshold(const Vec& v, double lambda) {
  return v.unaryExpr([lambda](double x) {
    double m = std::abs(x) - lambda;
    return m > 0.0 ? (x > 0.0 ? m : -m) : 0.0;
  });
}

Vec project_simplex(const Vec& v, const std::vector<int>& pinned) {
  const int T = static_cast<int>(v.size());
  std::vector<char> is_pinned(T, 0);
  for (int i : pinned) is_pinned[i] = 1;
  std::vector<double> free_vals;
  free_vals.reserve(T);
  for (int i = 0; i < T; ++i)
    if (!is_pinned[i]) free_vals.push_back(v[i]);
  if (free_vals.empty())
    throw InputError("project_simplex: every coordinate is pinned");

  std::sort(free_vals.begin(), free_vals.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  int support = 0;
  for (size_t j = 0; j < free_vals.size(); ++j) {
    cumsum += free_vals[j];
    double th = (cumsum - 1.0) / double(j + 1);
    if (free_vals[j] - th > 0.0) {
      theta = th;
      support = static_cast<int>(j + 1);
    }
  }
  (void)support;
  Vec y = Vec::Zero(T);
  for (int i = 0; i < T; ++i)
    if (!is_pinned[i]) y[i] = std::max(v[i] - theta, 0.0);
  return y;
}

Vec project_nonneg_pinned(const Vec& v, const std::vector<int>& pinned) {
  Vec y = v.cwiseMax(0.0);
  for (int i : pinned) y[i] = 0.0;
  return y;
}

bool ConvergenceTracker::check_objective(double objective) {
  if (!reference_) return false;
  return std::abs(objective - *reference_) <= tol_rel_ * std::abs(*reference_);
}

bool ConvergenceTracker::check_residuals(const Vec& xbar, const Vec& pbar,
                                         double eta, double scale) {
  double primal = (xbar - pbar).norm();
  double dual = has_prev_ ? eta * (pbar - prev_pbar_).norm() : 0.0;
  bool small = has_prev_ && primal <= tol_rel_ * scale && dual <= tol_rel_ * scale;
  prev_pbar_ = pbar;
  has_prev_ = true;
  streak_ = small ? streak_ + 1 : 0;
  return streak_ >= 3;
}

void ConvergenceTracker::reset() {
  streak_ = 0;
  has_prev_ = false;
}

}  // namespace dte::admm
