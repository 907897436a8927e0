#include <random>

#include "doctest.h"
#include "dte/admm.hpp"

using namespace dte;
using namespace dte::admm;

namespace {

double z_objective(const Vec& A, const Vec& Z, double U, double rho,
                   double g_slope) {
  return g_slope * U + 0.5 * rho * (A - Z).squaredNorm();
}

// Dense two-stage grid search over U; Z clamps elementwise for fixed U.
double grid_search_objective(const Vec& A, const Vec& C, double rho,
                             double g_slope) {
  auto value_at = [&](double U) {
    Vec Z(A.size());
    for (int e = 0; e < A.size(); ++e)
      Z[e] = std::clamp(A[e], 0.0, U * C[e]);
    return z_objective(A, Z, U, rho, g_slope);
  };
  double hi = 1.0;
  for (int e = 0; e < A.size(); ++e) hi = std::max(hi, A[e] / C[e] + 1.0);
  double best_u = 0.0, best = value_at(0.0);
  double lo = 0.0;
  for (int stage = 0; stage < 4; ++stage) {
    double step = (hi - lo) / 2000.0;
    for (double u = lo; u <= hi; u += step) {
      double v = value_at(u);
      if (v < best) {
        best = v;
        best_u = u;
      }
    }
    lo = std::max(0.0, best_u - 2.0 * step);
    hi = best_u + 2.0 * step;
  }
  return best;
}

}  // namespace

TEST_CASE("z_update_mlu basics") {
  SUBCASE("zero aggregate gives zero target and zero utilization") {
    Vec A = Vec::Zero(3), C = Vec::Constant(3, 2.0);
    auto [Z, U] = z_update_mlu(A, C, 1.0, 1.0);
    CHECK(U == 0.0);
    CHECK(Z.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("vanishing utilization cost recovers max(A/C)") {
    Vec A = Vec::Constant(1, 2.0), C = Vec::Constant(1, 4.0);
    auto [Z, U] = z_update_mlu(A, C, 1.0, 1e-9);
    CHECK(U == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(Z[0] == doctest::Approx(2.0).epsilon(1e-4));
  }
  SUBCASE("large rho pins Z to the aggregate") {
    Vec A(2), C(2);
    A << 3.0, 1.0;
    C << 2.0, 2.0;
    auto [Z, U] = z_update_mlu(A, C, 1000.0, 1.0);
    CHECK(U == doctest::Approx(1.5).epsilon(1e-3));
    CHECK(Z[0] == doctest::Approx(3.0).epsilon(1e-2));
    CHECK(Z[1] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("z_update_mlu matches a dense grid search on random instances") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> da(-1.0, 6.0), dc(0.5, 4.0),
      dg(0.1, 3.0), dr(0.2, 5.0);
  for (int rep = 0; rep < 25; ++rep) {
    Vec A(5), C(5);
    for (int e = 0; e < 5; ++e) {
      A[e] = da(rng);
      C[e] = dc(rng);
    }
    double rho = dr(rng), g = dg(rng);
    auto [Z, U] = z_update_mlu(A, C, rho, g);
    // Feasibility is exact post-projection.
    CHECK(U >= 0.0);
    for (int e = 0; e < 5; ++e) {
      CHECK(Z[e] >= 0.0);
      CHECK(Z[e] <= U * C[e] + 1e-12);
    }
    double obj = z_objective(A, Z, U, rho, g);
    double best = grid_search_objective(A, C, rho, g);
    CHECK(obj <= best + 1e-6);
  }
}

TEST_CASE("z_update_mlu with a reserved share halves the headroom") {
  // Single edge: reserving C/2 for other domains doubles the utilization
  // needed to carry the same aggregate (A/C = 1/2 here).
  Vec A = Vec::Constant(1, 1.0), C = Vec::Constant(1, 2.0);
  auto [Z0, U0] = z_update_mlu(A, C, 1.0, 1e-9);
  ZUpdateExtras extras;
  extras.reserved = Vec::Constant(1, 1.0);  // C/2
  auto [Z1, U1] = z_update_mlu(A, C, 1.0, 1e-9, &extras);
  CHECK(U0 == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(U1 == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(Z1[0] <= U1 * C[0] - extras.reserved[0] + 1e-9);
}

TEST_CASE("z_update_mlu honors a pluggable edge cost") {
  // f_e(z) = z^2 pushes Z below the plain clamp solution.
  Vec A = Vec::Constant(1, 2.0), C = Vec::Constant(1, 10.0);
  ZUpdateExtras extras;
  extras.f_e_deriv = [](int, double z) { return 2.0 * z; };
  auto [Z, U] = z_update_mlu(A, C, 1.0, 1e-9, &extras);
  // argmin z^2 + 0.5 (2-z)^2 = 2/3, unconstrained by the box here.
  CHECK(Z[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("z_update_maxflow clamps to capacity") {
  Vec A(3), C(3);
  A << -1.0, 0.5, 7.0;
  C << 2.0, 2.0, 2.0;
  Vec Z = z_update_maxflow(A, C, 1.0);
  CHECK(Z[0] == 0.0);
  CHECK(Z[1] == 0.5);
  CHECK(Z[2] == 2.0);
}

TEST_CASE("inner pbar update") {
  int K = 4;
  Vec F = Vec::Constant(6, 2.4);
  SUBCASE("fixed point at eta == rho") {
    Vec xbar = F / double(K);
    Vec pbar = inner_pbar_update(F, K, 1.0, 1.0, Vec::Zero(6), xbar);
    CHECK((pbar - xbar).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("zero target shrinks toward the mean") {
    Vec xbar = Vec::Constant(6, 3.0);
    double eta = 2.0, rho = 1.0;
    Vec pbar = inner_pbar_update(Vec::Zero(6), K, eta, rho, Vec::Zero(6), xbar);
    double expect = 3.0 * (eta / rho) / (1.0 + eta / rho);
    CHECK(pbar[0] == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("closed form minimizes the quadratic (finite differences)") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.5);
    Vec Fr(5), u(5), xbar(5);
    for (int i = 0; i < 5; ++i) {
      Fr[i] = g(rng);
      u[i] = g(rng);
      xbar[i] = g(rng);
    }
    double eta = 0.7, rho = 1.3;
    Vec pbar = inner_pbar_update(Fr, K, eta, rho, u, xbar);
    auto J = [&](const Vec& p) {
      return 0.5 * rho * (double(K) * p - Fr).squaredNorm() +
             0.5 * double(K) * double(K) * eta * (p - u - xbar).squaredNorm();
    };
    double base = J(pbar);
    for (int i = 0; i < 5; ++i) {
      Vec e = Vec::Zero(5);
      e[i] = 1e-6;
      double slope = (J(pbar + e) - J(pbar - e)) / 2e-6;
      CHECK(std::abs(slope) < 1e-4 * std::max(1.0, base));
    }
  }
}

TEST_CASE("dual updates are plain residual accumulation") {
  Vec u = Vec::Zero(2), xbar(2), pbar(2);
  xbar << 1.0, 0.0;
  pbar << 0.0, 1.0;
  Vec u2 = inner_dual_update(u, xbar, pbar);
  CHECK(u2[0] == 1.0);
  CHECK(u2[1] == -1.0);
  // Xbar == Pbar leaves the dual unchanged.
  CHECK((inner_dual_update(u2, pbar, pbar) - u2).cwiseAbs().maxCoeff() == 0.0);

  Vec r = Vec::Constant(2, 0.5);
  Vec sum_x(2), Z(2);
  sum_x << 2.0, 2.0;
  Z << 1.0, 3.0;
  Vec r2 = outer_dual_update(r, sum_x, Z);
  CHECK(r2[0] == doctest::Approx(1.5));
  CHECK(r2[1] == doctest::Approx(-0.5));
}

TEST_CASE("soft threshold") {
  Vec v(3);
  v << 1.2, -0.3, 0.0;
  Vec s = soft_threshold(v, 0.5);
  CHECK(s[0] == doctest::Approx(0.7));
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 0.0);
  CHECK((soft_threshold(v, 0.0) - v).cwiseAbs().maxCoeff() == 0.0);

  // Firm nonexpansion on random pairs.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    Vec a(6), b(6);
    for (int i = 0; i < 6; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
    }
    double lam = std::abs(g(rng));
    CHECK((soft_threshold(a, lam) - soft_threshold(b, lam)).norm() <=
          (a - b).norm() + 1e-12);
  }
}

namespace {

// Exhaustive active-set projection oracle for tiny simplices.
Vec simplex_projection_oracle(const Vec& v, const std::vector<int>& pinned) {
  int T = static_cast<int>(v.size());
  std::vector<char> is_pinned(T, 0);
  for (int i : pinned) is_pinned[i] = 1;
  Vec best;
  double best_d = 1e18;
  for (int mask = 0; mask < (1 << T); ++mask) {
    // mask bit = coordinate forced to zero.
    std::vector<int> free;
    for (int i = 0; i < T; ++i)
      if (!(mask & (1 << i)) && !is_pinned[i]) free.push_back(i);
    if (free.empty()) continue;
    double sum = 0.0;
    for (int i : free) sum += v[i];
    double theta = (sum - 1.0) / double(free.size());
    Vec y = Vec::Zero(T);
    bool ok = true;
    for (int i : free) {
      y[i] = v[i] - theta;
      if (y[i] < -1e-12) ok = false;
    }
    if (!ok) continue;
    double d = (y - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = y;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("simplex projection") {
  Vec a(2);
  a << 0.5, 0.5;
  CHECK((project_simplex(a) - a).cwiseAbs().maxCoeff() < 1e-12);

  Vec b(2);
  b << 2.0, 0.0;
  Vec pb = project_simplex(b);
  CHECK(pb[0] == doctest::Approx(1.0));
  CHECK(pb[1] == doctest::Approx(0.0));

  Vec c(2);
  c << 0.6, 0.6;
  Vec pc = project_simplex(c);
  CHECK(pc[0] == doctest::Approx(0.5));
  CHECK(pc[1] == doctest::Approx(0.5));

  SUBCASE("matches the exhaustive oracle with and without pins") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
      int T = 2 + int(rng() % 3);
      Vec v(T);
      for (int i = 0; i < T; ++i) v[i] = g(rng);
      std::vector<int> pinned;
      if (T > 2 && rng() % 2) pinned.push_back(int(rng() % T));
      Vec got = project_simplex(v, pinned);
      Vec want = simplex_projection_oracle(v, pinned);
      CHECK(got.sum() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
      for (int i : pinned) CHECK(got[i] == 0.0);
    }
  }
}

TEST_CASE("nonnegative projection with pins") {
  Vec v(3);
  v << -1.0, 2.0, 5.0;
  Vec p = project_nonneg_pinned(v, {2});
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 2.0);
  CHECK(p[2] == 0.0);
  // Idempotent.
  CHECK((project_nonneg_pinned(p, {2}) - p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("convergence tracker") {
  SUBCASE("reference mode") {
    ConvergenceTracker t(1.0, 0.01);
    CHECK(t.check_objective(1.0));
    CHECK(t.check_objective(1.005));
    CHECK_FALSE(t.check_objective(1.02));
  }
  SUBCASE("residual mode fires after three stable rounds") {
    ConvergenceTracker t(std::nullopt, 0.01);
    Vec xbar = Vec::Constant(3, 1.0);
    CHECK_FALSE(t.check_residuals(xbar, xbar, 1.0, 1.0));  // no prev yet
    CHECK_FALSE(t.check_residuals(xbar, xbar, 1.0, 1.0));
    CHECK_FALSE(t.check_residuals(xbar, xbar, 1.0, 1.0));
    CHECK(t.check_residuals(xbar, xbar, 1.0, 1.0));
  }
}
