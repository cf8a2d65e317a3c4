#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "gpe/assembly.hpp"
#include "gpe/flow.hpp"
#include "gpe/forms.hpp"

namespace gpe {

/// Seedable 64-bit generator (mt19937_64) with a portable uniform draw.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Independent child seed for stream `stream` (splitmix64 finalizer).
  static std::uint64_t split(std::uint64_t seed, std::uint64_t stream);

private:
  std::mt19937_64 engine_;
};

struct PiconeResult {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

/// <S v, u^2 / v> <= <S u, u> + 1e-12 |<S u, u>|. Throws std::invalid_argument
/// unless v is strictly positive.
PiconeResult picone_check(const SparseSpdMatrix &s, const Eigen::VectorXd &u, const Eigen::VectorXd &v);

/// F(w) = 1/2 sqrt(w)^T S sqrt(w) + 1/2 |V Pw|_C + kappa/4 |P w^2|_C on
/// nonnegative interior vectors; boundary slots of P w are zero.
class ConvexObjective {
public:
  explicit ConvexObjective(const ProblemData &data);

  /// Throws std::invalid_argument for negative entries or a wrong length.
  double operator()(const Eigen::VectorXd &w) const;
  /// |P w|_C = sum_j M_jj w_j.
  double constraint(const Eigen::VectorXd &w) const;

private:
  SparseSpdMatrix stiffness_;
  Eigen::VectorXd lumped_;
  Eigen::VectorXd lumped_potential_;
  double kappa_;
};

struct MinimalityResult {
  bool holds = false;
  double min_gap = 0.0;
  int samples = 0;
};

/// Compares F(u^2) with F(w) for `sample_count` feasible samples: half are
/// random nonnegative vectors, half multiplicative perturbations of u^2 with
/// relative sizes 1e-1 .. 1e-4. holds iff min_gap >= -1e-10.
MinimalityResult convex_minimality_check(const FeFunction &u, const ProblemData &data, int sample_count,
                                         std::uint64_t seed);
MinimalityResult convex_minimality_check(const GroundStateSolution &solution, const ProblemData &data,
                                         int sample_count, std::uint64_t seed);

struct NonlinearEigenpair {
  double lambda;
  FeFunction u;
};

/// True iff every candidate of one sign matches the ground state up to sign
/// to 1e-8 in the l-norm and in relative eigenvalue. Sign-changing
/// candidates are skipped.
bool nonneg_eigenstate_check(const std::vector<NonlinearEigenpair> &candidates, const GroundStateSolution &ground);

/// Least-squares slope of log(y) against log(x); NaN if any value is not
/// positive. Throws std::invalid_argument for fewer than two points.
double loglog_slope(const std::vector<double> &x, const std::vector<double> &y);

struct LumpingErrorRow {
  double h;
  double err_potential;
  double err_cubic;
};

struct LumpingErrorScan {
  std::vector<LumpingErrorRow> rows;
  double slope_potential;
  double slope_cubic;
};

/// |l(V v, v) - (V v, v)| and |l(v^3, v) - (v^3, v)| for the interpolant v of
/// `f` on every mesh; slopes are taken against h.
LumpingErrorScan lumping_error_scan(const std::vector<MeshPtr> &hierarchy, const PointPotential &potential,
                                    const std::function<double(const Point &)> &f);

struct LinfRow {
  double h;
  double linf;
};

/// Max nodal modulus of the l-normalized lumped ground state on every mesh.
std::vector<LinfRow> linf_bound_scan(const std::vector<MeshPtr> &hierarchy, const PointPotential &potential,
                                     double kappa, const FlowConfig &config = {});

} // namespace gpe
