#pragma once

#include <functional>
#include <span>
#include <vector>

namespace supportseg {

struct SubplexOptions {
  // Stop when one full cycle over all subspaces improves the objective by less
  // than ftol_rel relative to its previous value.
  double ftol_rel = 1e-8;
  // Stop when every coordinate's last move and step are below xtol_rel * max(|x_i|, 1).
  double xtol_rel = 1e-8;
  // Stop once the objective reaches this value.
  double ftol_abs = 0.0;
  int max_evaluations = 5000;
};

struct SubplexResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  int cycles = 0;
  bool converged = false;
};

using ObjectiveFunction = std::function<double(std::span<const double>)>;

// Box-constrained Subplex (Nelder-Mead on adaptively chosen low-dimensional
// subspaces). Trial points are projected into [lower, upper], so every
// evaluated point is feasible and the returned point is the best one seen.
// Coordinates with active[i] == false are held at x0[i].
SubplexResult MinimizeSubplex(const ObjectiveFunction& objective, std::vector<double> x0,
                              std::span<const double> lower, std::span<const double> upper,
                              std::vector<double> initial_step, const SubplexOptions& options,
                              const std::vector<bool>& active = {});

struct LeastSquaresOptions {
  int max_evaluations = 5000;
  double ftol_rel = 1e-10;  // stop when an accepted step improves less than this
  double ftol_abs = 0.0;
};

using ResidualFunction = std::function<void(std::span<const double>, std::vector<double>&)>;

// Box-constrained Levenberg-Marquardt on a forward-difference Jacobian of the
// residual vector. Minimises the sum of squared residuals; iterates are always
// clamped into [lower, upper]. Coordinates with active[i] == false stay at x0[i].
SubplexResult MinimizeLeastSquares(const ResidualFunction& residuals, std::vector<double> x0,
                                   std::span<const double> lower, std::span<const double> upper,
                                   const LeastSquaresOptions& options, const std::vector<bool>& active = {});

}  // namespace supportseg
