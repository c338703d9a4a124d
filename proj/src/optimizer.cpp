#include "supportseg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "supportseg/common.hpp"

namespace supportseg {
namespace {

// Rowan's default coefficients.
constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;
constexpr double kSimplexReduction = 0.25;  // psi
constexpr double kStepReduction = 0.1;      // omega

class Subplex {
 public:
  Subplex(const ObjectiveFunction& f, std::vector<double> x, std::span<const double> lower,
          std::span<const double> upper, const SubplexOptions& options)
      : f_(f), x_(std::move(x)), lower_(lower), upper_(upper), options_(options), trial_(x_) {}

  double Value(std::span<const double> point) {
    ++evaluations_;
    return f_(point);
  }

  bool BudgetLeft() const { return evaluations_ < options_.max_evaluations; }

  // Runs Nelder-Mead on the coordinates `sub` starting from x_. Updates x_/fx_.
  void SearchSubspace(const std::vector<std::size_t>& sub, const std::vector<double>& step) {
    const std::size_t ns = sub.size();
    std::vector<std::vector<double>> verts(ns + 1, std::vector<double>(ns));
    std::vector<double> values(ns + 1, std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < ns; ++k) verts[0][k] = x_[sub[k]];
    values[0] = fx_;
    for (std::size_t j = 0; j < ns; ++j) {
      verts[j + 1] = verts[0];
      const std::size_t i = sub[j];
      double v = x_[i] + step[i];
      if (v > upper_[i] || v < lower_[i]) v = x_[i] - step[i];
      verts[j + 1][j] = Project(i, v);
      values[j + 1] = Evaluate(sub, verts[j + 1]);
      if (!BudgetLeft()) break;
    }

    auto size_about = [&](std::size_t best) {
      double s = 0.0;
      for (std::size_t j = 0; j <= ns; ++j) {
        if (j == best) continue;
        double d = 0.0;
        for (std::size_t k = 0; k < ns; ++k) d += std::abs(verts[j][k] - verts[best][k]);
        s = std::max(s, d);
      }
      return s;
    };

    std::vector<std::size_t> order(ns + 1);
    std::vector<double> centroid(ns), reflected(ns), candidate(ns);
    auto sort_vertices = [&]() {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    };
    sort_vertices();
    const double initial_size = size_about(order[0]);

    while (BudgetLeft() && values[order[0]] > options_.ftol_abs) {
      const std::size_t best = order[0];
      const std::size_t worst = order[ns];
      const std::size_t second = order[ns > 0 ? ns - 1 : 0];
      if (size_about(best) <= kSimplexReduction * initial_size) break;

      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t j = 0; j <= ns; ++j) {
        if (j == worst) continue;
        for (std::size_t k = 0; k < ns; ++k) centroid[k] += verts[j][k];
      }
      for (double& c : centroid) c /= static_cast<double>(ns);

      for (std::size_t k = 0; k < ns; ++k)
        reflected[k] = Project(sub[k], centroid[k] + kReflect * (centroid[k] - verts[worst][k]));
      const double fr = Evaluate(sub, reflected);

      if (fr < values[best]) {
        for (std::size_t k = 0; k < ns; ++k)
          candidate[k] = Project(sub[k], centroid[k] + kExpand * (reflected[k] - centroid[k]));
        const double fe = BudgetLeft() ? Evaluate(sub, candidate) : std::numeric_limits<double>::infinity();
        if (fe < fr) {
          verts[worst] = candidate;
          values[worst] = fe;
        } else {
          verts[worst] = reflected;
          values[worst] = fr;
        }
      } else if (fr < values[second]) {
        verts[worst] = reflected;
        values[worst] = fr;
      } else {
        const bool outside = fr < values[worst];
        for (std::size_t k = 0; k < ns; ++k) {
          const double towards = outside ? reflected[k] : verts[worst][k];
          candidate[k] = Project(sub[k], centroid[k] + kContract * (towards - centroid[k]));
        }
        const double fc = BudgetLeft() ? Evaluate(sub, candidate) : std::numeric_limits<double>::infinity();
        if (fc < std::min(fr, values[worst])) {
          verts[worst] = candidate;
          values[worst] = fc;
        } else {
          for (std::size_t j = 0; j <= ns && BudgetLeft(); ++j) {
            if (j == best) continue;
            for (std::size_t k = 0; k < ns; ++k)
              verts[j][k] = Project(sub[k], verts[best][k] + kShrink * (verts[j][k] - verts[best][k]));
            values[j] = Evaluate(sub, verts[j]);
          }
        }
      }
      sort_vertices();
    }

    const std::size_t best = order[0];
    if (values[best] < fx_) {
      for (std::size_t k = 0; k < ns; ++k) x_[sub[k]] = verts[best][k];
      fx_ = values[best];
    }
  }

  double Project(std::size_t i, double v) const { return std::clamp(v, lower_[i], upper_[i]); }

  double Evaluate(const std::vector<std::size_t>& sub, const std::vector<double>& coords) {
    trial_ = x_;
    for (std::size_t k = 0; k < sub.size(); ++k) trial_[sub[k]] = coords[k];
    return Value(trial_);
  }

  const ObjectiveFunction& f_;
  std::vector<double> x_;
  double fx_ = 0.0;
  std::span<const double> lower_;
  std::span<const double> upper_;
  SubplexOptions options_;
  std::vector<double> trial_;
  int evaluations_ = 0;
};

// Splits coordinates sorted by decreasing |delta| into consecutive blocks,
// choosing each block size to maximise the gap between the mean |delta| inside
// the block and the mean of everything after it.
std::vector<std::vector<std::size_t>> PartitionSubspaces(const std::vector<std::size_t>& coords,
                                                        const std::vector<double>& delta) {
  const std::size_t n = coords.size();
  const std::size_t ns_min = std::min<std::size_t>(2, n);
  const std::size_t ns_max = std::min<std::size_t>(5, n);
  std::vector<std::size_t> order = coords;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(delta[a]) > std::abs(delta[b]); });

  std::vector<std::vector<std::size_t>> subspaces;
  std::size_t pos = 0;
  while (pos < n) {
    const std::size_t remaining = n - pos;
    std::size_t chosen = remaining;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t ns = ns_min; ns <= std::min(ns_max, remaining); ++ns) {
      const std::size_t rest = remaining - ns;
      if (rest != 0 && rest < ns_min) continue;
      double inside = 0.0;
      for (std::size_t k = 0; k < ns; ++k) inside += std::abs(delta[order[pos + k]]);
      double score = inside / static_cast<double>(ns);
      if (rest > 0) {
        double outside = 0.0;
        for (std::size_t k = ns; k < remaining; ++k) outside += std::abs(delta[order[pos + k]]);
        score -= outside / static_cast<double>(rest);
      }
      if (score > best_score) {
        best_score = score;
        chosen = ns;
      }
    }
    subspaces.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                           order.begin() + static_cast<std::ptrdiff_t>(pos + chosen));
    pos += chosen;
  }
  return subspaces;
}

}  // namespace

SubplexResult MinimizeSubplex(const ObjectiveFunction& objective, std::vector<double> x0,
                              std::span<const double> lower, std::span<const double> upper,
                              std::vector<double> step, const SubplexOptions& options,
                              const std::vector<bool>& active) {
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n || step.size() != n)
    throw ValidationError("optimizer bounds and steps must match the parameter count");
  if (!active.empty() && active.size() != n) throw ValidationError("active mask must match the parameter count");
  for (std::size_t i = 0; i < n; ++i) {
    if (lower[i] > upper[i]) throw ValidationError("optimizer lower bound above upper bound");
    x0[i] = std::clamp(x0[i], lower[i], upper[i]);
  }

  std::vector<std::size_t> coords;
  for (std::size_t i = 0; i < n; ++i)
    if (active.empty() || active[i]) coords.push_back(i);

  Subplex sp(objective, std::move(x0), lower, upper, options);
  sp.fx_ = sp.Value(sp.x_);
  SubplexResult result;
  if (!std::isfinite(sp.fx_)) throw ValidationError("objective is not finite at the initial point");

  bool converged = coords.empty() || sp.fx_ <= options.ftol_abs;
  std::vector<double> delta = step;
  int cycles = 0;
  while (!converged && sp.BudgetLeft()) {
    const std::vector<double> previous = sp.x_;
    const double f_previous = sp.fx_;
    const auto subspaces = PartitionSubspaces(coords, delta);
    for (const auto& sub : subspaces) {
      if (!sp.BudgetLeft()) break;
      sp.SearchSubspace(sub, step);
    }
    ++cycles;
    for (std::size_t i : coords) delta[i] = sp.x_[i] - previous[i];

    const double improvement = f_previous - sp.fx_;
    bool small_moves = true;
    for (std::size_t i : coords) {
      const double scale = std::max(std::abs(sp.x_[i]), 1.0);
      if (std::max(std::abs(delta[i]), kSimplexReduction * std::abs(step[i])) > options.xtol_rel * scale) {
        small_moves = false;
        break;
      }
    }
    if (sp.fx_ <= options.ftol_abs || small_moves ||
        (improvement > 0.0 && improvement <= options.ftol_rel * std::abs(f_previous))) {
      converged = true;
      break;
    }

    // Step update.
    double scale = kSimplexReduction;
    if (subspaces.size() > 1) {
      double moved = 0.0, stepped = 0.0;
      for (std::size_t i : coords) {
        moved += std::abs(delta[i]);
        stepped += std::abs(step[i]);
      }
      scale = stepped > 0.0 ? std::clamp(moved / stepped, kStepReduction, 1.0 / kStepReduction) : kStepReduction;
    }
    for (std::size_t i : coords) {
      const double magnitude = std::abs(step[i]) * scale;
      step[i] = delta[i] > 0.0 ? magnitude : delta[i] < 0.0 ? -magnitude : (step[i] > 0.0 ? -magnitude : magnitude);
    }
  }

  result.x = std::move(sp.x_);
  result.value = sp.fx_;
  result.evaluations = sp.evaluations_;
  result.cycles = cycles;
  result.converged = converged;
  return result;
}

namespace {

double SquaredNorm(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

}  // namespace

SubplexResult MinimizeLeastSquares(const ResidualFunction& residuals, std::vector<double> x,
                                   std::span<const double> lower, std::span<const double> upper,
                                   const LeastSquaresOptions& options, const std::vector<bool>& active) {
  const std::size_t n = x.size();
  if (lower.size() != n || upper.size() != n) throw ValidationError("optimizer bounds must match the parameter count");
  if (!active.empty() && active.size() != n) throw ValidationError("active mask must match the parameter count");
  for (std::size_t i = 0; i < n; ++i) {
    if (lower[i] > upper[i]) throw ValidationError("optimizer lower bound above upper bound");
    x[i] = std::clamp(x[i], lower[i], upper[i]);
  }
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < n; ++i)
    if ((active.empty() || active[i]) && lower[i] < upper[i]) free.push_back(i);

  SubplexResult result;
  std::vector<double> r, r_trial;
  residuals(x, r);
  ++result.evaluations;
  double fx = SquaredNorm(r);
  if (!std::isfinite(fx)) throw ValidationError("objective is not finite at the initial point");
  const std::size_t m = r.size();
  const std::size_t k = free.size();

  std::vector<double> jac(m * k), trial(n), jtj(k * k), g(k), a(k * k), delta(k);
  double lambda = 1e-3;
  bool converged = k == 0 || fx <= options.ftol_abs;
  while (!converged && result.evaluations + static_cast<int>(k) + 1 <= options.max_evaluations) {
    // Forward differences, stepping inwards at the upper bound.
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t i = free[c];
      double h = 1e-7 * std::max(1.0, std::abs(x[i]));
      if (x[i] + h > upper[i]) h = -h;
      trial = x;
      trial[i] += h;
      residuals(trial, r_trial);
      ++result.evaluations;
      for (std::size_t row = 0; row < m; ++row) jac[row * k + c] = (r_trial[row] - r[row]) / h;
    }
    for (std::size_t p = 0; p < k; ++p) {
      double gp = 0.0;
      for (std::size_t row = 0; row < m; ++row) gp += jac[row * k + p] * r[row];
      g[p] = gp;
      for (std::size_t q = p; q < k; ++q) {
        double s = 0.0;
        for (std::size_t row = 0; row < m; ++row) s += jac[row * k + p] * jac[row * k + q];
        jtj[p * k + q] = jtj[q * k + p] = s;
      }
    }
    ++result.cycles;

    bool accepted = false;
    while (!accepted && result.evaluations < options.max_evaluations && lambda < 1e12) {
      // Coordinates pinned at a bound with the descent direction pointing out stay fixed.
      std::vector<bool> pinned(k, false);
      for (std::size_t c = 0; c < k; ++c) {
        const std::size_t i = free[c];
        pinned[c] = (x[i] <= lower[i] && g[c] > 0.0) || (x[i] >= upper[i] && g[c] < 0.0);
      }
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = 0; q < k; ++q) {
          double v = pinned[p] || pinned[q] ? 0.0 : jtj[p * k + q];
          if (p == q) v = pinned[p] ? 1.0 : v + lambda * std::max(jtj[p * k + p], 1e-12);
          a[p * k + q] = v;
        }
      for (std::size_t c = 0; c < k; ++c) delta[c] = pinned[c] ? 0.0 : -g[c];
      // Cholesky in place; a failure means lambda is too small.
      bool ok = true;
      for (std::size_t p = 0; p < k && ok; ++p) {
        for (std::size_t q = 0; q <= p; ++q) {
          double s = a[p * k + q];
          for (std::size_t t = 0; t < q; ++t) s -= a[p * k + t] * a[q * k + t];
          if (p == q) {
            if (!(s > 0.0)) {
              ok = false;
              break;
            }
            a[p * k + p] = std::sqrt(s);
          } else {
            a[p * k + q] = s / a[q * k + q];
          }
        }
      }
      if (!ok) {
        lambda *= 10.0;
        continue;
      }
      for (std::size_t p = 0; p < k; ++p) {
        double s = delta[p];
        for (std::size_t t = 0; t < p; ++t) s -= a[p * k + t] * delta[t];
        delta[p] = s / a[p * k + p];
      }
      for (std::size_t p = k; p-- > 0;) {
        double s = delta[p];
        for (std::size_t t = p + 1; t < k; ++t) s -= a[t * k + p] * delta[t];
        delta[p] = s / a[p * k + p];
      }

      trial = x;
      bool moved = false;
      for (std::size_t c = 0; c < k; ++c) {
        const std::size_t i = free[c];
        trial[i] = std::clamp(x[i] + delta[c], lower[i], upper[i]);
        moved = moved || trial[i] != x[i];
      }
      if (!moved) {
        converged = true;
        break;
      }
      residuals(trial, r_trial);
      ++result.evaluations;
      const double ft = SquaredNorm(r_trial);
      if (std::isfinite(ft) && ft < fx) {
        const double improvement = fx - ft;
        x = trial;
        r.swap(r_trial);
        fx = ft;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (fx <= options.ftol_abs || improvement <= options.ftol_rel * (fx + improvement)) converged = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted && !converged) {
      converged = lambda >= 1e12;
      break;
    }
  }

  result.x = std::move(x);
  result.value = fx;
  result.converged = converged;
  return result;
}

}  // namespace supportseg
