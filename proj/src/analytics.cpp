#include "supportseg/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace supportseg {

bool StatsFilter::Accepts(const TransitionSequence& sequence) const {
  if (exclude_kneeling && sequence.category == "kneeling") return false;
  return categories.empty() || categories.contains(sequence.category);
}

std::vector<std::string> TransitionStats::SortedPoses() const {
  std::vector<std::string> poses;
  for (const auto& [pose, total] : pose_totals) poses.push_back(pose);
  std::stable_sort(poses.begin(), poses.end(), [&](const std::string& a, const std::string& b) {
    return pose_totals.at(a).count > pose_totals.at(b).count;
  });
  return poses;
}

TransitionStats TransitionTable(const std::vector<TransitionSequence>& sequences, const StatsFilter& filter) {
  TransitionStats stats;
  for (const TransitionSequence& seq : sequences) {
    if (!filter.Accepts(seq)) continue;
    for (const TransitionRecord& r : seq.records) {
      if (r.boundary || !r.to) continue;
      if (filter.exclude_loops && r.loop()) continue;
      TransitionCell& cell = stats.cells[{r.from.Label(), r.to->Label()}];
      ++cell.count;
      cell.frames += r.duration_frames;
      ++stats.n_transitions;
      stats.total_frames += r.duration_frames;
    }
  }
  if (stats.n_transitions == 0) throw ValidationError("no transitions left after filtering");

  const double n = static_cast<double>(stats.n_transitions);
  const double frames = static_cast<double>(stats.total_frames);
  for (auto& [key, cell] : stats.cells) {
    cell.appearance_pct = 100.0 * static_cast<double>(cell.count) / n;
    cell.time_pct = frames > 0.0 ? 100.0 * static_cast<double>(cell.frames) / frames : 0.0;
    TransitionCell& total = stats.pose_totals[key.first];
    total.count += cell.count;
    total.frames += cell.frames;
    total.appearance_pct += cell.appearance_pct;
    total.time_pct += cell.time_pct;
  }
  return stats;
}

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (const auto& [bin, count] : counts) n += count;
  return n;
}

Histogram DurationHistogram(const std::vector<long>& durations, int bin_width, std::string category) {
  if (bin_width < 1) throw ValidationError("histogram bin width must be at least 1");
  Histogram h;
  h.bin_width = bin_width;
  h.category = std::move(category);
  for (long d : durations) {
    if (d < 0) throw ValidationError("negative duration in histogram input");
    ++h.counts[d / bin_width];
  }
  return h;
}

Histogram DurationHistogram(const std::vector<TransitionRecord>& records, int bin_width, std::string category) {
  std::vector<long> durations;
  durations.reserve(records.size());
  for (const TransitionRecord& r : records) durations.push_back(r.duration_frames);
  return DurationHistogram(durations, bin_width, std::move(category));
}

namespace {

double LogNormalPdf(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace

MixtureFit FitTwoNormalMixture(const std::vector<double>& samples, const MixtureOptions& options) {
  const std::size_t n = samples.size();
  if (n < 4) throw ValidationError("mixture fit needs at least 4 samples, got " + std::to_string(n));
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) {
    if (!std::isfinite(x)) throw ValidationError("mixture samples must be finite");
    ss += (x - mean) * (x - mean);
  }
  if (ss <= 0.0) throw ValidationError("mixture samples have zero variance");

  double w1, m1, m2, s1, s2;
  if (options.init) {
    w1 = options.init->weight1;
    m1 = options.init->mean1;
    m2 = options.init->mean2;
    s1 = options.init->sigma1;
    s2 = options.init->sigma2;
  } else {
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t half = n / 2;
    m1 = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(half), 0.0) /
         static_cast<double>(half);
    m2 = std::accumulate(sorted.begin() + static_cast<std::ptrdiff_t>(half), sorted.end(), 0.0) /
         static_cast<double>(n - half);
    s1 = s2 = std::sqrt(ss / static_cast<double>(n - 1));
    w1 = 0.5;
  }
  const double floor_sigma = std::sqrt(options.variance_floor);
  s1 = std::max(s1, floor_sigma);
  s2 = std::max(s2, floor_sigma);

  MixtureFit fit;
  std::vector<double> r1(n);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // E-step.
    double ll = 0.0;
    const double lw1 = std::log(w1);
    const double lw2 = std::log(1.0 - w1);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = lw1 + LogNormalPdf(samples[i], m1, s1);
      const double b = lw2 + LogNormalPdf(samples[i], m2, s2);
      const double hi = std::max(a, b);
      const double lse = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
      ll += lse;
      r1[i] = std::exp(a - lse);
    }
    fit.log_likelihood_trace.push_back(ll);
    fit.iterations = iter + 1;
    fit.log_likelihood = ll;
    if (std::abs(ll - previous) < options.tolerance) {
      fit.tolerance_reached = true;
      break;
    }
    previous = ll;

    // M-step.
    double n1 = 0.0, sum1 = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n1 += r1[i];
      sum1 += r1[i] * samples[i];
      sum2 += (1.0 - r1[i]) * samples[i];
    }
    const double n2 = static_cast<double>(n) - n1;
    if (n1 <= 1e-12 || n2 <= 1e-12) {
      // One component has collapsed to zero weight; the fit cannot move further.
      fit.tolerance_reached = true;
      break;
    }
    m1 = sum1 / n1;
    m2 = sum2 / n2;
    double v1 = 0.0, v2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v1 += r1[i] * (samples[i] - m1) * (samples[i] - m1);
      v2 += (1.0 - r1[i]) * (samples[i] - m2) * (samples[i] - m2);
    }
    s1 = std::sqrt(std::max(v1 / n1, options.variance_floor));
    s2 = std::sqrt(std::max(v2 / n2, options.variance_floor));
    w1 = std::clamp(n1 / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
  }

  fit.converged = fit.tolerance_reached || fit.iterations >= options.max_iterations;
  if (m1 > m2) {
    std::swap(m1, m2);
    std::swap(s1, s2);
    w1 = 1.0 - w1;
  }
  fit.weight1 = w1;
  fit.weight2 = 1.0 - w1;
  fit.mean1 = m1;
  fit.mean2 = m2;
  fit.sigma1 = s1;
  fit.sigma2 = s2;
  fit.separation = std::abs(m2 - m1) / std::sqrt((s1 * s1 + s2 * s2) / 2.0);
  fit.weakly_separated = fit.separation < options.separation_threshold;
  return fit;
}

std::size_t TransitionGraph::total_count() const {
  std::size_t n = 0;
  for (const GraphEdge& e : edges) n += e.count;
  return n;
}

TransitionGraph BuildTransitionGraph(const std::vector<TransitionSequence>& sequences, bool include_boundaries,
                                     const StatsFilter& filter) {
  TransitionGraph graph;
  std::map<TransitionKey, GraphEdge> edges;
  for (const TransitionSequence& seq : sequences) {
    if (!filter.Accepts(seq)) continue;
    for (const TransitionRecord& r : seq.records) {
      if (r.boundary && !include_boundaries) continue;
      if (filter.exclude_loops && r.loop()) continue;
      graph.nodes.insert(r.from.Label());
      if (!r.to) continue;
      const std::string from = r.from.Label();
      const std::string to = r.to->Label();
      graph.nodes.insert(to);
      GraphEdge& e = edges[{from, to}];
      e.from = from;
      e.to = to;
      ++e.count;
      e.change = ContactChangeCount(r.from, *r.to) >= 2 ? ChangeClass::kMulti : ChangeClass::kSingle;
    }
  }
  for (auto& [key, edge] : edges) graph.edges.push_back(std::move(edge));
  return graph;
}

}  // namespace supportseg
