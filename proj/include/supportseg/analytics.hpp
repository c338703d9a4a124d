#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "supportseg/pose_segmentation.hpp"

namespace supportseg {

// Which motions and records enter the corpus statistics. Boundary records are
// always excluded from the transition table.
struct StatsFilter {
  std::set<std::string> categories;  // empty: every category
  bool exclude_kneeling = true;
  bool exclude_loops = false;

  bool Accepts(const TransitionSequence& sequence) const;
};

struct TransitionCell {
  std::size_t count = 0;
  long frames = 0;
  double appearance_pct = 0.0;
  double time_pct = 0.0;
};

using TransitionKey = std::pair<std::string, std::string>;  // (from label, to label)

struct TransitionStats {
  std::map<TransitionKey, TransitionCell> cells;
  std::map<std::string, TransitionCell> pose_totals;  // by origin pose
  std::size_t n_transitions = 0;
  long total_frames = 0;

  // Origin poses from most to least common (appearance), ties by label.
  std::vector<std::string> SortedPoses() const;
};

// Throws ValidationError when nothing is left after filtering.
TransitionStats TransitionTable(const std::vector<TransitionSequence>& sequences, const StatsFilter& filter = {});

struct Histogram {
  int bin_width = 10;
  std::string category;
  std::map<long, std::size_t> counts;  // bin index -> count, bins are [k*w, (k+1)*w)

  std::size_t total() const;
};

Histogram DurationHistogram(const std::vector<long>& durations, int bin_width = 10, std::string category = {});
Histogram DurationHistogram(const std::vector<TransitionRecord>& records, int bin_width = 10, std::string category = {});

struct MixtureInit {
  double weight1 = 0.5;
  double mean1 = 0.0;
  double mean2 = 0.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
};

struct MixtureOptions {
  double variance_floor = 1e-3;  // frames^2
  double tolerance = 1e-9;       // on the log-likelihood change
  int max_iterations = 1000;
  double separation_threshold = 2.0;
  std::optional<MixtureInit> init;  // default: median split
};

struct MixtureFit {
  double weight1 = 0.5;
  double weight2 = 0.5;
  double mean1 = 0.0;
  double mean2 = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double log_likelihood = 0.0;
  // Stopped by the tolerance or by max_iterations; tolerance_reached tells which.
  bool converged = false;
  bool tolerance_reached = false;
  int iterations = 0;
  // |mean1 - mean2| / sqrt((sigma1^2 + sigma2^2) / 2)
  double separation = 0.0;
  bool weakly_separated = false;
  std::vector<double> log_likelihood_trace;  // one entry per E-step
};

// Two-component univariate Gaussian mixture by expectation-maximisation.
// Components are ordered so that mean1 <= mean2.
MixtureFit FitTwoNormalMixture(const std::vector<double>& samples, const MixtureOptions& options = {});

enum class ChangeClass { kSingle, kMulti };

struct GraphEdge {
  std::string from;
  std::string to;
  std::size_t count = 0;
  ChangeClass change = ChangeClass::kSingle;
};

struct TransitionGraph {
  std::set<std::string> nodes;
  std::vector<GraphEdge> edges;  // sorted by (from, to)

  std::size_t total_count() const;
};

TransitionGraph BuildTransitionGraph(const std::vector<TransitionSequence>& sequences, bool include_boundaries,
                                     const StatsFilter& filter = {});

}  // namespace supportseg
