#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "miaudit/rng.hpp"

namespace miaudit {

/// Scores paired with binary labels. Higher score means "predicted member".
struct ScoredLabels {
  std::vector<double> scores;
  std::vector<int> labels;

  // Throws kUndefinedMetric when a class is missing, kShape on length
  // mismatch, kValidation on non-finite scores or labels outside {0,1}.
  void validate() const;
};

// Mann–Whitney probability that a member outscores a nonmember, ties
// counting one half. Computed from midranks; equal to pair counting.
double auroc(const ScoredLabels& s);

struct PartialAuc {
  double standardized;  // McClish: 0.5 for the chance diagonal, 1 for perfect
  double raw;           // area over FPR ∈ [0, max_fpr]
};

PartialAuc pauroc(const ScoredLabels& s, double max_fpr = 0.05);

// Highest TPR over thresholds whose empirical FPR does not exceed fpr_cap.
// Step semantics, no interpolation; tied scores share one threshold.
double tpr_at_fpr(const ScoredLabels& s, double fpr_cap = 0.05);

struct RocPoint {
  double fpr;
  double tpr;
};

// Empirical ROC vertices from (0,0) to (1,1), one per distinct score.
std::vector<RocPoint> roc_curve(const ScoredLabels& s);

// One permutation replicate. `index` is the draw number in [0, b).
using NullDraw = std::function<double(RngStream& rng, std::size_t index)>;

struct PermutationOptions {
  std::size_t b = 1000;
  std::uint64_t master_seed = 42;
  std::size_t threads = 1;
  // Called from the aggregating thread after each completed draw.
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct PermutationResult {
  double pvalue;
  std::size_t exceed_count;  // draws >= observed
  std::vector<double> draws;
};

// p = (1 + #{draw >= observed}) / (1 + b). Draw i runs on
// RngStream(master_seed, i + 1); stream 0 is left to the caller for the
// observed statistic.
PermutationResult permutation_test(double observed, const NullDraw& null_draw,
                                   const PermutationOptions& options);

double permutation_pvalue(double observed, const NullDraw& null_draw, std::size_t b,
                          std::uint64_t master_seed, std::size_t threads = 1);

}  // namespace miaudit
