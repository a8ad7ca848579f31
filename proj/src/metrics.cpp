#include "miaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>

#include "miaudit/error.hpp"
#include "miaudit/parallel.hpp"

namespace miaudit {

namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts class_counts(const ScoredLabels& s) {
  Counts c;
  for (int l : s.labels) (l == 1 ? c.pos : c.neg)++;
  return c;
}

// Indices sorted by descending score.
std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

void ScoredLabels::validate() const {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::kShape, "scores/labels length mismatch: " +
                                       std::to_string(scores.size()) + " vs " +
                                       std::to_string(labels.size()));
  }
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++pos;
    } else if (labels[i] == 0) {
      ++neg;
    } else {
      throw Error(ErrorKind::kValidation, "label outside {0,1} at index " + std::to_string(i));
    }
    if (!std::isfinite(scores[i])) {
      throw Error(ErrorKind::kValidation, "non-finite score at index " + std::to_string(i));
    }
  }
  if (pos == 0 || neg == 0) {
    throw Error(ErrorKind::kUndefinedMetric, "ROC metric undefined: members=" +
                                                 std::to_string(pos) +
                                                 " nonmembers=" + std::to_string(neg));
  }
}

double auroc(const ScoredLabels& s) {
  s.validate();
  const std::size_t n = s.scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Twice the member rank sum, with 1-based midranks; exact in integers.
  std::uint64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && s.scores[idx[j + 1]] == s.scores[idx[i]]) ++j;
    const std::uint64_t twice_midrank = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (s.labels[idx[k]] == 1) twice_rank_sum += twice_midrank;
    i = j + 1;
  }
  const Counts c = class_counts(s);
  // 2U = 2·R₁ − n₁(n₁+1)
  const std::uint64_t twice_u = twice_rank_sum - c.pos * (c.pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(c.pos) * c.neg);
}

std::vector<RocPoint> roc_curve(const ScoredLabels& s) {
  s.validate();
  const Counts c = class_counts(s);
  const auto idx = descending_order(s.scores);
  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double v = s.scores[idx[i]];
    while (i < idx.size() && s.scores[idx[i]] == v) {
      (s.labels[idx[i]] == 1 ? tp : fp)++;
      ++i;
    }
    pts.push_back({static_cast<double>(fp) / c.neg, static_cast<double>(tp) / c.pos});
  }
  return pts;
}

PartialAuc pauroc(const ScoredLabels& s, double max_fpr) {
  if (!(max_fpr > 0.0 && max_fpr <= 1.0)) {
    throw Error(ErrorKind::kConfig, "pauroc: max_fpr must lie in (0, 1]");
  }
  const auto pts = roc_curve(s);
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const RocPoint a = pts[k - 1];
    RocPoint b = pts[k];
    if (a.fpr >= max_fpr) break;
    if (b.fpr > max_fpr) {
      const double t = (max_fpr - a.fpr) / (b.fpr - a.fpr);
      b = {max_fpr, a.tpr + t * (b.tpr - a.tpr)};
    }
    area += 0.5 * (b.fpr - a.fpr) * (a.tpr + b.tpr);
  }
  const double a_min = 0.5 * max_fpr * max_fpr;
  const double a_max = max_fpr;
  return {0.5 * (1.0 + (area - a_min) / (a_max - a_min)), area};
}

double tpr_at_fpr(const ScoredLabels& s, double fpr_cap) {
  if (!(fpr_cap >= 0.0 && fpr_cap < 1.0)) {
    throw Error(ErrorKind::kConfig, "tpr_at_fpr: fpr_cap must lie in [0, 1)");
  }
  double best = 0.0;
  for (const RocPoint& p : roc_curve(s))
    if (p.fpr <= fpr_cap) best = std::max(best, p.tpr);
  return best;
}

PermutationResult permutation_test(double observed, const NullDraw& null_draw,
                                   const PermutationOptions& options) {
  if (options.b < 1) throw Error(ErrorKind::kConfig, "permutation test needs b >= 1");
  PermutationResult result{0.0, 0, std::vector<double>(options.b)};
  std::mutex progress_mutex;
  std::size_t done = 0;
  parallel_for(options.b, options.threads, [&](std::size_t i) {
    RngStream rng(options.master_seed, i + 1);
    try {
      result.draws[i] = null_draw(rng, i);
    } catch (const Error& e) {
      throw Error(e.kind(), "null draw " + std::to_string(i) + ": " + e.what(), e.code());
    }
    if (options.progress) {
      std::lock_guard lock(progress_mutex);
      options.progress(++done, options.b);
    }
  });
  for (double d : result.draws)
    if (d >= observed) ++result.exceed_count;
  result.pvalue = static_cast<double>(1 + result.exceed_count) / static_cast<double>(1 + options.b);
  return result;
}

double permutation_pvalue(double observed, const NullDraw& null_draw, std::size_t b,
                          std::uint64_t master_seed, std::size_t threads) {
  PermutationOptions opts;
  opts.b = b;
  opts.master_seed = master_seed;
  opts.threads = threads;
  return permutation_test(observed, null_draw, opts).pvalue;
}

}  // namespace miaudit
