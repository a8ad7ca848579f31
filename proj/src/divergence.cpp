#include "miaudit/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "miaudit/error.hpp"
#include "miaudit/metrics.hpp"
#include "miaudit/rng.hpp"

namespace miaudit {

namespace {

constexpr std::uint64_t kMmdStreamTag = 0x4D4D44;  // "MMD"

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

// MMD² from a precomputed pooled kernel matrix and a group assignment.
double mmd2_from_kernel(const Matrix& k, std::span<const int> group, MmdEstimator estimator) {
  const std::size_t n = group.size();
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  std::size_t nx = 0;
  for (std::size_t i = 0; i < n; ++i) nx += group[i] == 1;
  const std::size_t ny = n - nx;
  for (std::size_t i = 0; i < n; ++i) {
    auto ki = k.row(i);
    const int gi = group[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = ki[j];
      if (gi == group[j]) {
        (gi == 1 ? sxx : syy) += 2.0 * v;
      } else {
        sxy += v;
      }
    }
  }
  const double fx = static_cast<double>(nx);
  const double fy = static_cast<double>(ny);
  if (estimator == MmdEstimator::kUnbiased) {
    return sxx / (fx * (fx - 1.0)) + syy / (fy * (fy - 1.0)) - 2.0 * sxy / (fx * fy);
  }
  // Diagonal kernel values are exactly 1.
  return (sxx + fx) / (fx * fx) + (syy + fy) / (fy * fy) - 2.0 * sxy / (fx * fy);
}

}  // namespace

std::string_view to_string(MmdEstimator e) {
  return e == MmdEstimator::kUnbiased ? "unbiased" : "biased";
}

std::string_view to_string(BandwidthRule r) {
  return r == BandwidthRule::kMedian ? "median" : "median-sq";
}

MmdEstimator parse_estimator(std::string_view name) {
  if (name == "unbiased") return MmdEstimator::kUnbiased;
  if (name == "biased") return MmdEstimator::kBiased;
  throw Error(ErrorKind::kConfig, "unknown MMD estimator '" + std::string(name) + "'");
}

BandwidthRule parse_bandwidth(std::string_view name) {
  if (name == "median") return BandwidthRule::kMedian;
  if (name == "median-sq") return BandwidthRule::kMedianSq;
  throw Error(ErrorKind::kConfig, "unknown bandwidth rule '" + std::string(name) + "'");
}

double median_pairwise_distance(const Matrix& pooled) {
  const std::size_t n = pooled.rows();
  if (n < 2) throw Error(ErrorKind::kInsufficientData, "median heuristic needs >= 2 rows");
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist.push_back(std::sqrt(squared_distance(pooled.row(i), pooled.row(j))));
  const std::size_t mid = (dist.size() - 1) / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  return dist[mid];
}

double median_heuristic_gamma(const Matrix& pooled, BandwidthRule rule) {
  const double m = median_pairwise_distance(pooled);
  if (!(m > 0.0)) {
    throw Error(ErrorKind::kDegenerateInput,
                "median heuristic: median pairwise distance is 0 (degenerate bandwidth)");
  }
  return rule == BandwidthRule::kMedian ? 1.0 / m : 1.0 / (2.0 * m * m);
}

double mmd2(const Matrix& x, const Matrix& y, double gamma, MmdEstimator estimator) {
  if (x.cols() != y.cols()) throw Error(ErrorKind::kShape, "mmd2: dimension mismatch");
  const std::size_t n = x.rows();
  const std::size_t m = y.rows();
  if (estimator == MmdEstimator::kUnbiased && (n < 2 || m < 2)) {
    throw Error(ErrorKind::kInsufficientData, "mmd2: unbiased estimator needs n, m >= 2");
  }
  if (n == 0 || m == 0) throw Error(ErrorKind::kInsufficientData, "mmd2: empty sample");
  auto kernel = [gamma](std::span<const double> a, std::span<const double> b) {
    return std::exp(-gamma * squared_distance(a, b));
  };
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sxx += 2.0 * kernel(x.row(i), x.row(j));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) syy += 2.0 * kernel(y.row(i), y.row(j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) sxy += kernel(x.row(i), y.row(j));
  const double fn = static_cast<double>(n);
  const double fm = static_cast<double>(m);
  if (estimator == MmdEstimator::kUnbiased) {
    return sxx / (fn * (fn - 1.0)) + syy / (fm * (fm - 1.0)) - 2.0 * sxy / (fn * fm);
  }
  return (sxx + fn) / (fn * fn) + (syy + fm) / (fm * fm) - 2.0 * sxy / (fn * fm);
}

MmdResult mmd_test(const EmbeddingSet& e, const MmdOptions& options) {
  e.require_both_classes(2);
  const Matrix& pooled = e.vectors();
  const std::size_t n = pooled.rows();

  MmdResult result;
  result.estimator = options.estimator;
  result.bandwidth = options.bandwidth;
  result.median_distance = median_pairwise_distance(pooled);
  result.gamma = median_heuristic_gamma(pooled, options.bandwidth);

  Matrix k(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::exp(-result.gamma * squared_distance(pooled.row(i), pooled.row(j)));
      k(i, j) = v;
      k(j, i) = v;
    }

  const std::vector<int>& labels = e.labels();
  result.mmd2 = mmd2_from_kernel(k, labels, options.estimator);
  if (options.perms == 0) return result;

  PermutationOptions popts;
  popts.b = options.perms;
  popts.master_seed = derive_seed(options.seed, kMmdStreamTag);
  popts.threads = options.threads;
  popts.progress = options.progress;
  result.pvalue = permutation_test(
                      result.mmd2,
                      [&](RngStream& rng, std::size_t) {
                        std::vector<int> group = labels;
                        rng.shuffle(std::span<int>(group));
                        return mmd2_from_kernel(k, group, options.estimator);
                      },
                      popts)
                      .pvalue;
  return result;
}

FidResult frechet_distance(std::span<const double> mu0, const Matrix& cov0,
                           std::span<const double> mu1, const Matrix& cov1, double clamp_tol) {
  const std::size_t d = mu0.size();
  if (mu1.size() != d || cov0.rows() != d || cov1.rows() != d || !cov0.square() ||
      !cov1.square()) {
    throw Error(ErrorKind::kShape, "frechet_distance: dimension mismatch");
  }
  FidResult r;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = mu1[j] - mu0[j];
    r.mean_term += t * t;
  }
  const Matrix s0h = psd_sqrt(cov0, clamp_tol);
  Matrix inner = s0h * cov1 * s0h;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (inner(i, j) + inner(j, i));
      inner(i, j) = avg;
      inner(j, i) = avg;
    }
  const SymEig eig = sym_eig(inner);
  double trace_sqrt = 0.0;
  if (d > 0) {
    const double lmax = std::max(eig.values.front(), 0.0);
    for (double l : eig.values) {
      if (l < -clamp_tol * lmax || (lmax == 0.0 && l < 0.0)) {
        throw Error(ErrorKind::kNotPsd, "frechet_distance: product eigenvalue " +
                                            std::to_string(l) + " below clamp threshold");
      }
      trace_sqrt += std::sqrt(std::max(l, 0.0));
    }
  }
  r.trace_term = cov0.trace() + cov1.trace() - 2.0 * trace_sqrt;
  r.fid = r.mean_term + r.trace_term;
  return r;
}

FidResult fid(const EmbeddingSet& e, double clamp_tol) {
  e.require_both_classes(2);
  const auto [mu0, cov0] = mean_and_cov(e.rows_with_label(kNonMember));
  const auto [mu1, cov1] = mean_and_cov(e.rows_with_label(kMember));
  return frechet_distance(mu0, cov0, mu1, cov1, clamp_tol);
}

}  // namespace miaudit
