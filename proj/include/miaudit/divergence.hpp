#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>

#include "miaudit/data_model.hpp"
#include "miaudit/linalg.hpp"

namespace miaudit {

enum class MmdEstimator { kUnbiased, kBiased };
enum class BandwidthRule {
  kMedian,    // γ = 1 / median pairwise distance
  kMedianSq,  // γ = 1 / (2 · median²)
};

std::string_view to_string(MmdEstimator e);
std::string_view to_string(BandwidthRule r);
MmdEstimator parse_estimator(std::string_view name);
BandwidthRule parse_bandwidth(std::string_view name);

// Lower median of all n(n−1)/2 pairwise Euclidean distances between rows.
double median_pairwise_distance(const Matrix& pooled);
double median_heuristic_gamma(const Matrix& pooled, BandwidthRule rule = BandwidthRule::kMedian);

// k(x, y) = exp(−γ‖x − y‖²), summed directly over rows of x and y.
double mmd2(const Matrix& x, const Matrix& y, double gamma, MmdEstimator estimator);

struct MmdResult {
  double mmd2 = 0.0;
  double gamma = 0.0;
  double median_distance = 0.0;
  double pvalue = 1.0;
  MmdEstimator estimator = MmdEstimator::kUnbiased;
  BandwidthRule bandwidth = BandwidthRule::kMedian;
};

struct MmdOptions {
  std::size_t perms = 1000;
  std::uint64_t seed = 42;
  MmdEstimator estimator = MmdEstimator::kUnbiased;
  BandwidthRule bandwidth = BandwidthRule::kMedian;
  std::size_t threads = 1;
  std::function<void(std::size_t, std::size_t)> progress;
};

// γ from the pooled data is held fixed while group labels are permuted.
MmdResult mmd_test(const EmbeddingSet& e, const MmdOptions& options = {});

struct FidResult {
  double fid = 0.0;
  double mean_term = 0.0;
  double trace_term = 0.0;

  double reported() const { return fid < 0.0 ? 0.0 : fid; }
};

// ‖μ₁−μ₀‖² + Tr(Σ₀) + Tr(Σ₁) − 2·Tr((Σ₀^{1/2} Σ₁ Σ₀^{1/2})^{1/2}).
FidResult frechet_distance(std::span<const double> mu0, const Matrix& cov0,
                           std::span<const double> mu1, const Matrix& cov1,
                           double clamp_tol = kDefaultClampTol);

// Class 0 supplies (μ₀, Σ₀), class 1 supplies (μ₁, Σ₁).
FidResult fid(const EmbeddingSet& e, double clamp_tol = kDefaultClampTol);

}  // namespace miaudit
