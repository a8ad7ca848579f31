#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "miaudit/data_model.hpp"
#include "miaudit/linalg.hpp"
#include "miaudit/metrics.hpp"
#include "miaudit/rng.hpp"

namespace miaudit {

struct LogRegOptions {
  double c = 1.0;
  double tol = 1e-6;  // on the inf-norm of the objective gradient
  std::size_t max_iter = 100;
};

struct LogRegModel {
  Vector weights;
  double intercept = 0.0;
  bool converged = false;
  std::size_t iterations = 0;

  double decision(std::span<const double> x) const { return dot(weights, x) + intercept; }
};

// Objective (1/2)‖w‖² + C·Σ log(1 + exp(−ỹᵢ(w·xᵢ + b))) with ỹ = 2y − 1; the
// intercept is not penalized. `params` packs (w₀..w_{d−1}, b).
double logreg_objective(const Matrix& x, std::span<const int> y, double c,
                        std::span<const double> params);
Vector logreg_gradient(const Matrix& x, std::span<const int> y, double c,
                       std::span<const double> params);

// Damped Newton from zero initialization with Armijo backtracking. Falls back
// to a gradient step when the Hessian is not numerically positive definite.
// Non-convergence is reported through `converged`, not thrown.
LogRegModel fit_logreg(const Matrix& x, std::span<const int> y, const LogRegOptions& options = {});

// Fold index per sample. Within each class the sample indices are shuffled
// with `rng` and dealt to folds round-robin.
std::vector<int> stratified_kfold(std::span<const int> labels, std::size_t k, RngStream& rng);
std::vector<int> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

struct CvScores {
  std::vector<double> scores;  // out-of-fold decision values
  std::vector<int> folds;
  std::size_t nonconverged_fits = 0;
};

// k-fold out-of-fold decision values. Each sample is scored by the model fit
// on the other k−1 folds.
CvScores cross_val_scores(const Matrix& x, std::span<const int> labels, std::size_t k,
                          const LogRegOptions& options, RngStream& strat_rng);

enum class C2stPermutationMode {
  kFullPipeline,  // permute labels, re-stratify, refit every fold
  kFixedScores,   // permute labels against the observed OOF scores
};

struct C2stOptions {
  std::size_t folds = 5;
  double c = 1.0;
  std::size_t perms = 1000;
  std::uint64_t seed = 42;
  bool l2norm = true;
  C2stPermutationMode mode = C2stPermutationMode::kFullPipeline;
  std::size_t threads = 1;
  double tol = 1e-6;
  std::size_t max_iter = 100;
  std::function<void(std::size_t, std::size_t)> progress;
};

struct C2stResult {
  // Canonical order: samples sorted by id.
  std::vector<std::string> ids;
  ScoredLabels oof;
  std::vector<int> fold_assignment;
  double auroc = 0.0;
  double pauroc05 = 0.0;
  double pauroc05_raw = 0.0;
  double tpr05 = 0.0;
  double pvalue = 1.0;
  std::size_t nonconverged_fits = 0;
};

C2stResult c2st(const EmbeddingSet& e, const C2stOptions& options = {});

}  // namespace miaudit
