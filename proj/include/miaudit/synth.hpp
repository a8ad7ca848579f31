#pragma once

#include <cstdint>
#include <vector>

#include "miaudit/data_model.hpp"
#include "miaudit/linalg.hpp"

namespace miaudit {

struct GaussianSpec {
  Vector mean;
  Matrix covariance;
  std::size_t n = 0;

  static GaussianSpec isotropic(Vector mean, double variance, std::size_t n);
};

// Class 0 rows come from spec0 on stream 0, class 1 rows from spec1 on
// stream 1. Ids are "c0_000000", ..., "c1_000000", ...
EmbeddingSet gen_gaussian_pair(const GaussianSpec& spec0, const GaussianSpec& spec1,
                               std::uint64_t seed);

// Fréchet distance between the two Gaussians, evaluated through a Cholesky
// factor of Σ₀ (eig(LᵀΣ₁L) = eig(Σ₀Σ₁)). Independent of the PSD-square-root
// route used by the sample statistic.
double closed_form_fid(const GaussianSpec& spec0, const GaussianSpec& spec1);

// Φ(δ / (σ√2)): Bayes AUROC for two equal-variance 1D Gaussians.
double closed_form_auroc_1d(double delta, double sigma);

double standard_normal_cdf(double x);

struct TokenSynthOptions {
  std::size_t n_per_class = 1000;
  std::size_t img_len = 16;
  std::size_t inst_len = 16;
  std::size_t desp_len = 32;
  double member_shift = 0.0;  // nats added to every member logp
  std::uint64_t seed = 42;
  std::vector<double> alphas = {0.5, 1.0};
  std::size_t vocab = 16;
};

// Realized-token logp ~ min(0, −3 + 0.75·z) (+ shift for members); entropies
// come from softmax(s·z) distributions over a small vocabulary passed through
// summarize_distribution. img tokens carry no logp.
TokenRecordSet gen_token_records(const TokenSynthOptions& options);

}  // namespace miaudit
