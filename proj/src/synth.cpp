#include "miaudit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "miaudit/error.hpp"
#include "miaudit/mia.hpp"
#include "miaudit/rng.hpp"

namespace miaudit {

namespace {

void check_spec(const GaussianSpec& s) {
  const std::size_t d = s.mean.size();
  if (s.covariance.rows() != d || s.covariance.cols() != d) {
    throw Error(ErrorKind::kShape, "GaussianSpec: covariance shape does not match mean");
  }
  if (!is_symmetric(s.covariance)) {
    throw Error(ErrorKind::kNotPsd, "GaussianSpec: covariance not symmetric");
  }
}

// Factor F with F·Fᵀ = Σ, via the eigendecomposition so that singular PSD
// covariances are accepted.
Matrix covariance_factor(const Matrix& cov) {
  const SymEig eig = sym_eig(cov);
  const std::size_t d = cov.rows();
  const double lmax = d ? std::max(eig.values.front(), 0.0) : 0.0;
  Matrix f(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    const double l = eig.values[j];
    if (l < -kDefaultClampTol * lmax) {
      throw Error(ErrorKind::kNotPsd, "GaussianSpec: covariance not positive semidefinite");
    }
    const double s = std::sqrt(std::max(l, 0.0));
    for (std::size_t i = 0; i < d; ++i) f(i, j) = eig.vectors(i, j) * s;
  }
  return f;
}

std::string sample_id(int cls, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%d_%06zu", cls, i);
  return buf;
}

constexpr std::uint64_t kTokenStreamTag = 0x544F4B;  // "TOK"

}  // namespace

GaussianSpec GaussianSpec::isotropic(Vector mean, double variance, std::size_t n) {
  const std::size_t d = mean.size();
  Matrix cov(d, d);
  for (std::size_t i = 0; i < d; ++i) cov(i, i) = variance;
  return {std::move(mean), std::move(cov), n};
}

EmbeddingSet gen_gaussian_pair(const GaussianSpec& spec0, const GaussianSpec& spec1,
                               std::uint64_t seed) {
  check_spec(spec0);
  check_spec(spec1);
  const std::size_t d = spec0.mean.size();
  if (spec1.mean.size() != d) throw Error(ErrorKind::kShape, "gen_gaussian_pair: dimension mismatch");
  if (d == 0) throw Error(ErrorKind::kConfig, "gen_gaussian_pair: dimension must be >= 1");

  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> data;
  data.reserve((spec0.n + spec1.n) * d);
  Vector z(d);
  for (int cls : {0, 1}) {
    const GaussianSpec& spec = cls == 0 ? spec0 : spec1;
    const Matrix f = covariance_factor(spec.covariance);
    RngStream rng(seed, static_cast<std::uint64_t>(cls));
    for (std::size_t i = 0; i < spec.n; ++i) {
      for (double& v : z) v = rng.normal();
      for (std::size_t a = 0; a < d; ++a) data.push_back(spec.mean[a] + dot(f.row(a), z));
      ids.push_back(sample_id(cls, i));
      labels.push_back(cls);
    }
  }
  const std::size_t n = ids.size();
  return EmbeddingSet(std::move(ids), std::move(labels), Matrix(n, d, std::move(data)));
}

double closed_form_fid(const GaussianSpec& spec0, const GaussianSpec& spec1) {
  check_spec(spec0);
  check_spec(spec1);
  const std::size_t d = spec0.mean.size();
  if (spec1.mean.size() != d) throw Error(ErrorKind::kShape, "closed_form_fid: dimension mismatch");
  double mean_term = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = spec1.mean[j] - spec0.mean[j];
    mean_term += t * t;
  }
  Matrix inner;
  try {
    const Matrix l = cholesky(spec0.covariance);
    inner = l.transpose() * spec1.covariance * l;
  } catch (const Error&) {
    // Singular Σ₀: factor Σ₁ instead; the spectrum of Σ₀Σ₁ is unchanged.
    const Matrix l = cholesky(spec1.covariance);
    inner = l.transpose() * spec0.covariance * l;
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (inner(i, j) + inner(j, i));
      inner(i, j) = avg;
      inner(j, i) = avg;
    }
  double trace_sqrt = 0.0;
  for (double l : sym_eig(inner).values) trace_sqrt += std::sqrt(std::max(l, 0.0));
  return mean_term + spec0.covariance.trace() + spec1.covariance.trace() - 2.0 * trace_sqrt;
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double closed_form_auroc_1d(double delta, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::kConfig, "closed_form_auroc_1d: sigma must be > 0");
  return standard_normal_cdf(delta / (sigma * std::numbers::sqrt2));
}

TokenRecordSet gen_token_records(const TokenSynthOptions& options) {
  if (options.img_len == 0 || options.inst_len == 0 || options.desp_len == 0) {
    throw Error(ErrorKind::kConfig, "gen_token_records: region lengths must be >= 1");
  }
  if (options.vocab < 2) throw Error(ErrorKind::kConfig, "gen_token_records: vocab must be >= 2");
  TokenRecordSet out;
  out.alphas = options.alphas;
  std::ranges::sort(out.alphas);
  if (std::adjacent_find(out.alphas.begin(), out.alphas.end()) != out.alphas.end()) {
    throw Error(ErrorKind::kConfig, "gen_token_records: alphas must be distinct");
  }
  for (double a : out.alphas)
    if (!(a > 0.0)) throw Error(ErrorKind::kConfig, "gen_token_records: alphas must be > 0");

  const std::uint64_t seed = derive_seed(options.seed, kTokenStreamTag);
  std::vector<double> logits(options.vocab);
  std::size_t stream = 0;
  for (int cls : {0, 1}) {
    for (std::size_t i = 0; i < options.n_per_class; ++i, ++stream) {
      RngStream rng(seed, stream);
      TokenSample sample;
      sample.id = sample_id(cls, i);
      sample.label = cls;
      const double shift = cls == 1 ? options.member_shift : 0.0;
      auto make_token = [&](bool with_logp) {
        const double scale = 0.5 + 2.0 * rng.uniform();
        for (double& l : logits) l = scale * rng.normal();
        double m = *std::ranges::max_element(logits);
        double s = 0.0;
        for (double l : logits) s += std::exp(l - m);
        const double lse = m + std::log(s);
        for (double& l : logits) l -= lse;
        TokenStat t = summarize_distribution(logits, std::nullopt, out.alphas);
        const double z = rng.normal();
        if (with_logp) t.logp = std::min(0.0, -3.0 + 0.75 * z + shift);
        return t;
      };
      const std::pair<RegionId, std::size_t> layout[] = {{RegionId::kImg, options.img_len},
                                                         {RegionId::kInst, options.inst_len},
                                                         {RegionId::kDesp, options.desp_len}};
      for (const auto& [region, len] : layout) {
        TokenList list;
        list.reserve(len);
        for (std::size_t t = 0; t < len; ++t) list.push_back(make_token(region != RegionId::kImg));
        sample.region(region) = std::move(list);
      }
      out.samples.push_back(std::move(sample));
    }
  }
  out.validate();
  return out;
}

}  // namespace miaudit
