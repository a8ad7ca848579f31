#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/corrupt_emb1.hpp"
#include "miaudit/c2st.hpp"
#include "miaudit/cli.hpp"
#include "miaudit/data_model.hpp"
#include "miaudit/divergence.hpp"
#include "miaudit/error.hpp"
#include "miaudit/linalg.hpp"
#include "miaudit/metrics.hpp"
#include "miaudit/mia.hpp"
#include "miaudit/projection.hpp"
#include "miaudit/rng.hpp"
#include "miaudit/synth.hpp"

using namespace miaudit;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = MIAUDIT_FIXTURE_DIR;

// Each check appends a failure note when its condition does not hold.
struct Outcome {
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

double pair_count_auroc(const ScoredLabels& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.scores.size(); ++j) {
      if (s.labels[j] != 0) continue;
      pairs += 1.0;
      if (s.scores[i] > s.scores[j]) wins += 1.0;
      else if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-gamma * s);
}

double direct_mmd2(const Matrix& x, const Matrix& y, double gamma, bool unbiased) {
  const double n = static_cast<double>(x.rows()), m = static_cast<double>(y.rows());
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.rows(); ++j)
      if (!unbiased || i != j) kxx += rbf(x.row(i), x.row(j), gamma);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.rows(); ++j)
      if (!unbiased || i != j) kyy += rbf(y.row(i), y.row(j), gamma);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < y.rows(); ++j) kxy += rbf(x.row(i), y.row(j), gamma);
  if (unbiased) return kxx / (n * (n - 1)) + kyy / (m * (m - 1)) - 2.0 * kxy / (n * m);
  return kxx / (n * n) + kyy / (m * m) - 2.0 * kxy / (n * m);
}

Matrix normal_matrix(std::size_t n, std::size_t d, double shift, RngStream& rng) {
  Matrix m(n, d);
  for (double& v : m.data()) v = rng.normal() + shift;
  return m;
}

EmbeddingSet from_classes(const Matrix& members, const Matrix& nonmembers) {
  std::vector<std::string> ids;
  std::vector<int> labels;
  Matrix all(members.rows() + nonmembers.rows(), members.cols());
  std::size_t r = 0;
  for (std::size_t i = 0; i < members.rows(); ++i, ++r) {
    ids.push_back("m" + std::to_string(i));
    labels.push_back(kMember);
    std::ranges::copy(members.row(i), all.row(r).begin());
  }
  for (std::size_t i = 0; i < nonmembers.rows(); ++i, ++r) {
    ids.push_back("n" + std::to_string(i));
    labels.push_back(kNonMember);
    std::ranges::copy(nonmembers.row(i), all.row(r).begin());
  }
  return EmbeddingSet(ids, labels, all);
}

EmbeddingSet labelled(const Matrix& x, const std::vector<int>& labels) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < x.rows(); ++i) ids.push_back("s" + std::to_string(i));
  return EmbeddingSet(ids, labels, x);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  return dot(a, b) / (norm2(a) * norm2(b));
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Flat-Dirichlet draw as log-probabilities.
Vector dirichlet_logprobs(RngStream& rng, std::size_t v) {
  Vector lp(v);
  double s = 0.0;
  for (double& x : lp) {
    x = -std::log(rng.uniform_open());
    s += x;
  }
  for (double& x : lp) x = std::log(x / s);
  return lp;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct CliRun {
  int code;
  std::string out;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str()};
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

Outcome auroc_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RngStream rng(1000 + seed, 0);
    const std::size_t n = 2 + rng.below(199);
    ScoredLabels s;
    // Coarse integer scores force plenty of ties.
    const std::uint64_t levels = 1 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i) {
      s.labels.push_back(i < 1 ? 1 : i < 2 ? 0 : static_cast<int>(rng.below(2)));
      s.scores.push_back(static_cast<double>(rng.below(levels)));
    }
    if (auroc(s) != pair_count_auroc(s)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  o.expect(mismatches == 0, std::to_string(mismatches) + " mismatches");
  o.expect(secs < 5.0, "runtime " + fmt("%.2f s", secs));
  o.detail = "200 instances, " + std::to_string(mismatches) + " mismatches, " + fmt("%.2f s", secs);
  return o;
}

Outcome c2st_null() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  int auroc_ok = 0, p_ok = 0;
  double lo = 1.0, hi = 0.0, pmin = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EmbeddingSet e = gen_gaussian_pair(GaussianSpec::isotropic(Vector(8, 0.0), 1.0, 500),
                                             GaussianSpec::isotropic(Vector(8, 0.0), 1.0, 500),
                                             500 + seed);
    C2stOptions opts;
    opts.perms = 200;
    opts.seed = seed;
    const C2stResult r = c2st(e, opts);
    auroc_ok += r.auroc >= 0.44 && r.auroc <= 0.56;
    p_ok += r.pvalue > 0.05;
    lo = std::min(lo, r.auroc);
    hi = std::max(hi, r.auroc);
    pmin = std::min(pmin, r.pvalue);
  }
  const double secs = seconds_since(t0);
  o.expect(auroc_ok >= 18, "AUROC in band " + std::to_string(auroc_ok) + "/20");
  o.expect(p_ok >= 18, "p > 0.05 in " + std::to_string(p_ok) + "/20");
  o.expect(secs < 300.0, "runtime " + fmt("%.1f s", secs));
  o.detail = "AUROC in [0.44,0.56] " + std::to_string(auroc_ok) + "/20 (range " + fmt("%.3f", lo) +
             ".." + fmt("%.3f", hi) + "), p > 0.05 " + std::to_string(p_ok) + "/20 (min " +
             fmt("%.3f", pmin) + "), " + fmt("%.1f s", secs);
  return o;
}

Outcome c2st_power() {
  Outcome o;
  const EmbeddingSet e = gen_gaussian_pair(GaussianSpec::isotropic(Vector{0.0}, 1.0, 1000),
                                           GaussianSpec::isotropic(Vector{1.0}, 1.0, 1000), 7);
  C2stOptions opts;
  opts.perms = 20;
  opts.l2norm = false;  // unit-normalizing a 1D sample collapses it to its sign
  const C2stResult r = c2st(e, opts);
  // Bayes AUROC Φ(δ/(σ√2)) via erfc, independent of the library's normal CDF.
  const double bayes = 0.5 * std::erfc(-1.0 / std::sqrt(2.0) / std::sqrt(2.0));
  o.expect(std::abs(r.auroc - bayes) <= 0.03, "AUROC " + fmt("%.4f", r.auroc));
  o.detail = "OOF AUROC " + fmt("%.4f", r.auroc) + " vs Bayes " + fmt("%.4f", bayes) + " (tol 0.03)";
  return o;
}

Outcome fid_closed_form() {
  Outcome o;
  // Anisotropic, correlated covariances built as A Aᵀ + 0.5 I.
  RngStream rng(77, 0);
  auto random_cov = [&](std::size_t d) {
    const Matrix a = normal_matrix(d, d, 0.0, rng);
    Matrix c = a * a.transpose();
    for (std::size_t i = 0; i < d; ++i) c(i, i) += 0.5;
    return c;
  };
  Vector mu0(8), mu1(8);
  for (std::size_t j = 0; j < 8; ++j) {
    mu0[j] = rng.normal();
    mu1[j] = rng.normal();
  }
  const GaussianSpec s0{mu0, random_cov(8), 50000};
  const GaussianSpec s1{mu1, random_cov(8), 50000};
  const double sample = fid(gen_gaussian_pair(s0, s1, 78)).fid;
  const double exact = closed_form_fid(s0, s1);
  const double rel = std::abs(sample - exact) / exact;
  o.expect(rel <= 0.05, "relative error " + fmt("%.4f", rel));

  // 1D moments injected directly: (0,1) vs (1,4) gives 1 + 1 + 4 − 2·2 = 2.
  const double one_d = frechet_distance(Vector{0.0}, Matrix{{1.0}}, Vector{1.0}, Matrix{{4.0}}).fid;
  o.expect(std::abs(one_d - 2.0) <= 1e-8, "1D case " + fmt("%.12g", one_d));
  o.detail = "d=8 sample " + fmt("%.4f", sample) + " vs closed form " + fmt("%.4f", exact) +
             " (rel " + fmt("%.4f", rel) + "); 1D " + fmt("%.12f", one_d);
  return o;
}

Outcome fid_properties() {
  Outcome o;
  RngStream rng(80, 0);
  const Matrix x = normal_matrix(300, 6, 0.0, rng);
  const Matrix y = normal_matrix(300, 6, 0.3, rng);
  const double same = fid(from_classes(x, x)).fid;
  const double fxy = fid(from_classes(x, y)).fid;
  const double fyx = fid(from_classes(y, x)).fid;
  const Matrix a = normal_matrix(6, 6, 0.0, rng);
  const Matrix q = sym_eig(a + a.transpose()).vectors;
  const double rot = fid(from_classes(x * q, y * q)).fid;
  o.expect(std::abs(same) <= 1e-8, "identical " + fmt("%.3g", same));
  o.expect(std::abs(fxy - fyx) <= 1e-8, "swap " + fmt("%.3g", fxy - fyx));
  const double rel = std::abs(rot - fxy) / std::abs(fxy);
  o.expect(rel <= 1e-6, "rotation rel " + fmt("%.3g", rel));
  o.detail = "identical " + fmt("%.2e", same) + ", swap diff " + fmt("%.2e", std::abs(fxy - fyx)) +
             ", rotation rel " + fmt("%.2e", rel);
  return o;
}

Outcome mmd_oracle() {
  Outcome o;
  RngStream rng(90, 0);
  const Matrix x = normal_matrix(64, 4, 0.0, rng);
  const Matrix y = normal_matrix(64, 4, 0.4, rng);
  double worst = 0.0;
  for (double gamma : {0.05, 0.25, 1.0}) {
    worst = std::max(worst, std::abs(mmd2(x, y, gamma, MmdEstimator::kUnbiased) -
                                     direct_mmd2(x, y, gamma, true)));
    worst = std::max(worst, std::abs(mmd2(x, y, gamma, MmdEstimator::kBiased) -
                                     direct_mmd2(x, y, gamma, false)));
  }
  o.expect(worst <= 1e-12, "direct-sum error " + fmt("%.3g", worst));
  const double self = mmd2(x, x, 0.25, MmdEstimator::kBiased);
  o.expect(std::abs(self) <= 1e-12, "biased identical " + fmt("%.3g", self));

  const auto t0 = std::chrono::steady_clock::now();
  int rejections = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    RngStream r(91, static_cast<std::uint64_t>(t));
    const EmbeddingSet e = from_classes(normal_matrix(25, 3, 0.0, r), normal_matrix(25, 3, 0.0, r));
    MmdOptions opts;
    opts.perms = 200;
    opts.seed = 1000 + static_cast<std::uint64_t>(t);
    rejections += mmd_test(e, opts).pvalue <= 0.05;
  }
  const double frac = static_cast<double>(rejections) / trials;
  o.expect(frac >= 0.02 && frac <= 0.09, "null rejection fraction " + fmt("%.3f", frac));
  o.detail = "direct-sum max error " + fmt("%.2e", worst) + ", biased self " + fmt("%.2e", self) +
             ", null P(p<=0.05) " + fmt("%.3f", frac) + " over 200 trials (" +
             fmt("%.1f s", seconds_since(t0)) + ")";
  return o;
}

Outcome logreg_gradient_check() {
  Outcome o;
  double worst_stat = 0.0, worst_fd = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(300 + seed, 0);
    const std::size_t n = 40 + rng.below(40), d = 2 + rng.below(4);
    Matrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i % 2);
      for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal() + (y[i] ? 0.8 : 0.0);
    }
    const LogRegModel m = fit_logreg(x, y);
    Vector p = m.weights;
    p.push_back(m.intercept);
    o.expect(m.converged, "seed " + std::to_string(seed) + " did not converge");
    worst_stat = std::max(worst_stat, inf_norm(logreg_gradient(x, y, 1.0, p)));

    // Compare against central differences at a point where the gradient is O(1).
    Vector q = p;
    for (std::size_t j = 0; j < q.size(); ++j) q[j] += 0.25 * rng.normal();
    const Vector g = logreg_gradient(x, y, 1.0, q);
    for (std::size_t j = 0; j < q.size(); ++j) {
      Vector hi = q, lo = q;
      hi[j] += 1e-5;
      lo[j] -= 1e-5;
      const double fd = (logreg_objective(x, y, 1.0, hi) - logreg_objective(x, y, 1.0, lo)) / 2e-5;
      worst_fd = std::max(worst_fd, std::abs(fd - g[j]) / std::max(1.0, std::abs(g[j])));
    }
  }
  o.expect(worst_stat <= 1e-6, "stationarity " + fmt("%.3g", worst_stat));
  o.expect(worst_fd <= 1e-4, "finite-difference rel " + fmt("%.3g", worst_fd));
  o.detail = "max |grad|_inf at optimum " + fmt("%.2e", worst_stat) + ", max FD rel error " +
             fmt("%.2e", worst_fd) + " over 20 instances";
  return o;
}

double dim1_auroc(const EmbeddingSet& raw) {
  const EmbeddingSet e = raw.l2_normalized();
  const ProjectionBasis b = build_projection_basis(e);
  ScoredLabels s;
  s.labels = e.labels();
  for (const auto& p : project(e, b)) s.scores.push_back(p.dim1);
  return auroc(s);
}

Outcome projection_basis() {
  Outcome o;
  double worst_orth = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream rng(400 + seed, 0);
    const Matrix x = normal_matrix(60, 6, 0.0, rng);
    std::vector<int> labels(60);
    for (std::size_t i = 0; i < 60; ++i) labels[i] = static_cast<int>(i % 2);
    const ProjectionBasis b = build_projection_basis(labelled(x, labels));
    const Vector* axes[3] = {&b.dim1, &b.dim2, &b.dim3};
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j)
        worst_orth = std::max(worst_orth, std::abs(dot(*axes[i], *axes[j]) - (i == j ? 1.0 : 0.0)));
  }
  o.expect(worst_orth <= 1e-10, "orthonormality " + fmt("%.3g", worst_orth));

  // Diagonal within-class scatter: the Fisher axis is S_w⁻¹Δμ componentwise.
  double worst_cos = 1.0;
  {
    const Matrix x{{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {4, 3}, {2, 3}, {3, 4}, {3, 2}};
    worst_cos = std::min(worst_cos, cosine(fisher_axis(labelled(x, {0, 0, 0, 0, 1, 1, 1, 1}), 0.0),
                                           Vector{3.0 / 4.0, 3.0 / 4.0}));
  }
  {
    // S_w = diag(1, 4, 0.25), Δμ = (1, 2, −1) → w ∝ (1, 0.5, −4).
    const double a = 0.5, b = 1.0, c = 0.25;
    const Matrix x{{a, 0, 0},  {-a, 0, 0},      {0, b, 0},  {0, -b, 0},      {0, 0, c},
                   {0, 0, -c}, {1 + a, 2, -1},  {1 - a, 2, -1}, {1, 2 + b, -1}, {1, 2 - b, -1},
                   {1, 2, -1 + c}, {1, 2, -1 - c}};
    const EmbeddingSet e = labelled(x, {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1});
    worst_cos = std::min(worst_cos, cosine(fisher_axis(e, 0.0), Vector{1.0, 0.5, -4.0}));
  }
  o.expect(worst_cos >= 1.0 - 1e-8, "Fisher cosine " + fmt("%.12f", worst_cos));

  const double biased = dim1_auroc(read_embeddings(kFixtures / "biased.emb1"));
  const double aligned = dim1_auroc(read_embeddings(kFixtures / "aligned.emb1"));
  o.expect(biased >= 0.9, "biased dim1 AUROC " + fmt("%.4f", biased));
  o.expect(aligned >= 0.44 && aligned <= 0.56, "aligned dim1 AUROC " + fmt("%.4f", aligned));
  o.detail = "orthonormality " + fmt("%.2e", worst_orth) + ", Fisher cosine " +
             fmt("%.12f", worst_cos) + ", dim1 AUROC biased " + fmt("%.4f", biased) + " aligned " +
             fmt("%.4f", aligned);
  return o;
}

Outcome renyi() {
  Outcome o;
  double worst_uniform = 0.0;
  for (std::size_t v : {2u, 7u, 100u, 5000u}) {
    const Vector lp(v, -std::log(static_cast<double>(v)));
    for (double a : {0.5, 0.999, 1.0, 2.0})
      worst_uniform = std::max(worst_uniform, std::abs(renyi_entropy(lp, a) - std::log(double(v))));
  }
  o.expect(worst_uniform <= 1e-12, "uniform " + fmt("%.3g", worst_uniform));
  const double ninf = -std::numeric_limits<double>::infinity();
  for (double a : {0.5, 1.0, 2.0})
    o.expect(renyi_entropy(Vector{ninf, 0.0, ninf, ninf}, a) == 0.0, "one-hot nonzero");

  RngStream rng(500, 0);
  int order_violations = 0;
  double worst_shannon = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Vector lp = dirichlet_logprobs(rng, 2 + rng.below(999));
    const double h1 = renyi_entropy(lp, 1.0);
    order_violations += renyi_entropy(lp, 0.5) < h1 - 1e-12;
    // Shannon entropy computed directly.
    double shannon = 0.0;
    for (double l : lp) shannon -= std::exp(l) * l;
    worst_shannon = std::max(worst_shannon, std::abs(renyi_entropy(lp, 0.999) - shannon));
  }
  o.expect(order_violations == 0, std::to_string(order_violations) + " order violations");
  o.expect(worst_shannon <= 1e-3, "H_0.999 vs Shannon " + fmt("%.3g", worst_shannon));

  const Vector p{std::log(0.5), std::log(0.25), std::log(0.25)};
  const double h05 = renyi_entropy(p, 0.5);
  const double worked = 2.0 * std::log(1.70711);
  o.expect(std::abs(h05 - worked) <= 1e-4, "worked value " + fmt("%.6f", h05));
  o.detail = "uniform err " + fmt("%.2e", worst_uniform) + ", order violations " +
             std::to_string(order_violations) + "/1000, max |H_0.999 - H| " +
             fmt("%.2e", worst_shannon) + ", H_0.5(0.5,0.25,0.25) " + fmt("%.6f", h05) +
             " vs 2ln(1.70711) " + fmt("%.6f", worked);
  return o;
}

Outcome score_consistency() {
  Outcome o;
  RngStream rng(600, 0);
  double worst = 0.0;
  int extremum_bad = 0, perm_bad = 0;
  const std::vector<double> alphas{0.5, 1.0};
  const auto methods = default_methods();
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng.below(80);
    TokenList toks;
    double mean = 0.0, mn = 0.0, mx[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double lp = -6.0 * rng.uniform();
      const Vector h{4.0 * rng.uniform(), 3.0 * rng.uniform()};
      toks.push_back({lp, h});
      mean += lp;
      mn = i ? std::min(mn, lp) : lp;
      for (int a = 0; a < 2; ++a) mx[a] = i ? std::max(mx[a], h[a]) : h[a];
    }
    mean /= static_cast<double>(n);
    const double mk = min_k_score(toks, 100);
    worst = std::max(worst, std::abs(mk - mean));
    worst = std::max(worst, std::abs(mk + std::log(-perplexity_score(toks))));
    extremum_bad += min_k_score(toks, 0) != mn;
    for (std::size_t a = 0; a < 2; ++a) extremum_bad += max_renyi_score(toks, a, 0) != -mx[a];

    TokenList shuffled = toks;
    rng.shuffle(std::span<TokenStat>(shuffled));
    for (const auto& m : methods) perm_bad += score(m, shuffled, alphas) != score(m, toks, alphas);
  }
  o.expect(worst <= 1e-12, "mean/perplexity identity " + fmt("%.3g", worst));
  o.expect(extremum_bad == 0, std::to_string(extremum_bad) + " extremum mismatches");
  o.expect(perm_bad == 0, std::to_string(perm_bad) + " order-dependent scores");
  o.detail = "500 token lists, identity err " + fmt("%.2e", worst) + ", extremum mismatches " +
             std::to_string(extremum_bad) + ", order-dependent " + std::to_string(perm_bad);
  return o;
}

Outcome grid_chance_level() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  TokenSynthOptions opts;
  opts.n_per_class = 1000;
  const auto methods = default_methods();
  const AttackGrid g = evaluate_grid(gen_token_records(opts), methods, kAllSlices);
  double alo = 1.0, ahi = 0.0, tlo = 1.0, thi = 0.0;
  int applicable = 0;
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t s = 0; s < kAllSlices.size(); ++s) {
      const GridCell& c = g.at(m, s);
      if (!c.applicable) continue;
      ++applicable;
      alo = std::min(alo, c.auroc);
      ahi = std::max(ahi, c.auroc);
      tlo = std::min(tlo, c.tpr05);
      thi = std::max(thi, c.tpr05);
    }
  o.expect(alo >= 0.45 && ahi <= 0.55, "AUROC range " + fmt("%.3f", alo) + ".." + fmt("%.3f", ahi));
  o.expect(tlo >= 0.02 && thi <= 0.09, "TPR range " + fmt("%.3f", tlo) + ".." + fmt("%.3f", thi));

  opts.member_shift = 1.0;
  const AttackGrid shifted = evaluate_grid(gen_token_records(opts), methods, kAllSlices);
  double mk_lo = 1.0;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (methods[m].family != MethodFamily::kMinK) continue;
    for (std::size_t s = 0; s < kAllSlices.size(); ++s)
      if (shifted.at(m, s).applicable) mk_lo = std::min(mk_lo, shifted.at(m, s).auroc);
  }
  o.expect(mk_lo >= 0.9, "shifted Min-K AUROC " + fmt("%.3f", mk_lo));
  const double secs = seconds_since(t0);
  o.expect(secs < 120.0, "runtime " + fmt("%.1f s", secs));
  o.detail = std::to_string(applicable) + " applicable cells, AUROC " + fmt("%.3f", alo) + ".." +
             fmt("%.3f", ahi) + ", TPR@5% " + fmt("%.3f", tlo) + ".." + fmt("%.3f", thi) +
             ", shifted Min-K min " + fmt("%.3f", mk_lo) + ", " + fmt("%.1f s", secs);
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "miaudit_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string biased = (kFixtures / "biased.emb1").string();

  const CliRun a1 = cli({"audit", "-i", biased, "--perms", "100", "-q"});
  const CliRun a2 = cli({"audit", "-i", biased, "--perms", "100", "-q"});
  const CliRun a4 = cli({"audit", "-i", biased, "--perms", "100", "-q", "--threads", "4"});
  o.expect(a1.code == 0 && a2.code == 0 && a4.code == 0, "audit exit code");
  o.expect(mask_timestamp(a1.out) == mask_timestamp(a2.out), "audit rerun differs");
  o.expect(mask_timestamp(a1.out) == mask_timestamp(a4.out), "audit threads differ");

  const std::string tokens = (dir / "tokens.jsonl").string();
  o.expect(cli({"synth", "tokens", "--n", "300", "--seed", "11", "-o", tokens}).code == 0,
           "synth tokens");
  const CliRun t1 = cli({"attack", "-i", tokens});
  const CliRun t2 = cli({"attack", "-i", tokens});
  const CliRun t3 = cli({"attack", "-i", tokens, "--threads", "3"});
  o.expect(t1.code == 0, "attack exit code");
  o.expect(mask_timestamp(t1.out) == mask_timestamp(t2.out), "attack rerun differs");
  o.expect(mask_timestamp(t1.out) == mask_timestamp(t3.out), "attack threads differ");

  std::string coords[2], basis[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path out = dir / ("proj" + std::to_string(k) + ".csv");
    o.expect(cli({"project", "-i", biased, "-o", out.string()}).code == 0, "project exit code");
    coords[k] = slurp(out);
    basis[k] = mask_timestamp(slurp(out.string() + ".basis.json"));
  }
  o.expect(!coords[0].empty() && coords[0] == coords[1], "project coordinates differ");
  o.expect(basis[0] == basis[1], "project basis differs");
  fs::remove_all(dir);
  o.detail = "audit x3 (threads 1/1/4), attack x3 (threads 1/1/3), project x2: masked bytes equal";
  return o;
}

Outcome format_robustness() {
  Outcome o;
  std::set<FormatCode> seen;
  int accepted = 0, wrong = 0;
  const auto corpus = testing::corrupt_emb1_corpus();
  for (const auto& c : corpus) {
    try {
      read_emb1(c.bytes);
      ++accepted;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kFormat || e.code() != c.expected) ++wrong;
      seen.insert(e.code());
    }
  }
  o.expect(corpus.size() == 10, "corpus size " + std::to_string(corpus.size()));
  o.expect(accepted == 0, std::to_string(accepted) + " corrupt files accepted");
  o.expect(wrong == 0, std::to_string(wrong) + " wrong categories");
  o.expect(seen.size() == corpus.size(), std::to_string(seen.size()) + " distinct categories");

  int roundtrip_bad = 0;
  for (const char* name : {"aligned.emb1", "biased.emb1"}) {
    const std::string bytes = slurp(kFixtures / name);
    const std::vector<std::uint8_t> raw(bytes.begin(), bytes.end());
    roundtrip_bad += write_emb1(read_emb1(raw)) != raw;
  }
  const auto tiny = write_emb1(testing::tiny_set());
  roundtrip_bad += write_emb1(read_emb1(tiny)) != tiny;
  o.expect(roundtrip_bad == 0, std::to_string(roundtrip_bad) + " round-trip mismatches");
  o.detail = std::to_string(corpus.size()) + " corrupt files rejected with " +
             std::to_string(seen.size()) + " distinct codes; 3 valid files round-trip";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"auroc_oracle_equivalence", auroc_oracle},
      {"c2st_null_calibration", c2st_null},
      {"c2st_power", c2st_power},
      {"fid_closed_form", fid_closed_form},
      {"fid_properties", fid_properties},
      {"mmd_oracle", mmd_oracle},
      {"logreg_gradient_check", logreg_gradient_check},
      {"projection_basis", projection_basis},
      {"renyi_entropy", renyi},
      {"score_consistency", score_consistency},
      {"grid_chance_level", grid_chance_level},
      {"end_to_end_determinism", determinism},
      {"format_robustness", format_robustness},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = o.failures.empty();
    failed += !ok;
    std::printf("%s %s: %s", ok ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    for (const auto& f : o.failures) std::printf(" [%s]", f.c_str());
    std::printf("\n");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
