#include "miaudit/c2st.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "miaudit/error.hpp"
#include "miaudit/parallel.hpp"

namespace miaudit {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(−t)) without overflow.
double log1p_exp_neg(double t) { return std::max(-t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

void check_inputs(const Matrix& x, std::span<const int> y, std::span<const double> params) {
  if (x.rows() != y.size()) throw Error(ErrorKind::kShape, "logreg: x rows != label count");
  if (params.size() != x.cols() + 1) throw Error(ErrorKind::kShape, "logreg: params size != d+1");
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::abs(a));
  return m;
}

Matrix take_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) std::ranges::copy(x.row(rows[r]), out.row(r).begin());
  return out;
}

}  // namespace

double logreg_objective(const Matrix& x, std::span<const int> y, double c,
                        std::span<const double> params) {
  check_inputs(x, y, params);
  const std::size_t d = x.cols();
  const auto w = params.first(d);
  const double b = params[d];
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double z = dot(w, x.row(i)) + b;
    loss += log1p_exp_neg(y[i] == 1 ? z : -z);
  }
  return 0.5 * dot(w, w) + c * loss;
}

Vector logreg_gradient(const Matrix& x, std::span<const int> y, double c,
                       std::span<const double> params) {
  check_inputs(x, y, params);
  const std::size_t d = x.cols();
  const auto w = params.first(d);
  const double b = params[d];
  Vector g(d + 1, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xi = x.row(i);
    const double r = sigmoid(dot(w, xi) + b) - (y[i] == 1 ? 1.0 : 0.0);
    for (std::size_t j = 0; j < d; ++j) g[j] += r * xi[j];
    g[d] += r;
  }
  for (std::size_t j = 0; j <= d; ++j) g[j] *= c;
  for (std::size_t j = 0; j < d; ++j) g[j] += w[j];
  return g;
}

LogRegModel fit_logreg(const Matrix& x, std::span<const int> y, const LogRegOptions& options) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (y.size() != n) throw Error(ErrorKind::kShape, "fit_logreg: x rows != label count");
  const auto n1 = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (n1 == 0 || n1 == n) throw Error(ErrorKind::kValidation, "fit_logreg: both classes required");
  for (double v : x.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::kValidation, "fit_logreg: non-finite feature");
  const double c = options.c;

  Vector p(d + 1, 0.0);
  double f = logreg_objective(x, y, c, p);
  LogRegModel model;
  Matrix h(d + 1, d + 1);
  Vector z(n);

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    const Vector g = logreg_gradient(x, y, c, p);
    const double gnorm = inf_norm(g);
    model.iterations = iter;
    if (gnorm <= options.tol) {
      model.converged = true;
      break;
    }

    // Hessian: I (weights only) + C·[X 1]ᵀ D [X 1].
    std::ranges::fill(h.data(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = x.row(i);
      const double s = sigmoid(dot(std::span<const double>(p).first(d), xi) + p[d]);
      const double di = c * s * (1.0 - s);
      for (std::size_t a = 0; a < d; ++a) {
        const double va = di * xi[a];
        auto ha = h.row(a);
        for (std::size_t bb = a; bb < d; ++bb) ha[bb] += va * xi[bb];
        ha[d] += va;
      }
      h(d, d) += di;
    }
    for (std::size_t a = 0; a <= d; ++a)
      for (std::size_t bb = 0; bb < a; ++bb) h(a, bb) = h(bb, a);
    for (std::size_t a = 0; a < d; ++a) h(a, a) += 1.0;

    Vector step(d + 1);
    Vector neg_g(d + 1);
    for (std::size_t j = 0; j <= d; ++j) neg_g[j] = -g[j];
    try {
      step = solve_spd(h, neg_g);
    } catch (const Error&) {
      step = neg_g;
    }
    double slope = dot(g, step);
    if (!(slope < 0.0)) {
      step = neg_g;
      slope = dot(g, step);
    }

    double t = 1.0;
    bool accepted = false;
    Vector trial(d + 1);
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j <= d; ++j) trial[j] = p[j] + t * step[j];
      const double ft = logreg_objective(x, y, c, trial);
      if (ft <= f + 1e-4 * t * slope) {
        p = trial;
        f = ft;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Objective differences are at round-off; keep the full step only if it
      // still shrinks the gradient.
      for (std::size_t j = 0; j <= d; ++j) trial[j] = p[j] + step[j];
      if (inf_norm(logreg_gradient(x, y, c, trial)) < gnorm) {
        p = trial;
        f = logreg_objective(x, y, c, p);
      } else {
        break;
      }
    }
    model.iterations = iter + 1;
  }
  if (!model.converged && inf_norm(logreg_gradient(x, y, c, p)) <= options.tol) {
    model.converged = true;
  }
  model.weights.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(d));
  model.intercept = p[d];
  return model;
}

std::vector<int> stratified_kfold(std::span<const int> labels, std::size_t k, RngStream& rng) {
  if (k < 2) throw Error(ErrorKind::kConfig, "stratified_kfold: k must be >= 2");
  std::vector<int> folds(labels.size(), -1);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    if (idx.size() < k) {
      throw Error(ErrorKind::kStratification,
                  "stratified_kfold: class " + std::to_string(cls) + " has " +
                      std::to_string(idx.size()) + " samples, fewer than k=" + std::to_string(k));
    }
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t pos = 0; pos < idx.size(); ++pos)
      folds[idx[pos]] = static_cast<int>(pos % k);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (folds[i] < 0) {
      throw Error(ErrorKind::kValidation, "stratified_kfold: label outside {0,1} at index " +
                                              std::to_string(i));
    }
  }
  return folds;
}

std::vector<int> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  RngStream rng(seed, 0);
  return stratified_kfold(labels, k, rng);
}

CvScores cross_val_scores(const Matrix& x, std::span<const int> labels, std::size_t k,
                          const LogRegOptions& options, RngStream& strat_rng) {
  CvScores out;
  out.folds = stratified_kfold(labels, k, strat_rng);
  out.scores.assign(labels.size(), 0.0);
  std::vector<int> scored(labels.size(), 0);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < labels.size(); ++i)
      (out.folds[i] == static_cast<int>(f) ? test : train).push_back(i);
    const Matrix xtr = take_rows(x, train);
    std::vector<int> ytr(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) ytr[r] = labels[train[r]];
    const LogRegModel model = fit_logreg(xtr, ytr, options);
    if (!model.converged) ++out.nonconverged_fits;
    for (std::size_t i : test) {
      out.scores[i] = model.decision(x.row(i));
      ++scored[i];
    }
  }
  if (std::ranges::any_of(scored, [](int s) { return s != 1; })) {
    throw Error(ErrorKind::kNumeric, "cross_val_scores: fold bookkeeping broken");
  }
  return out;
}

C2stResult c2st(const EmbeddingSet& e, const C2stOptions& options) {
  e.require_both_classes(options.folds);

  std::vector<std::size_t> order(e.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return e.ids()[a] < e.ids()[b]; });

  Matrix x(e.size(), e.dim());
  std::vector<int> labels(e.size());
  C2stResult result;
  result.ids.reserve(e.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t src = order[r];
    result.ids.push_back(e.ids()[src]);
    labels[r] = e.labels()[src];
    if (options.l2norm) {
      try {
        std::ranges::copy(l2_normalize(e.vectors().row(src)), x.row(r).begin());
      } catch (const Error& err) {
        throw Error(err.kind(), "sample '" + e.ids()[src] + "': " + err.what());
      }
    } else {
      std::ranges::copy(e.vectors().row(src), x.row(r).begin());
    }
  }

  const LogRegOptions lr{options.c, options.tol, options.max_iter};
  RngStream observed_rng(options.seed, 0);
  CvScores cv = cross_val_scores(x, labels, options.folds, lr, observed_rng);

  result.oof = ScoredLabels{cv.scores, labels};
  result.fold_assignment = cv.folds;
  result.nonconverged_fits = cv.nonconverged_fits;
  result.auroc = auroc(result.oof);
  const PartialAuc pa = pauroc(result.oof, 0.05);
  result.pauroc05 = pa.standardized;
  result.pauroc05_raw = pa.raw;
  result.tpr05 = tpr_at_fpr(result.oof, 0.05);

  if (options.perms == 0) {
    result.pvalue = 1.0;
    return result;
  }

  NullDraw draw;
  if (options.mode == C2stPermutationMode::kFullPipeline) {
    draw = [&](RngStream& rng, std::size_t) {
      std::vector<int> permuted = labels;
      rng.shuffle(std::span<int>(permuted));
      const CvScores null_cv = cross_val_scores(x, permuted, options.folds, lr, rng);
      return auroc(ScoredLabels{null_cv.scores, std::move(permuted)});
    };
  } else {
    draw = [&](RngStream& rng, std::size_t) {
      std::vector<int> permuted = labels;
      rng.shuffle(std::span<int>(permuted));
      return auroc(ScoredLabels{cv.scores, std::move(permuted)});
    };
  }
  PermutationOptions popts;
  popts.b = options.perms;
  popts.master_seed = options.seed;
  popts.threads = options.threads;
  popts.progress = options.progress;
  result.pvalue = permutation_test(result.auroc, draw, popts).pvalue;
  return result;
}

}  // namespace miaudit
