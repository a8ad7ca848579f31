#include "miaudit/projection.hpp"

#include <algorithm>
#include <cmath>

#include "miaudit/error.hpp"

namespace miaudit {

namespace {

Vector class_mean(const EmbeddingSet& e, int label) {
  Vector mu(e.dim(), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e.labels()[i] != label) continue;
    auto r = e.vectors().row(i);
    for (std::size_t j = 0; j < mu.size(); ++j) mu[j] += r[j];
    ++n;
  }
  for (double& m : mu) m /= static_cast<double>(n);
  return mu;
}

// Residual eigenvalues below this fraction of the total variance count as
// zero when deciding how many residual axes exist.
constexpr double kRankTol = 1e-12;

}  // namespace

Matrix within_class_scatter(const EmbeddingSet& e) {
  const std::size_t d = e.dim();
  const Vector mu[2] = {class_mean(e, 0), class_mean(e, 1)};
  Matrix sw(d, d);
  Vector c(d);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const Vector& m = mu[e.labels()[i]];
    auto r = e.vectors().row(i);
    for (std::size_t j = 0; j < d; ++j) c[j] = r[j] - m[j];
    for (std::size_t a = 0; a < d; ++a) {
      auto row = sw.row(a);
      for (std::size_t b = a; b < d; ++b) row[b] += c[a] * c[b];
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < a; ++b) sw(a, b) = sw(b, a);
  return sw;
}

Vector fisher_axis(const EmbeddingSet& e, double shrinkage) {
  e.require_both_classes(2);
  if (shrinkage < 0.0) throw Error(ErrorKind::kConfig, "fisher_axis: shrinkage must be >= 0");
  const std::size_t d = e.dim();
  const Vector mu0 = class_mean(e, kNonMember);
  const Vector mu1 = class_mean(e, kMember);
  Vector delta(d);
  for (std::size_t j = 0; j < d; ++j) delta[j] = mu1[j] - mu0[j];

  Matrix sw = within_class_scatter(e);
  const double eps = shrinkage * sw.trace() / static_cast<double>(d);
  for (std::size_t j = 0; j < d; ++j) sw(j, j) += eps;

  Vector w = solve_spd(sw, delta);
  if (norm2(w) == 0.0) {
    throw Error(ErrorKind::kDegenerateInput, "fisher_axis: class means coincide");
  }
  w = l2_normalize(w);
  if (dot(w, delta) < 0.0)
    for (double& x : w) x = -x;
  return w;
}

ResidualPca residual_pca(const EmbeddingSet& e, std::span<const double> axis, std::size_t k) {
  const std::size_t d = e.dim();
  if (axis.size() != d) throw Error(ErrorKind::kShape, "residual_pca: axis dimension mismatch");
  if (d < k + 1) {
    throw Error(ErrorKind::kShape, "residual_pca: need d >= k+1 (d=" + std::to_string(d) + ")");
  }
  if (e.size() < 2) throw Error(ErrorKind::kInsufficientData, "residual_pca: need >= 2 samples");

  const std::size_t n = e.size();
  Matrix resid(n, d);
  for (std::size_t i = 0; i < n; ++i) std::ranges::copy(e.vectors().row(i), resid.row(i).begin());
  Vector mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = resid.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = resid.row(i);
    for (std::size_t j = 0; j < d; ++j) r[j] -= mean[j];
    const double t = dot(r, axis);
    for (std::size_t j = 0; j < d; ++j) r[j] -= t * axis[j];
  }
  const Matrix cov = mean_and_cov(resid).second;
  const SymEig eig = sym_eig(cov);

  ResidualPca out;
  out.mean = std::move(mean);
  const double total = std::max(cov.trace(), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const double lambda = eig.values[j];
    if (!(lambda > kRankTol * total) || total == 0.0) break;
    Vector v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = eig.vectors(i, j);
    // Strip the round-off component along the deflated axis.
    const double t = dot(v, axis);
    for (std::size_t i = 0; i < d; ++i) v[i] -= t * axis[i];
    out.axes.push_back(l2_normalize(v));
    out.variances.push_back(lambda);
  }
  if (out.axes.size() < k) {
    out.warning = "residual space has rank " + std::to_string(out.axes.size()) +
                  " < " + std::to_string(k) + "; returning fewer axes";
  }
  return out;
}

ProjectionBasis build_projection_basis(const EmbeddingSet& e, double shrinkage) {
  ProjectionBasis basis;
  basis.dim1 = fisher_axis(e, shrinkage);
  ResidualPca pca = residual_pca(e, basis.dim1, 2);
  basis.mean = std::move(pca.mean);
  const std::size_t d = e.dim();
  basis.dim2 = pca.axes.size() > 0 ? pca.axes[0] : Vector(d, 0.0);
  basis.dim3 = pca.axes.size() > 1 ? pca.axes[1] : Vector(d, 0.0);
  basis.explained_variance = pca.variances;
  basis.explained_variance.resize(2, 0.0);
  basis.warning = std::move(pca.warning);
  return basis;
}

std::vector<ProjectedPoint> project(const EmbeddingSet& e, const ProjectionBasis& basis) {
  const std::size_t d = e.dim();
  if (basis.mean.size() != d || basis.dim1.size() != d || basis.dim2.size() != d ||
      basis.dim3.size() != d) {
    throw Error(ErrorKind::kShape, "project: basis dimension does not match embeddings");
  }
  std::vector<ProjectedPoint> out;
  out.reserve(e.size());
  Vector c(d);
  for (std::size_t i = 0; i < e.size(); ++i) {
    auto r = e.vectors().row(i);
    for (std::size_t j = 0; j < d; ++j) c[j] = r[j] - basis.mean[j];
    out.push_back({e.ids()[i], e.labels()[i], dot(c, basis.dim1), dot(c, basis.dim2),
                   dot(c, basis.dim3)});
  }
  return out;
}

}  // namespace miaudit
