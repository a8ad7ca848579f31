#pragma once

#include <optional>
#include <string>
#include <vector>

#include "miaudit/data_model.hpp"
#include "miaudit/linalg.hpp"

namespace miaudit {

inline constexpr double kDefaultShrinkage = 1e-6;

// Unit vector ∝ (S_w + εI)⁻¹(μ₁ − μ₀), ε = shrinkage·tr(S_w)/d, oriented so
// that it points from the nonmember mean toward the member mean.
Vector fisher_axis(const EmbeddingSet& e, double shrinkage = kDefaultShrinkage);

// Pooled within-class scatter Σ_c Σ_{i∈c} (xᵢ − μ_c)(xᵢ − μ_c)ᵀ.
Matrix within_class_scatter(const EmbeddingSet& e);

struct ResidualPca {
  Vector mean;                     // global mean used for centering
  std::vector<Vector> axes;        // at most k, descending variance
  std::vector<double> variances;   // eigenvalues of the residual covariance
  std::optional<std::string> warning;  // set when fewer than k axes exist
};

ResidualPca residual_pca(const EmbeddingSet& e, std::span<const double> axis, std::size_t k = 2);

struct ProjectionBasis {
  Vector mean;
  Vector dim1;
  Vector dim2;  // zero vector when the residual space is rank deficient
  Vector dim3;
  std::vector<double> explained_variance;  // for dim2, dim3
  std::optional<std::string> warning;
};

ProjectionBasis build_projection_basis(const EmbeddingSet& e,
                                       double shrinkage = kDefaultShrinkage);

struct ProjectedPoint {
  std::string id;
  int label = 0;
  double dim1 = 0.0;
  double dim2 = 0.0;
  double dim3 = 0.0;
};

std::vector<ProjectedPoint> project(const EmbeddingSet& e, const ProjectionBasis& basis);

}  // namespace miaudit
