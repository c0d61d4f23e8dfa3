#pragma once

// Attack success rate and Frechet distance between Gaussian summaries of
// embedding samples.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "promptprobe/embedding.hpp"

namespace promptprobe {

struct CampaignTally {
  std::size_t attempted = 0;
  std::size_t succeeded = 0;
};

/// 100 * succeeded / attempted. kDomain when attempted == 0, kUsage when
/// succeeded > attempted.
double asr(const CampaignTally& tally);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t sample_count = 0;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

/// Sample mean and unbiased (n - 1) covariance. kUsage for fewer than two
/// samples or mixed dimensions.
GaussianStats gaussian_stats(const std::vector<EmbeddingVector>& samples);

/// Tr((a b)^{1/2}) for symmetric PSD a and b: the sum of square roots of the
/// eigenvalues of a^{1/2} b a^{1/2}, evaluated as the singular values of
/// a^{1/2} b^{1/2}. Eigenvalues of a or b in [-1e-10, 0) are treated as zero;
/// anything more negative raises kNumerical.
double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// ||mu_r - mu_g||^2 + Tr(S_r) + Tr(S_g) - 2 Tr((S_r S_g)^{1/2}), with tiny
/// negative totals (>= -1e-8) clamped to zero.
double fid(const GaussianStats& r, const GaussianStats& g);

}  // namespace promptprobe
