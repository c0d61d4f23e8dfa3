#include "promptprobe/metrics.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "promptprobe/error.hpp"

namespace promptprobe {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kEigenClamp = 1e-10;
constexpr double kFidClamp = 1e-8;

void require_symmetric(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::kUsage, std::string(name) + " is not square");
  }
  if (!m.allFinite()) throw Error(ErrorKind::kUsage, std::string(name) + " is not finite");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol) {
    std::ostringstream msg;
    msg << name << " is not symmetric (max asymmetry " << asym << ")";
    throw Error(ErrorKind::kUsage, msg.str());
  }
}

Eigen::VectorXd clamped_eigenvalues(const Eigen::MatrixXd& m, const char* what,
                                    Eigen::MatrixXd* vectors = nullptr) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      sym, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::kNumerical, std::string("eigendecomposition of ") + what + " failed");
  }
  Eigen::VectorXd values = solver.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < -kEigenClamp) {
      std::ostringstream msg;
      msg << what << " has a negative eigenvalue of magnitude " << -values[i];
      throw Error(ErrorKind::kNumerical, msg.str());
    }
    if (values[i] < 0.0) values[i] = 0.0;
  }
  if (vectors) *vectors = solver.eigenvectors();
  return values;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::MatrixXd vectors;
  const Eigen::VectorXd values = clamped_eigenvalues(m, what, &vectors);
  return vectors * values.cwiseSqrt().asDiagonal() * vectors.transpose();
}

}  // namespace

double asr(const CampaignTally& tally) {
  if (tally.attempted == 0) throw Error(ErrorKind::kDomain, "no attacks attempted");
  if (tally.succeeded > tally.attempted) {
    throw Error(ErrorKind::kUsage, "more successes than attempts");
  }
  return 100.0 * static_cast<double>(tally.succeeded) / static_cast<double>(tally.attempted);
}

GaussianStats gaussian_stats(const std::vector<EmbeddingVector>& samples) {
  if (samples.size() < 2) {
    throw Error(ErrorKind::kUsage, "covariance needs at least 2 samples");
  }
  const auto dim = static_cast<Eigen::Index>(samples.front().dim());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].dim() != samples.front().dim()) {
      throw Error(ErrorKind::kUsage, "samples have mixed dimensions");
    }
    for (Eigen::Index j = 0; j < dim; ++j) {
      x(static_cast<Eigen::Index>(i), j) = samples[i][static_cast<std::size_t>(j)];
    }
  }
  GaussianStats out;
  out.sample_count = samples.size();
  out.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(samples.size() - 1);
  out.covariance = 0.5 * (cov + cov.transpose());
  return out;
}

double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require_symmetric(a, "first covariance");
  require_symmetric(b, "second covariance");
  if (a.rows() != b.rows()) throw Error(ErrorKind::kUsage, "covariance dimension mismatch");

  // a^{1/2} b a^{1/2} = M M^T with M = a^{1/2} b^{1/2}, so its eigenvalues are
  // the squared singular values of M. Summing singular values avoids taking
  // square roots of round-off sized eigenvalues.
  const Eigen::MatrixXd m = psd_sqrt(a, "first covariance") * psd_sqrt(b, "second covariance");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  if (svd.info() != Eigen::Success) {
    throw Error(ErrorKind::kNumerical,
                "singular value decomposition of the covariance product failed");
  }
  return svd.singularValues().sum();
}

double fid(const GaussianStats& r, const GaussianStats& g) {
  if (r.dim() != g.dim()) throw Error(ErrorKind::kUsage, "FID operands differ in dimension");
  const double mean_term = (r.mean - g.mean).squaredNorm();
  const double cross = trace_sqrt_product(r.covariance, g.covariance);
  double total = mean_term + r.covariance.trace() + g.covariance.trace() - 2.0 * cross;
  if (total < 0.0 && total >= -kFidClamp) total = 0.0;
  if (total < 0.0) {
    std::ostringstream msg;
    msg << "FID evaluated to " << total;
    throw Error(ErrorKind::kNumerical, msg.str());
  }
  return total;
}

}  // namespace promptprobe
