#include "promptprobe/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "promptprobe/error.hpp"

namespace promptprobe {

namespace {

void require_same_dim(const EmbeddingVector& a, const EmbeddingVector& b,
                      const char* op) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorKind::kUsage, std::string(op) + ": dimension mismatch (" +
                                       std::to_string(a.dim()) + " vs " +
                                       std::to_string(b.dim()) + ")");
  }
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kLookup: return "lookup error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kTransport: return "transport error";
    case ErrorKind::kNumerical: return "numerical error";
    case ErrorKind::kCampaign: return "campaign error";
  }
  return "error";
}

EmbeddingVector::EmbeddingVector(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorKind::kUsage, "embedding must have dim >= 1");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::kDomain, "embedding contains a non-finite value");
    }
  }
}

EmbeddingVector::EmbeddingVector(std::initializer_list<double> values)
    : EmbeddingVector(std::vector<double>(values)) {}

EmbeddingVector EmbeddingVector::zeros(std::size_t dim) {
  return EmbeddingVector(std::vector<double>(dim, 0.0));
}

double EmbeddingVector::norm() const noexcept {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return std::sqrt(sum);
}

EmbeddingVector operator+(const EmbeddingVector& a, const EmbeddingVector& b) {
  require_same_dim(a, b, "add");
  std::vector<double> out(a.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return EmbeddingVector(std::move(out));
}

EmbeddingVector operator-(const EmbeddingVector& a, const EmbeddingVector& b) {
  require_same_dim(a, b, "subtract");
  std::vector<double> out(a.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return EmbeddingVector(std::move(out));
}

EmbeddingVector operator*(double s, const EmbeddingVector& v) {
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x *= s;
  return EmbeddingVector(std::move(out));
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  require_same_dim(a, b, "dot");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) sum += a[i] * b[i];
  return sum;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  require_same_dim(a, b, "cosine");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorKind::kDomain, "degenerate embedding");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

EmbeddingVector normalize(const EmbeddingVector& v) {
  const double n = v.norm();
  if (n == 0.0) throw Error(ErrorKind::kDomain, "degenerate embedding");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return EmbeddingVector(std::move(out));
}

EmbeddingVector concept_shift(const EmbeddingVector& clean,
                              const EmbeddingVector& negative,
                              const EmbeddingVector& positive) {
  require_same_dim(clean, negative, "concept_shift");
  require_same_dim(clean, positive, "concept_shift");
  std::vector<double> out(clean.dim());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = clean[i] + (positive[i] - negative[i]);  // exact when negative == positive
  }
  return EmbeddingVector(std::move(out));
}

LossBreakdown combined_loss(const EmbeddingVector& candidate,
                            const EmbeddingVector& text_target,
                            const EmbeddingVector& image_reference,
                            double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorKind::kUsage, "gamma must lie in [0, 1]");
  }
  LossBreakdown loss;
  loss.gamma = gamma;
  loss.text_part = 1.0 - cosine(candidate, text_target);
  loss.image_part = 1.0 - cosine(candidate, image_reference);
  loss.total = gamma * loss.text_part + (1.0 - gamma) * loss.image_part;
  return loss;
}

}  // namespace promptprobe
