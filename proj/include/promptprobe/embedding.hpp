#pragma once

// Dense embedding vectors and the loss arithmetic built on them.
//
// Everything here is a pure function over immutable values. Storage and
// accumulation are both double precision.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace promptprobe {

/// Fixed-dimension real vector. Construction rejects an empty vector and any
/// non-finite coordinate; the zero vector is a valid value.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values);
  EmbeddingVector(std::initializer_list<double> values);

  /// The zero vector of the given dimension.
  static EmbeddingVector zeros(std::size_t dim);

  std::size_t dim() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

  double norm() const noexcept;

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

EmbeddingVector operator+(const EmbeddingVector& a, const EmbeddingVector& b);
EmbeddingVector operator-(const EmbeddingVector& a, const EmbeddingVector& b);
EmbeddingVector operator*(double s, const EmbeddingVector& v);

double dot(const EmbeddingVector& a, const EmbeddingVector& b);

/// Cosine similarity, clamped to [-1, 1].
/// Throws kUsage on dimension mismatch and kDomain ("degenerate embedding")
/// when either operand has zero norm.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Unit-L2 copy of `v`. Throws kDomain for the zero vector.
EmbeddingVector normalize(const EmbeddingVector& v);

/// Target embedding for text alignment: e_c - e_n + e_p, componentwise and
/// not renormalized.
EmbeddingVector concept_shift(const EmbeddingVector& clean,
                              const EmbeddingVector& negative,
                              const EmbeddingVector& positive);

struct LossBreakdown {
  double total = 0.0;
  double text_part = 0.0;   // 1 - cos(prompt, text target)
  double image_part = 0.0;  // 1 - cos(prompt, image reference)
  double gamma = 0.0;
};

/// gamma * (1 - cos(cs, t)) + (1 - gamma) * (1 - cos(cs, i)).
/// Throws kUsage when gamma lies outside [0, 1].
LossBreakdown combined_loss(const EmbeddingVector& candidate,
                            const EmbeddingVector& text_target,
                            const EmbeddingVector& image_reference,
                            double gamma);

}  // namespace promptprobe
