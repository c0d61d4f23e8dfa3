#pragma once

// Safety-filter gateway: the pipeline check the suffix search calls once a
// candidate falls below the loss threshold.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptprobe/embedding.hpp"
#include "promptprobe/encoder.hpp"
#include "promptprobe/suffix_search.hpp"

namespace promptprobe {

enum class FilterKind { kMock, kRemote };

struct FilterBinding {
  FilterKind kind = FilterKind::kMock;
  std::optional<EmbeddingVector> flag_centroid;  // mock
  double flag_threshold = 0.8;                   // mock, in [-1, 1]
  std::string endpoint;                          // remote
  std::size_t images_per_prompt = 5;
  double timeout_seconds = 60.0;

  static FilterBinding mock(EmbeddingVector centroid, double threshold = 0.8,
                            std::size_t images_per_prompt = 5);
  static FilterBinding remote(std::string endpoint, std::size_t images_per_prompt = 5,
                              double timeout_seconds = 60.0);

  /// Throws kConfig unless exactly one backing is configured.
  void validate() const;
};

struct SampleVerdict {
  long long sample_id = 0;
  bool flagged = false;
  double score = 0.0;
};

struct FilterVerdict {
  Verdict verdict = Verdict::kFlagged;
  std::vector<SampleVerdict> per_sample;
};

/// Mock: every sample scores cosine(encode_text(prompt), centroid) and is
/// flagged when the score reaches the threshold. Remote: POST /v1/check.
/// The verdict is pass iff at least one sample is not flagged.
FilterVerdict check(const FilterBinding& binding, std::string_view adversarial_prompt,
                    const EncoderBinding& encoder);

/// Decodes a /v1/check response body; kTransport on any schema violation,
/// a sample count other than `expected_samples`, or a verdict inconsistent
/// with the per-sample flags.
FilterVerdict parse_check_response(std::string_view body, std::size_t expected_samples);

/// Adapts a filter binding into the callback the search expects.
PipelineCheck make_pipeline_check(FilterBinding binding, EncoderBinding encoder);

std::string_view to_string(Verdict v);

}  // namespace promptprobe
