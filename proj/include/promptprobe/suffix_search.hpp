#pragma once

// Discrete suffix search.
//
// Finds N vocabulary tokens that, appended to a clean prompt, minimize the
// weighted text/image cosine loss. Once the loss drops below tau the
// candidate is handed to a pipeline check (generate + safety filter). A
// flagged candidate becomes tabu and the search continues from it; a passing
// one ends the search.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "promptprobe/embedding.hpp"
#include "promptprobe/encoder.hpp"
#include "promptprobe/vocabulary.hpp"

namespace promptprobe {

struct SearchConfig {
  double gamma = 0.2;                    // text/image loss weight
  std::size_t suffix_len = 5;            // appended tokens
  double tau = 0.7;                      // loss threshold for the pipeline check
  std::size_t max_iters = 2000;
  std::size_t shortlist_k = 256;
  std::uint64_t seed = 0;
  std::size_t max_filter_attempts = 10;
  std::size_t random_restarts = 0;       // seeded restarts after convergence; off by default
  bool record_trace = false;

  /// Throws kConfig when any field is out of range.
  void validate() const;
};

enum class Verdict { kPass, kFlagged };

/// Generates content for an adversarial prompt and reports whether it got
/// past the safety filter. Must always return a verdict; exceptions abort the
/// search.
using PipelineCheck = std::function<Verdict(const std::string& adversarial_prompt)>;

enum class AttackStatus { kSuccess, kBelowThresholdButFiltered, kBudgetExhausted };

std::string_view to_string(AttackStatus status);
AttackStatus parse_attack_status(std::string_view s);

struct TracePoint {
  std::size_t iteration = 0;
  std::size_t phase = 0;  // number of filter rejections or restarts before this point
  double loss_total = 0.0;
};

struct AttackResult {
  std::string clean_prompt;
  std::string adversarial_prompt;
  std::vector<TokenId> suffix;
  AttackStatus status = AttackStatus::kBudgetExhausted;
  LossBreakdown final_loss;
  double best_loss_total = 0.0;  // lowest loss evaluated at any point
  std::size_t iterations_used = 0;
  std::size_t filter_attempts = 0;
  std::size_t evaluations = 0;
  std::vector<TracePoint> trace;  // accepted moves; non-increasing within a phase
};

/// Appends the suffix token texts to `clean_prompt`, space separated.
std::string join_suffix(std::string_view clean_prompt, const EmbeddingTable& vocab,
                        const std::vector<TokenId>& suffix);

/// Loss of clean_prompt || suffix against (text_target, image_reference).
LossBreakdown evaluate_suffix(std::string_view clean_prompt,
                              const std::vector<TokenId>& suffix,
                              const EmbeddingTable& vocab,
                              const EmbeddingVector& text_target,
                              const EmbeddingVector& image_reference,
                              const EncoderBinding& encoder, double gamma);

/// Coordinate descent over suffix positions with a fixed candidate shortlist
/// (the shortlist_k pool tokens closest to the text target).
///
/// Each iteration first submits the current suffix to `check` when its loss is
/// below tau and it is not tabu, then revisits position (i - 1) mod N, adopting
/// the candidate with the strictly lowest loss (ties by ascending token id).
/// From a tabu suffix the best non-tabu neighbour is adopted unconditionally.
/// The search stops early once a full sweep changes nothing and no restarts
/// remain.
AttackResult search(std::string_view clean_prompt, const EmbeddingVector& text_target,
                    const EmbeddingVector& image_reference, const CandidatePool& pool,
                    const EncoderBinding& encoder, const SearchConfig& cfg,
                    const PipelineCheck& check);

/// Maximum number of suffix tuples brute_force_search will enumerate.
inline constexpr std::size_t kBruteForceLimit = 10'000;

/// Exhaustive reference search with the same threshold and filter semantics.
/// Candidates are submitted in ascending (loss, lexicographic tuple) order.
/// Throws kUsage when |pool|^N exceeds kBruteForceLimit.
AttackResult brute_force_search(std::string_view clean_prompt,
                                const EmbeddingVector& text_target,
                                const EmbeddingVector& image_reference,
                                const CandidatePool& pool, const EncoderBinding& encoder,
                                const SearchConfig& cfg, const PipelineCheck& check);

}  // namespace promptprobe
