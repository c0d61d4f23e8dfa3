#pragma once

// Prompt sanitization and concept-pair handling.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "promptprobe/encoder.hpp"

namespace promptprobe {

struct SubstitutionRule {
  std::string match;
  std::string replacement;
};

/// Ordered whole-word replacement rules.
class SubstitutionMap {
 public:
  SubstitutionMap() = default;
  /// Throws kConfig on an empty match or a rule that maps a word to itself.
  explicit SubstitutionMap(std::vector<SubstitutionRule> rules);

  const std::vector<SubstitutionRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<SubstitutionRule> rules_;
};

/// `<match>\t<replacement>` per line; `#` comments and blank lines ignored.
SubstitutionMap parse_substitutions(std::string_view content);
SubstitutionMap load_substitutions(const std::filesystem::path& path);

struct SanitizedPrompt {
  std::string clean_prompt;
  std::vector<std::size_t> applied;  // indices of rules that fired, ascending
};

/// Single left-to-right pass: at each word start the first rule (in rule
/// order) whose match equals the upcoming text case-insensitively and ends on
/// a word boundary is replaced. Replacement text is never re-scanned.
SanitizedPrompt sanitize(std::string_view prompt, const SubstitutionMap& map);

struct ConceptPair {
  std::string attribute;
  std::string negative;  // carries the sensitive semantics
  std::string positive;  // benign stand-in
};

/// Lines `<attribute>\t<negative>\t<positive>`; returns the pairs for
/// `attribute` in file order. kParse (with line number) on malformed lines,
/// kConfig when no pair matches.
std::vector<ConceptPair> parse_concept_pairs(std::string_view content,
                                             std::string_view attribute);
std::vector<ConceptPair> load_concept_pairs(const std::filesystem::path& path,
                                            std::string_view attribute);

/// concept_shift(e_c, encode(negative), encode(positive)).
EmbeddingVector build_target(const EmbeddingVector& clean_embedding,
                             const ConceptPair& pair, const EncoderBinding& encoder);

}  // namespace promptprobe
