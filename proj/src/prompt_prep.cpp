#include "promptprobe/prompt_prep.hpp"

#include <algorithm>
#include <cctype>

#include "promptprobe/error.hpp"
#include "promptprobe/text_util.hpp"

namespace promptprobe {

namespace {

// Bytes >= 0x80 belong to UTF-8 sequences and count as word characters so
// that accented words are never split.
bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) || c == '_' || c == '\'';
}

bool iequals_at(std::string_view text, std::size_t pos, std::string_view needle) {
  if (pos + needle.size() > text.size()) return false;
  for (std::size_t i = 0; i < needle.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) !=
        std::tolower(static_cast<unsigned char>(needle[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

SubstitutionMap::SubstitutionMap(std::vector<SubstitutionRule> rules)
    : rules_(std::move(rules)) {
  for (const auto& r : rules_) {
    if (r.match.empty()) throw Error(ErrorKind::kConfig, "substitution match is empty");
    if (text::to_lower(r.match) == text::to_lower(r.replacement)) {
      throw Error(ErrorKind::kConfig, "substitution maps '" + r.match + "' to itself");
    }
  }
}

SubstitutionMap parse_substitutions(std::string_view content) {
  std::vector<SubstitutionRule> rules;
  const auto rows = text::lines(content);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string_view line = rows[i];
    if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
    const auto fields = text::split(line, '\t');
    if (fields.size() != 2) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(i + 1) +
                                         ": expected '<match>\\t<replacement>'");
    }
    rules.push_back({std::string(text::trim(fields[0])), std::string(text::trim(fields[1]))});
  }
  return SubstitutionMap(std::move(rules));
}

SubstitutionMap load_substitutions(const std::filesystem::path& path) {
  return parse_substitutions(text::read_file(path));
}

SanitizedPrompt sanitize(std::string_view prompt, const SubstitutionMap& map) {
  if (text::trim(prompt).empty()) throw Error(ErrorKind::kUsage, "prompt is empty");

  SanitizedPrompt out;
  out.clean_prompt.reserve(prompt.size());
  std::vector<bool> fired(map.rules().size(), false);

  std::size_t pos = 0;
  while (pos < prompt.size()) {
    const bool word_start = is_word_char(prompt[pos]) &&
                            (pos == 0 || !is_word_char(prompt[pos - 1]));
    bool replaced = false;
    if (word_start) {
      for (std::size_t r = 0; r < map.rules().size(); ++r) {
        const auto& rule = map.rules()[r];
        const std::size_t end = pos + rule.match.size();
        if (iequals_at(prompt, pos, rule.match) &&
            (end == prompt.size() || !is_word_char(prompt[end]))) {
          out.clean_prompt += rule.replacement;
          fired[r] = true;
          pos = end;
          replaced = true;
          break;
        }
      }
    }
    if (replaced) continue;
    if (word_start) {
      // Copy the whole unmatched word so a rule cannot match mid-word.
      while (pos < prompt.size() && is_word_char(prompt[pos])) out.clean_prompt += prompt[pos++];
    } else {
      out.clean_prompt += prompt[pos++];
    }
  }
  for (std::size_t r = 0; r < fired.size(); ++r) {
    if (fired[r]) out.applied.push_back(r);
  }
  return out;
}

std::vector<ConceptPair> parse_concept_pairs(std::string_view content,
                                             std::string_view attribute) {
  std::vector<ConceptPair> out;
  const auto rows = text::lines(content);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string_view line = rows[i];
    if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
    const auto fields = text::split(line, '\t');
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    if (fields.size() != 3) {
      throw Error(ErrorKind::kParse, where + "expected '<attribute>\\t<negative>\\t<positive>'");
    }
    ConceptPair pair{std::string(text::trim(fields[0])), std::string(text::trim(fields[1])),
                     std::string(text::trim(fields[2]))};
    if (pair.attribute.empty() || pair.negative.empty() || pair.positive.empty()) {
      throw Error(ErrorKind::kParse, where + "empty field");
    }
    if (pair.negative == pair.positive) {
      throw Error(ErrorKind::kParse, where + "negative and positive tokens are identical");
    }
    if (pair.attribute == attribute) out.push_back(std::move(pair));
  }
  if (out.empty()) {
    throw Error(ErrorKind::kConfig,
                "no concept pair for attribute '" + std::string(attribute) + "'");
  }
  return out;
}

std::vector<ConceptPair> load_concept_pairs(const std::filesystem::path& path,
                                            std::string_view attribute) {
  return parse_concept_pairs(text::read_file(path), attribute);
}

EmbeddingVector build_target(const EmbeddingVector& clean_embedding,
                             const ConceptPair& pair, const EncoderBinding& encoder) {
  return concept_shift(clean_embedding, encode_text(encoder, pair.negative),
                       encode_text(encoder, pair.positive));
}

}  // namespace promptprobe
