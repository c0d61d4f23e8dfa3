#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "promptprobe/encoder.hpp"

namespace promptprobe {

enum class MatchMode { kExact, kSubstring };

/// Lowercased token patterns to strip from the search vocabulary.
class Blocklist {
 public:
  Blocklist() = default;
  /// Throws kConfig on an empty or duplicate pattern (after lowercasing).
  Blocklist(std::vector<std::string> patterns, MatchMode mode);

  const std::vector<std::string>& patterns() const noexcept { return patterns_; }
  MatchMode mode() const noexcept { return mode_; }

  /// Case-insensitive match of a token text against any pattern.
  bool blocks(std::string_view token_text) const;

 private:
  std::vector<std::string> patterns_;
  MatchMode mode_ = MatchMode::kExact;
};

/// One pattern per line, `#` comments and blank lines ignored; the first
/// non-comment line may be `mode: exact|substring`.
Blocklist parse_blocklist(std::string_view content);
Blocklist load_blocklist(const std::filesystem::path& path);

/// Token ids of a table that remain eligible as suffix tokens.
class CandidatePool {
 public:
  /// Throws kConfig when `allowed_ids` is empty, kUsage when an id is outside
  /// the table. Ids are sorted and deduplicated.
  CandidatePool(std::shared_ptr<const EmbeddingTable> table,
                std::vector<TokenId> allowed_ids);

  const EmbeddingTable& table() const noexcept { return *table_; }
  const std::shared_ptr<const EmbeddingTable>& table_ptr() const noexcept { return table_; }
  const std::vector<TokenId>& allowed_ids() const noexcept { return allowed_; }
  std::size_t size() const noexcept { return allowed_.size(); }

 private:
  std::shared_ptr<const EmbeddingTable> table_;
  std::vector<TokenId> allowed_;
};

CandidatePool apply_blocklist(std::shared_ptr<const EmbeddingTable> table,
                              const Blocklist& blocklist);
CandidatePool apply_blocklist(const CandidatePool& pool, const Blocklist& blocklist);

/// The min(k, |pool|) tokens with the highest cosine to `direction`,
/// descending, ties by ascending token_id.
std::vector<TokenId> shortlist(const CandidatePool& pool,
                               const EmbeddingVector& direction, std::size_t k);

}  // namespace promptprobe
