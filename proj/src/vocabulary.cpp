#include "promptprobe/vocabulary.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

#include "promptprobe/error.hpp"
#include "promptprobe/text_util.hpp"

namespace promptprobe {

Blocklist::Blocklist(std::vector<std::string> patterns, MatchMode mode) : mode_(mode) {
  std::unordered_set<std::string> seen;
  for (auto& p : patterns) {
    std::string lowered = text::to_lower(p);
    if (lowered.empty()) throw Error(ErrorKind::kConfig, "blocklist pattern is empty");
    if (!seen.insert(lowered).second) {
      throw Error(ErrorKind::kConfig, "duplicate blocklist pattern '" + lowered + "'");
    }
    patterns_.push_back(std::move(lowered));
  }
}

bool Blocklist::blocks(std::string_view token_text) const {
  const std::string lowered = text::to_lower(token_text);
  for (const auto& p : patterns_) {
    if (mode_ == MatchMode::kExact ? lowered == p
                                   : lowered.find(p) != std::string::npos) {
      return true;
    }
  }
  return false;
}

Blocklist parse_blocklist(std::string_view content) {
  std::vector<std::string> patterns;
  MatchMode mode = MatchMode::kExact;
  bool first = true;
  const auto rows = text::lines(content);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto line = text::trim(rows[i]);
    if (line.empty() || line.front() == '#') continue;
    if (first && line.starts_with("mode:")) {
      auto value = text::trim(line.substr(5));
      if (value == "exact") {
        mode = MatchMode::kExact;
      } else if (value == "substring") {
        mode = MatchMode::kSubstring;
      } else {
        throw Error(ErrorKind::kParse, "line " + std::to_string(i + 1) +
                                           ": unknown blocklist mode '" +
                                           std::string(value) + "'");
      }
      first = false;
      continue;
    }
    first = false;
    patterns.emplace_back(line);
  }
  return Blocklist(std::move(patterns), mode);
}

Blocklist load_blocklist(const std::filesystem::path& path) {
  return parse_blocklist(text::read_file(path));
}

CandidatePool::CandidatePool(std::shared_ptr<const EmbeddingTable> table,
                             std::vector<TokenId> allowed_ids)
    : table_(std::move(table)), allowed_(std::move(allowed_ids)) {
  if (!table_) throw Error(ErrorKind::kUsage, "candidate pool needs a table");
  std::sort(allowed_.begin(), allowed_.end());
  allowed_.erase(std::unique(allowed_.begin(), allowed_.end()), allowed_.end());
  if (allowed_.empty()) {
    throw Error(ErrorKind::kConfig, "blocklist removes entire vocabulary");
  }
  if (allowed_.back() >= table_->size()) {
    throw Error(ErrorKind::kUsage, "candidate id outside the table");
  }
}

CandidatePool apply_blocklist(std::shared_ptr<const EmbeddingTable> table,
                              const Blocklist& blocklist) {
  if (!table) throw Error(ErrorKind::kUsage, "candidate pool needs a table");
  std::vector<TokenId> allowed;
  for (const auto& e : table->entries()) {
    if (!blocklist.blocks(e.token_text)) allowed.push_back(e.token_id);
  }
  return CandidatePool(std::move(table), std::move(allowed));
}

CandidatePool apply_blocklist(const CandidatePool& pool, const Blocklist& blocklist) {
  std::vector<TokenId> allowed;
  for (TokenId id : pool.allowed_ids()) {
    if (!blocklist.blocks(pool.table().at(id).token_text)) allowed.push_back(id);
  }
  return CandidatePool(pool.table_ptr(), std::move(allowed));
}

std::vector<TokenId> shortlist(const CandidatePool& pool,
                               const EmbeddingVector& direction, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::kUsage, "shortlist size must be >= 1");
  if (direction.norm() == 0.0) throw Error(ErrorKind::kDomain, "degenerate embedding");

  std::vector<std::pair<double, TokenId>> scored;
  scored.reserve(pool.size());
  for (TokenId id : pool.allowed_ids()) {
    scored.emplace_back(cosine(pool.table().at(id).embedding, direction), id);
  }
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n),
                    scored.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<TokenId> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].second);
  return out;
}

}  // namespace promptprobe
