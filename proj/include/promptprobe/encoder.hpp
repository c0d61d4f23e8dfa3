#pragma once

// Prompt and reference-image encoders.
//
// Two backings share one binding type: a deterministic lookup-table ("toy")
// encoder read from a `pp-embed v1` file, and an HTTP client for a remote
// encoder service speaking the /v1/encode_text and /v1/encode_image protocol.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "promptprobe/embedding.hpp"

namespace promptprobe {

using TokenId = std::size_t;

struct TokenEntry {
  TokenId token_id = 0;
  std::string token_text;
  EmbeddingVector embedding;
};

/// Immutable vocabulary of token embeddings, sorted by token_id with ids
/// contiguous from 0 and unique texts.
class EmbeddingTable {
 public:
  /// Validates and sorts `entries`. Throws kParse on duplicate ids/texts,
  /// non-contiguous ids, bad token text or a dimension mismatch.
  EmbeddingTable(std::size_t dim, std::vector<TokenEntry> entries);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<TokenEntry>& entries() const noexcept { return entries_; }
  const TokenEntry& at(TokenId id) const;

  /// Exact, case-sensitive lookup.
  std::optional<TokenId> find(std::string_view text) const;

 private:
  std::size_t dim_;
  std::vector<TokenEntry> entries_;
  std::unordered_map<std::string, TokenId> by_text_;
};

/// Parses the `pp-embed v1 <vocab_size> <dim>` format. Rows may appear in any
/// order on disk. Errors are kParse and name the 1-based line number.
EmbeddingTable parse_table(std::string_view content);
EmbeddingTable load_table(const std::filesystem::path& path);

/// Canonical serialization: rows in token_id order, shortest round-trip floats,
/// trailing newline.
std::string serialize_table(const EmbeddingTable& table);

/// Reads a reference-vector file (one line of space-separated floats).
EmbeddingVector load_vector_file(const std::filesystem::path& path);

enum class EncoderKind { kToy, kRemote };

struct EncoderBinding {
  EncoderKind kind = EncoderKind::kToy;
  std::shared_ptr<const EmbeddingTable> table;  // toy only
  std::string endpoint;                         // remote only, e.g. http://host:port
  std::size_t remote_dim = 0;                   // remote only
  double timeout_seconds = 30.0;

  static EncoderBinding toy(std::shared_ptr<const EmbeddingTable> table);
  static EncoderBinding remote(std::string endpoint, std::size_t dim,
                               double timeout_seconds = 30.0);

  std::size_t dim() const;

  /// Throws kConfig unless exactly one backing source is configured.
  void validate() const;
};

/// Toy: L2-normalized mean of the whitespace-delimited tokens' embeddings.
/// Remote: vector returned by POST /v1/encode_text.
EmbeddingVector encode_text(const EncoderBinding& binding, std::string_view prompt);

/// Toy: `source` is a reference-vector file. Remote: `source` is an image
/// forwarded as the body of POST /v1/encode_image.
EmbeddingVector encode_image_ref(const EncoderBinding& binding,
                                 const std::filesystem::path& source);

/// Toy-only fast path: encode a prompt already split into token ids.
/// Produces the same vector as encode_text on the joined token texts.
EmbeddingVector encode_token_ids(const EmbeddingTable& table,
                                 const std::vector<TokenId>& ids);

/// Token ids for the whitespace tokens of `prompt`; throws kLookup naming the
/// first unknown token.
std::vector<TokenId> tokenize(const EmbeddingTable& table, std::string_view prompt);

/// Decodes an encoder response body ({"dim": int, "values": [float]}).
/// Throws kTransport on any schema violation or when dim != expected_dim.
EmbeddingVector parse_encode_response(std::string_view body, std::size_t expected_dim);

}  // namespace promptprobe
