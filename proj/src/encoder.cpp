#include "promptprobe/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "promptprobe/error.hpp"
#include "promptprobe/text_util.hpp"

namespace promptprobe {

namespace {

constexpr std::string_view kTableMagic = "pp-embed";
constexpr std::string_view kTableVersion = "v1";

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + what);
}

std::vector<double> parse_floats(std::string_view field) {
  std::vector<double> out;
  for (auto tok : text::split_whitespace(field)) {
    auto v = text::parse_double(tok);
    if (!v) {
      throw Error(ErrorKind::kParse, "invalid float '" + std::string(tok) + "'");
    }
    if (!std::isfinite(*v)) {
      throw Error(ErrorKind::kParse, "non-finite float '" + std::string(tok) + "'");
    }
    out.push_back(*v);
  }
  return out;
}

std::string image_content_type(const std::filesystem::path& p) {
  std::string ext = text::to_lower(p.extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".bmp") return "image/bmp";
  return "image/*";
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim, std::vector<TokenEntry> entries)
    : dim_(dim), entries_(std::move(entries)) {
  if (dim_ == 0) throw Error(ErrorKind::kParse, "table dim must be >= 1");
  std::sort(entries_.begin(), entries_.end(),
            [](const TokenEntry& a, const TokenEntry& b) {
              return a.token_id < b.token_id;
            });
  by_text_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.token_id != i) {
      throw Error(ErrorKind::kParse, "token ids must be unique and contiguous from 0 (expected " +
                                         std::to_string(i) + ", found " +
                                         std::to_string(e.token_id) + ")");
    }
    if (e.token_text.empty() ||
        e.token_text.find_first_of("\t\n\r") != std::string::npos) {
      throw Error(ErrorKind::kParse, "token " + std::to_string(i) + " has invalid text");
    }
    if (e.embedding.dim() != dim_) {
      throw Error(ErrorKind::kParse, "token '" + e.token_text + "' has dim " +
                                         std::to_string(e.embedding.dim()) +
                                         ", table dim is " + std::to_string(dim_));
    }
    if (!by_text_.emplace(e.token_text, e.token_id).second) {
      throw Error(ErrorKind::kParse, "duplicate token text '" + e.token_text + "'");
    }
  }
}

const TokenEntry& EmbeddingTable::at(TokenId id) const {
  if (id >= entries_.size()) {
    throw Error(ErrorKind::kLookup, "token id " + std::to_string(id) + " out of range");
  }
  return entries_[id];
}

std::optional<TokenId> EmbeddingTable::find(std::string_view text) const {
  auto it = by_text_.find(std::string(text));
  if (it == by_text_.end()) return std::nullopt;
  return it->second;
}

EmbeddingTable parse_table(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.empty()) parse_fail(1, "missing header");

  const auto header = text::split_whitespace(rows[0]);
  if (header.size() != 4 || header[0] != kTableMagic || header[1] != kTableVersion) {
    parse_fail(1, "expected header 'pp-embed v1 <vocab_size> <dim>'");
  }
  const auto vocab = text::parse_int(header[2]);
  const auto dim = text::parse_int(header[3]);
  if (!vocab || *vocab < 0 || !dim || *dim < 1) {
    parse_fail(1, "invalid vocab_size or dim in header");
  }
  if (rows.size() - 1 != static_cast<std::size_t>(*vocab)) {
    parse_fail(rows.size(), "header declares " + std::to_string(*vocab) +
                                " tokens but file has " +
                                std::to_string(rows.size() - 1) + " rows");
  }

  std::vector<TokenEntry> entries;
  entries.reserve(static_cast<std::size_t>(*vocab));
  std::unordered_set<long long> seen_ids;
  std::unordered_set<std::string> seen_texts;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = text::split(rows[i], '\t');
    if (fields.size() != 3) parse_fail(line_no, "expected 3 tab-separated fields");
    const auto id = text::parse_int(fields[0]);
    if (!id || *id < 0 || *id >= *vocab) parse_fail(line_no, "invalid token_id");
    if (!seen_ids.insert(*id).second) {
      parse_fail(line_no, "duplicate token_id " + std::to_string(*id));
    }
    std::string token(fields[1]);
    if (token.empty()) parse_fail(line_no, "empty token text");
    if (!seen_texts.insert(token).second) {
      parse_fail(line_no, "duplicate token text '" + token + "'");
    }
    std::vector<double> values;
    try {
      values = parse_floats(fields[2]);
    } catch (const Error& e) {
      parse_fail(line_no, e.what());
    }
    if (values.size() != static_cast<std::size_t>(*dim)) {
      parse_fail(line_no, "expected " + std::to_string(*dim) + " floats, found " +
                              std::to_string(values.size()));
    }
    entries.push_back({static_cast<TokenId>(*id), std::move(token),
                       EmbeddingVector(std::move(values))});
  }
  return EmbeddingTable(static_cast<std::size_t>(*dim), std::move(entries));
}

EmbeddingTable load_table(const std::filesystem::path& path) {
  const std::string content = text::read_file(path);
  try {
    return parse_table(content);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kParse) throw;
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

std::string serialize_table(const EmbeddingTable& table) {
  std::string out;
  out += std::string(kTableMagic) + " " + std::string(kTableVersion) + " " +
         std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  for (const auto& e : table.entries()) {
    out += std::to_string(e.token_id);
    out += '\t';
    out += e.token_text;
    out += '\t';
    bool first = true;
    for (double v : e.embedding) {
      if (!first) out += ' ';
      out += text::format_double(v);
      first = false;
    }
    out += '\n';
  }
  return out;
}

EmbeddingVector load_vector_file(const std::filesystem::path& path) {
  const std::string content = text::read_file(path);
  auto trimmed = text::trim(content);
  if (trimmed.empty()) {
    throw Error(ErrorKind::kParse, path.string() + ": empty vector file");
  }
  if (trimmed.find('\n') != std::string_view::npos) {
    throw Error(ErrorKind::kParse, path.string() + ": expected a single line");
  }
  try {
    return EmbeddingVector(parse_floats(trimmed));
  } catch (const Error& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

EncoderBinding EncoderBinding::toy(std::shared_ptr<const EmbeddingTable> table) {
  EncoderBinding b;
  b.kind = EncoderKind::kToy;
  b.table = std::move(table);
  b.validate();
  return b;
}

EncoderBinding EncoderBinding::remote(std::string endpoint, std::size_t dim,
                                      double timeout_seconds) {
  EncoderBinding b;
  b.kind = EncoderKind::kRemote;
  b.endpoint = std::move(endpoint);
  b.remote_dim = dim;
  b.timeout_seconds = timeout_seconds;
  b.validate();
  return b;
}

std::size_t EncoderBinding::dim() const {
  return kind == EncoderKind::kToy ? table->dim() : remote_dim;
}

void EncoderBinding::validate() const {
  if (kind == EncoderKind::kToy) {
    if (!table) throw Error(ErrorKind::kConfig, "toy encoder requires an embedding table");
    if (!endpoint.empty()) {
      throw Error(ErrorKind::kConfig, "toy encoder must not set an endpoint");
    }
  } else {
    if (endpoint.empty()) throw Error(ErrorKind::kConfig, "remote encoder requires an endpoint");
    if (table) throw Error(ErrorKind::kConfig, "remote encoder must not set a table");
    if (remote_dim == 0) throw Error(ErrorKind::kConfig, "remote encoder requires dim >= 1");
  }
  if (!(timeout_seconds > 0.0)) {
    throw Error(ErrorKind::kConfig, "encoder timeout must be positive");
  }
}

std::vector<TokenId> tokenize(const EmbeddingTable& table, std::string_view prompt) {
  const auto words = text::split_whitespace(prompt);
  if (words.empty()) throw Error(ErrorKind::kUsage, "prompt is empty");
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (auto w : words) {
    auto id = table.find(w);
    if (!id) throw Error(ErrorKind::kLookup, "unknown token '" + std::string(w) + "'");
    ids.push_back(*id);
  }
  return ids;
}

EmbeddingVector encode_token_ids(const EmbeddingTable& table,
                                 const std::vector<TokenId>& ids) {
  if (ids.empty()) throw Error(ErrorKind::kUsage, "prompt is empty");
  std::vector<double> sum(table.dim(), 0.0);
  for (TokenId id : ids) {
    const auto& emb = table.at(id).embedding;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += emb[i];
  }
  const double n = static_cast<double>(ids.size());
  for (double& v : sum) v /= n;
  return normalize(EmbeddingVector(std::move(sum)));
}

EmbeddingVector parse_encode_response(std::string_view body, std::size_t expected_dim) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kTransport, std::string("encoder response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("dim") || !j["dim"].is_number_integer() ||
      !j.contains("values") || !j["values"].is_array()) {
    throw Error(ErrorKind::kTransport, "encoder response must be {\"dim\": int, \"values\": [float]}");
  }
  const auto dim = j["dim"].get<long long>();
  const auto& arr = j["values"];
  if (dim < 1 || static_cast<std::size_t>(dim) != arr.size()) {
    throw Error(ErrorKind::kTransport, "encoder response dim does not match values length");
  }
  if (static_cast<std::size_t>(dim) != expected_dim) {
    throw Error(ErrorKind::kTransport, "encoder returned dim " + std::to_string(dim) +
                                           ", binding expects " + std::to_string(expected_dim));
  }
  std::vector<double> values;
  values.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error(ErrorKind::kTransport, "encoder value is not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw Error(ErrorKind::kTransport, "encoder value is not finite");
    values.push_back(x);
  }
  return EmbeddingVector(std::move(values));
}

EmbeddingVector encode_text(const EncoderBinding& binding, std::string_view prompt) {
  if (text::trim(prompt).empty()) throw Error(ErrorKind::kUsage, "prompt is empty");
  if (binding.kind == EncoderKind::kToy) {
    binding.validate();
    return encode_token_ids(*binding.table, tokenize(*binding.table, prompt));
  }
  const nlohmann::json request = {{"text", std::string(prompt)}};
  const auto body = detail::http_post(binding.endpoint, "/v1/encode_text", request.dump(),
                                      "application/json", binding.timeout_seconds);
  return parse_encode_response(body, binding.remote_dim);
}

EmbeddingVector encode_image_ref(const EncoderBinding& binding,
                                 const std::filesystem::path& source) {
  if (binding.kind == EncoderKind::kToy) {
    binding.validate();
    auto v = load_vector_file(source);
    if (v.dim() != binding.dim()) {
      throw Error(ErrorKind::kConfig, source.string() + ": vector has dim " +
                                          std::to_string(v.dim()) + ", encoder dim is " +
                                          std::to_string(binding.dim()));
    }
    return v;
  }
  const std::string image = text::read_file(source);
  const auto body = detail::http_post(binding.endpoint, "/v1/encode_image", image,
                                      image_content_type(source), binding.timeout_seconds);
  return parse_encode_response(body, binding.remote_dim);
}

}  // namespace promptprobe
