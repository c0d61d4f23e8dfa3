#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <toml.hpp>

#include "promptprobe/campaign.hpp"
#include "promptprobe/csv.hpp"
#include "promptprobe/error.hpp"
#include "promptprobe/text_util.hpp"

namespace promptprobe {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dataset ingestion

std::vector<PromptRecord> parse_dataset(std::string_view content, std::string_view attribute,
                                        double min_harm_rating) {
  const auto rows = csv::parse(content);
  if (rows.empty()) throw Error(ErrorKind::kParse, "dataset is empty (no header)");

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) {
    column.emplace(std::string(text::trim(rows[0].fields[i])), i);
  }
  auto index_of = [&](const char* name) {
    auto it = column.find(name);
    if (it == column.end()) {
      throw Error(ErrorKind::kParse, std::string("dataset is missing column '") + name + "'");
    }
    return it->second;
  };
  const std::size_t c_id = index_of("id");
  const std::size_t c_prompt = index_of("prompt");
  const std::size_t c_categories = index_of("categories");
  const std::size_t c_rating = index_of("hard_percentage");
  const std::size_t needed = std::max({c_id, c_prompt, c_categories, c_rating}) + 1;

  const std::string wanted = text::to_lower(text::trim(attribute));
  std::vector<PromptRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "dataset line " + std::to_string(row.line) + ": ";
    if (row.fields.size() < needed) throw Error(ErrorKind::kParse, where + "too few columns");

    PromptRecord rec;
    const auto id = text::parse_int(text::trim(row.fields[c_id]));
    if (!id) throw Error(ErrorKind::kParse, where + "invalid id");
    rec.id = *id;
    rec.text = std::string(text::trim(row.fields[c_prompt]));
    const auto rating = text::parse_double(text::trim(row.fields[c_rating]));
    if (!rating || !(*rating >= 0.0 && *rating <= 1.0)) {
      throw Error(ErrorKind::kParse, where + "hard_percentage must be a real in [0, 1]");
    }
    rec.harm_rating = *rating;
    for (auto cat : text::split(row.fields[c_categories], ';')) {
      auto trimmed = text::trim(cat);
      if (!trimmed.empty()) rec.categories.insert(text::to_lower(trimmed));
    }
    if (rec.text.empty()) continue;
    if (rec.categories.contains(wanted) && rec.harm_rating > min_harm_rating) {
      out.push_back(std::move(rec));
    }
  }
  if (out.empty()) {
    std::ostringstream msg;
    msg << "no prompt tagged '" << attribute << "' with harm rating above " << min_harm_rating;
    throw Error(ErrorKind::kConfig, msg.str());
  }
  return out;
}

std::vector<PromptRecord> ingest(const fs::path& dataset_path, std::string_view attribute,
                                 double min_harm_rating) {
  return parse_dataset(text::read_file(dataset_path), attribute, min_harm_rating);
}

// ---------------------------------------------------------------------------
// TOML configuration

namespace {

[[noreturn]] void config_fail(const std::string& what) { throw Error(ErrorKind::kConfig, what); }

class Section {
 public:
  Section(const toml::table* table, std::string name, const fs::path& base)
      : table_(table), name_(std::move(name)), base_(base) {}

  bool has(const char* key) {
    seen_.emplace_back(key);
    return table_ && table_->contains(key);
  }

  std::string string(const char* key, std::string fallback = {}) {
    if (!has(key)) return fallback;
    auto v = (*table_)[key].value<std::string>();
    if (!v) config_fail(where(key) + " must be a string");
    return *v;
  }

  fs::path path(const char* key) {
    const std::string s = string(key);
    if (s.empty()) return {};
    fs::path p(s);
    return p.is_absolute() ? p : base_ / p;
  }

  double real(const char* key, double fallback) {
    if (!has(key)) return fallback;
    const auto& node = (*table_)[key];
    if (auto v = node.value<double>()) return *v;
    config_fail(where(key) + " must be a number");
  }

  std::size_t count(const char* key, std::size_t fallback) {
    if (!has(key)) return fallback;
    auto v = (*table_)[key].value<std::int64_t>();
    if (!v || *v < 0) config_fail(where(key) + " must be a non-negative integer");
    return static_cast<std::size_t>(*v);
  }

  bool flag(const char* key, bool fallback) {
    if (!has(key)) return fallback;
    auto v = (*table_)[key].value<bool>();
    if (!v) config_fail(where(key) + " must be a boolean");
    return *v;
  }

  std::optional<std::vector<double>> reals(const char* key) {
    if (!has(key)) return std::nullopt;
    const auto* arr = (*table_)[key].as_array();
    if (!arr) config_fail(where(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& el : *arr) {
      auto v = el.value<double>();
      if (!v) config_fail(where(key) + " must be an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  void reject_unknown() const {
    if (!table_) return;
    for (const auto& [k, _] : *table_) {
      if (std::find(seen_.begin(), seen_.end(), k.str()) == seen_.end()) {
        config_fail("unknown key '" + std::string(k.str()) + "' in [" + name_ + "]");
      }
    }
  }

 private:
  std::string where(const char* key) const { return "[" + name_ + "]." + key; }

  const toml::table* table_;
  std::string name_;
  fs::path base_;
  std::vector<std::string> seen_;
};

}  // namespace

CampaignConfig parse_campaign_config(std::string_view toml_text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " (line " << e.source().begin.line << ")";
    config_fail(msg.str());
  }
  for (const auto& [k, node] : root) {
    static const std::vector<std::string> known = {"dataset", "encoder", "filter", "search",
                                                   "output"};
    if (std::find(known.begin(), known.end(), k.str()) == known.end() || !node.is_table()) {
      config_fail("unknown config section '" + std::string(k.str()) + "'");
    }
  }

  CampaignConfig cfg;

  Section dataset(root["dataset"].as_table(), "dataset", base_dir);
  cfg.dataset_path = dataset.path("path");
  cfg.attribute = dataset.string("attribute");
  cfg.min_harm_rating = dataset.real("min_harm_rating", 0.9);
  cfg.pairs_path = dataset.path("pairs");
  cfg.pair_index = dataset.count("pair_index", 0);
  cfg.substitutions_path = dataset.path("substitutions");
  cfg.blocklist_path = dataset.path("blocklist");
  cfg.reference_vector_path = dataset.path("reference_vector");
  cfg.reference_samples_dir = dataset.path("reference_samples");
  dataset.reject_unknown();

  Section encoder(root["encoder"].as_table(), "encoder", base_dir);
  const std::string encoder_kind = encoder.string("kind", "toy");
  if (encoder_kind == "toy") {
    cfg.encoder.kind = EncoderKind::kToy;
  } else if (encoder_kind == "remote") {
    cfg.encoder.kind = EncoderKind::kRemote;
  } else {
    config_fail("[encoder].kind must be 'toy' or 'remote'");
  }
  cfg.table_path = encoder.path("table");
  cfg.encoder.endpoint = encoder.string("endpoint");
  cfg.encoder.dim = encoder.count("dim", 0);
  cfg.encoder.timeout_seconds = encoder.real("timeout_seconds", 30.0);
  encoder.reject_unknown();

  Section filter(root["filter"].as_table(), "filter", base_dir);
  const std::string filter_kind = filter.string("kind", "mock");
  cfg.filter.images_per_prompt = filter.count("images_per_prompt", 5);
  cfg.filter.timeout_seconds = filter.real("timeout_seconds", 60.0);
  cfg.filter.flag_threshold = filter.real("threshold", 0.8);
  const auto centroid = filter.reals("centroid");
  const fs::path centroid_file = filter.path("centroid_file");
  const std::string filter_endpoint = filter.string("endpoint");
  filter.reject_unknown();
  if (filter_kind == "mock") {
    cfg.filter.kind = FilterKind::kMock;
    if (centroid && !centroid_file.empty()) {
      config_fail("[filter] sets both centroid and centroid_file");
    }
    if (centroid) {
      cfg.filter.flag_centroid = EmbeddingVector(*centroid);
    } else if (!centroid_file.empty()) {
      cfg.filter.flag_centroid = load_vector_file(centroid_file);
    }
    if (!filter_endpoint.empty()) config_fail("mock filter must not set an endpoint");
  } else if (filter_kind == "remote") {
    cfg.filter.kind = FilterKind::kRemote;
    cfg.filter.endpoint = filter_endpoint;
    if (centroid || !centroid_file.empty()) config_fail("remote filter must not set a centroid");
  } else {
    config_fail("[filter].kind must be 'mock' or 'remote'");
  }

  Section search(root["search"].as_table(), "search", base_dir);
  cfg.search.gamma = search.real("gamma", cfg.search.gamma);
  cfg.search.suffix_len = search.count("suffix_len", cfg.search.suffix_len);
  cfg.search.tau = search.real("tau", cfg.search.tau);
  cfg.search.max_iters = search.count("max_iters", cfg.search.max_iters);
  cfg.search.shortlist_k = search.count("shortlist_k", cfg.search.shortlist_k);
  cfg.search.seed = search.count("seed", 0);
  cfg.search.max_filter_attempts =
      search.count("max_filter_attempts", cfg.search.max_filter_attempts);
  cfg.search.random_restarts = search.count("random_restarts", 0);
  cfg.workers = search.count("workers", 1);
  search.reject_unknown();

  Section output(root["output"].as_table(), "output", base_dir);
  cfg.output_path = output.path("path");
  cfg.search.record_trace = output.flag("trace", false);
  output.reject_unknown();

  return cfg;
}

CampaignConfig load_campaign_config(const fs::path& path) {
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const Error& e) {
    config_fail(e.what());
  }
  return parse_campaign_config(content, path.parent_path());
}

void CampaignConfig::validate() const {
  auto require_file = [](const fs::path& p, const char* what) {
    if (p.empty()) config_fail(std::string(what) + " is not configured");
    if (!fs::is_regular_file(p)) {
      config_fail(std::string(what) + " '" + p.string() + "' does not exist");
    }
  };
  auto optional_file = [&](const fs::path& p, const char* what) {
    if (!p.empty()) require_file(p, what);
  };
  require_file(dataset_path, "dataset");
  require_file(pairs_path, "concept pairs file");
  require_file(reference_vector_path, "reference vector");
  require_file(table_path, "embedding table");
  optional_file(substitutions_path, "substitutions file");
  optional_file(blocklist_path, "blocklist");
  if (!reference_samples_dir.empty() && !fs::is_directory(reference_samples_dir)) {
    config_fail("reference samples directory '" + reference_samples_dir.string() +
                "' does not exist");
  }
  if (text::trim(attribute).empty()) config_fail("attribute is empty");
  if (!(min_harm_rating >= 0.0 && min_harm_rating <= 1.0)) {
    config_fail("min_harm_rating must lie in [0, 1]");
  }
  if (output_path.empty()) config_fail("output path is not configured");
  if (workers < 1) config_fail("workers must be >= 1");
  if (encoder.kind == EncoderKind::kRemote) {
    if (encoder.endpoint.empty()) config_fail("remote encoder requires an endpoint");
    if (encoder.dim == 0) config_fail("remote encoder requires dim >= 1");
  } else if (!encoder.endpoint.empty()) {
    config_fail("toy encoder must not set an endpoint");
  }
  if (!(encoder.timeout_seconds > 0.0)) config_fail("encoder timeout must be positive");
  search.validate();
  filter.validate();
}

nlohmann::ordered_json CampaignConfig::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = {{"path", dataset_path.string()},
                  {"attribute", attribute},
                  {"min_harm_rating", min_harm_rating},
                  {"pairs", pairs_path.string()},
                  {"pair_index", pair_index},
                  {"substitutions", substitutions_path.string()},
                  {"blocklist", blocklist_path.string()},
                  {"reference_vector", reference_vector_path.string()},
                  {"reference_samples", reference_samples_dir.string()}};
  j["encoder"] = {{"kind", encoder.kind == EncoderKind::kToy ? "toy" : "remote"},
                  {"table", table_path.string()},
                  {"endpoint", encoder.endpoint},
                  {"dim", encoder.dim},
                  {"timeout_seconds", encoder.timeout_seconds}};
  nlohmann::ordered_json f = {{"kind", filter.kind == FilterKind::kMock ? "mock" : "remote"},
                              {"threshold", filter.flag_threshold},
                              {"endpoint", filter.endpoint},
                              {"images_per_prompt", filter.images_per_prompt}};
  if (filter.flag_centroid) {
    f["centroid"] = std::vector<double>(filter.flag_centroid->begin(), filter.flag_centroid->end());
  }
  j["filter"] = f;
  j["search"] = {{"gamma", search.gamma},
                 {"suffix_len", search.suffix_len},
                 {"tau", search.tau},
                 {"max_iters", search.max_iters},
                 {"shortlist_k", search.shortlist_k},
                 {"seed", search.seed},
                 {"max_filter_attempts", search.max_filter_attempts},
                 {"random_restarts", search.random_restarts},
                 {"workers", workers}};
  j["output"] = {{"path", output_path.string()}, {"trace", search.record_trace}};
  return j;
}

}  // namespace promptprobe
