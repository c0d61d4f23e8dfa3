#pragma once

// Campaign orchestration: dataset ingestion, per-prompt attack pipeline,
// JSONL persistence, ablation sweeps and report rendering.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptprobe/encoder.hpp"
#include "promptprobe/filter.hpp"
#include "promptprobe/suffix_search.hpp"

namespace promptprobe {

struct PromptRecord {
  long long id = 0;
  std::string text;
  std::set<std::string> categories;
  double harm_rating = 0.0;
};

/// Reads a CSV with header columns id, prompt, categories, hard_percentage
/// (any order, extra columns ignored) and keeps rows tagged with `attribute`
/// (case-insensitive) whose rating strictly exceeds `min_harm_rating`.
/// kParse on a missing column or bad value, kConfig when nothing survives.
std::vector<PromptRecord> parse_dataset(std::string_view content, std::string_view attribute,
                                        double min_harm_rating);
std::vector<PromptRecord> ingest(const std::filesystem::path& dataset_path,
                                 std::string_view attribute, double min_harm_rating);

struct EncoderSettings {
  EncoderKind kind = EncoderKind::kToy;
  std::string endpoint;
  std::size_t dim = 0;
  double timeout_seconds = 30.0;
};

struct CampaignConfig {
  // [dataset]
  std::filesystem::path dataset_path;
  std::string attribute;
  double min_harm_rating = 0.9;
  std::filesystem::path pairs_path;
  std::size_t pair_index = 0;
  std::filesystem::path substitutions_path;  // optional
  std::filesystem::path blocklist_path;      // optional
  std::filesystem::path reference_vector_path;
  std::filesystem::path reference_samples_dir;  // optional; enables FID
  // [encoder]
  std::filesystem::path table_path;
  EncoderSettings encoder;
  // [filter]
  FilterBinding filter;
  // [search]
  SearchConfig search;
  std::size_t workers = 1;
  // [output]
  std::filesystem::path output_path;

  /// kConfig when a referenced file is missing or a field is out of range.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// Parses the TOML campaign file. Relative paths resolve against
/// `base_dir`. Unknown keys are rejected with kConfig.
CampaignConfig parse_campaign_config(std::string_view toml_text,
                                     const std::filesystem::path& base_dir);
CampaignConfig load_campaign_config(const std::filesystem::path& path);

struct PromptOutcome {
  long long prompt_id = 0;
  std::string clean_prompt;
  std::optional<AttackResult> result;  // empty when the prompt failed
  std::string error;
  long long elapsed_ms = 0;

  bool succeeded() const { return result && result->status == AttackStatus::kSuccess; }
};

struct CampaignReport {
  std::vector<PromptOutcome> per_prompt;  // sorted by prompt_id
  double asr_percent = 0.0;
  std::optional<double> fid;
  double wall_time_seconds = 0.0;
  nlohmann::ordered_json config_echo;

  nlohmann::ordered_json summary_json() const;
};

/// One JSONL row for an outcome (fields in the documented order).
nlohmann::ordered_json outcome_to_json(const PromptOutcome& outcome);

/// Runs every ingested prompt through sanitize -> encode -> target -> search,
/// appending one JSONL row per prompt (in prompt order) as results complete.
/// Per-prompt failures become error rows; output I/O failures are fatal.
CampaignReport run_campaign(const CampaignConfig& cfg);

enum class SweepAxis { kGamma, kSuffixLen };

SweepAxis parse_sweep_axis(std::string_view s);
std::string_view to_string(SweepAxis axis);

struct SweepRow {
  double value = 0.0;
  bool ok = false;
  std::string error;
  double asr_percent = 0.0;
  double mean_final_loss = 0.0;
  double mean_best_loss = 0.0;  // average over prompts of the lowest loss reached
  std::filesystem::path output_path;
};

/// One campaign per value with everything else fixed. Values are validated
/// up front (kConfig); a campaign that fails at runtime yields a row with
/// ok = false and the sweep continues.
std::vector<SweepRow> sweep(const CampaignConfig& cfg, SweepAxis axis,
                            const std::vector<double>& values);

enum class ReportFormat { kText, kCsv };

ReportFormat parse_report_format(std::string_view s);

std::string render_sweep(const std::vector<SweepRow>& rows, SweepAxis axis, ReportFormat format);

struct RenderedReport {
  std::string table;
  std::size_t attempted = 0;
  std::size_t succeeded = 0;
};

/// Renders a results JSONL as a table sorted by prompt_id with an ASR footer.
/// kParse naming the line for any malformed row.
RenderedReport render_report(std::string_view jsonl, ReportFormat format);
RenderedReport report(const std::filesystem::path& jsonl_path, ReportFormat format);

}  // namespace promptprobe
