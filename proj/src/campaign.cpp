#include "promptprobe/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "promptprobe/csv.hpp"
#include "promptprobe/error.hpp"
#include "promptprobe/metrics.hpp"
#include "promptprobe/prompt_prep.hpp"
#include "promptprobe/text_util.hpp"
#include "promptprobe/vocabulary.hpp"

namespace promptprobe {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Everything a worker needs, loaded once per campaign and shared read-only.
struct CampaignContext {
  std::shared_ptr<const EmbeddingTable> vocab;
  EncoderBinding encoder;
  std::optional<CandidatePool> pool;
  SubstitutionMap substitutions;
  ConceptPair pair;
  std::optional<EmbeddingVector> image_reference;
  PipelineCheck check;
};

CampaignContext prepare(const CampaignConfig& cfg) {
  CampaignContext ctx;
  ctx.vocab = std::make_shared<const EmbeddingTable>(load_table(cfg.table_path));
  if (cfg.encoder.kind == EncoderKind::kToy) {
    ctx.encoder = EncoderBinding::toy(ctx.vocab);
  } else {
    ctx.encoder = EncoderBinding::remote(cfg.encoder.endpoint, cfg.encoder.dim,
                                         cfg.encoder.timeout_seconds);
    if (ctx.vocab->dim() != cfg.encoder.dim) {
      throw Error(ErrorKind::kConfig, "vocabulary table dim does not match the encoder dim");
    }
  }
  const Blocklist blocklist =
      cfg.blocklist_path.empty() ? Blocklist() : load_blocklist(cfg.blocklist_path);
  ctx.pool = apply_blocklist(ctx.vocab, blocklist);
  if (!cfg.substitutions_path.empty()) {
    ctx.substitutions = load_substitutions(cfg.substitutions_path);
  }
  const auto pairs = load_concept_pairs(cfg.pairs_path, cfg.attribute);
  if (cfg.pair_index >= pairs.size()) {
    throw Error(ErrorKind::kConfig, "pair_index " + std::to_string(cfg.pair_index) +
                                        " out of range (" + std::to_string(pairs.size()) +
                                        " pairs for '" + cfg.attribute + "')");
  }
  ctx.pair = pairs[cfg.pair_index];
  ctx.image_reference = encode_image_ref(ctx.encoder, cfg.reference_vector_path);
  ctx.check = make_pipeline_check(cfg.filter, ctx.encoder);
  return ctx;
}

PromptOutcome attack_one(const PromptRecord& record, const CampaignContext& ctx,
                         const SearchConfig& search_cfg) {
  PromptOutcome out;
  out.prompt_id = record.id;
  const auto start = Clock::now();
  try {
    const auto clean = sanitize(record.text, ctx.substitutions);
    out.clean_prompt = clean.clean_prompt;
    const EmbeddingVector clean_embedding = encode_text(ctx.encoder, clean.clean_prompt);
    const EmbeddingVector target = build_target(clean_embedding, ctx.pair, ctx.encoder);
    out.result = search(clean.clean_prompt, target, *ctx.image_reference, *ctx.pool,
                        ctx.encoder, search_cfg, ctx.check);
  } catch (const Error& e) {
    out.result.reset();
    out.error = std::string(to_string(e.kind())) + ": " + e.what();
  } catch (const std::exception& e) {
    out.result.reset();
    out.error = e.what();
  }
  out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start)
                       .count();
  return out;
}

// Appends rows strictly in prompt order, flushing each complete line so a
// crash leaves a readable prefix.
class OrderedJsonlWriter {
 public:
  OrderedJsonlWriter(const fs::path& path, std::size_t total)
      : path_(path), pending_(total) {
    if (path.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(path.parent_path(), ec);
    }
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error(ErrorKind::kIo, "cannot open output '" + path.string() + "'");
  }

  void submit(std::size_t index, const PromptOutcome& outcome) {
    std::lock_guard lock(mu_);
    pending_[index] = outcome_to_json(outcome).dump();
    while (next_ < pending_.size() && pending_[next_]) {
      out_ << *pending_[next_] << '\n';
      out_.flush();
      if (!out_) throw Error(ErrorKind::kIo, "write to '" + path_.string() + "' failed");
      pending_[next_].reset();
      ++next_;
    }
  }

 private:
  fs::path path_;
  std::ofstream out_;
  std::mutex mu_;
  std::vector<std::optional<std::string>> pending_;
  std::size_t next_ = 0;
};

std::optional<double> campaign_fid(const CampaignConfig& cfg, const CampaignContext& ctx,
                                   const std::vector<PromptOutcome>& outcomes) {
  if (cfg.reference_samples_dir.empty()) return std::nullopt;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(cfg.reference_samples_dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EmbeddingVector> reference;
  for (const auto& f : files) reference.push_back(encode_image_ref(ctx.encoder, f));

  // Desk-scale proxy for generated content: the adversarial prompt embedding.
  std::vector<EmbeddingVector> generated;
  for (const auto& o : outcomes) {
    if (o.result) generated.push_back(encode_text(ctx.encoder, o.result->adversarial_prompt));
  }
  if (reference.size() < 2 || generated.size() < 2) return std::nullopt;
  return fid(gaussian_stats(reference), gaussian_stats(generated));
}

std::string format_fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

}  // namespace

nlohmann::ordered_json outcome_to_json(const PromptOutcome& o) {
  nlohmann::ordered_json j;
  j["prompt_id"] = o.prompt_id;
  j["clean_prompt"] = o.clean_prompt;
  if (o.result) {
    const auto& r = *o.result;
    j["adversarial_prompt"] = r.adversarial_prompt;
    j["status"] = std::string(to_string(r.status));
    j["loss_total"] = r.final_loss.total;
    j["loss_text"] = r.final_loss.text_part;
    j["loss_image"] = r.final_loss.image_part;
    j["iterations"] = r.iterations_used;
    j["filter_attempts"] = r.filter_attempts;
  } else {
    j["adversarial_prompt"] = "";
    j["status"] = "error";
    j["loss_total"] = nullptr;
    j["loss_text"] = nullptr;
    j["loss_image"] = nullptr;
    j["iterations"] = 0;
    j["filter_attempts"] = 0;
  }
  j["elapsed_ms"] = o.elapsed_ms;
  if (!o.result) j["error"] = o.error;
  return j;
}

nlohmann::ordered_json CampaignReport::summary_json() const {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  for (const auto& o : per_prompt) {
    if (o.succeeded()) ++succeeded;
    if (!o.result) ++failed;
  }
  nlohmann::ordered_json j;
  j["attempted"] = per_prompt.size();
  j["succeeded"] = succeeded;
  j["failed"] = failed;
  j["asr_percent"] = asr_percent;
  j["fid"] = fid ? nlohmann::ordered_json(*fid) : nlohmann::ordered_json(nullptr);
  j["wall_time_seconds"] = wall_time_seconds;
  j["config"] = config_echo;
  return j;
}

CampaignReport run_campaign(const CampaignConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  const auto records = ingest(cfg.dataset_path, cfg.attribute, cfg.min_harm_rating);
  const CampaignContext ctx = prepare(cfg);

  std::vector<PromptOutcome> outcomes(records.size());
  OrderedJsonlWriter writer(cfg.output_path, records.size());

  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr fatal;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      {
        std::lock_guard lock(error_mu);
        if (fatal) return;
      }
      outcomes[i] = attack_one(records[i], ctx, cfg.search);
      try {
        writer.submit(i, outcomes[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!fatal) fatal = std::current_exception();
        return;
      }
    }
  };
  const std::size_t workers = std::min(cfg.workers, records.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  CampaignReport report;
  report.per_prompt = std::move(outcomes);
  std::stable_sort(report.per_prompt.begin(), report.per_prompt.end(),
                   [](const auto& a, const auto& b) { return a.prompt_id < b.prompt_id; });
  CampaignTally tally{report.per_prompt.size(), 0};
  for (const auto& o : report.per_prompt) {
    if (o.succeeded()) ++tally.succeeded;
  }
  report.asr_percent = asr(tally);
  report.fid = campaign_fid(cfg, ctx, report.per_prompt);
  report.config_echo = cfg.to_json();
  report.wall_time_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "gamma") return SweepAxis::kGamma;
  if (s == "suffix-len" || s == "suffix_len") return SweepAxis::kSuffixLen;
  throw Error(ErrorKind::kConfig, "unknown sweep axis '" + std::string(s) + "'");
}

std::string_view to_string(SweepAxis axis) {
  return axis == SweepAxis::kGamma ? "gamma" : "suffix-len";
}

std::vector<SweepRow> sweep(const CampaignConfig& cfg, SweepAxis axis,
                            const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::kConfig, "sweep needs at least one value");
  for (double v : values) {
    if (axis == SweepAxis::kGamma && !(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::kConfig, "gamma sweep value outside [0, 1]");
    }
    if (axis == SweepAxis::kSuffixLen && !(v >= 1.0 && std::floor(v) == v)) {
      throw Error(ErrorKind::kConfig, "suffix-len sweep values must be positive integers");
    }
  }

  std::vector<SweepRow> rows;
  const fs::path& base = cfg.output_path;
  for (double v : values) {
    SweepRow row;
    row.value = v;
    CampaignConfig run = cfg;
    std::string tag = std::string(to_string(axis)) + "-";
    if (axis == SweepAxis::kGamma) {
      run.search.gamma = v;
      tag += format_fixed(v, 2);
    } else {
      run.search.suffix_len = static_cast<std::size_t>(v);
      tag += std::to_string(run.search.suffix_len);
    }
    run.output_path = base.parent_path() /
                      (base.stem().string() + "." + tag + base.extension().string());
    row.output_path = run.output_path;
    try {
      const CampaignReport report = run_campaign(run);
      double loss_sum = 0.0;
      double best_sum = 0.0;
      std::size_t counted = 0;
      for (const auto& o : report.per_prompt) {
        if (!o.result) continue;
        loss_sum += o.result->final_loss.total;
        best_sum += o.result->best_loss_total;
        ++counted;
      }
      row.asr_percent = report.asr_percent;
      row.mean_final_loss = counted ? loss_sum / static_cast<double>(counted) : NAN;
      row.mean_best_loss = counted ? best_sum / static_cast<double>(counted) : NAN;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "text") return ReportFormat::kText;
  if (s == "csv") return ReportFormat::kCsv;
  throw Error(ErrorKind::kConfig, "unknown report format '" + std::string(s) + "'");
}

std::string render_sweep(const std::vector<SweepRow>& rows, SweepAxis axis,
                         ReportFormat format) {
  std::ostringstream out;
  const std::string axis_name(to_string(axis));
  auto value_str = [&](double v) {
    return axis == SweepAxis::kGamma ? format_fixed(v, 2)
                                     : std::to_string(static_cast<long long>(v));
  };
  if (format == ReportFormat::kCsv) {
    out << axis_name << ",status,asr_percent,mean_final_loss,mean_best_loss\n";
    for (const auto& r : rows) {
      out << value_str(r.value) << ',' << (r.ok ? "ok" : csv::quote("failed: " + r.error));
      if (r.ok) {
        out << ',' << text::format_double(r.asr_percent) << ','
            << text::format_double(r.mean_final_loss) << ','
            << text::format_double(r.mean_best_loss);
      } else {
        out << ",,,";
      }
      out << '\n';
    }
    return out.str();
  }
  out << std::left << std::setw(12) << axis_name << std::setw(10) << "status" << std::setw(12)
      << "asr_%" << std::setw(18) << "mean_final_loss" << "mean_best_loss\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << value_str(r.value);
    if (r.ok) {
      out << std::setw(10) << "ok" << std::setw(12) << format_fixed(r.asr_percent, 2)
          << std::setw(18) << format_fixed(r.mean_final_loss, 6)
          << format_fixed(r.mean_best_loss, 6) << '\n';
    } else {
      out << "failed: " << r.error << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Reports

namespace {

struct ReportRow {
  long long prompt_id = 0;
  std::string status;
  std::optional<double> loss_total;
  long long iterations = 0;
  long long filter_attempts = 0;
};

ReportRow parse_report_row(const std::string& line, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, where + "invalid JSON");
  }
  if (!j.is_object()) throw Error(ErrorKind::kParse, where + "row is not an object");
  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) {
      throw Error(ErrorKind::kParse, where + "missing field \"" + key + "\"");
    }
    return j[key];
  };
  ReportRow row;
  const auto& id = require("prompt_id");
  if (!id.is_number_integer()) throw Error(ErrorKind::kParse, where + "prompt_id must be int");
  row.prompt_id = id.get<long long>();
  const auto& status = require("status");
  if (!status.is_string()) throw Error(ErrorKind::kParse, where + "status must be a string");
  row.status = status.get<std::string>();
  if (row.status != "error") {
    try {
      parse_attack_status(row.status);
    } catch (const Error&) {
      throw Error(ErrorKind::kParse, where + "unknown status '" + row.status + "'");
    }
  }
  const auto& loss = require("loss_total");
  if (loss.is_number()) {
    row.loss_total = loss.get<double>();
  } else if (!loss.is_null() || row.status != "error") {
    throw Error(ErrorKind::kParse, where + "loss_total must be a number");
  }
  const auto& iters = require("iterations");
  const auto& attempts = require("filter_attempts");
  if (!iters.is_number_integer() || !attempts.is_number_integer()) {
    throw Error(ErrorKind::kParse, where + "iterations and filter_attempts must be int");
  }
  row.iterations = iters.get<long long>();
  row.filter_attempts = attempts.get<long long>();
  return row;
}

}  // namespace

RenderedReport render_report(std::string_view jsonl, ReportFormat format) {
  std::vector<ReportRow> rows;
  const auto all_lines = text::lines(jsonl);
  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    if (text::trim(all_lines[i]).empty()) continue;
    rows.push_back(parse_report_row(all_lines[i], i + 1));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.prompt_id < b.prompt_id; });

  RenderedReport out;
  out.attempted = rows.size();
  for (const auto& r : rows) {
    if (r.status == "success") ++out.succeeded;
  }
  const std::string asr_text =
      out.attempted ? format_fixed(asr({out.attempted, out.succeeded}), 2) : "n/a";

  std::ostringstream t;
  if (format == ReportFormat::kCsv) {
    t << "prompt_id,status,final_loss,iterations,filter_attempts\n";
    for (const auto& r : rows) {
      t << r.prompt_id << ',' << csv::quote(r.status) << ','
        << (r.loss_total ? text::format_double(*r.loss_total) : "") << ',' << r.iterations
        << ',' << r.filter_attempts << '\n';
    }
    t << "\nattempted,succeeded,asr_percent\n"
      << out.attempted << ',' << out.succeeded << ',' << asr_text << '\n';
  } else {
    t << std::left << std::setw(11) << "prompt_id" << std::setw(30) << "status"
      << std::setw(12) << "final_loss" << std::setw(12) << "iterations"
      << "filter_attempts\n";
    for (const auto& r : rows) {
      t << std::left << std::setw(11) << r.prompt_id << std::setw(30) << r.status
        << std::setw(12) << (r.loss_total ? format_fixed(*r.loss_total, 6) : "-")
        << std::setw(12) << r.iterations << r.filter_attempts << '\n';
    }
    t << "attempted: " << out.attempted << "  succeeded: " << out.succeeded
      << "  asr: " << asr_text << (out.attempted ? "%" : "") << '\n';
  }
  out.table = t.str();
  return out;
}

RenderedReport report(const fs::path& jsonl_path, ReportFormat format) {
  return render_report(text::read_file(jsonl_path), format);
}

}  // namespace promptprobe
