// campaign: run, sweep and report adversarial-suffix campaigns.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "promptprobe/campaign.hpp"
#include "promptprobe/error.hpp"
#include "promptprobe/text_util.hpp"

namespace {

using namespace promptprobe;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::optional<double> gamma;
  std::optional<std::size_t> suffix_len;
  std::optional<double> tau;
  std::optional<std::size_t> max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> attribute;
  std::optional<double> min_harm_rating;
  std::optional<std::size_t> workers;
  std::optional<std::string> output;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--gamma", gamma, "text/image loss weight in [0, 1]");
    cmd->add_option("--suffix-len", suffix_len, "number of appended tokens");
    cmd->add_option("--tau", tau, "loss threshold for the filter check");
    cmd->add_option("--max-iters", max_iters, "iteration budget per prompt");
    cmd->add_option("--seed", seed, "seed for optional random restarts");
    cmd->add_option("--attribute", attribute, "target attribute (dataset category)");
    cmd->add_option("--min-harm-rating", min_harm_rating, "keep prompts rated strictly above");
    cmd->add_option("--workers", workers, "concurrent prompt workers");
    cmd->add_option("--output", output, "results JSONL path");
  }

  void apply(CampaignConfig& cfg) const {
    if (gamma) cfg.search.gamma = *gamma;
    if (suffix_len) cfg.search.suffix_len = *suffix_len;
    if (tau) cfg.search.tau = *tau;
    if (max_iters) cfg.search.max_iters = *max_iters;
    if (seed) cfg.search.seed = *seed;
    if (attribute) cfg.attribute = *attribute;
    if (min_harm_rating) cfg.min_harm_rating = *min_harm_rating;
    if (workers) cfg.workers = *workers;
    if (output) cfg.output_path = *output;
  }
};

// Accepts "a,b,c" and integer ranges "lo..hi" (inclusive), mixed freely.
std::vector<double> parse_values(const std::string& text_values) {
  std::vector<double> out;
  for (auto part : text::split(text_values, ',')) {
    part = text::trim(part);
    if (part.empty()) continue;
    if (auto dots = part.find(".."); dots != std::string_view::npos) {
      auto lo = text::parse_int(text::trim(part.substr(0, dots)));
      auto hi = text::parse_int(text::trim(part.substr(dots + 2)));
      if (!lo || !hi || *lo > *hi) {
        throw Error(ErrorKind::kConfig, "invalid range '" + std::string(part) + "'");
      }
      for (long long v = *lo; v <= *hi; ++v) out.push_back(static_cast<double>(v));
      continue;
    }
    auto v = text::parse_double(part);
    if (!v) throw Error(ErrorKind::kConfig, "invalid sweep value '" + std::string(part) + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw Error(ErrorKind::kConfig, "no sweep values given");
  return out;
}

int exit_code_for(ErrorKind kind) {
  return kind == ErrorKind::kConfig || kind == ErrorKind::kUsage ? kExitConfig : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial suffix search campaigns against text-to-image safety filters"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides run_overrides;
  auto* run = app.add_subcommand("run", "attack every selected prompt and write results JSONL");
  run->add_option("--config", config_path, "campaign TOML file")->required();
  run_overrides.add_to(run);

  std::string sweep_config;
  std::string axis_name;
  std::string values_spec;
  std::string sweep_format = "text";
  Overrides sweep_overrides;
  auto* sweep_cmd = app.add_subcommand("sweep", "repeat a campaign across gamma or suffix-len");
  sweep_cmd->add_option("--config", sweep_config, "campaign TOML file")->required();
  sweep_cmd->add_option("--axis", axis_name, "gamma | suffix-len")->required();
  sweep_cmd->add_option("--values", values_spec, "comma list, integer ranges as lo..hi")
      ->required();
  sweep_cmd->add_option("--format", sweep_format, "text | csv");
  sweep_overrides.add_to(sweep_cmd);

  std::string input_path;
  std::string format = "text";
  auto* report_cmd = app.add_subcommand("report", "render a results JSONL as a table");
  report_cmd->add_option("--input", input_path, "results JSONL")->required();
  report_cmd->add_option("--format", format, "text | csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      CampaignConfig cfg = load_campaign_config(config_path);
      run_overrides.apply(cfg);
      const CampaignReport rep = run_campaign(cfg);
      std::cout << rep.summary_json().dump(2) << '\n';
      return 0;
    }
    if (*sweep_cmd) {
      CampaignConfig cfg = load_campaign_config(sweep_config);
      sweep_overrides.apply(cfg);
      const SweepAxis axis = parse_sweep_axis(axis_name);
      const ReportFormat fmt = parse_report_format(sweep_format);
      const auto values = parse_values(values_spec);
      cfg.validate();
      const auto rows = sweep(cfg, axis, values);
      std::cout << render_sweep(rows, axis, fmt);
      for (const auto& r : rows) {
        if (!r.ok) return kExitRuntime;
      }
      return 0;
    }
    const ReportFormat fmt = parse_report_format(format);
    const RenderedReport rep = report(input_path, fmt);
    std::cout << rep.table;
    return rep.attempted == 0 ? kExitRuntime : 0;
  } catch (const Error& e) {
    std::cerr << "campaign: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "campaign: " << e.what() << '\n';
    return kExitRuntime;
  }
}
