#include "promptprobe/filter.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "promptprobe/error.hpp"

namespace promptprobe {

FilterBinding FilterBinding::mock(EmbeddingVector centroid, double threshold,
                                  std::size_t images_per_prompt) {
  FilterBinding b;
  b.kind = FilterKind::kMock;
  b.flag_centroid = std::move(centroid);
  b.flag_threshold = threshold;
  b.images_per_prompt = images_per_prompt;
  b.validate();
  return b;
}

FilterBinding FilterBinding::remote(std::string endpoint, std::size_t images_per_prompt,
                                    double timeout_seconds) {
  FilterBinding b;
  b.kind = FilterKind::kRemote;
  b.endpoint = std::move(endpoint);
  b.images_per_prompt = images_per_prompt;
  b.timeout_seconds = timeout_seconds;
  b.validate();
  return b;
}

void FilterBinding::validate() const {
  if (images_per_prompt < 1) throw Error(ErrorKind::kConfig, "images_per_prompt must be >= 1");
  if (kind == FilterKind::kMock) {
    if (!flag_centroid) throw Error(ErrorKind::kConfig, "mock filter requires a flag centroid");
    if (!endpoint.empty()) throw Error(ErrorKind::kConfig, "mock filter must not set an endpoint");
    if (!(flag_threshold >= -1.0 && flag_threshold <= 1.0)) {
      throw Error(ErrorKind::kConfig, "flag_threshold must lie in [-1, 1]");
    }
  } else {
    if (endpoint.empty()) throw Error(ErrorKind::kConfig, "remote filter requires an endpoint");
    if (flag_centroid) throw Error(ErrorKind::kConfig, "remote filter must not set a centroid");
    if (!(timeout_seconds > 0.0)) throw Error(ErrorKind::kConfig, "filter timeout must be positive");
  }
}

std::string_view to_string(Verdict v) { return v == Verdict::kPass ? "pass" : "flagged"; }

FilterVerdict parse_check_response(std::string_view body, std::size_t expected_samples) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kTransport, std::string("filter response is not JSON: ") + e.what());
  }
  auto bad = [](const std::string& what) {
    return Error(ErrorKind::kTransport, "filter response: " + what);
  };
  if (!j.is_object() || !j.contains("verdict") || !j["verdict"].is_string()) {
    throw bad("missing string field 'verdict'");
  }
  if (!j.contains("per_sample") || !j["per_sample"].is_array()) {
    throw bad("missing array field 'per_sample'");
  }
  FilterVerdict out;
  const auto verdict = j["verdict"].get<std::string>();
  if (verdict == "pass") {
    out.verdict = Verdict::kPass;
  } else if (verdict == "flagged") {
    out.verdict = Verdict::kFlagged;
  } else {
    throw bad("unknown verdict '" + verdict + "'");
  }
  for (const auto& s : j["per_sample"]) {
    if (!s.is_object() || !s.contains("id") || !s["id"].is_number_integer() ||
        !s.contains("flagged") || !s["flagged"].is_boolean() || !s.contains("score") ||
        !s["score"].is_number()) {
      throw bad("per_sample entries must be {\"id\": int, \"flagged\": bool, \"score\": float}");
    }
    const double score = s["score"].get<double>();
    if (!std::isfinite(score)) throw bad("non-finite score");
    out.per_sample.push_back({s["id"].get<long long>(), s["flagged"].get<bool>(), score});
  }
  if (out.per_sample.size() != expected_samples) {
    throw bad("expected " + std::to_string(expected_samples) + " samples, got " +
              std::to_string(out.per_sample.size()));
  }
  const bool any_clear = std::any_of(out.per_sample.begin(), out.per_sample.end(),
                                     [](const SampleVerdict& s) { return !s.flagged; });
  if (any_clear != (out.verdict == Verdict::kPass)) {
    throw bad("verdict disagrees with per-sample flags");
  }
  return out;
}

FilterVerdict check(const FilterBinding& binding, std::string_view adversarial_prompt,
                    const EncoderBinding& encoder) {
  binding.validate();
  if (binding.kind == FilterKind::kRemote) {
    const nlohmann::json request = {{"prompt", std::string(adversarial_prompt)},
                                    {"samples", binding.images_per_prompt}};
    const auto body = detail::http_post(binding.endpoint, "/v1/check", request.dump(),
                                        "application/json", binding.timeout_seconds);
    return parse_check_response(body, binding.images_per_prompt);
  }

  // Desk-scale stand-in: every generated sample is judged by the prompt
  // embedding itself.
  const double score = cosine(encode_text(encoder, adversarial_prompt), *binding.flag_centroid);
  const bool flagged = score >= binding.flag_threshold;
  FilterVerdict out;
  out.verdict = flagged ? Verdict::kFlagged : Verdict::kPass;
  for (std::size_t i = 0; i < binding.images_per_prompt; ++i) {
    out.per_sample.push_back({static_cast<long long>(i), flagged, score});
  }
  return out;
}

PipelineCheck make_pipeline_check(FilterBinding binding, EncoderBinding encoder) {
  binding.validate();
  return [binding = std::move(binding), encoder = std::move(encoder)](const std::string& prompt) {
    return check(binding, prompt, encoder).verdict;
  };
}

}  // namespace promptprobe
