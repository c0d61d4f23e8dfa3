#include "promptprobe/suffix_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <utility>

#include "promptprobe/error.hpp"

namespace promptprobe {

namespace {

using Suffix = std::vector<TokenId>;

// Scores suffixes for one (prompt, targets) instance. With a toy encoder over
// the pool's own table the prompt is tokenized once; the resulting embedding
// is bit-identical to encode_text on the joined string.
class SuffixEvaluator {
 public:
  SuffixEvaluator(std::string_view clean_prompt, const EmbeddingTable& vocab,
                  const EmbeddingVector& text_target, const EmbeddingVector& image_reference,
                  const EncoderBinding& encoder, double gamma)
      : clean_prompt_(clean_prompt),
        vocab_(vocab),
        text_target_(text_target),
        image_reference_(image_reference),
        encoder_(encoder),
        gamma_(gamma) {
    encoder_.validate();
    if (text_target.dim() != encoder.dim() || image_reference.dim() != encoder.dim()) {
      throw Error(ErrorKind::kUsage, "target embeddings do not match the encoder dim");
    }
    if (encoder.kind == EncoderKind::kToy && encoder.table.get() == &vocab) {
      prompt_ids_ = tokenize(vocab, clean_prompt);
      fast_path_ = true;
    }
  }

  LossBreakdown operator()(const Suffix& suffix) {
    ++evaluations_;
    if (fast_path_) {
      Suffix ids = prompt_ids_;
      ids.insert(ids.end(), suffix.begin(), suffix.end());
      return combined_loss(encode_token_ids(vocab_, ids), text_target_, image_reference_,
                           gamma_);
    }
    const auto prompt = join_suffix(clean_prompt_, vocab_, suffix);
    return combined_loss(encode_text(encoder_, prompt), text_target_, image_reference_,
                         gamma_);
  }

  std::size_t evaluations() const { return evaluations_; }

 private:
  std::string_view clean_prompt_;
  const EmbeddingTable& vocab_;
  const EmbeddingVector& text_target_;
  const EmbeddingVector& image_reference_;
  const EncoderBinding& encoder_;
  double gamma_;
  bool fast_path_ = false;
  Suffix prompt_ids_;
  std::size_t evaluations_ = 0;
};

bool ranks_before(double loss_a, const Suffix& a, double loss_b, const Suffix& b) {
  if (loss_a != loss_b) return loss_a < loss_b;
  return a < b;
}

// Keeps the `capacity` lowest-loss distinct suffixes seen so far. With
// capacity > number of tabu entries it always holds a non-tabu state.
class BestStates {
 public:
  explicit BestStates(std::size_t capacity) : capacity_(capacity) {}

  void offer(const Suffix& s, const LossBreakdown& loss) {
    for (const auto& [l, t] : states_) {
      if (t == s) return;
    }
    auto pos = std::find_if(states_.begin(), states_.end(), [&](const auto& e) {
      return ranks_before(loss.total, s, e.first.total, e.second);
    });
    if (states_.size() >= capacity_ && pos == states_.end()) return;
    states_.insert(pos, {loss, s});
    if (states_.size() > capacity_) states_.pop_back();
  }

  const std::pair<LossBreakdown, Suffix>* best_excluding(const std::set<Suffix>& tabu) const {
    for (const auto& e : states_) {
      if (!tabu.contains(e.second)) return &e;
    }
    return nullptr;
  }

  double lowest_total() const { return states_.front().first.total; }

 private:
  std::size_t capacity_;
  std::vector<std::pair<LossBreakdown, Suffix>> states_;
};

Verdict run_check(const PipelineCheck& check, std::string_view clean_prompt,
                  const std::string& adversarial_prompt) {
  try {
    return check(adversarial_prompt);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kCampaign, "pipeline check failed for prompt '" +
                                          std::string(clean_prompt) + "': " + e.what());
  }
}

void fill_result(AttackResult& r, std::string_view clean_prompt, const EmbeddingTable& vocab,
                 const Suffix& suffix, const LossBreakdown& loss) {
  r.clean_prompt = std::string(clean_prompt);
  r.suffix = suffix;
  r.adversarial_prompt = join_suffix(clean_prompt, vocab, suffix);
  r.final_loss = loss;
}

}  // namespace

void SearchConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorKind::kConfig, "gamma must lie in [0, 1]");
  if (suffix_len < 1) throw Error(ErrorKind::kConfig, "suffix_len must be >= 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::kConfig, "tau must be > 0");
  if (max_iters < 1) throw Error(ErrorKind::kConfig, "max_iters must be >= 1");
  if (shortlist_k < 1) throw Error(ErrorKind::kConfig, "shortlist_k must be >= 1");
  if (max_filter_attempts < 1) {
    throw Error(ErrorKind::kConfig, "max_filter_attempts must be >= 1");
  }
}

std::string_view to_string(AttackStatus status) {
  switch (status) {
    case AttackStatus::kSuccess: return "success";
    case AttackStatus::kBelowThresholdButFiltered: return "below_threshold_but_filtered";
    case AttackStatus::kBudgetExhausted: return "budget_exhausted";
  }
  return "unknown";
}

AttackStatus parse_attack_status(std::string_view s) {
  if (s == "success") return AttackStatus::kSuccess;
  if (s == "below_threshold_but_filtered") return AttackStatus::kBelowThresholdButFiltered;
  if (s == "budget_exhausted") return AttackStatus::kBudgetExhausted;
  throw Error(ErrorKind::kParse, "unknown status '" + std::string(s) + "'");
}

std::string join_suffix(std::string_view clean_prompt, const EmbeddingTable& vocab,
                        const std::vector<TokenId>& suffix) {
  std::string out(clean_prompt);
  for (TokenId id : suffix) {
    out += ' ';
    out += vocab.at(id).token_text;
  }
  return out;
}

LossBreakdown evaluate_suffix(std::string_view clean_prompt,
                              const std::vector<TokenId>& suffix,
                              const EmbeddingTable& vocab,
                              const EmbeddingVector& text_target,
                              const EmbeddingVector& image_reference,
                              const EncoderBinding& encoder, double gamma) {
  const auto prompt = join_suffix(clean_prompt, vocab, suffix);
  return combined_loss(encode_text(encoder, prompt), text_target, image_reference, gamma);
}

AttackResult search(std::string_view clean_prompt, const EmbeddingVector& text_target,
                    const EmbeddingVector& image_reference, const CandidatePool& pool,
                    const EncoderBinding& encoder, const SearchConfig& cfg,
                    const PipelineCheck& check) {
  cfg.validate();
  const EmbeddingTable& vocab = pool.table();
  SuffixEvaluator evaluate(clean_prompt, vocab, text_target, image_reference, encoder,
                           cfg.gamma);
  const std::vector<TokenId> candidates = shortlist(pool, text_target, cfg.shortlist_k);
  const std::size_t n = cfg.suffix_len;

  Suffix state(n, candidates.front());
  LossBreakdown loss = evaluate(state);

  std::set<Suffix> tabu;
  BestStates best(cfg.max_filter_attempts + 1);
  best.offer(state, loss);

  AttackResult result;
  std::size_t phase = 0;
  auto record = [&](std::size_t iteration) {
    if (cfg.record_trace) result.trace.push_back({iteration, phase, loss.total});
  };
  record(0);

  std::mt19937_64 rng(cfg.seed);
  std::size_t restarts_left = cfg.random_restarts;
  std::size_t idle = 0;  // consecutive iterations without a move or new tabu entry
  std::size_t iteration = 0;

  auto finish = [&](AttackStatus status) {
    result.status = status;
    result.iterations_used = iteration;
    result.evaluations = evaluate.evaluations();
    result.best_loss_total = best.lowest_total();
    if (status == AttackStatus::kSuccess) {
      fill_result(result, clean_prompt, vocab, state, loss);
    } else if (const auto* b = best.best_excluding(tabu)) {
      fill_result(result, clean_prompt, vocab, b->second, b->first);
    } else {
      fill_result(result, clean_prompt, vocab, state, loss);
    }
    return result;
  };

  // Submits the current suffix when eligible; yields a status when the search
  // must stop (pass, or filter attempts exhausted).
  auto maybe_check = [&]() -> std::optional<AttackStatus> {
    if (!(loss.total < cfg.tau) || tabu.contains(state)) return std::nullopt;
    const auto prompt = join_suffix(clean_prompt, vocab, state);
    if (run_check(check, clean_prompt, prompt) == Verdict::kPass) return AttackStatus::kSuccess;
    tabu.insert(state);
    ++result.filter_attempts;
    ++phase;
    idle = 0;
    if (result.filter_attempts >= cfg.max_filter_attempts) {
      return AttackStatus::kBelowThresholdButFiltered;
    }
    return std::nullopt;
  };

  for (iteration = 1; iteration <= cfg.max_iters; ++iteration) {
    if (auto stop = maybe_check()) return finish(*stop);

    const std::size_t position = (iteration - 1) % n;
    const bool from_tabu = tabu.contains(state);
    double best_total = from_tabu ? std::numeric_limits<double>::infinity() : loss.total;
    std::optional<TokenId> chosen;
    LossBreakdown chosen_loss;
    Suffix trial = state;
    for (TokenId c : candidates) {
      if (c == state[position]) continue;
      trial[position] = c;
      if (tabu.contains(trial)) continue;
      const LossBreakdown l = evaluate(trial);
      best.offer(trial, l);
      if (l.total < best_total || (chosen && l.total == best_total && c < *chosen)) {
        best_total = l.total;
        chosen = c;
        chosen_loss = l;
      }
    }

    if (chosen) {
      state[position] = *chosen;
      loss = chosen_loss;
      idle = 0;
      record(iteration);
      continue;
    }
    if (++idle < n) continue;

    // A full sweep changed nothing: every further iteration is a no-op.
    if (restarts_left == 0) break;
    --restarts_left;
    for (auto& id : state) id = pool.allowed_ids()[rng() % pool.size()];
    loss = evaluate(state);
    best.offer(state, loss);
    ++phase;
    idle = 0;
    record(iteration);
  }
  iteration = std::min(iteration, cfg.max_iters);

  if (auto stop = maybe_check()) return finish(*stop);
  return finish(result.filter_attempts > 0 ? AttackStatus::kBelowThresholdButFiltered
                                           : AttackStatus::kBudgetExhausted);
}

AttackResult brute_force_search(std::string_view clean_prompt,
                                const EmbeddingVector& text_target,
                                const EmbeddingVector& image_reference,
                                const CandidatePool& pool, const EncoderBinding& encoder,
                                const SearchConfig& cfg, const PipelineCheck& check) {
  cfg.validate();
  const std::size_t n = cfg.suffix_len;
  const std::size_t m = pool.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (combos > kBruteForceLimit / m) {
      throw Error(ErrorKind::kUsage, "brute force limited to " +
                                         std::to_string(kBruteForceLimit) + " suffix tuples");
    }
    combos *= m;
  }

  const EmbeddingTable& vocab = pool.table();
  SuffixEvaluator evaluate(clean_prompt, vocab, text_target, image_reference, encoder,
                           cfg.gamma);

  std::vector<std::pair<LossBreakdown, Suffix>> all;
  all.reserve(combos);
  std::vector<std::size_t> digits(n, 0);
  Suffix s(n);
  for (std::size_t k = 0; k < combos; ++k) {
    for (std::size_t i = 0; i < n; ++i) s[i] = pool.allowed_ids()[digits[i]];
    all.emplace_back(evaluate(s), s);
    for (std::size_t i = n; i-- > 0;) {
      if (++digits[i] < m) break;
      digits[i] = 0;
    }
  }
  // Enumeration is lexicographic, so a stable sort breaks loss ties by tuple.
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first.total < b.first.total;
  });

  AttackResult result;
  result.iterations_used = combos;
  result.evaluations = evaluate.evaluations();
  result.best_loss_total = all.front().first.total;
  std::size_t next = 0;
  for (; next < all.size() && all[next].first.total < cfg.tau; ++next) {
    const auto prompt = join_suffix(clean_prompt, vocab, all[next].second);
    if (run_check(check, clean_prompt, prompt) == Verdict::kPass) {
      result.status = AttackStatus::kSuccess;
      fill_result(result, clean_prompt, vocab, all[next].second, all[next].first);
      return result;
    }
    if (++result.filter_attempts >= cfg.max_filter_attempts) {
      ++next;
      break;
    }
  }
  if (result.filter_attempts == 0) {
    result.status = AttackStatus::kBudgetExhausted;
    fill_result(result, clean_prompt, vocab, all.front().second, all.front().first);
    return result;
  }
  result.status = AttackStatus::kBelowThresholdButFiltered;
  const auto& pick = next < all.size() ? all[next] : all.front();
  fill_result(result, clean_prompt, vocab, pick.second, pick.first);
  return result;
}

}  // namespace promptprobe
