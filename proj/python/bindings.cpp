#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "promptprobe/campaign.hpp"
#include "promptprobe/embedding.hpp"
#include "promptprobe/encoder.hpp"
#include "promptprobe/error.hpp"
#include "promptprobe/filter.hpp"
#include "promptprobe/metrics.hpp"
#include "promptprobe/prompt_prep.hpp"
#include "promptprobe/suffix_search.hpp"
#include "promptprobe/vocabulary.hpp"

namespace py = pybind11;
using namespace promptprobe;

namespace {

EmbeddingVector vec(const std::vector<double>& v) { return EmbeddingVector(v); }
std::vector<double> list(const EmbeddingVector& v) { return {v.begin(), v.end()}; }

std::vector<EmbeddingVector> vecs(const std::vector<std::vector<double>>& rows) {
  std::vector<EmbeddingVector> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.emplace_back(r);
  return out;
}

// Python checks may return a bool (True = passed the filter) or "pass"/"flagged".
PipelineCheck wrap_check(py::function fn) {
  return [fn = std::move(fn)](const std::string& prompt) {
    py::gil_scoped_acquire gil;
    py::object r = fn(prompt);
    if (py::isinstance<py::bool_>(r)) return r.cast<bool>() ? Verdict::kPass : Verdict::kFlagged;
    const auto s = r.cast<std::string>();
    if (s == "pass") return Verdict::kPass;
    if (s == "flagged") return Verdict::kFlagged;
    throw Error(ErrorKind::kUsage, "check must return bool, 'pass' or 'flagged'");
  };
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adversarial suffix search core";

  static py::exception<Error> exc(m, "PromptProbeError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(to_string(e.kind())) + ": " + e.what();
      PyErr_SetString(exc.ptr(), msg.c_str());
    }
  });

  py::class_<LossBreakdown>(m, "LossBreakdown")
      .def_readonly("total", &LossBreakdown::total)
      .def_readonly("text_part", &LossBreakdown::text_part)
      .def_readonly("image_part", &LossBreakdown::image_part)
      .def_readonly("gamma", &LossBreakdown::gamma)
      .def("__repr__", [](const LossBreakdown& l) {
        return "LossBreakdown(total=" + std::to_string(l.total) + ")";
      });

  m.def("cosine", [](const std::vector<double>& a, const std::vector<double>& b) {
    return cosine(vec(a), vec(b));
  });
  m.def("normalize", [](const std::vector<double>& v) { return list(normalize(vec(v))); });
  m.def("concept_shift", [](const std::vector<double>& c, const std::vector<double>& n,
                            const std::vector<double>& p) {
    return list(concept_shift(vec(c), vec(n), vec(p)));
  });
  m.def("combined_loss",
        [](const std::vector<double>& cs, const std::vector<double>& t,
           const std::vector<double>& i, double gamma) {
          return combined_loss(vec(cs), vec(t), vec(i), gamma);
        },
        py::arg("candidate"), py::arg("text_target"), py::arg("image_reference"),
        py::arg("gamma") = 0.2);

  py::class_<EmbeddingTable, std::shared_ptr<EmbeddingTable>>(m, "EmbeddingTable")
      .def_property_readonly("dim", &EmbeddingTable::dim)
      .def("__len__", &EmbeddingTable::size)
      .def("tokens", [](const EmbeddingTable& t) {
        std::vector<std::string> out;
        for (const auto& e : t.entries()) out.push_back(e.token_text);
        return out;
      })
      .def("embedding", [](const EmbeddingTable& t, TokenId id) { return list(t.at(id).embedding); })
      .def("find", &EmbeddingTable::find)
      .def("serialize", [](const EmbeddingTable& t) { return serialize_table(t); })
      .def("encode_text", [](std::shared_ptr<EmbeddingTable> t, const std::string& prompt) {
        return list(encode_text(EncoderBinding::toy(t), prompt));
      });
  m.def("load_table", [](const std::filesystem::path& p) {
    return std::make_shared<EmbeddingTable>(load_table(p));
  });
  m.def("parse_table", [](const std::string& content) {
    return std::make_shared<EmbeddingTable>(parse_table(content));
  });

  m.def("sanitize",
        [](const std::string& prompt, const std::vector<std::pair<std::string, std::string>>& rules) {
          std::vector<SubstitutionRule> r;
          for (const auto& [match, repl] : rules) r.push_back({match, repl});
          auto out = sanitize(prompt, SubstitutionMap(std::move(r)));
          return py::make_tuple(out.clean_prompt, out.applied);
        });

  m.def("shortlist",
        [](std::shared_ptr<EmbeddingTable> t, const std::vector<std::string>& blocked,
           const std::vector<double>& direction, std::size_t k, bool substring) {
          auto pool = apply_blocklist(t, Blocklist(blocked, substring ? MatchMode::kSubstring
                                                                      : MatchMode::kExact));
          return shortlist(pool, vec(direction), k);
        },
        py::arg("table"), py::arg("blocked"), py::arg("direction"), py::arg("k"),
        py::arg("substring") = false);

  py::class_<SearchConfig>(m, "SearchConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &SearchConfig::gamma)
      .def_readwrite("suffix_len", &SearchConfig::suffix_len)
      .def_readwrite("tau", &SearchConfig::tau)
      .def_readwrite("max_iters", &SearchConfig::max_iters)
      .def_readwrite("shortlist_k", &SearchConfig::shortlist_k)
      .def_readwrite("seed", &SearchConfig::seed)
      .def_readwrite("max_filter_attempts", &SearchConfig::max_filter_attempts)
      .def_readwrite("random_restarts", &SearchConfig::random_restarts)
      .def_readwrite("record_trace", &SearchConfig::record_trace);

  py::class_<AttackResult>(m, "AttackResult")
      .def_readonly("clean_prompt", &AttackResult::clean_prompt)
      .def_readonly("adversarial_prompt", &AttackResult::adversarial_prompt)
      .def_readonly("suffix", &AttackResult::suffix)
      .def_property_readonly("status", [](const AttackResult& r) { return std::string(to_string(r.status)); })
      .def_readonly("final_loss", &AttackResult::final_loss)
      .def_readonly("best_loss_total", &AttackResult::best_loss_total)
      .def_readonly("iterations_used", &AttackResult::iterations_used)
      .def_readonly("filter_attempts", &AttackResult::filter_attempts)
      .def_readonly("evaluations", &AttackResult::evaluations)
      .def_property_readonly("trace", [](const AttackResult& r) {
        std::vector<std::tuple<std::size_t, std::size_t, double>> out;
        for (const auto& t : r.trace) out.emplace_back(t.iteration, t.phase, t.loss_total);
        return out;
      });

  auto bind_search = [&](const char* name, auto fn) {
    m.def(name,
          [fn](const std::string& clean_prompt, const std::vector<double>& text_target,
               const std::vector<double>& image_reference, std::shared_ptr<EmbeddingTable> table,
               const std::vector<std::string>& blocked, const SearchConfig& cfg,
               py::function check) {
            auto pool = apply_blocklist(table, Blocklist(blocked, MatchMode::kExact));
            return fn(clean_prompt, vec(text_target), vec(image_reference), pool,
                      EncoderBinding::toy(table), cfg, wrap_check(std::move(check)));
          },
          py::arg("clean_prompt"), py::arg("text_target"), py::arg("image_reference"),
          py::arg("table"), py::arg("blocked"), py::arg("config"), py::arg("check"));
  };
  bind_search("search", [](auto&&... a) { return search(a...); });
  bind_search("brute_force_search", [](auto&&... a) { return brute_force_search(a...); });

  m.def("asr", [](std::size_t attempted, std::size_t succeeded) {
    return asr({attempted, succeeded});
  });
  m.def("gaussian_stats", [](const std::vector<std::vector<double>>& samples) {
    auto s = gaussian_stats(vecs(samples));
    return py::make_tuple(s.mean, s.covariance);
  });
  m.def("fid", [](const std::vector<std::vector<double>>& r,
                  const std::vector<std::vector<double>>& g) {
    return fid(gaussian_stats(vecs(r)), gaussian_stats(vecs(g)));
  });
  m.def("fid_from_stats", [](const Eigen::VectorXd& mu_r, const Eigen::MatrixXd& cov_r,
                             const Eigen::VectorXd& mu_g, const Eigen::MatrixXd& cov_g) {
    return fid({mu_r, cov_r, 2}, {mu_g, cov_g, 2});
  });
  m.def("trace_sqrt_product", &trace_sqrt_product);

  m.def("run_campaign_json",
        [](const std::filesystem::path& config_path, const std::filesystem::path& output) {
          auto cfg = load_campaign_config(config_path);
          if (!output.empty()) cfg.output_path = output;
          py::gil_scoped_release release;
          return run_campaign(cfg).summary_json().dump();
        },
        py::arg("config_path"), py::arg("output") = std::filesystem::path());
  m.def("report", [](const std::filesystem::path& jsonl, const std::string& format) {
    return report(jsonl, parse_report_format(format)).table;
  }, py::arg("jsonl"), py::arg("format") = "text");
}
