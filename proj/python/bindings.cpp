#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "anomamind/backend.hpp"
#include "anomamind/baselines.hpp"
#include "anomamind/eval.hpp"
#include "anomamind/plot.hpp"
#include "anomamind/reward.hpp"
#include "anomamind/series.hpp"
#include "anomamind/tools.hpp"
#include "anomamind/workflow.hpp"

namespace py = pybind11;
using namespace anomamind;

namespace {

std::string payload_json(const ToolResult& result) { return nlohmann::json(result).dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Coarse-to-fine, tool-driven time-series anomaly detection engine";

  py::register_exception<Error>(m, "EngineError");

  // ------------------------------------------------------------- series
  py::enum_<AnomalyKind>(m, "AnomalyKind")
      .value("point_global", AnomalyKind::point_global)
      .value("pattern_contextual", AnomalyKind::pattern_contextual)
      .value("pattern_shapelet", AnomalyKind::pattern_shapelet)
      .value("pattern_seasonal", AnomalyKind::pattern_seasonal)
      .value("pattern_trend", AnomalyKind::pattern_trend);

  py::enum_<BaseSignal>(m, "BaseSignal")
      .value("constant", BaseSignal::constant)
      .value("linear", BaseSignal::linear)
      .value("sinusoid", BaseSignal::sinusoid);

  py::class_<TimeSeries>(m, "TimeSeries")
      .def(py::init<>())
      .def_readwrite("name", &TimeSeries::name)
      .def_readwrite("values", &TimeSeries::values)
      .def_readwrite("labels", &TimeSeries::labels)
      .def("__len__", &TimeSeries::size)
      .def("__repr__", [](const TimeSeries& s) {
        return "TimeSeries(name='" + s.name + "', n=" + std::to_string(s.size()) + ")";
      });

  py::class_<NormalizationParams>(m, "NormalizationParams")
      .def_readonly("min", &NormalizationParams::min)
      .def_readonly("max", &NormalizationParams::max);

  py::class_<Window>(m, "Window")
      .def(py::init<>())
      .def_readwrite("parent", &Window::parent)
      .def_readwrite("start", &Window::start)
      .def_readwrite("end", &Window::end)
      .def_readwrite("values", &Window::values)
      .def("__len__", &Window::size);

  py::class_<AnomalyInjection>(m, "AnomalyInjection")
      .def(py::init<>())
      .def(py::init([](AnomalyKind kind, std::size_t position, std::size_t span,
                       double magnitude) {
             return AnomalyInjection{kind, position, span, magnitude};
           }),
           py::arg("kind"), py::arg("position"), py::arg("span") = 1,
           py::arg("magnitude") = 0.0)
      .def_readwrite("kind", &AnomalyInjection::kind)
      .def_readwrite("position", &AnomalyInjection::position)
      .def_readwrite("span", &AnomalyInjection::span)
      .def_readwrite("magnitude", &AnomalyInjection::magnitude);

  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_readwrite("length", &SynthSpec::length)
      .def_readwrite("base", &SynthSpec::base)
      .def_readwrite("noise_sigma", &SynthSpec::noise_sigma)
      .def_readwrite("anomalies", &SynthSpec::anomalies)
      .def_readwrite("seed", &SynthSpec::seed);

  m.def("load_series", &load_series, py::arg("path"), py::arg("has_labels") = false);
  m.def("write_series_csv", &write_series_csv, py::arg("series"), py::arg("path"));
  m.def("normalize", &normalize, py::arg("series"));
  m.def("denormalize", &denormalize, py::arg("value"), py::arg("params"));
  m.def("detrend", &detrend, py::arg("series"));
  m.def("least_squares_line", &least_squares_line, py::arg("values"));
  m.def("segment_windows", &segment_windows, py::arg("series"), py::arg("length") = 100,
        py::arg("step") = 100, py::arg("min_tail") = 20);
  m.def("window_of", &window_of, py::arg("series"), py::arg("start"), py::arg("end"));
  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"));

  // ------------------------------------------------------------- baselines
  py::class_<ScoreSeries>(m, "ScoreSeries")
      .def(py::init<>())
      .def_readwrite("scores", &ScoreSeries::scores)
      .def_readwrite("method", &ScoreSeries::method);

  m.def("fft_ad_score", &fft_ad_score, py::arg("series"), py::arg("keep_fraction") = 0.1);
  m.def("spectral_residual_score", &spectral_residual_score, py::arg("series"),
        py::arg("avg_window") = 3);
  m.def("threshold_mu_3sigma", &threshold_mu_3sigma, py::arg("scores"), py::arg("k") = 3.0);

  // ------------------------------------------------------------- tools
  py::enum_<Scope>(m, "Scope").value("local", Scope::local).value("global_", Scope::global);

  py::enum_<RecordKind>(m, "RecordKind")
      .value("anomaly_type", RecordKind::anomaly_type)
      .value("domain", RecordKind::domain)
      .value("tool_semantics", RecordKind::tool_semantics);

  py::class_<StatSummary>(m, "StatSummary")
      .def_readonly("mean", &StatSummary::mean)
      .def_readonly("std", &StatSummary::std_dev)
      .def_readonly("min", &StatSummary::min)
      .def_readonly("max", &StatSummary::max)
      .def_readonly("median", &StatSummary::median)
      .def_readonly("iqr", &StatSummary::iqr)
      .def_readonly("n", &StatSummary::n);

  py::class_<ZScorePoint>(m, "ZScorePoint")
      .def_readonly("index", &ZScorePoint::index)
      .def_readonly("z", &ZScorePoint::z);

  py::class_<ZScoreReport>(m, "ZScoreReport")
      .def_readonly("scope", &ZScoreReport::scope)
      .def_readonly("scores", &ZScoreReport::scores)
      .def_readonly("outlier_indices", &ZScoreReport::outlier_indices)
      .def_readonly("threshold", &ZScoreReport::threshold)
      .def_readonly("degenerate", &ZScoreReport::degenerate);

  py::class_<StructureReport>(m, "StructureReport")
      .def_readonly("scope", &StructureReport::scope)
      .def_readonly("trend_slope", &StructureReport::trend_slope)
      .def_readonly("dominant_period", &StructureReport::dominant_period)
      .def_readonly("level_shift_index", &StructureReport::level_shift_index)
      .def_readonly("context_deviation", &StructureReport::context_deviation);

  py::class_<CandidateInterval>(m, "CandidateInterval")
      .def_readonly("start", &CandidateInterval::start)
      .def_readonly("end", &CandidateInterval::end)
      .def_readonly("saliency", &CandidateInterval::saliency)
      .def("__repr__", [](const CandidateInterval& c) {
        return "CandidateInterval([" + std::to_string(c.start) + ", " +
               std::to_string(c.end) + "), saliency=" + std::to_string(c.saliency) + ")";
      });

  py::class_<KnowledgeRecord>(m, "KnowledgeRecord")
      .def(py::init<>())
      .def_readwrite("id", &KnowledgeRecord::id)
      .def_readwrite("kind", &KnowledgeRecord::kind)
      .def_readwrite("tags", &KnowledgeRecord::tags)
      .def_readwrite("body", &KnowledgeRecord::body);

  py::class_<KnowledgeStore>(m, "KnowledgeStore")
      .def(py::init<std::vector<KnowledgeRecord>>())
      .def_static("builtin", &KnowledgeStore::builtin)
      .def_static("load", &KnowledgeStore::load, py::arg("path"))
      .def_property_readonly("records", &KnowledgeStore::records)
      .def("has_anomaly_type", &KnowledgeStore::has_anomaly_type, py::arg("name"));

  py::class_<ToolResult>(m, "ToolResult")
      .def_readonly("tool", &ToolResult::tool)
      .def_readonly("summary", &ToolResult::summary)
      .def_property_readonly("payload",
                             [](const ToolResult& r) { return py::cast(r.payload); })
      .def("to_json", &payload_json);

  py::class_<ToolCall>(m, "ToolCall")
      .def(py::init([](const std::string& tool, const py::dict& params) {
             ToolCall call;
             call.tool = tool;
             for (const auto& item : params) {
               const auto key = item.first.cast<std::string>();
               if (py::isinstance<py::str>(item.second)) {
                 call.params[key] = item.second.cast<std::string>();
               } else if (py::isinstance<py::int_>(item.second)) {
                 call.params[key] = item.second.cast<long>();
               } else {
                 call.params[key] = item.second.cast<double>();
               }
             }
             return call;
           }),
           py::arg("tool"), py::arg("params") = py::dict())
      .def_readonly("tool", &ToolCall::tool);

  m.def("stat_features", &stat_features, py::arg("window"));
  m.def("diff_zscore", &diff_zscore, py::arg("window"), py::arg("scope") = Scope::global,
        py::arg("radius") = 10, py::arg("threshold") = 3.0);
  m.def("global_structure", &global_structure, py::arg("window"));
  m.def("local_structure", &local_structure, py::arg("window"), py::arg("start"),
        py::arg("end"));
  m.def("query_knowledge", &query_knowledge, py::arg("store"), py::arg("tags"),
        py::arg("kind") = std::nullopt);
  m.def(
      "localize_candidates",
      [](const Window& window, std::size_t max_candidates) {
        return localize_candidates(window, max_candidates);
      },
      py::arg("window"), py::arg("max_candidates") = 3);
  m.def(
      "dispatch",
      [](const ToolCall& call, const Window& window, const KnowledgeStore* knowledge) {
        ToolContext context{&window, knowledge ? knowledge : nullptr};
        static const KnowledgeStore fallback = KnowledgeStore::builtin();
        if (!knowledge) context.knowledge = &fallback;
        return dispatch(call, context);
      },
      py::arg("call"), py::arg("window"), py::arg("knowledge") = nullptr);
  m.def("registered_tools", [] { return registered_tools(); });

  // ------------------------------------------------------------- protocol
  py::enum_<AgentRole>(m, "AgentRole")
      .value("locator", AgentRole::locator)
      .value("actor", AgentRole::actor)
      .value("detector", AgentRole::detector)
      .value("evaluator", AgentRole::evaluator);

  py::class_<LocatorPlan>(m, "LocatorPlan")
      .def_readonly("think", &LocatorPlan::think)
      .def_readonly("plan", &LocatorPlan::plan)
      .def_readonly("declared_thresholds", &LocatorPlan::declared_thresholds);

  py::class_<AnomalyVerdict>(m, "AnomalyVerdict")
      .def(py::init([](long start, long end, const std::string& type,
                       const std::string& explanation, int confidence) {
             return AnomalyVerdict{start, end, type, explanation, confidence};
           }),
           py::arg("start"), py::arg("end"), py::arg("type"), py::arg("explanation") = "",
           py::arg("confidence") = 1)
      .def_readwrite("start", &AnomalyVerdict::start)
      .def_readwrite("end", &AnomalyVerdict::end)
      .def_readwrite("type", &AnomalyVerdict::type)
      .def_readwrite("explanation", &AnomalyVerdict::explanation)
      .def_readwrite("confidence", &AnomalyVerdict::confidence)
      .def("__eq__", [](const AnomalyVerdict& a, const AnomalyVerdict& b) { return a == b; })
      .def("__repr__", [](const AnomalyVerdict& v) {
        return "AnomalyVerdict([" + std::to_string(v.start) + ", " + std::to_string(v.end) +
               "], '" + v.type + "', confidence=" + std::to_string(v.confidence) + ")";
      });

  py::class_<EvaluatorReport>(m, "EvaluatorReport")
      .def_readonly("issues", &EvaluatorReport::issues)
      .def_readonly("suggestions", &EvaluatorReport::suggestions)
      .def_readonly("needs_refinement", &EvaluatorReport::needs_refinement)
      .def_readonly("quality_metrics", &EvaluatorReport::quality_metrics);

  m.def("render_prompt", &render_prompt, py::arg("role"), py::arg("context"));
  m.def("parse_locator_plan", &parse_locator_plan, py::arg("reply"));
  m.def("parse_actor_calls", &parse_actor_calls, py::arg("reply"));
  m.def("parse_detector_verdicts", &parse_detector_verdicts, py::arg("reply"));
  m.def("parse_evaluator_report", &parse_evaluator_report, py::arg("reply"));
  m.def("strip_think", &strip_think, py::arg("reply"));

  // ------------------------------------------------------------- backends
  py::enum_<BackendKind>(m, "BackendKind")
      .value("remote", BackendKind::remote)
      .value("heuristic", BackendKind::heuristic)
      .value("replay", BackendKind::replay);

  py::class_<BackendConfig>(m, "BackendConfig")
      .def(py::init<>())
      .def_readwrite("kind", &BackendConfig::kind)
      .def_readwrite("endpoint", &BackendConfig::endpoint)
      .def_readwrite("model", &BackendConfig::model)
      .def_readwrite("temperature", &BackendConfig::temperature)
      .def_readwrite("replay_path", &BackendConfig::replay_path);

  py::enum_<ChatRole>(m, "ChatRole")
      .value("system", ChatRole::system)
      .value("user", ChatRole::user)
      .value("assistant", ChatRole::assistant);

  py::class_<ChatTurn>(m, "ChatTurn")
      .def(py::init([](ChatRole role, const std::string& content) {
             return ChatTurn{role, content};
           }),
           py::arg("role"), py::arg("content"))
      .def_readwrite("role", &ChatTurn::role)
      .def_readwrite("content", &ChatTurn::content);

  m.def("complete", py::overload_cast<const BackendConfig&, const std::vector<ChatTurn>&>(
                        &complete),
        py::arg("backend"), py::arg("messages"));
  m.def("request_digest", &request_digest, py::arg("temperature"), py::arg("messages"));

  // ------------------------------------------------------------- workflow
  py::enum_<LocalizationMode>(m, "LocalizationMode")
      .value("proxy", LocalizationMode::proxy)
      .value("backend", LocalizationMode::backend);

  py::class_<WorkflowConfig>(m, "WorkflowConfig")
      .def(py::init<>())
      .def_readwrite("max_refinements", &WorkflowConfig::max_refinements)
      .def_readwrite("tool_budget", &WorkflowConfig::tool_budget)
      .def_readwrite("backends", &WorkflowConfig::backends)
      .def_readwrite("localization", &WorkflowConfig::localization)
      .def_readwrite("perception", &WorkflowConfig::perception)
      .def_readwrite("max_candidates", &WorkflowConfig::max_candidates)
      .def("set_knowledge", [](WorkflowConfig& config, const KnowledgeStore& store) {
        config.knowledge = std::make_shared<const KnowledgeStore>(store);
      });

  py::class_<EpisodeFailure>(m, "EpisodeFailure")
      .def_readonly("role", &EpisodeFailure::role)
      .def_readonly("message", &EpisodeFailure::message);

  py::class_<EpisodeTrace>(m, "EpisodeTrace")
      .def_readonly("window", &EpisodeTrace::window)
      .def_readonly("final_verdicts", &EpisodeTrace::final_verdicts)
      .def_readonly("iterations", &EpisodeTrace::iterations)
      .def_readonly("refinement_exhausted", &EpisodeTrace::refinement_exhausted)
      .def_readonly("failure", &EpisodeTrace::failure)
      .def("tool_call_count", &EpisodeTrace::tool_call_count)
      .def("complete_call_count", &EpisodeTrace::complete_call_count)
      .def("to_jsonl", [](const EpisodeTrace& t) { return trace_to_jsonl(t); })
      .def_static("from_jsonl", &trace_from_jsonl, py::arg("text"));

  py::class_<EpisodeResult>(m, "EpisodeResult")
      .def_readonly("verdicts", &EpisodeResult::verdicts)
      .def_readonly("trace", &EpisodeResult::trace)
      .def("ok", &EpisodeResult::ok);

  py::class_<ReplayOutcome>(m, "ReplayOutcome")
      .def_readonly("verdicts", &ReplayOutcome::verdicts)
      .def_readonly("matches_recorded", &ReplayOutcome::matches_recorded)
      .def_readonly("divergence", &ReplayOutcome::divergence);

  py::class_<DatasetResult>(m, "DatasetResult")
      .def_readonly("labels", &DatasetResult::labels)
      .def_readonly("verdicts", &DatasetResult::verdicts)
      .def_readonly("traces", &DatasetResult::traces)
      .def_readonly("failed_episodes", &DatasetResult::failed_episodes);

  m.def("run_episode", &run_episode, py::arg("window"), py::arg("config") = WorkflowConfig{},
        py::call_guard<py::gil_scoped_release>());
  m.def("merge_verdicts", &merge_verdicts, py::arg("verdicts"), py::arg("gap") = 3);
  m.def("replay_episode", &replay_episode, py::arg("trace"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_dataset", &run_dataset, py::arg("series"),
        py::arg("config") = WorkflowConfig{}, py::arg("window_length") = 100,
        py::arg("step") = 100, py::arg("min_tail") = 20, py::arg("workers") = 1,
        py::arg("detrend_first") = true, py::call_guard<py::gil_scoped_release>());
  m.def("save_trace", &save_trace, py::arg("trace"), py::arg("path"));
  m.def("load_trace", &load_trace, py::arg("path"));

  // ------------------------------------------------------------- reward
  py::class_<RewardConfig>(m, "RewardConfig")
      .def(py::init<>())
      .def_readwrite("w_two_sided", &RewardConfig::w_two_sided)
      .def_readwrite("w_rule_matching", &RewardConfig::w_rule_matching)
      .def_readwrite("w_fp_penalty", &RewardConfig::w_fp_penalty)
      .def_readwrite("enable_two_sided", &RewardConfig::enable_two_sided)
      .def_readwrite("enable_rule_matching", &RewardConfig::enable_rule_matching)
      .def_readwrite("enable_fp_penalty", &RewardConfig::enable_fp_penalty);

  py::class_<RewardBreakdown>(m, "RewardBreakdown")
      .def_readonly("two_sided", &RewardBreakdown::two_sided)
      .def_readonly("fp_penalty", &RewardBreakdown::fp_penalty)
      .def_readonly("rule_matching", &RewardBreakdown::rule_matching)
      .def_readonly("total", &RewardBreakdown::total);

  m.def("two_sided_reward", &two_sided_reward, py::arg("verdicts"), py::arg("truth"));
  m.def("false_positive_penalty", &false_positive_penalty, py::arg("verdicts"),
        py::arg("truth"), py::arg("total"));
  m.def("rule_matching_reward", &rule_matching_reward, py::arg("verdicts"),
        py::arg("taxonomy"), py::arg("trace"));
  m.def("score_episode", &score_episode, py::arg("trace"), py::arg("truth"),
        py::arg("config") = RewardConfig{});

  // ------------------------------------------------------------- eval
  py::class_<ConfusionCounts>(m, "ConfusionCounts")
      .def_readonly("tp", &ConfusionCounts::tp)
      .def_readonly("fp", &ConfusionCounts::fp)
      .def_readonly("fn", &ConfusionCounts::fn);

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("precision", &MetricsReport::precision)
      .def_readonly("recall", &MetricsReport::recall)
      .def_readonly("f1", &MetricsReport::f1)
      .def_readonly("best_f1", &MetricsReport::best_f1)
      .def_readonly("best_threshold", &MetricsReport::best_threshold)
      .def_readonly("counts", &MetricsReport::counts);

  m.def("verdicts_to_labels", &verdicts_to_labels, py::arg("verdicts"), py::arg("total"),
        py::arg("min_confidence") = 1);
  m.def("point_metrics", &point_metrics, py::arg("pred"), py::arg("truth"));
  m.def("best_f1_confidence", &best_f1_confidence, py::arg("verdicts"), py::arg("truth"));
  m.def("best_f1_score", &best_f1_score, py::arg("scores"), py::arg("truth"));
  m.def("dataset_report", &dataset_report, py::arg("reports"));
  m.def("average_metric", &average_metric, py::arg("report"));

  // ------------------------------------------------------------- plot
  m.def(
      "render_svg_plot",
      [](const TimeSeries& series, const std::vector<AnomalyVerdict>& verdicts,
         const std::optional<std::vector<int>>& truth, int width, int height) {
        PlotOptions options;
        options.width = width;
        options.height = height;
        return render_svg_plot(series, verdicts, truth ? &*truth : nullptr, options);
      },
      py::arg("series"), py::arg("verdicts") = std::vector<AnomalyVerdict>{},
      py::arg("truth") = std::nullopt, py::arg("width") = 900, py::arg("height") = 240);

  m.attr("__version__") = "0.1.0";
}
