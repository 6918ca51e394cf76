#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "anomamind/backend.hpp"
#include "anomamind/baselines.hpp"
#include "anomamind/eval.hpp"
#include "anomamind/plot.hpp"
#include "anomamind/reward.hpp"
#include "anomamind/series.hpp"
#include "anomamind/workflow.hpp"

namespace fs = std::filesystem;
using namespace anomamind;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;
constexpr int kExitBackend = 3;

bool csv_has_label_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::FileMissing, path);
  std::string header;
  std::getline(in, header);
  return header.find(",label") != std::string::npos;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::FileMissing, "cannot open for write: " + path.string());
  out << text;
}

void write_labels_csv(const fs::path& path, const std::vector<int>& labels) {
  std::ostringstream out;
  out << "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
  write_text(path, out.str());
}

void write_scores_csv(const fs::path& path, const ScoreSeries& scores) {
  std::ostringstream out;
  out << "index,score\n";
  out.precision(17);
  for (std::size_t i = 0; i < scores.scores.size(); ++i) {
    out << i << ',' << scores.scores[i] << '\n';
  }
  write_text(path, out.str());
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec spec;
  spec.length = j.at("length").get<std::size_t>();
  spec.base = base_signal_from_string(j.value("base", "constant"));
  spec.noise_sigma = j.value("noise_sigma", 0.0);
  spec.seed = j.value("seed", 0ULL);
  for (const auto& a : j.value("anomalies", nlohmann::json::array())) {
    AnomalyInjection injection;
    injection.kind = anomaly_kind_from_string(a.at("type").get<std::string>());
    injection.position = a.at("position").get<std::size_t>();
    injection.span = a.value("span", std::size_t{1});
    injection.magnitude = a.at("magnitude").get<double>();
    spec.anomalies.push_back(injection);
  }
  return spec;
}

struct DetectOptions {
  std::string input;
  std::string out_dir;
  std::string backend = "heuristic";
  std::string endpoint;
  std::string model;
  double temperature = 0.7;
  std::string replay_fixtures;
  std::string localization = "proxy";
  std::string prompts_dir;
  std::string knowledge_path;
  int max_refinements = 2;
  int tool_budget = 12;
  std::size_t window_length = 100;
  std::size_t window_step = 100;
  std::size_t min_tail = 20;
  unsigned workers = std::thread::hardware_concurrency();
  bool plot = false;
  bool no_detrend = false;
};

WorkflowConfig workflow_config_of(const DetectOptions& opt) {
  BackendConfig backend;
  backend.kind = backend_kind_from_string(opt.backend);
  backend.endpoint = opt.endpoint;
  backend.model = opt.model;
  backend.temperature = opt.temperature;
  backend.replay_path = opt.replay_fixtures;
  validate(backend);

  WorkflowConfig config;
  config.max_refinements = opt.max_refinements;
  config.tool_budget = opt.tool_budget;
  config.localization = localization_mode_from_string(opt.localization);
  for (AgentRole role :
       {AgentRole::locator, AgentRole::actor, AgentRole::detector, AgentRole::evaluator}) {
    config.backends[role] = backend;
  }
  config.perception = backend;
  if (!opt.prompts_dir.empty()) config.prompts = PromptSet::load(opt.prompts_dir);
  if (!opt.knowledge_path.empty()) {
    config.knowledge =
        std::make_shared<const KnowledgeStore>(KnowledgeStore::load(opt.knowledge_path));
  }
  return config;
}

int cmd_detect(const DetectOptions& opt) {
  const bool labeled = csv_has_label_column(opt.input);
  const TimeSeries series = load_series(opt.input, labeled);
  const WorkflowConfig config = workflow_config_of(opt);

  // Fail before any work when the remote key is absent.
  if (backend_kind_from_string(opt.backend) == BackendKind::remote) {
    make_backend(config.backend_for(AgentRole::locator));
  }

  fs::create_directories(opt.out_dir);
  const auto result = run_dataset(series, config, opt.window_length, opt.window_step,
                                  opt.min_tail, std::max(1u, opt.workers), !opt.no_detrend);

  for (const auto& trace : result.traces) {
    const auto name = trace.window.parent + "_" + std::to_string(trace.window.start) +
                      ".trace.jsonl";
    save_trace(trace, (fs::path(opt.out_dir) / name).string());
  }
  write_labels_csv(fs::path(opt.out_dir) / "labels.csv", result.labels);
  write_text(fs::path(opt.out_dir) / "verdicts.json",
             nlohmann::json(result.verdicts).dump(2) + "\n");

  if (labeled) {
    MetricsReport report = point_metrics(result.labels, *series.labels);
    const auto [best, threshold] = best_f1_confidence(result.verdicts, *series.labels);
    report.best_f1 = best;
    report.best_threshold = threshold;
    write_text(fs::path(opt.out_dir) / "metrics.json", metrics_to_json(report).dump(2) + "\n");
    write_text(fs::path(opt.out_dir) / "metrics.csv",
               metrics_csv_header() + "\n" + metrics_csv_row(report) + "\n");
    std::cout << metrics_to_json(report).dump(2) << '\n';
  } else {
    std::cout << nlohmann::json(result.verdicts).dump(2) << '\n';
  }

  if (opt.plot) {
    const auto svg =
        render_svg_plot(series, result.verdicts,
                        series.labels ? &*series.labels : nullptr, PlotOptions{});
    write_text(fs::path(opt.out_dir) / "plot.svg", svg);
  }

  if (result.failed_episodes > 0) {
    std::cerr << result.failed_episodes << " episode(s) failed; partial results written\n";
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_baseline(const std::string& method, const std::string& input,
                 const std::string& out_dir, double keep_fraction, int avg_window,
                 double k_sigma) {
  const bool labeled = csv_has_label_column(input);
  const TimeSeries series = load_series(input, labeled);

  ScoreSeries scores;
  if (method == "fft") {
    scores = fft_ad_score(series, keep_fraction);
  } else if (method == "sr") {
    scores = spectral_residual_score(series, avg_window);
  } else {
    std::cerr << "unknown baseline method '" << method << "' (expected fft or sr)\n";
    return kExitUsage;
  }
  const auto labels = threshold_mu_3sigma(scores, k_sigma);

  fs::create_directories(out_dir);
  write_scores_csv(fs::path(out_dir) / "scores.csv", scores);
  write_labels_csv(fs::path(out_dir) / "labels.csv", labels);

  if (labeled) {
    MetricsReport report = point_metrics(labels, *series.labels);
    const auto [best, threshold] = best_f1_score(scores, *series.labels);
    report.best_f1 = best;
    report.best_threshold = threshold;
    write_text(fs::path(out_dir) / "metrics.json", metrics_to_json(report).dump(2) + "\n");
    write_text(fs::path(out_dir) / "metrics.csv",
               metrics_csv_header() + "\n" + metrics_csv_row(report) + "\n");
    std::cout << metrics_to_json(report).dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out_path) {
  std::ifstream in(spec_path);
  if (!in) raise(ErrorCode::FileMissing, spec_path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::ParseError, "invalid JSON in " + spec_path);
  const TimeSeries series = generate_synthetic(synth_spec_from_json(j));
  write_series_csv(series, out_path);
  std::cout << "wrote " << series.size() << " points to " << out_path << '\n';
  return kExitOk;
}

int cmd_replay(const std::string& trace_path) {
  const EpisodeTrace trace = load_trace(trace_path);
  const ReplayOutcome outcome = replay_episode(trace);
  std::cout << nlohmann::json(outcome.verdicts).dump(2) << '\n';
  if (!outcome.matches_recorded) {
    std::cerr << "replay diverged from the recorded verdicts: " << outcome.divergence << '\n';
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_score_reward(const std::string& trace_path, const std::string& truth_path,
                     const RewardConfig& config) {
  const EpisodeTrace trace = load_trace(trace_path);
  const TimeSeries truth_series = load_series(truth_path, true);
  if (!truth_series.labels || truth_series.size() < trace.window.end) {
    raise(ErrorCode::WindowTruthMismatch,
          "truth series shorter than the trace window's end index");
  }
  const std::vector<int> truth(truth_series.labels->begin() +
                                   static_cast<std::ptrdiff_t>(trace.window.start),
                               truth_series.labels->begin() +
                                   static_cast<std::ptrdiff_t>(trace.window.end));
  const RewardBreakdown breakdown = score_episode(trace, truth, config);
  const auto j = reward_to_json(breakdown, config);
  write_text(trace_path + ".reward.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_plot(const std::string& input, const std::string& verdicts_path,
             const std::string& out_path, int width, int height) {
  const bool labeled = csv_has_label_column(input);
  const TimeSeries series = load_series(input, labeled);

  std::vector<AnomalyVerdict> verdicts;
  if (!verdicts_path.empty()) {
    std::ifstream in(verdicts_path);
    if (!in) raise(ErrorCode::FileMissing, verdicts_path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) raise(ErrorCode::ParseError, "invalid JSON in " + verdicts_path);
    verdicts = j.get<std::vector<AnomalyVerdict>>();
  }

  PlotOptions options;
  options.width = width;
  options.height = height;
  write_text(out_path, render_svg_plot(series, verdicts,
                                       series.labels ? &*series.labels : nullptr, options));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine, tool-driven time-series anomaly detection"};
  app.require_subcommand(1);

  // detect
  DetectOptions detect;
  auto* detect_cmd = app.add_subcommand("detect", "Run the detection workflow over a CSV");
  detect_cmd->set_config("--config", "", "Key=value config file; explicit flags win");
  detect_cmd->add_option("--input", detect.input, "Series CSV (index,value[,label])")
      ->required();
  detect_cmd->add_option("--out", detect.out_dir, "Output directory")->required();
  detect_cmd->add_option("--backend", detect.backend, "heuristic | remote | replay");
  detect_cmd->add_option("--endpoint", detect.endpoint, "Remote chat endpoint URL");
  detect_cmd->add_option("--model", detect.model, "Remote model name");
  detect_cmd->add_option("--temperature", detect.temperature, "Sampling temperature");
  detect_cmd->add_option("--replay-fixtures", detect.replay_fixtures,
                         "JSONL fixture file for the replay backend");
  detect_cmd->add_option("--localization", detect.localization, "proxy | backend");
  detect_cmd->add_option("--prompts", detect.prompts_dir, "Directory of prompt templates");
  detect_cmd->add_option("--knowledge", detect.knowledge_path, "Knowledge store JSON");
  detect_cmd->add_option("--k", detect.max_refinements, "Max refinement passes");
  detect_cmd->add_option("--budget", detect.tool_budget, "Tool calls per episode");
  detect_cmd->add_option("--window-length", detect.window_length, "Window length");
  detect_cmd->add_option("--window-step", detect.window_step, "Window step");
  detect_cmd->add_option("--min-tail", detect.min_tail, "Minimum kept tail window");
  detect_cmd->add_option("--workers", detect.workers, "Episode worker pool size");
  detect_cmd->add_flag("--plot", detect.plot, "Emit plot.svg next to the reports");
  detect_cmd->add_flag("--no-detrend", detect.no_detrend,
                       "Skip the linear-detrend preprocessing step");

  // baseline
  std::string baseline_method;
  std::string baseline_input;
  std::string baseline_out;
  double keep_fraction = 0.1;
  int avg_window = 3;
  double k_sigma = 3.0;
  auto* baseline_cmd = app.add_subcommand("baseline", "Score with a statistical detector");
  baseline_cmd->add_option("--method", baseline_method, "fft | sr")->required();
  baseline_cmd->add_option("--input", baseline_input, "Series CSV")->required();
  baseline_cmd->add_option("--out", baseline_out, "Output directory")->required();
  baseline_cmd->add_option("--keep-fraction", keep_fraction, "FFT low-pass kept fraction");
  baseline_cmd->add_option("--avg-window", avg_window, "SR log-amplitude average width");
  baseline_cmd->add_option("--k-sigma", k_sigma, "Threshold multiplier over sigma");

  // synth
  std::string synth_spec;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled synthetic series");
  synth_cmd->add_option("--spec", synth_spec, "SynthSpec JSON file")->required();
  synth_cmd->add_option("--out", synth_out, "Output CSV path")->required();

  // replay
  std::string replay_trace;
  auto* replay_cmd = app.add_subcommand("replay", "Re-execute a recorded episode trace");
  replay_cmd->add_option("--trace", replay_trace, "Trace JSONL file")->required();

  // score-reward
  std::string reward_trace;
  std::string reward_truth;
  RewardConfig reward_config;
  bool no_two_sided = false;
  bool no_rule_matching = false;
  bool no_fp = false;
  auto* reward_cmd = app.add_subcommand("score-reward", "Score a trace against truth labels");
  reward_cmd->add_option("--trace", reward_trace, "Trace JSONL file")->required();
  reward_cmd->add_option("--truth", reward_truth, "Labeled series CSV")->required();
  reward_cmd->add_option("--w-ts", reward_config.w_two_sided, "Two-sided weight");
  reward_cmd->add_option("--w-rm", reward_config.w_rule_matching, "Rule-matching weight");
  reward_cmd->add_option("--w-fp", reward_config.w_fp_penalty, "False-positive weight");
  reward_cmd->add_flag("--no-two-sided", no_two_sided, "Disable the two-sided component");
  reward_cmd->add_flag("--no-rule-matching", no_rule_matching,
                       "Disable the rule-matching component");
  reward_cmd->add_flag("--no-fp", no_fp, "Disable the false-positive penalty");

  // plot
  std::string plot_input;
  std::string plot_verdicts;
  std::string plot_out;
  int plot_width = 900;
  int plot_height = 240;
  auto* plot_cmd = app.add_subcommand("plot", "Render a series with truth/verdict bands");
  plot_cmd->add_option("--input", plot_input, "Series CSV")->required();
  plot_cmd->add_option("--verdicts", plot_verdicts, "Verdicts JSON (from detect)");
  plot_cmd->add_option("--out", plot_out, "Output SVG path")->required();
  plot_cmd->add_option("--width", plot_width, "SVG width");
  plot_cmd->add_option("--height", plot_height, "SVG height");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (detect_cmd->parsed()) return cmd_detect(detect);
    if (baseline_cmd->parsed()) {
      return cmd_baseline(baseline_method, baseline_input, baseline_out, keep_fraction,
                          avg_window, k_sigma);
    }
    if (synth_cmd->parsed()) return cmd_synth(synth_spec, synth_out);
    if (replay_cmd->parsed()) return cmd_replay(replay_trace);
    if (reward_cmd->parsed()) {
      reward_config.enable_two_sided = !no_two_sided;
      reward_config.enable_rule_matching = !no_rule_matching;
      reward_config.enable_fp_penalty = !no_fp;
      return cmd_score_reward(reward_trace, reward_truth, reward_config);
    }
    if (plot_cmd->parsed()) return cmd_plot(plot_input, plot_verdicts, plot_out, plot_width,
                                            plot_height);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::BackendUnavailable:
      case ErrorCode::Timeout:
      case ErrorCode::HttpError:
        return kExitBackend;
      case ErrorCode::TraceCorrupt:
        return kExitPartial;
      default:
        return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
