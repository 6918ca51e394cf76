#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifndef ANOMAMIND_CLI_PATH
#define ANOMAMIND_CLI_PATH ""
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
};

RunResult run_cli(const std::string& args) {
  const std::string cli = ANOMAMIND_CLI_PATH;
  REQUIRE(!cli.empty());
  const auto out_file = fs::temp_directory_path() / "cli_stdout.txt";
  const std::string command = cli + " " + args + " > " + out_file.string() + " 2>/dev/null";
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  result.stdout_text = buffer.str();
  return result;
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "anomamind_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path write_spec(const std::string& name, const std::string& json) {
  const auto path = scratch_dir() / name;
  std::ofstream out(path);
  out << json;
  return path;
}

const char* kSpikeSpec =
    R"({"length":100,"base":"constant","noise_sigma":1.0,"seed":7,
        "anomalies":[{"type":"point_global","position":50,"span":1,"magnitude":10}]})";

}  // namespace

TEST_CASE("synth is deterministic and replay round-trips" * doctest::timeout(120)) {
  const auto dir = scratch_dir();
  const auto spec = write_spec("spike.json", kSpikeSpec);

  const auto a = run_cli("synth --spec " + spec.string() + " --out " + (dir / "a.csv").string());
  const auto b = run_cli("synth --spec " + spec.string() + " --out " + (dir / "b.csv").string());
  CHECK(a.exit_code == 0);
  CHECK(b.exit_code == 0);
  CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));

  // Out-of-bounds span is a usage error.
  const auto bad = write_spec(
      "bad.json",
      R"({"length":10,"anomalies":[{"type":"point_global","position":9,"span":5,"magnitude":2}]})");
  CHECK(run_cli("synth --spec " + bad.string() + " --out " + (dir / "x.csv").string())
            .exit_code == 1);
}

TEST_CASE("detect produces reports, traces and a working replay" * doctest::timeout(120)) {
  const auto dir = scratch_dir();
  const auto spec = write_spec("spike.json", kSpikeSpec);
  run_cli("synth --spec " + spec.string() + " --out " + (dir / "s.csv").string());

  const auto out = dir / "detect_out";
  fs::remove_all(out);
  const auto detect = run_cli("detect --input " + (dir / "s.csv").string() + " --out " +
                              out.string() + " --backend heuristic --workers 1");
  CHECK(detect.exit_code == 0);
  CHECK(fs::exists(out / "labels.csv"));
  CHECK(fs::exists(out / "verdicts.json"));
  CHECK(fs::exists(out / "metrics.json"));
  CHECK(fs::exists(out / "s_0.trace.jsonl"));

  const auto metrics = nlohmann::json::parse(read_file(out / "metrics.json"));
  CHECK(metrics["f1"].get<double>() > 0.0);

  const auto replay = run_cli("replay --trace " + (out / "s_0.trace.jsonl").string());
  CHECK(replay.exit_code == 0);

  // Tampering with the recorded detector reply must not replay cleanly.
  std::istringstream lines(read_file(out / "s_0.trace.jsonl"));
  std::ostringstream tampered;
  std::string line;
  bool changed = false;
  while (std::getline(lines, line)) {
    if (!changed && line.find("\"role\":\"detector\"") != std::string::npos) {
      // rfind so the raw reply is hit, not the parsed-value metadata.
      const auto at = line.rfind("point_global");
      REQUIRE(at != std::string::npos);
      line.replace(at, std::string("point_global").size(), "pattern_trend");
      changed = true;
    }
    tampered << line << '\n';
  }
  REQUIRE(changed);
  std::ofstream(out / "tampered.trace.jsonl", std::ios::binary) << tampered.str();
  CHECK(run_cli("replay --trace " + (out / "tampered.trace.jsonl").string()).exit_code == 2);

  CHECK(run_cli("replay --trace /nonexistent.trace.jsonl").exit_code == 1);
}

TEST_CASE("detect outputs are idempotent and include the table row" * doctest::timeout(120)) {
  const auto dir = scratch_dir();
  const auto spec = write_spec("spike.json", kSpikeSpec);
  run_cli("synth --spec " + spec.string() + " --out " + (dir / "s.csv").string());

  const auto out1 = dir / "idem1";
  const auto out2 = dir / "idem2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  const std::string base = "detect --input " + (dir / "s.csv").string() +
                           " --backend heuristic --workers 2 --out ";
  CHECK(run_cli(base + out1.string()).exit_code == 0);
  CHECK(run_cli(base + out2.string()).exit_code == 0);
  CHECK(read_file(out1 / "labels.csv") == read_file(out2 / "labels.csv"));
  CHECK(read_file(out1 / "verdicts.json") == read_file(out2 / "verdicts.json"));
  CHECK(read_file(out1 / "metrics.json") == read_file(out2 / "metrics.json"));

  const auto csv = read_file(out1 / "metrics.csv");
  CHECK(csv.rfind("precision,recall,f1,best_f1,average\n", 0) == 0);
}

TEST_CASE("detect reads a key=value config file with flags winning" * doctest::timeout(120)) {
  const auto dir = scratch_dir();
  const auto spec = write_spec("spike.json", kSpikeSpec);
  run_cli("synth --spec " + spec.string() + " --out " + (dir / "s.csv").string());

  std::ofstream cfg(dir / "run.cfg");
  cfg << "backend=heuristic\nworkers=1\nbudget=10\n";
  cfg.close();
  const auto out = dir / "cfg_out";
  fs::remove_all(out);
  CHECK(run_cli("detect --input " + (dir / "s.csv").string() + " --out " + out.string() +
                " --config " + (dir / "run.cfg").string())
            .exit_code == 0);
  // An explicit flag overrides the file value without erroring.
  fs::remove_all(out);
  CHECK(run_cli("detect --input " + (dir / "s.csv").string() + " --out " + out.string() +
                " --config " + (dir / "run.cfg").string() + " --budget 6")
            .exit_code == 0);
}

TEST_CASE("detect omits metrics for unlabeled input" * doctest::timeout(120)) {
  const auto dir = scratch_dir();
  std::ofstream unlabeled(dir / "plain.csv");
  unlabeled << "index,value\n";
  for (int i = 0; i < 100; ++i) unlabeled << i << ',' << (i == 40 ? 9.0 : 0.1) << '\n';
  unlabeled.close();
  const auto out = dir / "plain_out";
  fs::remove_all(out);
  const auto detect = run_cli("detect --input " + (dir / "plain.csv").string() + " --out " +
                              out.string() + " --backend heuristic --workers 1");
  CHECK(detect.exit_code == 0);
  CHECK(fs::exists(out / "verdicts.json"));
  CHECK_FALSE(fs::exists(out / "metrics.json"));
}

TEST_CASE("detect with a remote backend fails fast without the key" * doctest::timeout(60)) {
  const auto dir = scratch_dir();
  const auto spec = write_spec("spike.json", kSpikeSpec);
  run_cli("synth --spec " + spec.string() + " --out " + (dir / "r.csv").string());
  unsetenv("ANOMAMIND_API_KEY");
  const auto detect =
      run_cli("detect --input " + (dir / "r.csv").string() + " --out " +
              (dir / "remote_out").string() +
              " --backend remote --endpoint http://127.0.0.1:9 --model m");
  CHECK(detect.exit_code == 3);
}

TEST_CASE("baseline commands score and threshold" * doctest::timeout(120)) {
  const auto dir = scratch_dir();
  const auto spec = write_spec("spike.json", kSpikeSpec);
  run_cli("synth --spec " + spec.string() + " --out " + (dir / "s.csv").string());

  const auto fft = run_cli("baseline --method fft --input " + (dir / "s.csv").string() +
                           " --out " + (dir / "fft_out").string());
  CHECK(fft.exit_code == 0);
  CHECK(fs::exists(dir / "fft_out" / "scores.csv"));
  const auto metrics = nlohmann::json::parse(read_file(dir / "fft_out" / "metrics.json"));
  CHECK(metrics["recall"].get<double>() == 1.0);

  CHECK(run_cli("baseline --method sr --input " + (dir / "s.csv").string() + " --out " +
                (dir / "sr_out").string())
            .exit_code == 0);
  CHECK(run_cli("baseline --method wavelet --input " + (dir / "s.csv").string() + " --out " +
                (dir / "w_out").string())
            .exit_code == 1);

  // A constant series scores zero anomalies.
  std::ofstream flat(dir / "flat.csv");
  flat << "index,value\n";
  for (int i = 0; i < 64; ++i) flat << i << ",3.0\n";
  flat.close();
  CHECK(run_cli("baseline --method fft --input " + (dir / "flat.csv").string() + " --out " +
                (dir / "flat_out").string())
            .exit_code == 0);
  const auto labels = read_file(dir / "flat_out" / "labels.csv");
  CHECK(labels.find(",1") == std::string::npos);
}

TEST_CASE("score-reward writes the breakdown next to the trace" * doctest::timeout(120)) {
  const auto dir = scratch_dir();
  const auto spec = write_spec("spike.json", kSpikeSpec);
  run_cli("synth --spec " + spec.string() + " --out " + (dir / "s.csv").string());
  const auto out = dir / "reward_out";
  fs::remove_all(out);
  run_cli("detect --input " + (dir / "s.csv").string() + " --out " + out.string() +
          " --backend heuristic --workers 1");

  const auto trace = out / "s_0.trace.jsonl";
  const auto score = run_cli("score-reward --trace " + trace.string() + " --truth " +
                             (dir / "s.csv").string());
  CHECK(score.exit_code == 0);
  REQUIRE(fs::exists(trace.string() + ".reward.json"));
  const auto reward = nlohmann::json::parse(read_file(trace.string() + ".reward.json"));
  CHECK(reward["two_sided"].get<double>() == 1.0);
  CHECK(reward["fp_penalty"].get<double>() == 0.0);
  CHECK(reward["total"].get<double>() == doctest::Approx(1.5));

  // Disabling a component shifts the total accordingly.
  const auto no_rm = run_cli("score-reward --trace " + trace.string() + " --truth " +
                             (dir / "s.csv").string() + " --no-rule-matching");
  CHECK(no_rm.exit_code == 0);
  const auto relaxed = nlohmann::json::parse(
      read_file(trace.string() + ".reward.json"));
  CHECK(relaxed["total"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("plot emits an SVG with the requested geometry" * doctest::timeout(120)) {
  const auto dir = scratch_dir();
  const auto spec = write_spec("spike.json", kSpikeSpec);
  run_cli("synth --spec " + spec.string() + " --out " + (dir / "s.csv").string());

  const auto svg_path = dir / "series.svg";
  const auto plot = run_cli("plot --input " + (dir / "s.csv").string() + " --out " +
                            svg_path.string() + " --width 640 --height 180");
  CHECK(plot.exit_code == 0);
  const auto svg = read_file(svg_path);
  CHECK(svg.find("width=\"640\"") != std::string::npos);
  CHECK(svg.find("height=\"180\"") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("class=\"truth\"") != std::string::npos);
  // No verdicts supplied: series + truth only.
  CHECK(svg.find("class=\"verdict\"") == std::string::npos);
}
