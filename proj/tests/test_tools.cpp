#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "anomamind/series.hpp"
#include "anomamind/tools.hpp"
#include "oracles.hpp"

using namespace anomamind;

namespace {

Window make_window(std::vector<double> values, std::size_t start = 0) {
  Window w;
  w.parent = "t";
  w.start = start;
  w.end = start + values.size();
  w.values = std::move(values);
  return w;
}

#define CHECK_ERROR(expr, expected_code)            \
  do {                                              \
    try {                                           \
      (void)(expr);                                 \
      FAIL("expected an error");                    \
    } catch (const Error& e) {                      \
      CHECK(e.code() == (expected_code));           \
    }                                               \
  } while (0)

}  // namespace

TEST_CASE("stat_features matches direct arithmetic") {
  const auto result = stat_features(make_window({1, 2, 3, 4, 100}));
  const auto& s = std::get<StatSummary>(result.payload);
  CHECK(s.mean == doctest::Approx(22.0));
  CHECK(s.std_dev == doctest::Approx(std::sqrt(7610.0 / 5.0)).epsilon(1e-6));
  CHECK(s.min == 1.0);
  CHECK(s.max == 100.0);
  CHECK(s.median == 3.0);
  CHECK(s.n == 5);
}

TEST_CASE("stat_features on a constant window") {
  const auto result = stat_features(make_window(std::vector<double>(10, 3.5)));
  const auto& s = std::get<StatSummary>(result.payload);
  CHECK(s.std_dev == 0.0);
  CHECK(s.iqr == 0.0);
  CHECK(s.mean == 3.5);
}

TEST_CASE("stat_features interpolates quantiles") {
  const auto result = stat_features(make_window({1, 2, 3, 4}));
  const auto& s = std::get<StatSummary>(result.payload);
  CHECK(s.median == doctest::Approx(2.5));
  CHECK(s.iqr == doctest::Approx(1.5));
}

TEST_CASE("stat_features rejects empty windows") {
  CHECK_ERROR(stat_features(make_window({})), ErrorCode::WindowTooShort);
}

TEST_CASE("diff_zscore finds the single jump") {
  std::vector<double> values(9, 0.0);
  values.push_back(100.0);
  const auto result = diff_zscore(make_window(values), Scope::global, 10, 2.0);
  const auto& report = std::get<ZScoreReport>(result.payload);
  REQUIRE(report.outlier_indices.size() == 1);
  CHECK(report.outlier_indices[0] == 8);

  double best_z = 0.0;
  std::size_t best_index = 0;
  for (const auto& p : report.scores) {
    if (std::fabs(p.z) > best_z) {
      best_z = std::fabs(p.z);
      best_index = p.index;
    }
  }
  CHECK(best_index == 8);
}

TEST_CASE("diff_zscore degenerate windows have no outliers") {
  const auto constant = diff_zscore(make_window(std::vector<double>(20, 1.0)), Scope::global);
  const auto& r1 = std::get<ZScoreReport>(constant.payload);
  CHECK(r1.degenerate);
  CHECK(r1.outlier_indices.empty());
  CHECK(constant.summary.find("degenerate=true") != std::string::npos);

  std::vector<double> ramp(10);
  for (std::size_t i = 0; i < 10; ++i) ramp[i] = static_cast<double>(i);
  const auto linear = diff_zscore(make_window(ramp), Scope::global);
  const auto& r2 = std::get<ZScoreReport>(linear.payload);
  CHECK(r2.degenerate);
  for (const auto& p : r2.scores) CHECK(p.z == 0.0);
}

TEST_CASE("diff_zscore global scores standardize to mean 0 and std 1") {
  std::mt19937 rng(31);
  std::normal_distribution<double> noise(0.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> values(60);
    for (auto& v : values) v = noise(rng);
    const auto result = diff_zscore(make_window(values), Scope::global);
    const auto& report = std::get<ZScoreReport>(result.payload);
    REQUIRE(!report.degenerate);
    double mean = 0.0;
    for (const auto& p : report.scores) mean += p.z;
    mean /= static_cast<double>(report.scores.size());
    double var = 0.0;
    for (const auto& p : report.scores) var += (p.z - mean) * (p.z - mean);
    var /= static_cast<double>(report.scores.size());
    CHECK(std::fabs(mean) <= 1e-6);
    CHECK(std::fabs(std::sqrt(var) - 1.0) <= 1e-6);
  }
}

TEST_CASE("diff_zscore is invariant under constant shifts") {
  std::mt19937 rng(32);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  std::vector<double> values(40);
  for (auto& v : values) v = dist(rng);
  for (Scope scope : {Scope::global, Scope::local}) {
    const auto base = std::get<ZScoreReport>(diff_zscore(make_window(values), scope).payload);
    std::vector<double> shifted = values;
    for (auto& v : shifted) v += 123.456;
    const auto moved = std::get<ZScoreReport>(diff_zscore(make_window(shifted), scope).payload);
    REQUIRE(base.scores.size() == moved.scores.size());
    for (std::size_t i = 0; i < base.scores.size(); ++i) {
      CHECK(moved.scores[i].z == doctest::Approx(base.scores[i].z).epsilon(1e-9));
    }
  }
}

TEST_CASE("diff_zscore validates preconditions") {
  CHECK_ERROR(diff_zscore(make_window({1.0, 2.0}), Scope::global), ErrorCode::WindowTooShort);
  CHECK_ERROR(diff_zscore(make_window({1, 2, 3, 4}), Scope::local, 1), ErrorCode::ParamValidation);
}

TEST_CASE("global_structure detects a sinusoid period") {
  std::vector<double> values(100);
  for (std::size_t i = 0; i < 100; ++i) {
    values[i] = std::sin(2.0 * M_PI * static_cast<double>(i) / 20.0);
  }
  const auto result = global_structure(make_window(values));
  const auto& report = std::get<StructureReport>(result.payload);
  REQUIRE(report.dominant_period.has_value());
  CHECK(*report.dominant_period == 20);
  CHECK(std::fabs(report.trend_slope) <= 0.01);  // near zero at amplitude 1
  CHECK(oracle::circular_autocorr(values, 20) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("global_structure on a constant window finds nothing") {
  const auto result = global_structure(make_window(std::vector<double>(50, 2.0)));
  const auto& report = std::get<StructureReport>(result.payload);
  CHECK_FALSE(report.dominant_period.has_value());
  CHECK_FALSE(report.level_shift_index.has_value());
  CHECK(report.trend_slope == 0.0);
}

TEST_CASE("global_structure locates a level shift") {
  std::vector<double> values(50, 0.0);
  values.insert(values.end(), 50, 10.0);
  const auto result = global_structure(make_window(values));
  const auto& report = std::get<StructureReport>(result.payload);
  REQUIRE(report.level_shift_index.has_value());
  CHECK(*report.level_shift_index == 50);
}

TEST_CASE("local_structure near-identical interval scores near zero") {
  std::mt19937 rng(41);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> values(90);
  for (auto& v : values) v = noise(rng);
  const auto result = local_structure(make_window(values), 30, 60);
  const auto& report = std::get<StructureReport>(result.payload);
  REQUIRE(report.context_deviation.has_value());
  CHECK(*report.context_deviation < 2.0);
}

TEST_CASE("local_structure reports inf over a flat context") {
  std::vector<double> values(40, 0.0);
  values.insert(values.end(), 20, 10.0);
  values.insert(values.end(), 40, 0.0);
  const auto result = local_structure(make_window(values), 40, 60);
  const auto& report = std::get<StructureReport>(result.payload);
  REQUIRE(report.context_deviation.has_value());
  CHECK(std::isinf(*report.context_deviation));
  CHECK(result.summary.find("inf") != std::string::npos);
}

TEST_CASE("local_structure Monte-Carlo deviation of a +5 sigma shift") {
  double sum = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> values(60);
    for (auto& v : values) v = noise(rng);
    for (std::size_t i = 20; i < 40; ++i) values[i] += 5.0;
    const auto result = local_structure(make_window(values), 20, 40);
    sum += *std::get<StructureReport>(result.payload).context_deviation;
  }
  const double mean = sum / 100.0;
  CHECK(mean == doctest::Approx(5.0).epsilon(0.3));
}

TEST_CASE("local_structure validates the interval") {
  CHECK_ERROR(local_structure(make_window({1, 2, 3}), 2, 2), ErrorCode::IntervalOutOfBounds);
  CHECK_ERROR(local_structure(make_window({1, 2, 3}), 0, 9), ErrorCode::IntervalOutOfBounds);
  CHECK_ERROR(local_structure(make_window({1, 2, 3}), 0, 3), ErrorCode::IntervalOutOfBounds);
}

TEST_CASE("localize_candidates on a constant window is empty") {
  CHECK(localize_candidates(make_window(std::vector<double>(100, 0.3))).empty());
}

TEST_CASE("localize_candidates covers a single spike") {
  std::vector<double> values(100, 0.5);
  values[50] = 1.0;
  const auto candidates = localize_candidates(make_window(values));
  REQUIRE(candidates.size() >= 1);
  bool covered = false;
  for (const auto& c : candidates) covered = covered || (c.start <= 50 && 50 < c.end);
  CHECK(covered);
}

TEST_CASE("localize_candidates separates two distant spikes") {
  std::vector<double> values(100, 0.5);
  values[20] = 1.0;
  values[80] = 1.0;
  const auto candidates = localize_candidates(make_window(values));
  REQUIRE(candidates.size() == 2);
  CHECK(candidates[0].start <= 20);
  CHECK(candidates[0].end > 20);
  CHECK(candidates[1].start <= 80);
  CHECK(candidates[1].end > 80);
  CHECK(candidates[0].end <= candidates[1].start);
}

TEST_CASE("localize_candidates proxy recall on seeded spikes") {
  int hits = 0;
  for (int seed = 0; seed < 50; ++seed) {
    SynthSpec spec;
    spec.length = 100;
    spec.noise_sigma = 1.0;
    spec.seed = static_cast<std::uint64_t>(seed);
    const std::size_t pos = 10 + (static_cast<std::size_t>(seed) * 13) % 80;
    spec.anomalies = {{AnomalyKind::point_global, pos, 1, 8.0}};
    auto series = generate_synthetic(spec);
    series = normalize(series).first;
    const auto candidates = localize_candidates(window_of(series, 0, series.size()));
    for (const auto& c : candidates) {
      if (c.start <= pos && pos < c.end) {
        ++hits;
        break;
      }
    }
  }
  CHECK(hits >= 48);  // >= 95% of 50
}

TEST_CASE("localize_candidates output is disjoint, sorted and bounded") {
  std::mt19937 rng(51);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> values(40 + rng() % 120);
    for (auto& v : values) v = noise(rng);
    if (trial % 2 == 0) values[values.size() / 2] += 6.0;
    const auto candidates = localize_candidates(make_window(values));
    CHECK(candidates.size() <= 3);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      CHECK(candidates[i].start < candidates[i].end);
      CHECK(candidates[i].end <= values.size());
      if (i > 0) CHECK(candidates[i - 1].end <= candidates[i].start);
    }
  }
}

TEST_CASE("backend localization parses replies and falls back") {
  std::vector<double> values(100, 0.5);
  values[60] = 1.0;
  const auto window = make_window(values);

  const auto good = localize_candidates(
      window, [](const std::string&) { return std::string("[[55, 65], [10, 12]]"); }, 3);
  CHECK(good.used_backend);
  CHECK_FALSE(good.fell_back);
  REQUIRE(good.candidates.size() == 2);
  CHECK(good.candidates[0].start == 10);
  CHECK(good.candidates[0].saliency == 1.0);

  const auto fallback = localize_candidates(
      window, [](const std::string&) { return std::string("cannot help with that"); }, 3);
  CHECK(fallback.fell_back);
  bool covered = false;
  for (const auto& c : fallback.candidates) covered = covered || (c.start <= 60 && 60 < c.end);
  CHECK(covered);
}

TEST_CASE("query_knowledge filters by tag and kind") {
  const auto store = KnowledgeStore::builtin();

  const auto by_type = query_knowledge(store, {"point_global"}, RecordKind::anomaly_type);
  const auto& records = std::get<std::vector<KnowledgeRecord>>(by_type.payload);
  REQUIRE(records.size() == 1);
  CHECK(records[0].id == "point_global");

  const auto none = query_knowledge(store, {"nonexistent"}, std::nullopt);
  CHECK(std::get<std::vector<KnowledgeRecord>>(none.payload).empty());

  const auto tools = query_knowledge(store, {}, RecordKind::tool_semantics);
  const auto& tool_records = std::get<std::vector<KnowledgeRecord>>(tools.payload);
  CHECK(tool_records.size() == registered_tools().size());
  for (std::size_t i = 1; i < tool_records.size(); ++i) {
    CHECK(tool_records[i - 1].id < tool_records[i].id);
  }
}

TEST_CASE("query_knowledge is a pure function of its inputs") {
  const auto store = KnowledgeStore::builtin();
  const auto a = query_knowledge(store, {"tool"}, std::nullopt);
  const auto b = query_knowledge(store, {"tool"}, std::nullopt);
  CHECK(a.summary == b.summary);
  CHECK(nlohmann::json(a) == nlohmann::json(b));
}

TEST_CASE("knowledge store rejects duplicate ids") {
  std::vector<KnowledgeRecord> records = {
      {"dup", RecordKind::domain, {}, "a"},
      {"dup", RecordKind::domain, {}, "b"},
  };
  CHECK_ERROR(KnowledgeStore(std::move(records)), ErrorCode::InvalidArgument);
}

TEST_CASE("knowledge store round-trips through its JSON file format") {
  namespace fs = std::filesystem;
  const auto builtin = KnowledgeStore::builtin();
  const auto path = (fs::temp_directory_path() / "knowledge_rt.json").string();
  {
    std::ofstream out(path);
    out << builtin.to_json().dump(2);
  }
  const auto loaded = KnowledgeStore::load(path);
  CHECK(loaded.to_json() == builtin.to_json());
  CHECK(loaded.has_anomaly_type("pattern_seasonal"));

  CHECK_ERROR(KnowledgeStore::load("/nonexistent_store.json"), ErrorCode::FileMissing);
  {
    std::ofstream out(path);
    out << "{\"not\": \"an array\"}";
  }
  CHECK_ERROR(KnowledgeStore::load(path), ErrorCode::ParseError);
}

TEST_CASE("the builtin store seeds taxonomy, domains and tool semantics") {
  const auto store = KnowledgeStore::builtin();
  std::size_t types = 0;
  std::size_t domains = 0;
  std::size_t semantics = 0;
  for (const auto& r : store.records()) {
    if (r.kind == RecordKind::anomaly_type) ++types;
    if (r.kind == RecordKind::domain) ++domains;
    if (r.kind == RecordKind::tool_semantics) ++semantics;
  }
  CHECK(types == 5);      // the five taxonomy kinds
  CHECK(domains == 3);    // one per synthetic base
  CHECK(semantics == registered_tools().size());
}

TEST_CASE("dispatch routes calls and validates inputs") {
  std::vector<double> values(30, 1.0);
  values[10] = 9.0;
  const auto window = make_window(values);
  const auto store = KnowledgeStore::builtin();
  const ToolContext context{&window, &store};

  ToolCall call;
  call.tool = "diff_zscore";
  call.params["scope"] = "global";
  const auto result = dispatch(call, context);
  CHECK(std::holds_alternative<ZScoreReport>(result.payload));

  ToolCall unknown;
  unknown.tool = "no_such";
  CHECK_ERROR(dispatch(unknown, context), ErrorCode::UnknownTool);

  ToolCall bogus;
  bogus.tool = "stat_features";
  bogus.params["bogus"] = 1;
  CHECK_ERROR(dispatch(bogus, context), ErrorCode::ParamValidation);

  ToolCall bad_scope;
  bad_scope.tool = "diff_zscore";
  bad_scope.params["scope"] = "sideways";
  CHECK_ERROR(dispatch(bad_scope, context), ErrorCode::ParamValidation);

  ToolCall local;
  local.tool = "local_structure";
  local.params["start"] = 8;
  local.params["end"] = 13;
  CHECK(std::holds_alternative<StructureReport>(dispatch(local, context).payload));

  ToolCall knowledge;
  knowledge.tool = "query_knowledge";
  knowledge.params["tags"] = "point_global";
  knowledge.params["kind"] = "anomaly_type";
  const auto& found =
      std::get<std::vector<KnowledgeRecord>>(dispatch(knowledge, context).payload);
  CHECK(found.size() == 1);
}

TEST_CASE("tool results round-trip through JSON losslessly") {
  std::vector<double> values(40, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::sin(0.7 * i);
  values[25] += 30.0;
  const auto window = make_window(values);

  std::vector<ToolResult> results = {
      stat_features(window),
      diff_zscore(window, Scope::global),
      diff_zscore(window, Scope::local, 5, 2.0),
      global_structure(window),
      local_structure(window, 20, 30),
      query_knowledge(KnowledgeStore::builtin(), {"tool"}, std::nullopt),
  };
  // Include the inf sentinel case.
  std::vector<double> step(30, 1.0);
  for (std::size_t i = 10; i < 20; ++i) step[i] = 5.0;
  results.push_back(local_structure(make_window(step), 10, 20));

  for (const auto& original : results) {
    const nlohmann::json encoded = original;
    const auto decoded = encoded.get<ToolResult>();
    CHECK(nlohmann::json(decoded) == encoded);
    CHECK(decoded.tool == original.tool);
    CHECK(decoded.summary == original.summary);
  }
}
