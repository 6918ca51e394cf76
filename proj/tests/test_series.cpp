#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "anomamind/series.hpp"

using namespace anomamind;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  const auto path = fs::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
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

TEST_CASE("load_series reads the two-column format") {
  const auto path = write_temp("ts_basic.csv", "index,value\n0,1.0\n1,2.0\n");
  const auto series = load_series(path.string(), false);
  REQUIRE(series.size() == 2);
  CHECK(series.values[0] == 1.0);
  CHECK(series.values[1] == 2.0);
  CHECK_FALSE(series.labels.has_value());
  CHECK(series.name == "ts_basic");
}

TEST_CASE("load_series accepts CRLF and label columns") {
  const auto path = write_temp("ts_crlf.csv", "index,value,label\r\n0,1.5,0\r\n1,2.5,1\r\n");
  const auto series = load_series(path.string(), true);
  REQUIRE(series.labels.has_value());
  CHECK((*series.labels)[0] == 0);
  CHECK((*series.labels)[1] == 1);
}

TEST_CASE("load_series rejects malformed input") {
  CHECK_ERROR(load_series("/nonexistent/file.csv", false), ErrorCode::FileMissing);

  const auto missing_label = write_temp("ts_ml.csv", "index,value,label\n0,1.0,1\n1,2.0\n");
  CHECK_ERROR(load_series(missing_label.string(), true), ErrorCode::LabelLengthMismatch);

  const auto no_label_col = write_temp("ts_nl.csv", "index,value\n0,1.0\n");
  CHECK_ERROR(load_series(no_label_col.string(), true), ErrorCode::LabelLengthMismatch);

  const auto nan_value = write_temp("ts_nan.csv", "index,value\n0,1.0\n1,nan\n");
  CHECK_ERROR(load_series(nan_value.string(), false), ErrorCode::ParseError);

  const auto bad_header = write_temp("ts_bh.csv", "time,value\n0,1.0\n");
  CHECK_ERROR(load_series(bad_header.string(), false), ErrorCode::ParseError);

  const auto bad_label = write_temp("ts_bl.csv", "index,value,label\n0,1.0,2\n");
  CHECK_ERROR(load_series(bad_label.string(), true), ErrorCode::ParseError);
}

TEST_CASE("write_series_csv round-trips through load_series") {
  TimeSeries series;
  series.name = "rt";
  series.values = {1.25, -3.5, 0.0625};
  series.labels = std::vector<int>{0, 1, 0};
  const auto path = fs::temp_directory_path() / "ts_rt.csv";
  write_series_csv(series, path.string());
  const auto back = load_series(path.string(), true);
  CHECK(back.values == series.values);
  CHECK(*back.labels == *series.labels);
}

TEST_CASE("normalize maps endpoints to 0 and 1") {
  TimeSeries series{"s", {0.0, 5.0, 10.0}, std::nullopt};
  const auto [normalized, params] = normalize(series);
  CHECK(normalized.values == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(params.min == 0.0);
  CHECK(params.max == 10.0);
}

TEST_CASE("normalize rejects constant series") {
  TimeSeries series{"s", {3.0, 3.0, 3.0}, std::nullopt};
  CHECK_ERROR(normalize(series), ErrorCode::ConstantSeries);
}

TEST_CASE("normalize hand-evaluated example") {
  TimeSeries series{"s", {2.0, 4.0, 8.0}, std::nullopt};
  const auto [normalized, params] = normalize(series);
  CHECK(normalized.values[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(normalized.values[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(normalized.values[2] == doctest::Approx(1.0).epsilon(1e-9));
  (void)params;
}

TEST_CASE("normalize/denormalize identity on random series") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  for (int trial = 0; trial < 25; ++trial) {
    TimeSeries series;
    series.values.resize(30);
    for (auto& v : series.values) v = dist(rng);
    const auto [normalized, params] = normalize(series);
    for (std::size_t i = 0; i < series.size(); ++i) {
      CHECK(denormalize(normalized.values[i], params) ==
            doctest::Approx(series.values[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("detrend removes exact lines") {
  TimeSeries ramp{"s", {0.0, 1.0, 2.0, 3.0, 4.0}, std::nullopt};
  for (double v : detrend(ramp).values) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));

  TimeSeries flat{"s", {5.0, 5.0, 5.0, 5.0}, std::nullopt};
  for (double v : detrend(flat).values) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("detrend closed-form example") {
  TimeSeries series{"s", {0.0, 0.0, 0.0, 10.0, 0.0}, std::nullopt};
  const auto out = detrend(series);
  const std::vector<double> expected{0.0, -1.0, -2.0, 7.0, -4.0};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(out.values[i] == doctest::Approx(expected[i]).epsilon(1e-9));
  }
}

TEST_CASE("detrend is idempotent and leaves no residual fit") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    TimeSeries series;
    series.values.resize(40);
    for (auto& v : series.values) v = dist(rng);
    const auto once = detrend(series);
    const auto twice = detrend(once);
    for (std::size_t i = 0; i < series.size(); ++i) {
      CHECK(twice.values[i] == doctest::Approx(once.values[i]).epsilon(1e-9));
    }
    const auto [slope, intercept] = least_squares_line(once.values);
    CHECK(std::fabs(slope) <= 1e-9);
    CHECK(std::fabs(intercept) <= 1e-9);
  }
}

TEST_CASE("segment_windows follows the 100/100 defaults") {
  TimeSeries series;
  series.name = "seg";

  series.values.assign(200, 1.0);
  auto windows = segment_windows(series);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].start == 0);
  CHECK(windows[0].end == 100);
  CHECK(windows[1].start == 100);
  CHECK(windows[1].end == 200);

  series.values.assign(250, 1.0);
  windows = segment_windows(series);
  REQUIRE(windows.size() == 3);
  CHECK(windows[2].start == 200);
  CHECK(windows[2].end == 250);

  series.values.assign(210, 1.0);
  windows = segment_windows(series);
  CHECK(windows.size() == 2);  // 10-point tail dropped

  series.values.clear();
  CHECK_ERROR(segment_windows(series), ErrorCode::EmptySeries);
}

TEST_CASE("segment coverage has no gaps or overlap when step == length") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t total = 21 + rng() % 400;
    TimeSeries series;
    series.values.assign(total, 0.0);
    const std::size_t length = 10 + rng() % 50;
    const auto windows = segment_windows(series, length, length, 5);
    std::size_t expected_start = 0;
    for (const auto& w : windows) {
      CHECK(w.start == expected_start);
      CHECK(w.end <= total);
      CHECK(w.size() == w.end - w.start);
      expected_start = w.end;
    }
  }
}

TEST_CASE("generate_synthetic injects a noiseless spike") {
  SynthSpec spec;
  spec.length = 100;
  spec.base = BaseSignal::constant;
  spec.noise_sigma = 0.0;
  spec.anomalies = {{AnomalyKind::point_global, 50, 1, 10.0}};
  const auto series = generate_synthetic(spec);
  REQUIRE(series.size() == 100);
  REQUIRE(series.labels.has_value());
  for (std::size_t i = 0; i < 100; ++i) {
    if (i == 50) {
      CHECK(series.values[i] == 10.0);
      CHECK((*series.labels)[i] == 1);
    } else {
      CHECK(series.values[i] == 0.0);
      CHECK((*series.labels)[i] == 0);
    }
  }
}

TEST_CASE("generate_synthetic is deterministic per seed") {
  SynthSpec spec;
  spec.length = 128;
  spec.base = BaseSignal::sinusoid;
  spec.noise_sigma = 0.5;
  spec.seed = 99;
  spec.anomalies = {{AnomalyKind::pattern_trend, 60, 20, 4.0}};
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.values == b.values);
  CHECK(*a.labels == *b.labels);
}

TEST_CASE("generate_synthetic labels exactly the injected span") {
  SynthSpec spec;
  spec.length = 100;
  spec.base = BaseSignal::sinusoid;
  spec.anomalies = {{AnomalyKind::pattern_seasonal, 40, 20, 2.0}};
  const auto series = generate_synthetic(spec);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK((*series.labels)[i] == (i >= 40 && i < 60 ? 1 : 0));
  }
}

TEST_CASE("generate_synthetic rejects out-of-bounds spans") {
  SynthSpec spec;
  spec.length = 50;
  spec.anomalies = {{AnomalyKind::point_global, 45, 10, 5.0}};
  CHECK_ERROR(generate_synthetic(spec), ErrorCode::SpanOutOfBounds);
}

TEST_CASE("noiseless point labels mark exactly the deviating points") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    SynthSpec spec;
    spec.length = 80;
    spec.base = trial % 2 == 0 ? BaseSignal::linear : BaseSignal::sinusoid;
    spec.noise_sigma = 0.0;
    spec.seed = trial;
    const std::size_t pos = 5 + rng() % 70;
    spec.anomalies = {{AnomalyKind::point_global, pos, 1, 6.0}};
    const auto with = generate_synthetic(spec);
    SynthSpec clean = spec;
    clean.anomalies.clear();
    const auto base = generate_synthetic(clean);
    for (std::size_t i = 0; i < spec.length; ++i) {
      if ((*with.labels)[i] == 1) {
        CHECK(with.values[i] != base.values[i]);
      } else {
        CHECK(with.values[i] == base.values[i]);
      }
    }
  }
}
