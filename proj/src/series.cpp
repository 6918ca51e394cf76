#include "anomamind/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace anomamind {

const char* to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::point_global: return "point_global";
    case AnomalyKind::pattern_contextual: return "pattern_contextual";
    case AnomalyKind::pattern_shapelet: return "pattern_shapelet";
    case AnomalyKind::pattern_seasonal: return "pattern_seasonal";
    case AnomalyKind::pattern_trend: return "pattern_trend";
  }
  return "point_global";
}

AnomalyKind anomaly_kind_from_string(const std::string& name) {
  if (name == "point_global") return AnomalyKind::point_global;
  if (name == "pattern_contextual") return AnomalyKind::pattern_contextual;
  if (name == "pattern_shapelet") return AnomalyKind::pattern_shapelet;
  if (name == "pattern_seasonal") return AnomalyKind::pattern_seasonal;
  if (name == "pattern_trend") return AnomalyKind::pattern_trend;
  raise(ErrorCode::InvalidArgument, "unknown anomaly kind '" + name + "'");
}

const char* to_string(BaseSignal base) {
  switch (base) {
    case BaseSignal::constant: return "constant";
    case BaseSignal::linear: return "linear";
    case BaseSignal::sinusoid: return "sinusoid";
  }
  return "constant";
}

BaseSignal base_signal_from_string(const std::string& name) {
  if (name == "constant") return BaseSignal::constant;
  if (name == "linear") return BaseSignal::linear;
  if (name == "sinusoid") return BaseSignal::sinusoid;
  raise(ErrorCode::InvalidArgument, "unknown base signal '" + name + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

double parse_finite(const std::string& token, std::size_t line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    raise(ErrorCode::ParseError,
          "line " + std::to_string(line_no) + ": bad value '" + token + "'");
  }
  return value;
}

}  // namespace

TimeSeries load_series(const std::string& path, bool has_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::FileMissing, path);

  std::string line;
  if (!std::getline(in, line)) raise(ErrorCode::ParseError, "line 1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_csv_line(line);
  const bool header_ok =
      header.size() >= 2 && header[0] == "index" && header[1] == "value" &&
      (header.size() == 2 || header[2] == "label");
  if (!header_ok) raise(ErrorCode::ParseError, "line 1: bad header '" + line + "'");
  if (has_labels && header.size() < 3) {
    raise(ErrorCode::LabelLengthMismatch, "no label column in " + path);
  }

  TimeSeries series;
  series.name = path;
  auto slash = path.find_last_of('/');
  if (slash != std::string::npos) series.name = path.substr(slash + 1);
  auto dot = series.name.find_last_of('.');
  if (dot != std::string::npos) series.name = series.name.substr(0, dot);

  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() < 2) {
      raise(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected index,value");
    }
    parse_finite(fields[0], line_no);  // index column is validated but replaced
    series.values.push_back(parse_finite(fields[1], line_no));
    if (has_labels) {
      if (fields.size() < 3 || fields[2].empty()) {
        raise(ErrorCode::LabelLengthMismatch,
              "line " + std::to_string(line_no) + ": missing label");
      }
      if (fields[2] != "0" && fields[2] != "1") {
        raise(ErrorCode::ParseError,
              "line " + std::to_string(line_no) + ": label must be 0 or 1");
      }
      labels.push_back(fields[2] == "1" ? 1 : 0);
    }
  }
  if (has_labels) {
    if (labels.size() != series.values.size()) {
      raise(ErrorCode::LabelLengthMismatch, "label count != value count");
    }
    series.labels = std::move(labels);
  }
  return series;
}

void write_series_csv(const TimeSeries& series, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::FileMissing, "cannot open for write: " + path);
  const bool with_labels = series.labels.has_value();
  out << (with_labels ? "index,value,label\n" : "index,value\n");
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    std::ostringstream row;
    row.precision(17);
    row << i << ',' << series.values[i];
    if (with_labels) row << ',' << (*series.labels)[i];
    out << row.str() << '\n';
  }
}

std::pair<TimeSeries, NormalizationParams> normalize(const TimeSeries& series) {
  if (series.size() < 2) raise(ErrorCode::InvalidArgument, "normalize needs T >= 2");
  auto [lo_it, hi_it] = std::minmax_element(series.values.begin(), series.values.end());
  NormalizationParams params{*lo_it, *hi_it};
  if (params.max == params.min) {
    raise(ErrorCode::ConstantSeries, "max == min == " + std::to_string(params.min));
  }
  TimeSeries out = series;
  const double scale = params.max - params.min;
  for (double& v : out.values) v = (v - params.min) / scale;
  return {std::move(out), params};
}

std::pair<double, double> least_squares_line(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n == 0) return {0.0, 0.0};
  if (n == 1) return {0.0, values[0]};
  const double t_mean = (static_cast<double>(n) - 1.0) / 2.0;
  double v_mean = 0.0;
  for (double v : values) v_mean += v;
  v_mean /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = static_cast<double>(i) - t_mean;
    sxy += dt * (values[i] - v_mean);
    sxx += dt * dt;
  }
  const double slope = sxy / sxx;
  const double intercept = v_mean - slope * t_mean;
  return {slope, intercept};
}

TimeSeries detrend(const TimeSeries& series) {
  if (series.size() < 2) raise(ErrorCode::InvalidArgument, "detrend needs T >= 2");
  auto [slope, intercept] = least_squares_line(series.values);
  TimeSeries out = series;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] -= slope * static_cast<double>(i) + intercept;
  }
  return out;
}

std::vector<Window> segment_windows(const TimeSeries& series, std::size_t length,
                                    std::size_t step, std::size_t min_tail) {
  if (series.size() == 0) raise(ErrorCode::EmptySeries, series.name);
  if (length < 1 || step < 1) raise(ErrorCode::InvalidArgument, "length and step must be >= 1");
  const std::size_t total = series.size();
  std::vector<Window> windows;
  for (std::size_t start = 0; start < total; start += step) {
    const std::size_t end = start + length;
    if (end <= total) {
      windows.push_back(window_of(series, start, end));
      continue;
    }
    // Partial tail: keep only when long enough, and never emit a second one.
    if (total - start >= min_tail) windows.push_back(window_of(series, start, total));
    break;
  }
  return windows;
}

Window window_of(const TimeSeries& series, std::size_t start, std::size_t end) {
  if (start >= end || end > series.size()) {
    raise(ErrorCode::IntervalOutOfBounds,
          "window [" + std::to_string(start) + ", " + std::to_string(end) + ")");
  }
  Window w;
  w.parent = series.name;
  w.start = start;
  w.end = end;
  w.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(start),
                  series.values.begin() + static_cast<std::ptrdiff_t>(end));
  return w;
}

TimeSeries generate_synthetic(const SynthSpec& spec) {
  for (const auto& a : spec.anomalies) {
    if (a.span < 1 || a.position >= spec.length || a.position + a.span > spec.length) {
      raise(ErrorCode::SpanOutOfBounds,
            std::string(to_string(a.kind)) + " at " + std::to_string(a.position) +
                " span " + std::to_string(a.span));
    }
  }

  std::vector<double> base(spec.length, 0.0);
  for (std::size_t i = 0; i < spec.length; ++i) {
    switch (spec.base) {
      case BaseSignal::constant: base[i] = 0.0; break;
      case BaseSignal::linear: base[i] = kLinearBaseSlope * static_cast<double>(i); break;
      case BaseSignal::sinusoid:
        base[i] = kSinusoidAmplitude *
                  std::sin(2.0 * M_PI * static_cast<double>(i) / kSinusoidPeriod);
        break;
    }
  }

  std::vector<double> noise(spec.length, 0.0);
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> dist(0.0, spec.noise_sigma);
    for (double& n : noise) n = dist(rng);
  }

  // Anomaly magnitudes are in sigma units; a noiseless series uses unit 1.
  const double unit = spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0;
  std::vector<int> labels(spec.length, 0);
  for (const auto& a : spec.anomalies) {
    for (std::size_t i = a.position; i < a.position + a.span; ++i) {
      const auto offset = static_cast<double>(i - a.position);
      switch (a.kind) {
        case AnomalyKind::point_global:
        case AnomalyKind::pattern_contextual:
          base[i] += a.magnitude * unit;
          break;
        case AnomalyKind::pattern_shapelet:
          base[i] += (static_cast<std::size_t>(offset) % 2 == 0 ? 1.0 : -1.0) *
                     a.magnitude * unit;
          break;
        case AnomalyKind::pattern_seasonal:
          if (spec.base == BaseSignal::sinusoid) {
            // Disrupt the periodicity by doubling the frequency over the span.
            base[i] = kSinusoidAmplitude *
                      std::sin(4.0 * M_PI * static_cast<double>(i) / kSinusoidPeriod);
          } else {
            base[i] += a.magnitude * unit *
                       std::sin(2.0 * M_PI * offset / 8.0);
          }
          break;
        case AnomalyKind::pattern_trend:
          base[i] += a.magnitude * unit * (offset + 1.0) / static_cast<double>(a.span);
          break;
      }
      labels[i] = 1;
    }
  }

  TimeSeries series;
  series.name = "synth_" + std::string(to_string(spec.base)) + "_" + std::to_string(spec.seed);
  series.values.resize(spec.length);
  for (std::size_t i = 0; i < spec.length; ++i) series.values[i] = base[i] + noise[i];
  series.labels = std::move(labels);
  return series;
}

}  // namespace anomamind
