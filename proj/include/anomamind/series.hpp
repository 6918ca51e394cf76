#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anomamind/error.hpp"

namespace anomamind {

/// Univariate series over a zero-based integer index, with optional binary
/// anomaly labels of the same length. Values are finite after ingestion.
struct TimeSeries {
  std::string name;
  std::vector<double> values;
  std::optional<std::vector<int>> labels;  // each 0 or 1

  std::size_t size() const { return values.size(); }
};

/// Min-max parameters of a normalized series: x' = (x - min) / (max - min).
struct NormalizationParams {
  double min = 0.0;
  double max = 0.0;
};

/// Half-open slice [start, end) of a parent series. Values are copied so a
/// window can outlive its source.
struct Window {
  std::string parent;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// TODS-style anomaly taxonomy used by the synthetic generator and the
/// verdict validity checks.
enum class AnomalyKind {
  point_global,
  pattern_contextual,
  pattern_shapelet,
  pattern_seasonal,
  pattern_trend,
};

const char* to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& name);

enum class BaseSignal { constant, linear, sinusoid };

const char* to_string(BaseSignal base);
BaseSignal base_signal_from_string(const std::string& name);

// Pinned shapes of the synthetic bases.
inline constexpr double kLinearBaseSlope = 0.2;     // units per sample
inline constexpr double kSinusoidAmplitude = 1.0;
inline constexpr double kSinusoidPeriod = 20.0;     // samples

struct AnomalyInjection {
  AnomalyKind kind = AnomalyKind::point_global;
  std::size_t position = 0;
  std::size_t span = 1;
  double magnitude = 0.0;  // in multiples of noise_sigma (of 1.0 when noiseless)
};

struct SynthSpec {
  std::size_t length = 100;
  BaseSignal base = BaseSignal::constant;
  double noise_sigma = 0.0;
  std::vector<AnomalyInjection> anomalies;
  std::uint64_t seed = 0;
};

/// Reads a CSV with header `index,value` (or `index,value,label` when
/// has_labels). Rows are reindexed to 0..T-1 in file order; NaN/inf values
/// are rejected.
TimeSeries load_series(const std::string& path, bool has_labels);

/// Writes the `index,value[,label]` CSV format accepted by load_series.
void write_series_csv(const TimeSeries& series, const std::string& path);

/// Min-max scales into [0,1]. Throws ConstantSeries when max == min.
std::pair<TimeSeries, NormalizationParams> normalize(const TimeSeries& series);

inline double denormalize(double v, const NormalizationParams& p) {
  return v * (p.max - p.min) + p.min;
}

/// Subtracts the least-squares line fit over t = 0..T-1 (closed form).
TimeSeries detrend(const TimeSeries& series);

/// Slope and intercept of the least-squares line over t = 0..n-1.
std::pair<double, double> least_squares_line(const std::vector<double>& values);

/// Fixed-stride segmentation. A trailing partial window is kept only when
/// its length is at least min_tail.
std::vector<Window> segment_windows(const TimeSeries& series,
                                    std::size_t length = 100,
                                    std::size_t step = 100,
                                    std::size_t min_tail = 20);

/// Copies [start, end) of the series into a Window.
Window window_of(const TimeSeries& series, std::size_t start, std::size_t end);

/// Deterministic labeled generator; labels mark exactly the injected spans.
TimeSeries generate_synthetic(const SynthSpec& spec);

}  // namespace anomamind
