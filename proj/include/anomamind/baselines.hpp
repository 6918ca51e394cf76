#pragma once

#include <string>
#include <vector>

#include "anomamind/series.hpp"

namespace anomamind {

/// Per-point anomaly scores produced by a statistical detector.
struct ScoreSeries {
  std::vector<double> scores;  // length T, all >= 0
  std::string method;
};

/// Low-pass reconstruction residual. The kept band is the cutoff index
/// ceil(keep_fraction * T / 2): bin k survives iff min(k, T-k) <= cutoff,
/// so keep_fraction = 1 reproduces the input exactly.
ScoreSeries fft_ad_score(const TimeSeries& series, double keep_fraction = 0.1);

/// Classic spectral-residual saliency: log-amplitude spectrum minus its
/// moving average, re-attached to the original phase and inverted.
/// avg_window is the moving-average width (centered, edge-clipped).
ScoreSeries spectral_residual_score(const TimeSeries& series, int avg_window = 3);

/// Same pipeline over a raw value vector (used by interval localization).
std::vector<double> spectral_residual_saliency(const std::vector<double>& values,
                                               int avg_window = 3);

/// Binary labels: score > mean + k * population std.
std::vector<int> threshold_mu_3sigma(const ScoreSeries& scores, double k = 3.0);

}  // namespace anomamind
