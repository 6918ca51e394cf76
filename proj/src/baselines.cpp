#include "anomamind/baselines.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>

#include "anomamind/error.hpp"

namespace anomamind {

namespace {

// FFTW plan creation/destruction is not thread-safe; execution on distinct
// plans is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& input,
                                      int sign) {
  const std::size_t n = input.size();
  std::vector<std::complex<double>> output(n);
  auto* in = reinterpret_cast<fftw_complex*>(
      const_cast<std::complex<double>*>(input.data()));
  auto* out = reinterpret_cast<fftw_complex*>(output.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  if (sign == FFTW_BACKWARD) {
    for (auto& v : output) v /= static_cast<double>(n);
  }
  return output;
}

std::vector<std::complex<double>> forward_fft(const std::vector<double>& values) {
  std::vector<std::complex<double>> input(values.begin(), values.end());
  return dft(input, FFTW_FORWARD);
}

std::vector<double> moving_average(const std::vector<double>& values, int width) {
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const std::ptrdiff_t radius = (width - 1) / 2;
  std::vector<double> out(values.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - radius);
    const std::ptrdiff_t hi = std::min(n - 1, i + radius);
    double sum = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) sum += values[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

constexpr double kSrEpsilon = 1e-8;

}  // namespace

ScoreSeries fft_ad_score(const TimeSeries& series, double keep_fraction) {
  const std::size_t n = series.size();
  if (n < 8) raise(ErrorCode::SeriesTooShort, "fft_ad needs T >= 8");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    raise(ErrorCode::InvalidArgument, "keep_fraction must be in (0, 1]");
  }

  auto spectrum = forward_fft(series.values);
  const auto cutoff = static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(n) / 2.0));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t folded = std::min(k, n - k);
    if (folded > cutoff) spectrum[k] = 0.0;
  }
  auto smoothed = dft(spectrum, FFTW_BACKWARD);

  ScoreSeries out;
  out.method = "fft_ad";
  out.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.scores[i] = std::abs(series.values[i] - smoothed[i].real());
  }
  return out;
}

std::vector<double> spectral_residual_saliency(const std::vector<double>& values,
                                               int avg_window) {
  const std::size_t n = values.size();
  if (n < 8) raise(ErrorCode::SeriesTooShort, "spectral residual needs T >= 8");
  if (avg_window < 1) raise(ErrorCode::InvalidArgument, "avg_window must be >= 1");

  auto spectrum = forward_fft(values);
  std::vector<double> amplitude(n), log_amp(n);
  for (std::size_t k = 0; k < n; ++k) {
    amplitude[k] = std::abs(spectrum[k]);
    log_amp[k] = std::log(amplitude[k] + kSrEpsilon);
  }
  const auto smoothed = moving_average(log_amp, avg_window);

  // Residual spectrum with the original phase; bins with no energy stay
  // silent because the phase factor X_k / (A_k + eps) vanishes there.
  std::vector<std::complex<double>> residual(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double gain = std::exp(log_amp[k] - smoothed[k]);
    residual[k] = spectrum[k] * (gain / (amplitude[k] + kSrEpsilon));
  }
  auto saliency_wave = dft(residual, FFTW_BACKWARD);

  std::vector<double> saliency(n);
  for (std::size_t i = 0; i < n; ++i) saliency[i] = std::abs(saliency_wave[i]);
  return saliency;
}

ScoreSeries spectral_residual_score(const TimeSeries& series, int avg_window) {
  ScoreSeries out;
  out.method = "spectral_residual";
  out.scores = spectral_residual_saliency(series.values, avg_window);
  return out;
}

std::vector<int> threshold_mu_3sigma(const ScoreSeries& scores, double k) {
  const std::size_t n = scores.scores.size();
  if (n < 2) raise(ErrorCode::InvalidArgument, "thresholding needs T >= 2");
  double mean = 0.0;
  for (double s : scores.scores) mean += s;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double s : scores.scores) var += (s - mean) * (s - mean);
  var /= static_cast<double>(n);
  const double threshold = mean + k * std::sqrt(var);

  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (scores.scores[i] > threshold) labels[i] = 1;
  }
  return labels;
}

}  // namespace anomamind
