#pragma once

// Welch power spectral density. Periodic Hann window, one-sided output in the
// density convention: P[k] = c_k * |X_k|^2 / (fs * sum(w^2)) averaged over
// segments, where c_k doubles every bin except DC and (for even segment
// lengths) Nyquist. Integrating P over frequency then estimates the signal
// variance. Segments are detrended by nothing; synthesized inputs are
// zero-mean by construction.

#include <cmath>
#include <vector>

#include "specprobe/errors.hpp"
#include "specprobe/fft.hpp"
#include "specprobe/spectrum.hpp"

namespace specprobe {

inline Spectrum welch_psd(const std::vector<double>& signal, double fs,
                          std::size_t segment_len, double overlap_frac) {
  if (segment_len < 8)
    throw validation_error("welch: segment_len must be >= 8");
  if (segment_len > signal.size())
    throw validation_error("welch: segment_len exceeds signal length");
  if (!(overlap_frac >= 0.0 && overlap_frac < 1.0))
    throw validation_error("welch: overlap_frac must lie in [0, 1)");
  if (!(fs > 0.0)) throw validation_error("welch: fs must be > 0");

  std::vector<double> window(segment_len);
  double win_sq = 0.0;
  for (std::size_t n = 0; n < segment_len; ++n) {
    window[n] = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(n) / double(segment_len)));
    win_sq += window[n] * window[n];
  }

  const std::size_t step = std::max<std::size_t>(
      1, segment_len - std::size_t(std::floor(overlap_frac * double(segment_len))));
  const std::size_t n_bins = segment_len / 2 + 1;
  std::vector<double> acc(n_bins, 0.0);
  std::size_t n_segments = 0;

  std::vector<double> buf(segment_len);
  for (std::size_t start = 0; start + segment_len <= signal.size();
       start += step) {
    for (std::size_t n = 0; n < segment_len; ++n)
      buf[n] = signal[start + n] * window[n];
    const auto bins = rfft(buf);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const bool edge = (k == 0) || (segment_len % 2 == 0 && k == segment_len / 2);
      acc[k] += (edge ? 1.0 : 2.0) * std::norm(bins[k]);
    }
    ++n_segments;
  }

  Spectrum out;
  out.freqs.resize(n_bins);
  out.powers.resize(n_bins);
  const double scale = 1.0 / (fs * win_sq * double(n_segments));
  for (std::size_t k = 0; k < n_bins; ++k) {
    out.freqs[k] = double(k) * fs / double(segment_len);
    out.powers[k] = acc[k] * scale;
  }
  return out;
}

}  // namespace specprobe
