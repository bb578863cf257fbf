#pragma once

// Random-phase synthesis: interpolate model powers onto the real-FFT bin
// grid, take sqrt as amplitude (no bin-width scaling; absolute units are
// arbitrary), give every positive-frequency bin an independent uniform phase,
// and invert. The Nyquist bin of an even-length signal carries phase 0 and
// consumes no random draw, so stream alignment does not depend on L's parity.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "specprobe/epochs.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/fft.hpp"
#include "specprobe/rng.hpp"
#include "specprobe/spectrum.hpp"

namespace specprobe {

namespace synth_detail {

// Linear interpolation with zero outside the tabulated support.
inline double interp_power(const Spectrum& s, double f) {
  if (s.freqs.empty() || f < s.freqs.front() || f > s.freqs.back()) return 0.0;
  const auto it = std::lower_bound(s.freqs.begin(), s.freqs.end(), f);
  const std::size_t hi = std::size_t(it - s.freqs.begin());
  if (hi == 0 || s.freqs[hi] == f) return s.powers[hi];
  const std::size_t lo = hi - 1;
  const double t = (f - s.freqs[lo]) / (s.freqs[hi] - s.freqs[lo]);
  return s.powers[lo] + t * (s.powers[hi] - s.powers[lo]);
}

inline void check_spectrum(const Spectrum& s) {
  if (s.freqs.size() != s.powers.size())
    throw validation_error("spectrum: freqs/powers length mismatch");
  for (std::size_t i = 0; i < s.freqs.size(); ++i) {
    if (!std::isfinite(s.powers[i]) || s.powers[i] < 0.0)
      throw validation_error("spectrum: powers must be finite and >= 0");
    if (i > 0 && !(s.freqs[i] > s.freqs[i - 1]))
      throw validation_error("spectrum: freqs must be strictly increasing");
  }
}

// Power landed on each rfft bin after interpolation.
inline std::vector<double> bin_powers(const Spectrum& s,
                                      const SignalConfig& config) {
  const std::size_t l = config.samples();
  std::vector<double> p(l / 2 + 1, 0.0);
  for (std::size_t k = 1; k < p.size(); ++k)
    p[k] = interp_power(s, double(k) * config.fs / double(l));
  return p;
}

}  // namespace synth_detail

inline std::vector<double> spectrum_to_timeseries(const Spectrum& spec,
                                                  const SignalConfig& config,
                                                  rng_stream& rng) {
  config.validate();
  synth_detail::check_spectrum(spec);
  const std::size_t l = config.samples();
  const auto powers = synth_detail::bin_powers(spec, config);

  std::vector<cplx> half(powers.size(), cplx(0.0, 0.0));
  const std::size_t first_nondraw = (l % 2 == 0) ? l / 2 : half.size();
  for (std::size_t k = 1; k < half.size(); ++k) {
    const double amp = std::sqrt(powers[k]);
    if (k == first_nondraw) {
      half[k] = cplx(amp, 0.0);
    } else {
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      half[k] = std::polar(amp, phi);
    }
  }
  return irfft(half, l);
}

// Analytic variance of a synthesized draw. Each interior cosine contributes
// 2 P_k / L^2 and the Nyquist term P / L^2; this is exact, not an estimate,
// because the discrete cosines are orthogonal over the full sample grid.
inline double synthesized_variance(const Spectrum& spec,
                                   const SignalConfig& config) {
  const std::size_t l = config.samples();
  const auto powers = synth_detail::bin_powers(spec, config);
  double acc = 0.0;
  for (std::size_t k = 1; k < powers.size(); ++k) {
    const bool nyquist = (l % 2 == 0) && (k == l / 2);
    acc += (nyquist ? 1.0 : 2.0) * powers[k];
  }
  return acc / (double(l) * double(l));
}

struct SweepSpec {
  std::string param_name = "beta";  // beta | ap_offset | f_osc | a_osc
  double theta_min = 1.0;
  double theta_max = 2.0;
  std::size_t n_samples = 1000;
  SpectralParams base;
  SignalConfig config;
  double df = 0.5;  // model grid resolution before interpolation
};

namespace synth_detail {

inline SpectralParams apply_override(const SpectralParams& base,
                                     const std::string& name, double value) {
  SpectralParams p = base;
  if (name == "beta") {
    p.beta = value;
  } else if (name == "ap_offset") {
    p.ap_offset = value;
  } else if (name == "f_osc" || name == "a_osc") {
    if (p.peaks.empty())
      throw validation_error("sweep: base params have no peak to override");
    // Sweeps address the first peak; bases with several peaks keep the rest.
    if (name == "f_osc")
      p.peaks.front().f_osc = value;
    else
      p.peaks.front().a_osc = value;
  } else {
    throw validation_error("sweep: unknown param_name '" + name + "'");
  }
  return p;
}

}  // namespace synth_detail

// theta[i] evenly spaced over [theta_min, theta_max], endpoints included.
// Epoch i uses the stream derived from (config.seed, i), so any subset of the
// sweep can be regenerated independently.
inline std::pair<EpochSet, std::vector<double>> sweep(const SweepSpec& spec) {
  if (!(spec.theta_min < spec.theta_max))
    throw validation_error("sweep: require theta_min < theta_max");
  if (spec.n_samples < 2) throw validation_error("sweep: need n_samples >= 2");
  spec.config.validate();

  std::vector<double> theta(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i)
    theta[i] = spec.theta_min +
               (spec.theta_max - spec.theta_min) * double(i) /
                   double(spec.n_samples - 1);

  // Both endpoint overrides must satisfy the params invariants up front, so a
  // bad range fails before any epoch is generated.
  synth_detail::apply_override(spec.base, spec.param_name, spec.theta_min)
      .validate();
  synth_detail::apply_override(spec.base, spec.param_name, spec.theta_max)
      .validate();

  EpochSet out;
  out.fs = spec.config.fs;
  out.channels = 1;
  const std::size_t l = spec.config.samples();
  out.data.resize(Eigen::Index(spec.n_samples), Eigen::Index(l));
  out.meta.resize(spec.n_samples);

  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const auto params =
        synth_detail::apply_override(spec.base, spec.param_name, theta[i]);
    const auto spectrum = gen_power_spectrum(params, spec.df);
    auto stream = derive_stream(spec.config.seed, i);
    const auto x = spectrum_to_timeseries(spectrum, spec.config, stream);
    for (std::size_t j = 0; j < l; ++j) out.data(Eigen::Index(i), Eigen::Index(j)) = x[j];
    out.meta[i].theta = theta[i];
    out.meta[i].seed_used = derive_seed(spec.config.seed, i);
  }
  return {std::move(out), std::move(theta)};
}

}  // namespace specprobe
