#pragma once

// Parameterized power-spectrum model: a 1/f^beta aperiodic component plus
// Gaussian oscillatory peaks. Default composition adds the terms in linear
// power; `logpower` composes them in log10 power instead, where a peak
// multiplies the local aperiodic level by 10^a_osc. Both modes are exact
// evaluations, no fitting here.

#include <cmath>
#include <string>
#include <vector>

#include "specprobe/errors.hpp"

namespace specprobe {

enum class ComposeMode { linear, logpower };

struct Peak {
  double f_osc = 10.0;  // center, Hz
  double a_osc = 1.0;   // log10 power above the aperiodic component
  double width = 2.0;   // Gaussian sigma, Hz
};

struct SpectralParams {
  double beta = 1.5;       // aperiodic exponent
  double ap_offset = 1.0;  // A_ap, log10 power offset
  std::vector<Peak> peaks = {Peak{}};
  double f_min = 1.0;
  double f_max = 60.0;
  ComposeMode compose = ComposeMode::linear;

  void validate() const {
    if (!(f_min > 0.0))
      throw validation_error(
          "spectral params: grid would contain f = 0 where 1/f^beta is "
          "undefined; require f_min > 0");
    if (!(f_min < f_max))
      throw validation_error("spectral params: require f_min < f_max");
    if (!(beta >= 0.0)) throw validation_error("spectral params: beta must be >= 0");
    if (!std::isfinite(beta) || !std::isfinite(ap_offset))
      throw validation_error("spectral params: non-finite value");
    for (const auto& pk : peaks) {
      if (!(pk.width > 0.0))
        throw validation_error("spectral params: peak width must be > 0");
      if (!(pk.f_osc >= f_min && pk.f_osc <= f_max))
        throw validation_error(
            "spectral params: peak center must lie in [f_min, f_max], got " +
            std::to_string(pk.f_osc));
      if (!std::isfinite(pk.a_osc))
        throw validation_error("spectral params: non-finite peak height");
    }
  }
};

struct SignalConfig {
  double fs = 200.0;     // Hz
  double duration = 5.0; // seconds
  std::uint64_t seed = 0;

  std::size_t samples() const {
    return std::size_t(std::llround(fs * duration));
  }

  void validate() const {
    if (!(fs > 0.0) || !(duration > 0.0))
      throw validation_error("signal config: fs and duration must be > 0");
    if (samples() < 2)
      throw validation_error("signal config: need at least 2 samples");
  }
};

struct Spectrum {
  std::vector<double> freqs;   // ascending, Hz
  std::vector<double> powers;  // linear power, same length
};

namespace spectrum_detail {

inline double eval_power(const SpectralParams& p, double f) {
  if (p.compose == ComposeMode::linear) {
    double v = std::pow(10.0, p.ap_offset) / std::pow(f, p.beta);
    for (const auto& pk : p.peaks) {
      const double d = f - pk.f_osc;
      v += std::pow(10.0, pk.a_osc) *
           std::exp(-d * d / (2.0 * pk.width * pk.width));
    }
    return v;
  }
  double log_p = p.ap_offset - p.beta * std::log10(f);
  for (const auto& pk : p.peaks) {
    const double d = f - pk.f_osc;
    log_p += pk.a_osc * std::exp(-d * d / (2.0 * pk.width * pk.width));
  }
  return std::pow(10.0, log_p);
}

}  // namespace spectrum_detail

// Evaluates the model on the grid f_min, f_min+df, ..., f_max. When the span
// is not a whole number of steps the grid is extended by f_max itself so both
// endpoints are always present.
inline Spectrum gen_power_spectrum(const SpectralParams& params, double df) {
  params.validate();
  if (!(df > 0.0)) throw validation_error("gen_power_spectrum: df must be > 0");

  Spectrum s;
  const auto n_steps =
      std::size_t(std::floor((params.f_max - params.f_min) / df + 1e-9));
  s.freqs.reserve(n_steps + 2);
  for (std::size_t i = 0; i <= n_steps; ++i)
    s.freqs.push_back(params.f_min + double(i) * df);
  if (s.freqs.back() < params.f_max - 1e-9 * std::max(1.0, params.f_max))
    s.freqs.push_back(params.f_max);

  s.powers.reserve(s.freqs.size());
  for (double f : s.freqs)
    s.powers.push_back(spectrum_detail::eval_power(params, f));
  return s;
}

}  // namespace specprobe
