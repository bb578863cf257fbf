#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specprobe/epochs.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/rng.hpp"
#include "specprobe/spectrum.hpp"
#include "specprobe/synth.hpp"

namespace specprobe {

// One latent source: either the 1/f term or a single spectral peak. The two
// kinds partition the generator's power so their sensor-space contributions
// can be traced separately.
struct SourceSpec {
  enum class Kind { aperiodic, oscillatory };

  Kind kind = Kind::aperiodic;
  SpectralParams params;
  // Seed-stream slot; defaults to the source's position so that adding or
  // removing other sources does not change this source's draw.
  std::optional<std::size_t> stream_id;

  void validate() const {
    params.validate();
    if (kind == Kind::aperiodic && !params.peaks.empty())
      throw validation_error("aperiodic source must not carry peaks");
    if (kind == Kind::oscillatory && params.peaks.size() != 1)
      throw validation_error("oscillatory source needs exactly one peak");
  }
};

// Power spectrum of the source's own term on the standard parameter grid.
inline Spectrum source_power_spectrum(const SourceSpec& src, double df) {
  src.validate();
  Spectrum s = gen_power_spectrum(src.params, df);
  for (std::size_t i = 0; i < s.freqs.size(); ++i) {
    const double f = s.freqs[i];
    if (src.kind == SourceSpec::Kind::aperiodic) {
      s.powers[i] = std::pow(10.0, src.params.ap_offset) /
                    std::pow(f, src.params.beta);
    } else {
      const Peak& p = src.params.peaks.front();
      const double d = f - p.f_osc;
      s.powers[i] =
          std::pow(10.0, p.a_osc) * std::exp(-(d * d) / (2.0 * p.width * p.width));
    }
  }
  return s;
}

struct ForwardSpec {
  Matrix leadfield;               // C x N_s
  std::vector<SourceSpec> sources;
  Matrix noise_cov;               // C x C, symmetric PSD
  SignalConfig config;
  std::size_t n_trials = 100;
  double df = 0.5;

  Eigen::Index channels() const { return leadfield.rows(); }

  void validate() const {
    if (leadfield.rows() < 1 || leadfield.cols() < 1)
      throw validation_error("forward: leadfield must be at least 1 x 1");
    if (!leadfield.allFinite())
      throw validation_error("forward: leadfield has non-finite entries");
    if (std::size_t(leadfield.cols()) != sources.size())
      throw validation_error("forward: leadfield has " +
                             std::to_string(leadfield.cols()) +
                             " source columns but " +
                             std::to_string(sources.size()) + " sources");
    if (noise_cov.rows() != leadfield.rows() ||
        noise_cov.cols() != leadfield.rows())
      throw validation_error("forward: noise covariance must be C x C");
    if (!noise_cov.allFinite())
      throw validation_error("forward: noise covariance has non-finite entries");
    if ((noise_cov - noise_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw validation_error("forward: noise covariance must be symmetric");
    if (n_trials < 1) throw validation_error("forward: n_trials must be >= 1");
    if (!(df > 0.0)) throw validation_error("forward: df must be > 0");
    config.validate();
    for (const SourceSpec& s : sources) s.validate();
  }
};

namespace forward_detail {

// Lower Cholesky factor, with one 1e-10 jitter retry for semi-definite input.
// An exactly zero matrix short-circuits to "no noise".
inline std::optional<Eigen::MatrixXd> noise_factor(const Matrix& cov) {
  if (cov.isZero(0.0)) return std::nullopt;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd jittered =
      cov + 1e-10 * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
  Eigen::LLT<Eigen::MatrixXd> retry(jittered);
  if (retry.info() == Eigen::Success) return retry.matrixL();
  throw validation_error(
      "forward: noise covariance is not positive semi-definite "
      "(Cholesky failed beyond 1e-10 jitter)");
}

inline std::size_t effective_stream(const ForwardSpec& spec, std::size_t s) {
  return spec.sources[s].stream_id.value_or(s);
}

}  // namespace forward_detail

// x_t = A z_t + eps_t per timestep. Rows are channel-major per trial: trial t
// occupies rows [t*C, (t+1)*C). Per trial, stream 0 is the noise and stream
// 1 + stream_id is that source's phase draw, so sources stay mutually
// independent and individually reproducible.
inline EpochSet simulate(const ForwardSpec& spec) {
  spec.validate();
  const Eigen::Index c = spec.channels();
  const std::size_t l = spec.config.samples();
  const std::size_t ns = spec.sources.size();

  std::vector<Spectrum> spectra(ns);
  for (std::size_t s = 0; s < ns; ++s)
    spectra[s] = source_power_spectrum(spec.sources[s], spec.df);
  const auto chol = forward_detail::noise_factor(spec.noise_cov);

  EpochSet out;
  out.fs = spec.config.fs;
  out.channels = std::size_t(c);
  out.data.resize(Eigen::Index(spec.n_trials) * c, Eigen::Index(l));
  out.meta.resize(std::size_t(out.data.rows()));

  Matrix z(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(l));
  for (std::size_t t = 0; t < spec.n_trials; ++t) {
    const std::uint64_t trial_seed = derive_seed(spec.config.seed, t);

    for (std::size_t s = 0; s < ns; ++s) {
      auto stream =
          derive_stream(trial_seed, 1 + forward_detail::effective_stream(spec, s));
      const auto x = spectrum_to_timeseries(spectra[s], spec.config, stream);
      for (std::size_t j = 0; j < l; ++j)
        z(Eigen::Index(s), Eigen::Index(j)) = x[j];
    }

    Matrix trial = spec.leadfield * z;
    if (chol) {
      auto noise_stream = derive_stream(trial_seed, 0);
      Eigen::VectorXd g(c);
      for (std::size_t j = 0; j < l; ++j) {
        for (Eigen::Index ch = 0; ch < c; ++ch) g[ch] = noise_stream.normal();
        trial.col(Eigen::Index(j)) += *chol * g;
      }
    }

    for (Eigen::Index ch = 0; ch < c; ++ch) {
      const Eigen::Index row = Eigen::Index(t) * c + ch;
      out.data.row(row) = trial.row(ch);
      out.meta[std::size_t(row)].seed_used = trial_seed;
    }
  }
  return out;
}

struct CovarianceReport {
  Matrix sigma_x_hat;    // pooled empirical spatial covariance
  Matrix sigma_x_model;  // A diag(var_s) A^T + noise_cov
  double trace_ap = 0.0;
  double trace_osc = 0.0;
  double rel_frobenius_err = 0.0;
};

// Spatial covariance check under temporal pooling: every timestep of every
// trial counts as one sample of the C-dimensional sensor vector.
inline CovarianceReport covariance_check(const EpochSet& epochs,
                                         const ForwardSpec& spec) {
  spec.validate();
  epochs.validate();
  const Eigen::Index c = spec.channels();
  if (Eigen::Index(epochs.channels) != c)
    throw validation_error("covariance check: epochs have " +
                           std::to_string(epochs.channels) +
                           " channels, spec has " + std::to_string(c));
  const std::size_t n_trials = epochs.trials();
  const std::size_t l = epochs.samples();
  if (n_trials * l < 1000)
    throw validation_error(
        "covariance check: fewer than 1000 pooled timepoints, estimate would "
        "be too noisy");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(c);
  for (std::size_t t = 0; t < n_trials; ++t)
    for (std::size_t j = 0; j < l; ++j)
      for (Eigen::Index ch = 0; ch < c; ++ch)
        mean[ch] += epochs.data(Eigen::Index(t) * c + ch, Eigen::Index(j));
  mean /= double(n_trials * l);

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(c, c);
  Eigen::VectorXd x(c);
  for (std::size_t t = 0; t < n_trials; ++t)
    for (std::size_t j = 0; j < l; ++j) {
      for (Eigen::Index ch = 0; ch < c; ++ch)
        x[ch] = epochs.data(Eigen::Index(t) * c + ch, Eigen::Index(j)) - mean[ch];
      acc.noalias() += x * x.transpose();
    }
  acc /= double(n_trials * l);

  CovarianceReport report;
  report.sigma_x_hat = acc;
  report.sigma_x_model = spec.noise_cov;
  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    const auto spectrum = source_power_spectrum(spec.sources[s], spec.df);
    const double var_s = synthesized_variance(spectrum, spec.config);
    const Vector a = spec.leadfield.col(Eigen::Index(s));
    report.sigma_x_model += var_s * a * a.transpose();
    if (spec.sources[s].kind == SourceSpec::Kind::aperiodic)
      report.trace_ap += var_s * a.squaredNorm();
    else
      report.trace_osc += var_s * a.squaredNorm();
  }

  const double model_norm = report.sigma_x_model.norm();
  if (model_norm == 0.0)
    throw validation_error("covariance check: model covariance is identically zero");
  report.rel_frobenius_err =
      (report.sigma_x_hat - report.sigma_x_model).norm() / model_norm;
  return report;
}

// Documented default: a 4-sensor, 2-source bench with a strong 1/f source and
// a unit-height 10 Hz peak source, chosen so the aperiodic term dominates the
// sensor power by more than an order of magnitude.
inline ForwardSpec default_forward_spec() {
  ForwardSpec spec;
  spec.leadfield.resize(4, 2);
  spec.leadfield << 1.0, 0.5, 0.8, -0.6, -0.5, 0.9, 0.3, 1.0;

  SourceSpec ap;
  ap.kind = SourceSpec::Kind::aperiodic;
  ap.params.beta = 1.5;
  ap.params.ap_offset = 2.0;
  ap.params.peaks.clear();

  SourceSpec osc;
  osc.kind = SourceSpec::Kind::oscillatory;
  osc.params.peaks = {Peak{10.0, 0.0, 2.0}};

  spec.sources = {ap, osc};
  spec.noise_cov = 5e-4 * Matrix::Identity(4, 4);
  spec.n_trials = 100;
  return spec;
}

}  // namespace specprobe
