#pragma once

// JSON -> config-struct parsing for the CLI. Every parser rejects unknown
// keys so a typo fails loudly instead of silently falling back to a default,
// and every error names the JSON path it complains about.

#include <string>
#include <utility>
#include <vector>

#include "specprobe/canonical_json.hpp"
#include "specprobe/corpus.hpp"
#include "specprobe/decode.hpp"
#include "specprobe/embedders.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/forward.hpp"
#include "specprobe/masked_ae.hpp"
#include "specprobe/probe.hpp"
#include "specprobe/spectrum.hpp"
#include "specprobe/synth.hpp"

namespace specprobe {
namespace cfg_detail {

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object())
    throw config_error(where + ": expected a JSON object");
}

inline void reject_unknown(const json& j, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known)
      throw config_error(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(where + "." + key + ": wrong JSON type");
  }
}

template <typename T>
T get_required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw config_error(where + ": missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(where + "." + key + ": wrong JSON type");
  }
}

inline std::pair<double, double> get_range(const json& j, const char* key,
                                           std::pair<double, double> fallback,
                                           const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto v = get_or<std::vector<double>>(j, key, {}, where);
  if (v.size() != 2)
    throw config_error(where + "." + key + ": expected a [min, max] pair");
  return {v[0], v[1]};
}

}  // namespace cfg_detail

inline ComposeMode compose_from_name(const std::string& name) {
  if (name == "linear") return ComposeMode::linear;
  if (name == "logpower") return ComposeMode::logpower;
  throw config_error("compose: unknown mode '" + name +
                     "' (expected linear or logpower)");
}

inline SpectralParams parse_spectral_params(const json& j,
                                            const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where,
                 {"beta", "ap_offset", "peaks", "f_min", "f_max", "compose"});
  SpectralParams p;
  p.beta = get_or(j, "beta", p.beta, where);
  p.ap_offset = get_or(j, "ap_offset", p.ap_offset, where);
  p.f_min = get_or(j, "f_min", p.f_min, where);
  p.f_max = get_or(j, "f_max", p.f_max, where);
  if (j.contains("compose"))
    p.compose = compose_from_name(
        get_required<std::string>(j, "compose", where));
  if (j.contains("peaks")) {
    if (!j.at("peaks").is_array())
      throw config_error(where + ".peaks: expected an array");
    p.peaks.clear();
    std::size_t i = 0;
    for (const json& pj : j.at("peaks")) {
      const std::string pw = where + ".peaks[" + std::to_string(i++) + "]";
      require_object(pj, pw);
      reject_unknown(pj, pw, {"f_osc", "a_osc", "width"});
      Peak pk;
      pk.f_osc = get_or(pj, "f_osc", pk.f_osc, pw);
      pk.a_osc = get_or(pj, "a_osc", pk.a_osc, pw);
      pk.width = get_or(pj, "width", pk.width, pw);
      p.peaks.push_back(pk);
    }
  }
  return p;
}

inline SignalConfig parse_signal_config(const json& j, const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where, {"fs", "duration", "seed"});
  SignalConfig c;
  c.fs = get_or(j, "fs", c.fs, where);
  c.duration = get_or(j, "duration", c.duration, where);
  c.seed = get_or(j, "seed", c.seed, where);
  return c;
}

inline SweepSpec parse_sweep_spec(const json& j, const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where,
                 {"param_name", "theta_min", "theta_max", "n_samples", "base",
                  "signal", "df"});
  SweepSpec s;
  s.param_name = get_required<std::string>(j, "param_name", where);
  s.theta_min = get_required<double>(j, "theta_min", where);
  s.theta_max = get_required<double>(j, "theta_max", where);
  s.n_samples = get_or<std::size_t>(j, "n_samples", s.n_samples, where);
  if (j.contains("base")) s.base = parse_spectral_params(j.at("base"), where + ".base");
  if (j.contains("signal"))
    s.config = parse_signal_config(j.at("signal"), where + ".signal");
  s.df = get_or(j, "df", s.df, where);
  return s;
}

inline WelchParams parse_welch_params(const json& j, const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where, {"segment_len", "overlap"});
  WelchParams w;
  w.segment_len = get_or<std::size_t>(j, "segment_len", w.segment_len, where);
  w.overlap = get_or(j, "overlap", w.overlap, where);
  return w;
}

inline std::vector<Band> parse_bands(const json& j, const std::string& where) {
  if (!j.is_array()) throw config_error(where + ": expected an array of [lo, hi]");
  std::vector<Band> bands;
  std::size_t i = 0;
  for (const json& bj : j) {
    const std::string bw = where + "[" + std::to_string(i++) + "]";
    const auto v = bj.get<std::vector<double>>();
    if (v.size() != 2) throw config_error(bw + ": expected a [lo, hi] pair");
    bands.emplace_back(v[0], v[1]);
  }
  return bands;
}

inline MaskConfig parse_mask_config(const json& j, const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where, {"patch_len", "mask_frac", "seed"});
  MaskConfig m;
  m.patch_len = get_or<std::size_t>(j, "patch_len", m.patch_len, where);
  m.mask_frac = get_or(j, "mask_frac", m.mask_frac, where);
  m.seed = get_or(j, "seed", m.seed, where);
  return m;
}

inline AEArch parse_ae_arch(const json& j, const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where, {"hidden", "d_latent"});
  AEArch a;
  a.hidden = get_or<std::size_t>(j, "hidden", a.hidden, where);
  a.d_latent = get_or<std::size_t>(j, "d_latent", a.d_latent, where);
  return a;
}

inline TrainConfig parse_train_config(const json& j, const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where,
                 {"epochs", "batch", "lr", "lr_min", "seed", "normalize",
                  "beta1", "beta2", "eps", "weight_decay"});
  TrainConfig t;
  t.epochs = get_or<std::size_t>(j, "epochs", t.epochs, where);
  t.batch = get_or<std::size_t>(j, "batch", t.batch, where);
  t.lr = get_or(j, "lr", t.lr, where);
  t.lr_min = get_or(j, "lr_min", t.lr_min, where);
  t.seed = get_or(j, "seed", t.seed, where);
  if (j.contains("normalize"))
    t.normalize =
        normalize_from_name(get_required<std::string>(j, "normalize", where));
  t.adamw.beta1 = get_or(j, "beta1", t.adamw.beta1, where);
  t.adamw.beta2 = get_or(j, "beta2", t.adamw.beta2, where);
  t.adamw.eps = get_or(j, "eps", t.adamw.eps, where);
  t.adamw.weight_decay = get_or(j, "weight_decay", t.adamw.weight_decay, where);
  return t;
}

inline DecodeConfig parse_decode_config(const json& j, const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where,
                 {"outer_folds", "inner_folds", "lambda_grid", "shuffle_seed"});
  DecodeConfig d;
  d.k_outer = get_or<std::size_t>(j, "outer_folds", d.k_outer, where);
  d.k_inner = get_or<std::size_t>(j, "inner_folds", d.k_inner, where);
  d.lambda_grid =
      get_or<std::vector<double>>(j, "lambda_grid", d.lambda_grid, where);
  d.shuffle_seed = get_or(j, "shuffle_seed", d.shuffle_seed, where);
  return d;
}

inline ProbeTrainConfig parse_probe_config(const json& j,
                                           const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where,
                 {"epochs", "batch", "lr_candidates", "lr_min", "n_seeds",
                  "seed", "standardize"});
  ProbeTrainConfig p;
  p.epochs = get_or<std::size_t>(j, "epochs", p.epochs, where);
  p.batch = get_or<std::size_t>(j, "batch", p.batch, where);
  p.lr_candidates =
      get_or<std::vector<double>>(j, "lr_candidates", p.lr_candidates, where);
  p.lr_min = get_or(j, "lr_min", p.lr_min, where);
  p.n_seeds = get_or<std::size_t>(j, "n_seeds", p.n_seeds, where);
  p.seed = get_or(j, "seed", p.seed, where);
  p.standardize = get_or(j, "standardize", p.standardize, where);
  return p;
}

inline CorpusConfig parse_corpus_config(const json& j, const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where,
                 {"subjects", "tasks", "trials_per_cell", "train_frac",
                  "signal", "df", "base"});
  CorpusConfig c;
  if (j.contains("subjects")) {
    if (!j.at("subjects").is_array())
      throw config_error(where + ".subjects: expected an array");
    c.subjects.clear();
    std::size_t i = 0;
    for (const json& sj : j.at("subjects")) {
      const std::string sw = where + ".subjects[" + std::to_string(i++) + "]";
      require_object(sj, sw);
      reject_unknown(sj, sw, {"id", "beta", "ap_offset"});
      SubjectSpec s;
      s.id = get_required<std::string>(sj, "id", sw);
      s.beta = get_required<double>(sj, "beta", sw);
      s.ap_offset = get_required<double>(sj, "ap_offset", sw);
      c.subjects.push_back(std::move(s));
    }
  }
  if (j.contains("tasks")) {
    if (!j.at("tasks").is_array())
      throw config_error(where + ".tasks: expected an array");
    c.tasks.clear();
    std::size_t i = 0;
    for (const json& tj : j.at("tasks")) {
      const std::string tw = where + ".tasks[" + std::to_string(i++) + "]";
      require_object(tj, tw);
      reject_unknown(tj, tw, {"id", "f_osc", "a_osc", "width"});
      TaskSpec t;
      t.id = get_required<std::string>(tj, "id", tw);
      t.f_osc = get_required<double>(tj, "f_osc", tw);
      t.a_osc = get_required<double>(tj, "a_osc", tw);
      t.width = get_or(tj, "width", t.width, tw);
      c.tasks.push_back(std::move(t));
    }
  }
  c.trials_per_cell =
      get_or<std::size_t>(j, "trials_per_cell", c.trials_per_cell, where);
  c.train_frac = get_or(j, "train_frac", c.train_frac, where);
  if (j.contains("signal"))
    c.signal = parse_signal_config(j.at("signal"), where + ".signal");
  c.df = get_or(j, "df", c.df, where);
  if (j.contains("base")) c.base = parse_spectral_params(j.at("base"), where + ".base");
  return c;
}

inline RandomCorpusConfig parse_random_corpus_config(const json& j,
                                                     const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where,
                 {"n_epochs", "signal", "df", "base", "beta_range",
                  "ap_offset_range", "f_osc_range", "a_osc_range"});
  RandomCorpusConfig c;
  c.n_epochs = get_or<std::size_t>(j, "n_epochs", c.n_epochs, where);
  if (j.contains("signal"))
    c.signal = parse_signal_config(j.at("signal"), where + ".signal");
  c.df = get_or(j, "df", c.df, where);
  if (j.contains("base")) c.base = parse_spectral_params(j.at("base"), where + ".base");
  c.beta_range = get_range(j, "beta_range", c.beta_range, where);
  c.ap_offset_range = get_range(j, "ap_offset_range", c.ap_offset_range, where);
  c.f_osc_range = get_range(j, "f_osc_range", c.f_osc_range, where);
  c.a_osc_range = get_range(j, "a_osc_range", c.a_osc_range, where);
  return c;
}

inline Matrix parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j.at(0).is_array())
    throw config_error(where + ": expected a non-empty array of arrays");
  const std::size_t rows = j.size();
  const std::size_t cols = j.at(0).size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = j.at(r).get<std::vector<double>>();
    if (row.size() != cols)
      throw config_error(where + ": row " + std::to_string(r) + " has " +
                         std::to_string(row.size()) + " entries, expected " +
                         std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

inline ForwardSpec parse_forward_spec(const json& j, const std::string& where) {
  using namespace cfg_detail;
  require_object(j, where);
  reject_unknown(j, where,
                 {"leadfield", "sources", "noise_cov", "signal", "n_trials",
                  "df"});
  ForwardSpec spec;
  spec.leadfield = parse_matrix(get_required<json>(j, "leadfield", where),
                                where + ".leadfield");
  spec.noise_cov = parse_matrix(get_required<json>(j, "noise_cov", where),
                                where + ".noise_cov");
  if (!j.contains("sources"))
    throw config_error(where + ": missing required key 'sources'");
  if (!j.at("sources").is_array())
    throw config_error(where + ".sources: expected an array");
  std::size_t i = 0;
  for (const json& sj : j.at("sources")) {
    const std::string sw = where + ".sources[" + std::to_string(i++) + "]";
    require_object(sj, sw);
    reject_unknown(sj, sw, {"kind", "params", "stream_id"});
    SourceSpec s;
    const auto kind = get_required<std::string>(sj, "kind", sw);
    if (kind == "aperiodic")
      s.kind = SourceSpec::Kind::aperiodic;
    else if (kind == "oscillatory")
      s.kind = SourceSpec::Kind::oscillatory;
    else
      throw config_error(sw + ".kind: expected aperiodic or oscillatory");
    if (sj.contains("params"))
      s.params = parse_spectral_params(sj.at("params"), sw + ".params");
    if (s.kind == SourceSpec::Kind::aperiodic) s.params.peaks.clear();
    if (sj.contains("stream_id"))
      s.stream_id = get_required<std::size_t>(sj, "stream_id", sw);
    spec.sources.push_back(std::move(s));
  }
  if (j.contains("signal"))
    spec.config = parse_signal_config(j.at("signal"), where + ".signal");
  spec.n_trials = get_or<std::size_t>(j, "n_trials", spec.n_trials, where);
  spec.df = get_or(j, "df", spec.df, where);
  return spec;
}

}  // namespace specprobe
