#pragma once

// Synthetic subject/task corpora. A "subject" fixes the aperiodic pair
// (beta, A_ap); a "task" sets the oscillatory peak. Trials inside a cell are
// independent phase draws of the same spectrum, so subject identity lives in
// the spectral shape and task identity in the peak modulation. Also houses
// the fully randomized corpus used to train representation models.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "specprobe/epochs.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/probe.hpp"
#include "specprobe/rng.hpp"
#include "specprobe/spectrum.hpp"
#include "specprobe/synth.hpp"

namespace specprobe {

struct SubjectSpec {
  std::string id;
  double beta = 1.5;
  double ap_offset = 1.0;
};

struct TaskSpec {
  std::string id;
  double f_osc = 20.0;
  double a_osc = 1.0;
  double width = 2.0;
};

// Offsets fall as exponents rise. Both parameters then push mean log power
// the same way, so subjects stay separated instead of the slope and offset
// effects cancelling each other.
inline std::vector<SubjectSpec> default_subjects() {
  return {{"s01", 1.1, 1.4},
          {"s02", 1.3, 1.2},
          {"s03", 1.5, 1.0},
          {"s04", 1.7, 0.8},
          {"s05", 1.9, 0.6}};
}

// Both tasks modulate the same 20 Hz rhythm; only its height differs.
inline std::vector<TaskSpec> default_tasks() {
  return {{"taskA", 20.0, 1.0, 2.0}, {"taskB", 20.0, 2.0, 2.0}};
}

struct CorpusConfig {
  std::vector<SubjectSpec> subjects = default_subjects();
  std::vector<TaskSpec> tasks = default_tasks();
  std::size_t trials_per_cell = 40;
  double train_frac = 0.8;  // first fraction of each cell, remainder test
  SignalConfig signal;
  double df = 0.5;
  SpectralParams base;  // supplies f range and compose mode for every cell

  CorpusConfig() { base.compose = ComposeMode::logpower; }
};

struct Corpus {
  EpochSet epochs;
  LabelSet subject_labels;
  LabelSet task_labels;
  Split split;
  std::vector<std::string> warnings;
};

// Epoch index (s*T + t)*trials + k, streamed from (seed, index), so any cell
// can be regenerated without the rest of the corpus.
inline Corpus make_subject_task_corpus(const CorpusConfig& cfg) {
  if (cfg.subjects.size() < 2)
    throw config_error(
        "corpus: need at least 2 subjects; a single-subject probe is "
        "degenerate");
  if (cfg.tasks.size() < 2)
    throw config_error("corpus: need at least 2 tasks");
  if (cfg.trials_per_cell < 2)
    throw config_error("corpus: need at least 2 trials per cell to split");
  if (!(cfg.train_frac > 0.0 && cfg.train_frac < 1.0))
    throw config_error("corpus: train_frac must lie in (0, 1)");
  cfg.signal.validate();

  for (std::size_t a = 0; a < cfg.subjects.size(); ++a)
    for (std::size_t b = a + 1; b < cfg.subjects.size(); ++b)
      if (cfg.subjects[a].id == cfg.subjects[b].id)
        throw config_error("corpus: duplicate subject id " + cfg.subjects[a].id);
  for (std::size_t a = 0; a < cfg.tasks.size(); ++a)
    for (std::size_t b = a + 1; b < cfg.tasks.size(); ++b)
      if (cfg.tasks[a].id == cfg.tasks[b].id)
        throw config_error("corpus: duplicate task id " + cfg.tasks[a].id);

  Corpus out;
  for (std::size_t a = 0; a < cfg.subjects.size(); ++a)
    for (std::size_t b = a + 1; b < cfg.subjects.size(); ++b)
      if (cfg.subjects[a].beta == cfg.subjects[b].beta &&
          cfg.subjects[a].ap_offset == cfg.subjects[b].ap_offset)
        out.warnings.push_back("subjects " + cfg.subjects[a].id + " and " +
                               cfg.subjects[b].id +
                               " have identical parameters");
  for (std::size_t a = 0; a < cfg.tasks.size(); ++a)
    for (std::size_t b = a + 1; b < cfg.tasks.size(); ++b)
      if (cfg.tasks[a].f_osc == cfg.tasks[b].f_osc &&
          cfg.tasks[a].a_osc == cfg.tasks[b].a_osc &&
          cfg.tasks[a].width == cfg.tasks[b].width)
        out.warnings.push_back("tasks " + cfg.tasks[a].id + " and " +
                               cfg.tasks[b].id + " have identical parameters");

  const std::size_t n_s = cfg.subjects.size();
  const std::size_t n_t = cfg.tasks.size();
  const std::size_t trials = cfg.trials_per_cell;
  const std::size_t n = n_s * n_t * trials;
  const std::size_t l = cfg.signal.samples();

  std::size_t n_train = std::size_t(std::llround(cfg.train_frac * double(trials)));
  n_train = std::max<std::size_t>(1, std::min(n_train, trials - 1));

  out.epochs.fs = cfg.signal.fs;
  out.epochs.channels = 1;
  out.epochs.data.resize(Eigen::Index(n), Eigen::Index(l));
  out.epochs.meta.resize(n);
  out.subject_labels.kind = "subject";
  out.task_labels.kind = "task";
  for (const auto& s : cfg.subjects) out.subject_labels.names.push_back(s.id);
  for (const auto& t : cfg.tasks) out.task_labels.names.push_back(t.id);
  out.subject_labels.labels.resize(n);
  out.task_labels.labels.resize(n);

  for (std::size_t s = 0; s < n_s; ++s) {
    for (std::size_t t = 0; t < n_t; ++t) {
      SpectralParams params = cfg.base;
      params.beta = cfg.subjects[s].beta;
      params.ap_offset = cfg.subjects[s].ap_offset;
      params.peaks = {
          Peak{cfg.tasks[t].f_osc, cfg.tasks[t].a_osc, cfg.tasks[t].width}};
      const auto spectrum = gen_power_spectrum(params, cfg.df);

      for (std::size_t k = 0; k < trials; ++k) {
        const std::size_t idx = (s * n_t + t) * trials + k;
        auto stream = derive_stream(cfg.signal.seed, idx);
        const auto x = spectrum_to_timeseries(spectrum, cfg.signal, stream);
        for (std::size_t j = 0; j < l; ++j)
          out.epochs.data(Eigen::Index(idx), Eigen::Index(j)) = x[j];
        out.epochs.meta[idx].subject_id = cfg.subjects[s].id;
        out.epochs.meta[idx].task_id = cfg.tasks[t].id;
        out.epochs.meta[idx].seed_used = derive_seed(cfg.signal.seed, idx);
        out.subject_labels.labels[idx] = int(s);
        out.task_labels.labels[idx] = int(t);
        (k < n_train ? out.split.train : out.split.test).push_back(idx);
      }
    }
  }

  out.epochs.validate();
  out.subject_labels.validate(n);
  out.task_labels.validate(n);
  out.split.validate(n);
  return out;
}

struct RandomCorpusConfig {
  std::size_t n_epochs = 1500;
  SignalConfig signal;
  double df = 0.5;
  SpectralParams base;  // f range and compose mode; one peak, width kept
  std::pair<double, double> beta_range{1.0, 2.0};
  std::pair<double, double> ap_offset_range{0.1, 3.0};
  std::pair<double, double> f_osc_range{1.0, 60.0};
  std::pair<double, double> a_osc_range{0.1, 3.0};

  RandomCorpusConfig() { base.compose = ComposeMode::logpower; }
};

// Every generative parameter drawn independently per epoch, covering the
// whole parameter box. Draw order per epoch is beta, A_ap, f_osc, A_osc,
// then the phases, all from the epoch's own stream.
inline EpochSet make_randomized_corpus(const RandomCorpusConfig& cfg) {
  if (cfg.n_epochs < 1) throw config_error("random corpus: need n_epochs >= 1");
  cfg.signal.validate();
  for (const auto& [lo, hi] :
       {cfg.beta_range, cfg.ap_offset_range, cfg.f_osc_range, cfg.a_osc_range})
    if (!(lo < hi))
      throw config_error("random corpus: parameter ranges need lo < hi");

  EpochSet out;
  out.fs = cfg.signal.fs;
  out.channels = 1;
  const std::size_t l = cfg.signal.samples();
  out.data.resize(Eigen::Index(cfg.n_epochs), Eigen::Index(l));
  out.meta.resize(cfg.n_epochs);

  for (std::size_t i = 0; i < cfg.n_epochs; ++i) {
    auto stream = derive_stream(cfg.signal.seed, i);
    SpectralParams p = cfg.base;
    p.beta = stream.uniform(cfg.beta_range.first, cfg.beta_range.second);
    p.ap_offset =
        stream.uniform(cfg.ap_offset_range.first, cfg.ap_offset_range.second);
    const double f_osc =
        stream.uniform(cfg.f_osc_range.first, cfg.f_osc_range.second);
    const double a_osc =
        stream.uniform(cfg.a_osc_range.first, cfg.a_osc_range.second);
    const double width = p.peaks.empty() ? 2.0 : p.peaks.front().width;
    p.peaks = {Peak{f_osc, a_osc, width}};

    const auto spectrum = gen_power_spectrum(p, cfg.df);
    const auto x = spectrum_to_timeseries(spectrum, cfg.signal, stream);
    for (std::size_t j = 0; j < l; ++j)
      out.data(Eigen::Index(i), Eigen::Index(j)) = x[j];
    out.meta[i].seed_used = derive_seed(cfg.signal.seed, i);
  }
  out.validate();
  return out;
}

}  // namespace specprobe
