#pragma once

// Command-line surface. Every subcommand reads one JSON config, resolves
// relative paths against --out-dir (so pipeline stages compose inside one
// artifact directory), writes manifested artifacts, and reports failures as
// a single stderr line "error: <category>: <message>" with a category-fixed
// exit code.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "specprobe/config_json.hpp"
#include "specprobe/corpus.hpp"
#include "specprobe/decode.hpp"
#include "specprobe/embedders.hpp"
#include "specprobe/forward.hpp"
#include "specprobe/geometry.hpp"
#include "specprobe/io.hpp"
#include "specprobe/masked_ae.hpp"
#include "specprobe/probe.hpp"
#include "specprobe/synth.hpp"

namespace specprobe {
namespace cli_detail {

namespace fs = std::filesystem;

struct Ctx {
  fs::path out_dir = ".";
  std::optional<std::uint64_t> seed;  // --seed override, if given
};

inline std::string resolve(const Ctx& ctx, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (ctx.out_dir / p).string();
}

inline json load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open config file: " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw input_error("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object())
    throw config_error("config file " + path + " must hold a JSON object");
  return cfg;
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void note_artifact(const std::string& path) {
  std::cout << "wrote " << path << "\n";
}

// Dense labels from per-epoch metadata. Class ids follow the sorted order of
// the distinct names so they do not depend on row order.
inline LabelSet labels_from_epochs(const EpochSet& epochs,
                                   const std::string& kind) {
  LabelSet out;
  out.kind = kind;
  std::vector<std::string> raw(epochs.rows());
  for (std::size_t i = 0; i < epochs.rows(); ++i) {
    const auto& id = kind == "subject" ? epochs.meta[i].subject_id
                                       : epochs.meta[i].task_id;
    if (!id)
      throw validation_error("epoch " + std::to_string(i) + " carries no " +
                             kind + " id; this artifact was not produced by a "
                             "labelled corpus");
    raw[i] = *id;
  }
  out.names = raw;
  std::sort(out.names.begin(), out.names.end());
  out.names.erase(std::unique(out.names.begin(), out.names.end()),
                  out.names.end());
  out.labels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out.labels[i] = int(std::lower_bound(out.names.begin(), out.names.end(),
                                         raw[i]) -
                        out.names.begin());
  return out;
}

inline std::vector<double> theta_targets(const EpochSet& epochs) {
  std::vector<double> t(epochs.rows());
  for (std::size_t i = 0; i < epochs.rows(); ++i) {
    if (!epochs.meta[i].theta)
      throw validation_error("epoch " + std::to_string(i) +
                             " carries no theta value; point targets_from at "
                             "a sweep artifact");
    t[i] = *epochs.meta[i].theta;
  }
  return t;
}

inline json probe_report_json(const ProbeReport& r) {
  json j;
  j["label_kind"] = r.label_kind;
  j["kappa_mean"] = r.kappa_mean;
  j["kappa_std"] = r.kappa_std;
  j["per_run_kappa"] = r.per_run_kappa;
  j["accuracy"] = r.accuracy;
  j["chosen_lr"] = r.chosen_lr;
  j["degenerate"] = r.degenerate;
  return j;
}

inline void write_confusion_csv(const Matrix& confusion,
                                const std::vector<std::string>& names,
                                const std::string& path) {
  std::string csv = "truth";
  for (const auto& n : names) csv += "," + n;
  csv += "\n";
  for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
    csv += names[std::size_t(r)];
    for (Eigen::Index c = 0; c < confusion.cols(); ++c)
      csv += "," + std::to_string(std::int64_t(confusion(r, c)));
    csv += "\n";
  }
  io_detail::write_file_atomic(path, csv);
  note_artifact(path);
}

// ---------------------------------------------------------------- synth ---

inline void run_synth(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "synth config",
                             {"params", "signal", "n_epochs", "df", "out"});
  SpectralParams params =
      cfg.contains("params")
          ? parse_spectral_params(cfg.at("params"), "synth config.params")
          : SpectralParams{};
  SignalConfig signal =
      cfg.contains("signal")
          ? parse_signal_config(cfg.at("signal"), "synth config.signal")
          : SignalConfig{};
  const auto n = cfg_detail::get_or<std::size_t>(cfg, "n_epochs", 32,
                                                 "synth config");
  const double df = cfg_detail::get_or(cfg, "df", 0.5, "synth config");
  const auto out = cfg_detail::get_required<std::string>(cfg, "out",
                                                         "synth config");
  if (ctx.seed) signal.seed = *ctx.seed;
  if (n == 0) throw config_error("synth config: n_epochs must be >= 1");
  params.validate();
  signal.validate();

  const Spectrum spectrum = gen_power_spectrum(params, df);
  const std::size_t l = signal.samples();
  EpochSet epochs;
  epochs.fs = signal.fs;
  epochs.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
  epochs.meta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto stream = derive_stream(signal.seed, i);
    const auto x = spectrum_to_timeseries(spectrum, signal, stream);
    for (std::size_t j = 0; j < l; ++j)
      epochs.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          x[j];
    epochs.meta[i].seed_used = derive_seed(signal.seed, i);
  }

  const std::string path = resolve(ctx, out);
  save_epochs(epochs, path);
  note_artifact(path);
}

// ---------------------------------------------------------------- sweep ---

inline void run_sweep(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "sweep config",
                             {"param_name", "theta_min", "theta_max",
                              "n_samples", "base", "signal", "df", "out"});
  json stage = cfg;
  stage.erase("out");
  SweepSpec spec = parse_sweep_spec(stage, "sweep config");
  const auto out = cfg_detail::get_required<std::string>(cfg, "out",
                                                         "sweep config");
  if (ctx.seed) spec.config.seed = *ctx.seed;

  auto [epochs, theta] = sweep(spec);
  (void)theta;  // already recorded in per-epoch meta
  const std::string path = resolve(ctx, out);
  save_epochs(epochs, path);
  note_artifact(path);
}

// -------------------------------------------------------------- forward ---

inline json covariance_report_json(const CovarianceReport& r) {
  json j;
  j["trace_ap"] = r.trace_ap;
  j["trace_osc"] = r.trace_osc;
  j["tr_ratio"] = r.trace_ap / r.trace_osc;
  j["rel_frobenius_err"] = r.rel_frobenius_err;
  json hat = json::array(), model = json::array();
  for (Eigen::Index i = 0; i < r.sigma_x_hat.rows(); ++i) {
    json hrow = json::array(), mrow = json::array();
    for (Eigen::Index k = 0; k < r.sigma_x_hat.cols(); ++k) {
      hrow.push_back(r.sigma_x_hat(i, k));
      mrow.push_back(r.sigma_x_model(i, k));
    }
    hat.push_back(std::move(hrow));
    model.push_back(std::move(mrow));
  }
  j["sigma_x_hat"] = std::move(hat);
  j["sigma_x_model"] = std::move(model);
  return j;
}

inline void run_forward(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "forward config",
                             {"leadfield", "sources", "noise_cov", "signal",
                              "n_trials", "df", "out_epochs", "out_report"});
  json stage = cfg;
  stage.erase("out_epochs");
  stage.erase("out_report");
  ForwardSpec spec = parse_forward_spec(stage, "forward config");
  const auto out_report = cfg_detail::get_or<std::string>(
      cfg, "out_report", "covariance_report.json", "forward config");
  if (ctx.seed) spec.config.seed = *ctx.seed;

  const EpochSet epochs = simulate(spec);
  if (cfg.contains("out_epochs")) {
    const std::string path = resolve(
        ctx, cfg_detail::get_required<std::string>(cfg, "out_epochs",
                                                   "forward config"));
    save_epochs(epochs, path);
    note_artifact(path);
  }

  const CovarianceReport report = covariance_check(epochs, spec);
  const std::string path = resolve(ctx, out_report);
  emit_report(covariance_report_json(report), path);
  note_artifact(path);
  std::cout << "tr_ratio=" << fmt_double(report.trace_ap / report.trace_osc)
            << " rel_frobenius_err=" << fmt_double(report.rel_frobenius_err)
            << "\n";
}

// ------------------------------------------------------------- train-ae ---

inline void run_train_ae(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "train-ae config",
                             {"epochs_in", "mask", "arch", "train", "out"});
  const auto in = cfg_detail::get_required<std::string>(cfg, "epochs_in",
                                                        "train-ae config");
  MaskConfig mask = cfg.contains("mask")
                        ? parse_mask_config(cfg.at("mask"), "train-ae config.mask")
                        : MaskConfig{};
  AEArch arch = cfg.contains("arch")
                    ? parse_ae_arch(cfg.at("arch"), "train-ae config.arch")
                    : AEArch{};
  TrainConfig train =
      cfg.contains("train")
          ? parse_train_config(cfg.at("train"), "train-ae config.train")
          : TrainConfig{};
  const auto out = cfg_detail::get_or<std::string>(cfg, "out", "ae.model.f32",
                                                   "train-ae config");
  if (ctx.seed) {
    train.seed = *ctx.seed;
    mask.seed = derive_seed(*ctx.seed, 1);
  }

  const EpochSet epochs = load_epochs(resolve(ctx, in));
  const MaskedAEModel model = train_masked_ae(epochs, mask, arch, train);
  const std::string path = resolve(ctx, out);
  save_model(model, path);
  note_artifact(path);
  std::cout << "train_loss_first=" << fmt_double(model.train_log.front())
            << " train_loss_final=" << fmt_double(model.train_log.back())
            << "\n";
}

// ---------------------------------------------------------------- embed ---

inline EmbeddingSet embed_from_config(const json& cfg, const Ctx& ctx,
                                      const EpochSet& epochs,
                                      const std::string& where) {
  const auto embedder = cfg_detail::get_or<std::string>(cfg, "embedder",
                                                        "logpsd", where);
  if (embedder == "logpsd") {
    const WelchParams welch =
        cfg.contains("welch")
            ? parse_welch_params(cfg.at("welch"), where + ".welch")
            : WelchParams{};
    return embed_logpsd(epochs, welch);
  }
  if (embedder == "bandpower") {
    const WelchParams welch =
        cfg.contains("welch")
            ? parse_welch_params(cfg.at("welch"), where + ".welch")
            : WelchParams{};
    const std::vector<Band> bands =
        cfg.contains("bands") ? parse_bands(cfg.at("bands"), where + ".bands")
                              : default_bands();
    return embed_bandpower(epochs, bands, welch);
  }
  if (embedder == "ae") {
    const auto model_path =
        cfg_detail::get_required<std::string>(cfg, "model", where);
    const MaskedAEModel model = load_model(resolve(ctx, model_path));
    return embed_ae(model, epochs);
  }
  throw config_error(where + ".embedder: unknown embedder '" + embedder +
                     "' (expected logpsd, bandpower, or ae)");
}

inline void run_embed(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "embed config",
                             {"epochs_in", "embedder", "welch", "bands",
                              "model", "out"});
  const auto in = cfg_detail::get_required<std::string>(cfg, "epochs_in",
                                                        "embed config");
  const auto out = cfg_detail::get_required<std::string>(cfg, "out",
                                                         "embed config");
  const EpochSet epochs = load_epochs(resolve(ctx, in));
  const EmbeddingSet emb = embed_from_config(cfg, ctx, epochs, "embed config");
  const std::string path = resolve(ctx, out);
  save_embeddings(emb, path);
  note_artifact(path);
}

// ----------------------------------------------------------- import-emb ---

inline void run_import_emb(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "import-emb config", {"in", "out"});
  const auto in = cfg_detail::get_required<std::string>(cfg, "in",
                                                        "import-emb config");
  const EmbeddingSet emb = import_embeddings(resolve(ctx, in));
  std::cout << "imported " << emb.rows() << " x " << emb.data.cols()
            << " embeddings from " << emb.embedder_id << "\n";
  if (cfg.contains("out")) {
    const std::string path = resolve(
        ctx,
        cfg_detail::get_required<std::string>(cfg, "out", "import-emb config"));
    save_embeddings(emb, path);
    note_artifact(path);
  }
}

// --------------------------------------------------------------- decode ---

inline json decode_report_json(const DecodabilityReport& r) {
  json j;
  j["target_name"] = r.target_name;
  j["r2_pooled"] = r.r2_pooled;
  j["r2_per_fold"] = r.r2_per_fold;
  j["chosen_lambdas"] = r.chosen_lambdas;
  j["n"] = r.predictions.size();
  return j;
}

inline void run_decode(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "decode config",
                             {"embeddings", "targets_from", "target_name",
                              "cv", "out_report", "out_predictions"});
  const auto emb_path = cfg_detail::get_required<std::string>(
      cfg, "embeddings", "decode config");
  const auto targets_path = cfg_detail::get_required<std::string>(
      cfg, "targets_from", "decode config");
  DecodeConfig cv = cfg.contains("cv")
                        ? parse_decode_config(cfg.at("cv"), "decode config.cv")
                        : DecodeConfig{};
  const auto target_name = cfg_detail::get_or<std::string>(
      cfg, "target_name", "theta", "decode config");
  const auto out_report = cfg_detail::get_or<std::string>(
      cfg, "out_report", "decode_report.json", "decode config");
  if (ctx.seed) cv.shuffle_seed = *ctx.seed;

  const EmbeddingSet emb = import_embeddings(resolve(ctx, emb_path));
  const EpochSet source = load_epochs(resolve(ctx, targets_path));
  const std::vector<double> targets = theta_targets(source);
  if (targets.size() != emb.rows())
    throw validation_error("decode: " + std::to_string(targets.size()) +
                           " targets but " + std::to_string(emb.rows()) +
                           " embedding rows");

  const DecodabilityReport report =
      linear_decodability(emb, targets, target_name, cv);
  const std::string path = resolve(ctx, out_report);
  emit_report(decode_report_json(report), path);
  note_artifact(path);

  if (cfg.contains("out_predictions")) {
    std::string csv = "epoch_index,target,prediction\n";
    for (std::size_t i = 0; i < targets.size(); ++i)
      csv += std::to_string(i) + "," + fmt_double(targets[i]) + "," +
             fmt_double(report.predictions[i]) + "\n";
    const std::string cpath = resolve(
        ctx, cfg_detail::get_required<std::string>(cfg, "out_predictions",
                                                   "decode config"));
    io_detail::write_file_atomic(cpath, csv);
    note_artifact(cpath);
  }
  std::cout << "r2_pooled=" << fmt_double(report.r2_pooled) << "\n";
}

// ---------------------------------------------------------------- probe ---

inline void run_probe(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "probe config",
                             {"embeddings", "epochs_in", "label_kind", "split",
                              "probe", "out_report", "out_confusion"});
  const auto emb_path = cfg_detail::get_required<std::string>(
      cfg, "embeddings", "probe config");
  const auto epochs_path = cfg_detail::get_required<std::string>(
      cfg, "epochs_in", "probe config");
  const auto kind = cfg_detail::get_required<std::string>(cfg, "label_kind",
                                                          "probe config");
  if (kind != "subject" && kind != "task")
    throw config_error("probe config.label_kind: expected subject or task");
  const auto split_path = cfg_detail::get_required<std::string>(cfg, "split",
                                                                "probe config");
  ProbeTrainConfig pc =
      cfg.contains("probe")
          ? parse_probe_config(cfg.at("probe"), "probe config.probe")
          : ProbeTrainConfig{};
  const auto out_report = cfg_detail::get_or<std::string>(
      cfg, "out_report", "probe_report.json", "probe config");
  if (ctx.seed) pc.seed = *ctx.seed;

  const EmbeddingSet emb = import_embeddings(resolve(ctx, emb_path));
  const EpochSet epochs = load_epochs(resolve(ctx, epochs_path));
  const LabelSet labels = labels_from_epochs(epochs, kind);
  const Split split = load_split(resolve(ctx, split_path), emb.rows());

  const ProbeResult result = train_linear_probe(emb, labels, split, pc);
  const std::string path = resolve(ctx, out_report);
  emit_report(probe_report_json(result.report), path);
  note_artifact(path);
  if (cfg.contains("out_confusion"))
    write_confusion_csv(
        result.report.confusion, labels.names,
        resolve(ctx, cfg_detail::get_required<std::string>(cfg, "out_confusion",
                                                           "probe config")));
  std::cout << "kappa_mean=" << fmt_double(result.report.kappa_mean)
            << " kappa_std=" << fmt_double(result.report.kappa_std) << "\n";
}

// -------------------------------------------------------------- battery ---

inline json battery_report_json(const BatteryReport& r) {
  json j;
  j["subject"] = probe_report_json(r.subject);
  j["task"] = probe_report_json(r.task);
  j["kappa_gap"] = r.kappa_gap;
  return j;
}

inline void run_battery(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "battery config",
                             {"embeddings", "epochs_in", "split", "probe",
                              "out_report"});
  const auto emb_path = cfg_detail::get_required<std::string>(
      cfg, "embeddings", "battery config");
  const auto epochs_path = cfg_detail::get_required<std::string>(
      cfg, "epochs_in", "battery config");
  const auto split_path = cfg_detail::get_required<std::string>(
      cfg, "split", "battery config");
  ProbeTrainConfig pc =
      cfg.contains("probe")
          ? parse_probe_config(cfg.at("probe"), "battery config.probe")
          : ProbeTrainConfig{};
  const auto out_report = cfg_detail::get_or<std::string>(
      cfg, "out_report", "battery_report.json", "battery config");
  if (ctx.seed) pc.seed = *ctx.seed;

  const EmbeddingSet emb = import_embeddings(resolve(ctx, emb_path));
  const EpochSet epochs = load_epochs(resolve(ctx, epochs_path));
  const LabelSet subjects = labels_from_epochs(epochs, "subject");
  const LabelSet tasks = labels_from_epochs(epochs, "task");
  const Split split = load_split(resolve(ctx, split_path), emb.rows());

  const BatteryReport report =
      subject_task_battery(emb, subjects, tasks, split, pc);
  const std::string path = resolve(ctx, out_report);
  emit_report(battery_report_json(report), path);
  note_artifact(path);
  std::cout << "kappa_subject=" << fmt_double(report.subject.kappa_mean)
            << " kappa_task=" << fmt_double(report.task.kappa_mean)
            << " kappa_gap=" << fmt_double(report.kappa_gap) << "\n";
}

// ------------------------------------------------------------- geometry ---

inline json geometry_report_json(const GeometryReport& r) {
  json j;
  j["d_cs"] = r.d_cs;
  j["d_ct"] = r.d_ct;
  json per_subject = json::object(), per_task = json::object();
  for (const auto& [name, term] : r.per_subject_terms) per_subject[name] = term;
  for (const auto& [name, term] : r.per_task_terms) per_task[name] = term;
  j["per_subject_terms"] = std::move(per_subject);
  j["per_task_terms"] = std::move(per_task);
  j["excluded_subjects"] = r.excluded_subjects;
  j["excluded_tasks"] = r.excluded_tasks;
  return j;
}

inline void run_geometry(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "geometry config",
                             {"embeddings", "epochs_in", "out_report",
                              "out_pca2d"});
  const auto emb_path = cfg_detail::get_required<std::string>(
      cfg, "embeddings", "geometry config");
  const auto epochs_path = cfg_detail::get_required<std::string>(
      cfg, "epochs_in", "geometry config");
  const auto out_report = cfg_detail::get_or<std::string>(
      cfg, "out_report", "geometry_report.json", "geometry config");

  const EmbeddingSet emb = import_embeddings(resolve(ctx, emb_path));
  const EpochSet epochs = load_epochs(resolve(ctx, epochs_path));
  const LabelSet subjects = labels_from_epochs(epochs, "subject");
  const LabelSet tasks = labels_from_epochs(epochs, "task");

  const CentroidTable table = centroids(emb, subjects, tasks);
  const GeometryReport report = cluster_distances(table);
  const std::string path = resolve(ctx, out_report);
  emit_report(geometry_report_json(report), path);
  note_artifact(path);

  if (cfg.contains("out_pca2d")) {
    const Matrix proj = pca2d(emb.data);
    std::string csv = "epoch_index,x,y,subject_id,task_id\n";
    for (Eigen::Index i = 0; i < proj.rows(); ++i)
      csv += std::to_string(i) + "," + fmt_double(proj(i, 0)) + "," +
             fmt_double(proj(i, 1)) + "," +
             subjects.names[std::size_t(subjects.labels[std::size_t(i)])] +
             "," + tasks.names[std::size_t(tasks.labels[std::size_t(i)])] +
             "\n";
    const std::string cpath = resolve(
        ctx, cfg_detail::get_required<std::string>(cfg, "out_pca2d",
                                                   "geometry config"));
    io_detail::write_file_atomic(cpath, csv);
    note_artifact(cpath);
  }
  std::cout << "d_cs=" << fmt_double(report.d_cs)
            << " d_ct=" << fmt_double(report.d_ct) << "\n";
}

// --------------------------------------------------------------- recipe ---

// With --seed N every stage seed derives from N in a fixed order, so one
// flag pins the whole pipeline: data=0, pretrain=1, mask=2, train=3,
// probe=4, shuffle=5.
struct SeedPlan {
  std::uint64_t data, pretrain, mask, train, probe, shuffle;
};

inline SeedPlan recipe_seeds(std::uint64_t root) {
  return {derive_seed(root, 0), derive_seed(root, 1), derive_seed(root, 2),
          derive_seed(root, 3), derive_seed(root, 4), derive_seed(root, 5)};
}

inline void run_recipe_sweep_embed_decode(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "recipe config",
                             {"pipeline", "sweep", "embedder", "welch", "bands",
                              "cv", "prefix"});
  SweepSpec spec = parse_sweep_spec(
      cfg_detail::get_required<json>(cfg, "sweep", "recipe config"),
      "recipe config.sweep");
  DecodeConfig cv = cfg.contains("cv")
                        ? parse_decode_config(cfg.at("cv"), "recipe config.cv")
                        : DecodeConfig{};
  const auto embedder = cfg_detail::get_or<std::string>(cfg, "embedder",
                                                        "logpsd",
                                                        "recipe config");
  if (embedder != "logpsd" && embedder != "bandpower")
    throw config_error(
        "recipe config.embedder: the sweep_embed_decode pipeline embeds with "
        "logpsd or bandpower; train autoencoders via corpus_battery_geometry");
  const auto prefix = cfg_detail::get_or<std::string>(cfg, "prefix", "",
                                                      "recipe config");
  if (ctx.seed) {
    const SeedPlan plan = recipe_seeds(*ctx.seed);
    spec.config.seed = plan.data;
    cv.shuffle_seed = plan.shuffle;
  }

  auto [epochs, theta] = sweep(spec);
  const std::string epochs_path = resolve(ctx, prefix + "sweep.epochs.f32");
  save_epochs(epochs, epochs_path);
  note_artifact(epochs_path);

  json embed_cfg = json::object();
  embed_cfg["embedder"] = embedder;
  if (cfg.contains("welch")) embed_cfg["welch"] = cfg.at("welch");
  if (cfg.contains("bands")) embed_cfg["bands"] = cfg.at("bands");
  const EmbeddingSet emb =
      embed_from_config(embed_cfg, ctx, epochs, "recipe config");
  const std::string emb_path = resolve(ctx, prefix + "sweep.emb.f32");
  save_embeddings(emb, emb_path);
  note_artifact(emb_path);

  const DecodabilityReport report =
      linear_decodability(emb, theta, spec.param_name, cv);
  const std::string report_path = resolve(ctx, prefix + "decode_report.json");
  emit_report(decode_report_json(report), report_path);
  note_artifact(report_path);
  std::cout << "r2_pooled=" << fmt_double(report.r2_pooled) << "\n";
}

inline void run_recipe_corpus_battery_geometry(const json& cfg, const Ctx& ctx) {
  cfg_detail::reject_unknown(cfg, "recipe config",
                             {"pipeline", "corpus", "pretrain", "mask", "arch",
                              "train", "probe", "prefix"});
  CorpusConfig corpus_cfg =
      cfg.contains("corpus")
          ? parse_corpus_config(cfg.at("corpus"), "recipe config.corpus")
          : CorpusConfig{};
  MaskConfig mask = cfg.contains("mask")
                        ? parse_mask_config(cfg.at("mask"), "recipe config.mask")
                        : MaskConfig{};
  AEArch arch = cfg.contains("arch")
                    ? parse_ae_arch(cfg.at("arch"), "recipe config.arch")
                    : AEArch{};
  TrainConfig train =
      cfg.contains("train")
          ? parse_train_config(cfg.at("train"), "recipe config.train")
          : TrainConfig{};
  ProbeTrainConfig probe_cfg =
      cfg.contains("probe")
          ? parse_probe_config(cfg.at("probe"), "recipe config.probe")
          : ProbeTrainConfig{};
  const auto prefix = cfg_detail::get_or<std::string>(cfg, "prefix", "",
                                                      "recipe config");
  std::optional<RandomCorpusConfig> pretrain_cfg;
  if (cfg.contains("pretrain"))
    pretrain_cfg = parse_random_corpus_config(cfg.at("pretrain"),
                                              "recipe config.pretrain");
  if (ctx.seed) {
    const SeedPlan plan = recipe_seeds(*ctx.seed);
    corpus_cfg.signal.seed = plan.data;
    if (pretrain_cfg) pretrain_cfg->signal.seed = plan.pretrain;
    mask.seed = plan.mask;
    train.seed = plan.train;
    probe_cfg.seed = plan.probe;
  }

  const Corpus corpus = make_subject_task_corpus(corpus_cfg);
  for (const std::string& w : corpus.warnings)
    std::cerr << "warning: " << w << "\n";
  const std::string epochs_path = resolve(ctx, prefix + "corpus.epochs.f32");
  save_epochs(corpus.epochs, epochs_path);
  note_artifact(epochs_path);
  const std::string split_path = resolve(ctx, prefix + "split.csv");
  save_split(corpus.split, corpus.epochs.rows(), split_path);
  note_artifact(split_path);

  EpochSet train_epochs;
  if (pretrain_cfg) {
    train_epochs = make_randomized_corpus(*pretrain_cfg);
    const std::string path = resolve(ctx, prefix + "pretrain.epochs.f32");
    save_epochs(train_epochs, path);
    note_artifact(path);
  } else {
    train_epochs = corpus.epochs;
  }

  const MaskedAEModel model = train_masked_ae(train_epochs, mask, arch, train);
  const std::string model_path = resolve(ctx, prefix + "ae.model.f32");
  save_model(model, model_path);
  note_artifact(model_path);

  const EmbeddingSet emb = embed_ae(model, corpus.epochs);
  const std::string emb_path = resolve(ctx, prefix + "corpus.emb.f32");
  save_embeddings(emb, emb_path);
  note_artifact(emb_path);

  const BatteryReport battery = subject_task_battery(
      emb, corpus.subject_labels, corpus.task_labels, corpus.split, probe_cfg);
  const std::string battery_path =
      resolve(ctx, prefix + "battery_report.json");
  emit_report(battery_report_json(battery), battery_path);
  note_artifact(battery_path);

  const CentroidTable table =
      centroids(emb, corpus.subject_labels, corpus.task_labels);
  const GeometryReport geometry = cluster_distances(table);
  const std::string geometry_path =
      resolve(ctx, prefix + "geometry_report.json");
  emit_report(geometry_report_json(geometry), geometry_path);
  note_artifact(geometry_path);

  const Matrix proj = pca2d(emb.data);
  std::string csv = "epoch_index,x,y,subject_id,task_id\n";
  for (Eigen::Index i = 0; i < proj.rows(); ++i) {
    const std::size_t r = std::size_t(i);
    csv += std::to_string(r) + "," + fmt_double(proj(i, 0)) + "," +
           fmt_double(proj(i, 1)) + "," +
           corpus.subject_labels.names[std::size_t(
               corpus.subject_labels.labels[r])] +
           "," +
           corpus.task_labels.names[std::size_t(corpus.task_labels.labels[r])] +
           "\n";
  }
  const std::string pca_path = resolve(ctx, prefix + "pca2d.csv");
  io_detail::write_file_atomic(pca_path, csv);
  note_artifact(pca_path);

  std::cout << "kappa_subject=" << fmt_double(battery.subject.kappa_mean)
            << " kappa_task=" << fmt_double(battery.task.kappa_mean)
            << " kappa_gap=" << fmt_double(battery.kappa_gap)
            << " d_cs=" << fmt_double(geometry.d_cs)
            << " d_ct=" << fmt_double(geometry.d_ct) << "\n";
}

inline void run_recipe(const json& cfg, const Ctx& ctx) {
  const auto pipeline = cfg_detail::get_required<std::string>(cfg, "pipeline",
                                                              "recipe config");
  if (pipeline == "sweep_embed_decode")
    run_recipe_sweep_embed_decode(cfg, ctx);
  else if (pipeline == "corpus_battery_geometry")
    run_recipe_corpus_battery_geometry(cfg, ctx);
  else
    throw config_error(
        "recipe config.pipeline: unknown pipeline '" + pipeline +
        "' (expected sweep_embed_decode or corpus_battery_geometry)");
}

// --------------------------------------------------------------- verify ---

inline std::vector<std::string> verify_paths_from_config(const json& cfg) {
  cfg_detail::reject_unknown(cfg, "verify config", {"paths"});
  return cfg_detail::get_required<std::vector<std::string>>(cfg, "paths",
                                                            "verify config");
}

inline void run_verify(const std::vector<std::string>& paths, const Ctx& ctx) {
  bool all_ok = true;
  std::string first_failure;
  for (const std::string& p : paths) {
    const VerifyResult r = verify_artifact(resolve(ctx, p));
    if (r.ok) {
      std::cout << "ok " << r.kind << " " << r.path << "\n";
    } else {
      std::cout << "FAILED " << r.path << ": " << r.message << "\n";
      if (all_ok) first_failure = r.path + ": " + r.message;
      all_ok = false;
    }
  }
  if (!all_ok) throw validation_error("verify: " + first_failure);
}

inline std::string one_line(std::string msg) {
  for (char& c : msg)
    if (c == '\n') c = ' ';
  return msg;
}

}  // namespace cli_detail

inline int cli_run(const std::vector<std::string>& args) {
  using cli_detail::Ctx;
  namespace fs = std::filesystem;

  CLI::App app{
      "specprobe: synthetic EEG spectra, trainable embedders, and linear "
      "read-out diagnostics"};
  app.require_subcommand(1);
  app.footer(
      "Paths in configs resolve relative to --out-dir.\n"
      "Environment: SPECPROBE_OUT_DIR sets the default --out-dir,\n"
      "             SPECPROBE_THREADS caps Eigen's internal threads.\n"
      "Exit codes: 0 success, 1 internal error, 2 usage error,\n"
      "            3 invalid configuration, 4 missing or malformed input,\n"
      "            5 data failed validation or training diverged.");

  struct Sub {
    CLI::App* cmd = nullptr;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
  };

  const std::vector<std::pair<std::string, std::string>> stage_specs = {
      {"synth", "Synthesize identically parameterized epochs (seed: phase draws)"},
      {"sweep", "Generate a parameter-sweep epoch set (seed: phase draws)"},
      {"forward", "Simulate the multi-channel forward model and check its "
                  "spatial covariance against the analytic prediction "
                  "(seed: trials)"},
      {"train-ae", "Train the masked autoencoder on an epochs artifact "
                   "(seed: init/order, mask stream derived)"},
      {"embed", "Embed an epochs artifact (logpsd, bandpower, or ae)"},
      {"import-emb", "Validate an external embeddings artifact"},
      {"decode", "Nested-CV ridge decodability of sweep targets "
                 "(seed: fold shuffle)"},
      {"probe", "Linear probe of subject or task labels (seed: probe runs)"},
      {"battery", "Subject and task probes on one embedding (seed: probe runs)"},
      {"geometry", "Centroid cluster distances and a 2-D PCA projection"},
      {"recipe", "Run a named multi-stage pipeline (seed: drives every stage)"},
  };

  std::map<std::string, Sub> subs;
  const char* env_out = std::getenv("SPECPROBE_OUT_DIR");
  const std::string default_out = env_out ? env_out : ".";

  for (const auto& [name, desc] : stage_specs) {
    Sub& sub = subs[name];
    sub.out_dir = default_out;
    sub.cmd = app.add_subcommand(name, desc);
    sub.cmd->add_option("--config", sub.config_path, "JSON config file")
        ->required();
    sub.cmd->add_option("--seed", sub.seed,
                        "Override the stage seed documented above");
    sub.cmd->add_option("--out-dir", sub.out_dir,
                        "Artifact directory (default: " + default_out + ")");
  }

  Sub& verify_sub = subs["verify"];
  verify_sub.out_dir = default_out;
  verify_sub.cmd = app.add_subcommand(
      "verify", "Re-check artifact manifests and payload digests");
  std::vector<std::string> verify_paths;
  verify_sub.cmd->add_option("paths", verify_paths, "Artifacts to verify");
  verify_sub.cmd->add_option("--config", verify_sub.config_path,
                             "JSON config listing {\"paths\": [...]}");
  verify_sub.cmd->add_option("--seed", verify_sub.seed,
                             "Accepted for interface uniformity; unused");
  verify_sub.cmd->add_option("--out-dir", verify_sub.out_dir,
                             "Directory relative paths resolve against");

  std::vector<const char*> argv_like;
  argv_like.reserve(args.size() + 1);
  argv_like.push_back("specprobe");
  for (const auto& a : args) argv_like.push_back(a.c_str());

  try {
    app.parse(int(argv_like.size()), argv_like.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints its own message
    return 2;
  }

  try {
    if (const char* threads = std::getenv("SPECPROBE_THREADS"))
      Eigen::setNbThreads(std::max(1, std::atoi(threads)));

    for (const auto& [name, sub] : subs) {
      if (!sub.cmd->parsed()) continue;
      Ctx ctx;
      ctx.out_dir = fs::path(sub.out_dir);
      ctx.seed = sub.seed;
      std::error_code ec;
      fs::create_directories(ctx.out_dir, ec);

      if (name == "verify") {
        std::vector<std::string> paths = verify_paths;
        if (!sub.config_path.empty()) {
          const auto listed = cli_detail::verify_paths_from_config(
              cli_detail::load_config(sub.config_path));
          paths.insert(paths.end(), listed.begin(), listed.end());
        }
        if (paths.empty()) {
          std::cerr << "error: usage: verify needs artifact paths "
                       "(positional or via --config)\n";
          return 2;
        }
        cli_detail::run_verify(paths, ctx);
        return 0;
      }

      const json cfg = cli_detail::load_config(sub.config_path);
      if (name == "synth") cli_detail::run_synth(cfg, ctx);
      else if (name == "sweep") cli_detail::run_sweep(cfg, ctx);
      else if (name == "forward") cli_detail::run_forward(cfg, ctx);
      else if (name == "train-ae") cli_detail::run_train_ae(cfg, ctx);
      else if (name == "embed") cli_detail::run_embed(cfg, ctx);
      else if (name == "import-emb") cli_detail::run_import_emb(cfg, ctx);
      else if (name == "decode") cli_detail::run_decode(cfg, ctx);
      else if (name == "probe") cli_detail::run_probe(cfg, ctx);
      else if (name == "battery") cli_detail::run_battery(cfg, ctx);
      else if (name == "geometry") cli_detail::run_geometry(cfg, ctx);
      else if (name == "recipe") cli_detail::run_recipe(cfg, ctx);
      return 0;
    }
    std::cerr << "error: usage: no subcommand given\n";
    return 2;
  } catch (const config_error& e) {
    std::cerr << "error: config: " << cli_detail::one_line(e.what()) << "\n";
    return 3;
  } catch (const input_error& e) {
    std::cerr << "error: input: " << cli_detail::one_line(e.what()) << "\n";
    return 4;
  } catch (const training_error& e) {
    std::cerr << "error: training: " << cli_detail::one_line(e.what()) << "\n";
    return 5;
  } catch (const validation_error& e) {
    std::cerr << "error: validation: " << cli_detail::one_line(e.what()) << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << cli_detail::one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace specprobe
