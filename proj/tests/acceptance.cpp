// End-to-end acceptance gate. Each criterion prints exactly one line,
// [PASS]/[FAIL] plus the measured numbers and its wall time, and the binary
// exits nonzero if any criterion fails. Tolerances are pinned here, next to
// the checks they govern.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "specprobe/cli.hpp"
#include "specprobe/corpus.hpp"
#include "specprobe/decode.hpp"
#include "specprobe/embedders.hpp"
#include "specprobe/forward.hpp"
#include "specprobe/geometry.hpp"
#include "specprobe/masked_ae.hpp"
#include "specprobe/probe.hpp"
#include "specprobe/ridge.hpp"
#include "specprobe/synth.hpp"
#include "specprobe/welch.hpp"

namespace sp = specprobe;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool report(int id, bool ok, const std::string& detail, double elapsed,
            double budget) {
  ok = ok && elapsed < budget;
  std::printf("[%s] criterion %d: %s (%.1f s, budget %.0f s)\n",
              ok ? "PASS" : "FAIL", id, detail.c_str(), elapsed, budget);
  std::fflush(stdout);
  return ok;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Ordinary least squares slope of log10(power) on log10(freq).
double loglog_slope(const sp::Spectrum& psd, double f_lo, double f_hi) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < psd.freqs.size(); ++i)
    if (psd.freqs[i] >= f_lo && psd.freqs[i] <= f_hi && psd.powers[i] > 0.0) {
      lx.push_back(std::log10(psd.freqs[i]));
      ly.push_back(std::log10(psd.powers[i]));
    }
  const double n = double(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  return sxy / sxx;
}

// Mean Welch PSD over n_draws independently phased syntheses of one spectrum.
sp::Spectrum mean_welch_psd(const sp::SpectralParams& params,
                            const sp::SignalConfig& config, std::size_t n_draws,
                            std::size_t segment_len) {
  const sp::Spectrum model = sp::gen_power_spectrum(params, 0.5);
  sp::Spectrum acc;
  for (std::size_t i = 0; i < n_draws; ++i) {
    auto stream = sp::derive_stream(config.seed, i);
    const auto x = sp::spectrum_to_timeseries(model, config, stream);
    const sp::Spectrum psd = sp::welch_psd(x, config.fs, segment_len, 0.5);
    if (i == 0) {
      acc = psd;
    } else {
      for (std::size_t k = 0; k < acc.powers.size(); ++k)
        acc.powers[k] += psd.powers[k];
    }
  }
  for (double& p : acc.powers) p /= double(n_draws);
  return acc;
}

bool criterion1() {
  const auto start = Clock::now();
  constexpr double kSlopeTol = 0.05;  // log-log slope error over [2, 50] Hz
  constexpr std::size_t kDraws = 100;
  constexpr std::size_t kSegment = 200;  // 1 Hz Welch bins

  sp::SignalConfig config;
  config.seed = 501;
  std::string detail = "slopes";
  bool ok = true;
  for (const double beta : {1.0, 1.5, 2.0}) {
    sp::SpectralParams params;
    params.beta = beta;
    params.peaks.clear();
    const sp::Spectrum psd = mean_welch_psd(params, config, kDraws, kSegment);
    const double slope = loglog_slope(psd, 2.0, 50.0);
    ok = ok && std::fabs(slope + beta) <= kSlopeTol;
    detail += " " + fmt(slope);
  }

  sp::SpectralParams peaked;  // tall narrow peak on the default background
  peaked.peaks = {sp::Peak{10.0, 3.0, 2.0}};
  const sp::Spectrum psd = mean_welch_psd(peaked, config, kDraws, kSegment);
  double best_f = 0.0, best_p = -1.0;
  for (std::size_t i = 0; i < psd.freqs.size(); ++i)
    if (psd.freqs[i] >= 2.0 && psd.freqs[i] <= 50.0 && psd.powers[i] > best_p) {
      best_p = psd.powers[i];
      best_f = psd.freqs[i];
    }
  const double bin_width = config.fs / double(kSegment);
  ok = ok && std::fabs(best_f - 10.0) <= bin_width;
  detail += ", peak at " + fmt(best_f) + " Hz";
  return report(1, ok, detail, seconds_since(start), 10.0);
}

double sweep_r2(const sp::SweepSpec& spec) {
  auto [epochs, theta] = sp::sweep(spec);
  const sp::EmbeddingSet emb = sp::embed_logpsd(epochs, sp::WelchParams{});
  return sp::linear_decodability(emb, theta, spec.param_name, sp::DecodeConfig{})
      .r2_pooled;
}

bool criterion2() {
  const auto start = Clock::now();
  constexpr double kMinR2 = 0.99;

  sp::SweepSpec beta_sweep;  // defaults: beta over [1, 2], N=1000
  beta_sweep.config.seed = 601;
  const double r2_beta = sweep_r2(beta_sweep);

  sp::SweepSpec offset_sweep;
  offset_sweep.param_name = "ap_offset";
  offset_sweep.theta_min = 0.1;
  offset_sweep.theta_max = 3.0;
  offset_sweep.config.seed = 602;
  const double r2_offset = sweep_r2(offset_sweep);

  const bool ok = r2_beta >= kMinR2 && r2_offset >= kMinR2;
  return report(2, ok,
                "log-PSD ridge R2 beta=" + fmt(r2_beta) +
                    " ap_offset=" + fmt(r2_offset),
                seconds_since(start), 30.0);
}

// Shared fixture for criteria 3 and 4: one autoencoder trained on a randomized
// synthetic corpus, then decoded against held-out sweeps. The narrow hidden
// layer biases the model toward coarse spectral structure, which is the
// behavior under test.
struct SharedAeFixture {
  sp::MaskedAEModel model;
  double train_seconds = 0.0;

  SharedAeFixture() {
    const auto start = Clock::now();
    sp::RandomCorpusConfig corpus_cfg;
    corpus_cfg.n_epochs = 8000;
    corpus_cfg.signal.seed = 1001;
    const sp::EpochSet corpus = sp::make_randomized_corpus(corpus_cfg);

    sp::MaskConfig mask;
    mask.seed = 13;
    sp::AEArch arch;
    arch.hidden = 64;
    arch.d_latent = 32;
    sp::TrainConfig train;
    train.epochs = 20;
    train.batch = 16;
    train.lr = 3e-3;
    train.seed = 12;
    train.normalize = sp::Normalize::per_signal;
    model = sp::train_masked_ae(corpus, mask, arch, train);
    train_seconds = seconds_since(start);
  }

  double r2(const sp::SweepSpec& spec) const {
    auto [epochs, theta] = sp::sweep(spec);
    const sp::EmbeddingSet emb = sp::embed_ae(model, epochs);
    return sp::linear_decodability(emb, theta, spec.param_name,
                                   sp::DecodeConfig{})
        .r2_pooled;
  }
};

sp::SweepSpec held_out_sweep(const std::string& name, double lo, double hi,
                             std::uint64_t seed) {
  sp::SweepSpec spec;
  spec.param_name = name;
  spec.theta_min = lo;
  spec.theta_max = hi;
  spec.base.compose = sp::ComposeMode::logpower;
  spec.config.seed = seed;
  return spec;
}

bool criterion3(const SharedAeFixture& fx) {
  const auto start = Clock::now();
  constexpr double kMinGap = 0.2;
  const double r2_beta = fx.r2(held_out_sweep("beta", 1.0, 2.0, 2001));
  const double r2_fosc = fx.r2(held_out_sweep("f_osc", 1.0, 60.0, 2002));
  const bool ok = r2_beta >= r2_fosc + kMinGap;
  return report(3, ok,
                "AE R2 beta=" + fmt(r2_beta) + " f_osc=" + fmt(r2_fosc) +
                    " gap=" + fmt(r2_beta - r2_fosc),
                fx.train_seconds + seconds_since(start), 300.0);
}

// Spearman rank correlation; inputs here have no ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j)
        if (v[j] < v[i]) r[i] += 1.0;
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = double(a.size());
  const double mean = (n - 1.0) / 2.0;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  return num / std::sqrt(da * db);
}

bool criterion4(const SharedAeFixture& fx) {
  const auto start = Clock::now();
  constexpr double kMinDrop = 0.15;  // R2 at 10 Hz minus R2 at 50 Hz

  std::vector<double> freqs = {10.0, 20.0, 30.0, 40.0, 50.0};
  std::vector<double> r2s;
  std::string detail = "AE R2(a_osc)";
  for (const double f : freqs) {
    sp::SweepSpec spec =
        held_out_sweep("a_osc", 0.1, 3.0, 3000 + std::uint64_t(f));
    spec.base.peaks = {sp::Peak{f, 1.0, 2.0}};
    r2s.push_back(fx.r2(spec));
    detail += " " + fmt(r2s.back());
  }
  const double rho = spearman(r2s, freqs);
  const double drop = r2s.front() - r2s.back();
  detail += " spearman=" + fmt(rho) + " drop=" + fmt(drop);
  const bool ok = rho < 0.0 && drop >= kMinDrop;
  return report(4, ok, detail, seconds_since(start), 600.0);
}

bool criterion5() {
  const auto start = Clock::now();
  constexpr double kMinGap = 0.2;

  sp::RandomCorpusConfig pretrain_cfg;
  pretrain_cfg.n_epochs = 8000;
  pretrain_cfg.signal.seed = 1001;
  const sp::EpochSet pretrain = sp::make_randomized_corpus(pretrain_cfg);

  sp::MaskConfig mask;
  mask.seed = 13;
  sp::TrainConfig train;  // default arch: 1000 -> 256 -> 32
  train.epochs = 20;
  train.batch = 32;
  train.lr = 3e-3;
  train.seed = 12;
  train.normalize = sp::Normalize::global;
  const sp::MaskedAEModel model =
      sp::train_masked_ae(pretrain, mask, sp::AEArch{}, train);

  sp::CorpusConfig corpus_cfg;
  corpus_cfg.signal.seed = 1008;
  const sp::Corpus corpus = sp::make_subject_task_corpus(corpus_cfg);
  const sp::EmbeddingSet emb = sp::embed_ae(model, corpus.epochs);

  sp::ProbeTrainConfig probe;  // 31 epochs, batch 64, lr by holdout, 5 seeds
  probe.standardize = true;
  const sp::BatteryReport battery = sp::subject_task_battery(
      emb, corpus.subject_labels, corpus.task_labels, corpus.split, probe);

  const bool ok = battery.kappa_gap >= kMinGap;
  return report(5, ok,
                "kappa subject=" + fmt(battery.subject.kappa_mean) +
                    " task=" + fmt(battery.task.kappa_mean) +
                    " gap=" + fmt(battery.kappa_gap),
                seconds_since(start), 300.0);
}

// Band integrals of the two default source spectra in closed form; the
// simulation check must land near these without sharing any grid code.
double integral_power_law(double amp_log10, double beta, double lo, double hi) {
  const double a = std::pow(10.0, amp_log10);
  if (std::fabs(beta - 1.0) < 1e-12) return a * std::log(hi / lo);
  return a * (std::pow(hi, 1.0 - beta) - std::pow(lo, 1.0 - beta)) /
         (1.0 - beta);
}

double integral_gaussian_peak(const sp::Peak& p, double lo, double hi) {
  const auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  return std::pow(10.0, p.a_osc) * p.width * std::sqrt(2.0 * M_PI) *
         (phi((hi - p.f_osc) / p.width) - phi((lo - p.f_osc) / p.width));
}

bool criterion6() {
  const auto start = Clock::now();
  constexpr double kMinRatio = 10.0;
  constexpr double kOracleRelTol = 0.10;
  constexpr double kMaxFrobenius = 0.05;

  const sp::ForwardSpec spec = sp::default_forward_spec();
  const sp::EpochSet epochs = sp::simulate(spec);
  const sp::CovarianceReport rep = sp::covariance_check(epochs, spec);
  const double tr_ratio = rep.trace_ap / rep.trace_osc;

  const auto& ap = spec.sources[0].params;
  const auto& osc = spec.sources[1].params;
  const double var_ap =
      integral_power_law(ap.ap_offset, ap.beta, ap.f_min, ap.f_max);
  const double var_osc =
      integral_gaussian_peak(osc.peaks.front(), osc.f_min, osc.f_max);
  const double oracle = (var_ap * spec.leadfield.col(0).squaredNorm()) /
                        (var_osc * spec.leadfield.col(1).squaredNorm());

  const double oracle_err = std::fabs(tr_ratio - oracle) / oracle;
  const std::size_t pooled = epochs.trials() * epochs.samples();
  const bool ok = tr_ratio > kMinRatio && oracle_err <= kOracleRelTol &&
                  rep.rel_frobenius_err < kMaxFrobenius && pooled >= 100000;
  return report(6, ok,
                "tr_ratio=" + fmt(tr_ratio) + " oracle=" + fmt(oracle) +
                    " rel_err=" + fmt(oracle_err) +
                    " frobenius=" + fmt(rep.rel_frobenius_err) + " at " +
                    std::to_string(pooled) + " timepoints",
                seconds_since(start), 60.0);
}

sp::Matrix stream_matrix(Eigen::Index rows, Eigen::Index cols,
                         std::uint64_t seed) {
  auto stream = sp::derive_stream(seed, 0);
  sp::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = 2.0 * stream.uniform() - 1.0;
  return m;
}

bool criterion7() {
  const auto start = Clock::now();
  bool ok = true;
  std::string detail;

  // Cohen's kappa on a hand-checkable confusion table.
  sp::Matrix confusion(2, 2);
  confusion << 40, 10, 20, 30;
  const double kappa = sp::kappa_from_confusion(confusion).kappa;
  ok = ok && std::fabs(kappa - 0.40) <= 1e-12;
  detail += "kappa=" + fmt(kappa);

  // Unit-square centroid layout: both cluster distances are exactly 1.
  sp::EmbeddingSet corners;
  corners.data.resize(4, 2);
  corners.data << 0, 0, 0, 1, 1, 0, 1, 1;
  corners.embedder_id = "oracle";
  sp::LabelSet subjects, tasks;
  subjects.kind = "subject";
  subjects.names = {"s1", "s2"};
  subjects.labels = {0, 0, 1, 1};
  tasks.kind = "task";
  tasks.names = {"t1", "t2"};
  tasks.labels = {0, 1, 0, 1};
  const sp::GeometryReport geom =
      sp::cluster_distances(sp::centroids(corners, subjects, tasks));
  ok = ok && std::fabs(geom.d_cs - 1.0) <= 1e-12 &&
       std::fabs(geom.d_ct - 1.0) <= 1e-12;
  detail += " d_cs=" + fmt(geom.d_cs) + " d_ct=" + fmt(geom.d_ct);

  // SVD ridge path against an LDLT normal-equations solve.
  const sp::Matrix x = stream_matrix(60, 8, 701);
  const sp::Vector y = stream_matrix(60, 1, 702).col(0);
  const double lambda = 0.5;
  const sp::RidgeModel model = sp::ridge_fit(x, y, lambda);
  const sp::Vector xm = x.colwise().mean();
  const sp::Matrix xc = x.rowwise() - xm.transpose();
  const sp::Vector yc = y.array() - y.mean();
  const sp::Matrix gram =
      xc.transpose() * xc + lambda * sp::Matrix::Identity(8, 8);
  const sp::Vector w_ne = gram.ldlt().solve(xc.transpose() * yc);
  const double ridge_err = (model.weights - w_ne).cwiseAbs().maxCoeff();
  ok = ok && ridge_err <= 1e-10;
  detail += " ridge_err=" + fmt(ridge_err);

  // Analytic autoencoder gradient against central finite differences.
  sp::AEArch arch;
  arch.hidden = 8;
  arch.d_latent = 6;
  auto ae = sp::init_masked_ae(20, arch, 3, sp::Normalize::none);
  const sp::Matrix ax = stream_matrix(3, 20, 703);
  sp::Matrix mask = sp::Matrix::Ones(3, 20);
  for (Eigen::Index r = 0; r < 3; ++r)
    mask.row(r).segment(5 * (r % 3), 5).setZero();
  const auto grads = sp::ae_loss_and_grad(ae, ax, mask);
  std::vector<sp::Matrix*> tensors = {&ae.w1, &ae.b1, &ae.w2, &ae.b2,
                                      &ae.w3, &ae.b3, &ae.w4, &ae.b4};
  double grad_err = 0.0;
  const double eps = 1e-4;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    sp::Matrix& w = *tensors[t];
    for (int k = 0; k < 5; ++k) {
      const Eigen::Index i = (k * 7) % w.rows();
      const Eigen::Index j = (k * 13) % w.cols();
      const double keep = w(i, j);
      w(i, j) = keep + eps;
      const double up = sp::ae_masked_loss(ae, ax, mask);
      w(i, j) = keep - eps;
      const double down = sp::ae_masked_loss(ae, ax, mask);
      w(i, j) = keep;
      const double fd = (up - down) / (2.0 * eps);
      const double an = grads.tensors[t](i, j);
      grad_err = std::max(
          grad_err,
          std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-6}));
    }
  }
  ok = ok && grad_err <= 1e-3;
  detail += " ae_grad_err=" + fmt(grad_err);

  return report(7, ok, detail, seconds_since(start), 5.0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

bool criterion8() {
  const auto start = Clock::now();
  const fs::path root = fs::temp_directory_path() / "specprobe_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  const fs::path cfg_a = root / "recipe_a.json";
  write_text(cfg_a,
             R"({"pipeline": "sweep_embed_decode",
                 "sweep": {"param_name": "beta", "theta_min": 1.0,
                           "theta_max": 2.0, "n_samples": 80},
                 "embedder": "logpsd"})");
  const fs::path cfg_b = root / "recipe_b.json";
  write_text(cfg_b,
             R"({"pipeline": "corpus_battery_geometry",
                 "corpus": {"trials_per_cell": 20},
                 "arch": {"hidden": 64, "d_latent": 16},
                 "train": {"epochs": 4, "batch": 16, "lr": 0.003},
                 "probe": {"n_seeds": 2, "epochs": 10}})");

  bool ok = true;
  std::string detail = "byte-identical reports:";
  const auto run_pair = [&](const fs::path& cfg, const char* seed,
                            const std::vector<std::string>& reports) {
    const fs::path d1 = root / (cfg.stem().string() + "_run1");
    const fs::path d2 = root / (cfg.stem().string() + "_run2");
    for (const auto& d : {d1, d2}) {
      const int rc = sp::cli_run({"recipe", "--config", cfg.string(), "--seed",
                                  seed, "--out-dir", d.string()});
      ok = ok && rc == 0;
    }
    for (const auto& name : reports) {
      const std::string b1 = slurp(d1 / name), b2 = slurp(d2 / name);
      const bool same = !b1.empty() && b1 == b2;
      ok = ok && same;
      detail += " " + name + (same ? "=yes" : "=NO");
    }
  };
  run_pair(cfg_a, "17", {"decode_report.json"});
  run_pair(cfg_b, "11",
           {"battery_report.json", "geometry_report.json", "pca2d.csv"});
  return report(8, ok, detail, seconds_since(start), 120.0);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  std::fflush(stdout);
  bool all = true;
  all &= criterion1();
  all &= criterion2();
  {
    const SharedAeFixture fx;  // one trained model shared by criteria 3 and 4
    all &= criterion3(fx);
    all &= criterion4(fx);
  }
  all &= criterion5();
  all &= criterion6();
  all &= criterion7();
  all &= criterion8();
  std::printf("%s\n", all ? "ALL CRITERIA PASSED" : "ACCEPTANCE FAILED");
  return all ? 0 : 1;
}
