#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/helpers.hpp"
#include "specprobe/masked_ae.hpp"
#include "specprobe/rng.hpp"

namespace sp = specprobe;

namespace {

sp::Matrix random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  auto rng = sp::rng_stream(seed);
  sp::Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal();
  return x;
}

// Patch-aligned 0/1 visibility mask with a fixed patch pattern per row.
sp::Matrix patch_mask(Eigen::Index n, Eigen::Index l, Eigen::Index patch,
                      std::uint64_t seed) {
  auto rng = sp::rng_stream(seed);
  sp::Matrix m = sp::Matrix::Ones(n, l);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index p = 0; p < l / patch; ++p)
      if (rng.uniform() < 0.5) m.row(i).segment(p * patch, patch).setZero();
  return m;
}

sp::EpochSet wrap_epochs(const sp::Matrix& x) {
  sp::EpochSet e;
  e.data = x;
  e.meta.resize(std::size_t(x.rows()));
  return e;
}

// Rank-one toy family: every signal is a positive multiple of one template,
// so masked patches are exactly predictable from the visible ones.
sp::EpochSet rank_one_toyset(std::size_t n, std::size_t l, std::uint64_t seed) {
  auto rng = sp::rng_stream(seed);
  sp::Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 0.5 + rng.uniform();
    for (std::size_t j = 0; j < l; ++j)
      x(Eigen::Index(i), Eigen::Index(j)) =
          a * (1.0 + 0.5 * std::sin(2.0 * M_PI * double(j) / double(l)));
  }
  return wrap_epochs(x);
}

}  // namespace

TEST(MaskedAeGradients, AnalyticGradientMatchesCentralDifferences) {
  const Eigen::Index l = 20;
  sp::AEArch arch;
  arch.hidden = 8;
  arch.d_latent = 6;
  auto model = sp::init_masked_ae(std::size_t(l), arch, 3, sp::Normalize::none);
  const auto x = random_matrix(3, l, 4);
  const auto mask = patch_mask(3, l, 5, 5);

  const auto analytic = sp::ae_loss_and_grad(model, x, mask);
  std::vector<sp::Matrix*> tensors = {&model.w1, &model.b1, &model.w2, &model.b2,
                                      &model.w3, &model.b3, &model.w4, &model.b4};
  const double eps = 1e-4;
  double max_rel = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    sp::Matrix& w = *tensors[t];
    // A spread of entries per tensor keeps the check cheap but representative.
    for (int k = 0; k < 5; ++k) {
      const Eigen::Index i = (k * 7) % w.rows();
      const Eigen::Index j = (k * 13) % w.cols();
      const double keep = w(i, j);
      w(i, j) = keep + eps;
      const double up = sp::ae_masked_loss(model, x, mask);
      w(i, j) = keep - eps;
      const double down = sp::ae_masked_loss(model, x, mask);
      w(i, j) = keep;
      const double fd = (up - down) / (2.0 * eps);
      const double an = analytic.tensors[t](i, j);
      max_rel = std::max(max_rel,
                         std::fabs(an - fd) /
                             std::max({std::fabs(an), std::fabs(fd), 1e-6}));
    }
  }
  EXPECT_LT(max_rel, 1e-3);
}

TEST(MaskedAeGradients, AllVisibleMaskGivesZeroLossAndZeroGradient) {
  sp::AEArch arch;
  arch.hidden = 8;
  arch.d_latent = 4;
  const auto model = sp::init_masked_ae(20, arch, 6, sp::Normalize::none);
  const auto x = random_matrix(3, 20, 7);
  const sp::Matrix mask = sp::Matrix::Ones(3, 20);

  EXPECT_DOUBLE_EQ(sp::ae_masked_loss(model, x, mask), 0.0);
  const auto grads = sp::ae_loss_and_grad(model, x, mask);
  EXPECT_DOUBLE_EQ(grads.loss, 0.0);
  for (const auto& g : grads.tensors) EXPECT_DOUBLE_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MaskedAeGradients, LossIsLocalToMaskedEntries) {
  sp::AEArch arch;
  arch.hidden = 8;
  arch.d_latent = 4;
  // Zero weights cut the encoder path, isolating the loss bookkeeping.
  auto model = sp::init_masked_ae(20, arch, 8, sp::Normalize::none);
  model.w1.setZero();
  model.w2.setZero();
  model.w3.setZero();
  model.w4.setZero();

  sp::Matrix x = random_matrix(2, 20, 9);
  sp::Matrix mask = sp::Matrix::Ones(2, 20);
  mask.row(0).segment(0, 5).setZero();  // row 0: first patch masked

  const double base = sp::ae_masked_loss(model, x, mask);

  sp::Matrix x_vis = x;
  x_vis(0, 10) += 3.0;  // visible entry: target never includes it
  EXPECT_DOUBLE_EQ(sp::ae_masked_loss(model, x_vis, mask), base);

  sp::Matrix x_hid = x;
  x_hid(0, 2) += 3.0;  // masked entry: enters the objective
  EXPECT_NE(sp::ae_masked_loss(model, x_hid, mask), base);

  // Decoder bias at an always-visible column never reaches the loss.
  auto perturbed = model;
  perturbed.b4(0, 10) += 5.0;
  EXPECT_DOUBLE_EQ(sp::ae_masked_loss(perturbed, x, mask), base);
}

TEST(MaskedAeMasks, PatchDrawsAreBlockAlignedWithTheRequestedCount) {
  sp::MaskConfig cfg;
  cfg.patch_len = 50;
  cfg.mask_frac = 0.5;
  auto stream = sp::derive_stream(11, 1);
  Eigen::RowVectorXd row(1000);
  sp::ae_detail::draw_mask_row(row, cfg, stream);

  std::size_t masked_patches = 0;
  for (Eigen::Index p = 0; p < 20; ++p) {
    const double first = row[p * 50];
    EXPECT_TRUE(first == 0.0 || first == 1.0);
    for (Eigen::Index j = 0; j < 50; ++j)
      EXPECT_EQ(row[p * 50 + j], first);  // constant within a patch
    masked_patches += (first == 0.0);
  }
  EXPECT_EQ(masked_patches, 10u);
}

TEST(MaskedAeTraining, OverfitsALowRankToySet) {
  const auto epochs = rank_one_toyset(60, 20, 12);
  sp::MaskConfig mask;
  mask.patch_len = 5;
  mask.mask_frac = 0.5;
  sp::AEArch arch;
  arch.hidden = 32;
  arch.d_latent = 24;  // identity-capable: h, d >= L
  sp::TrainConfig train;
  train.epochs = 200;
  train.batch = 6;
  train.lr = 1e-2;
  train.normalize = sp::Normalize::none;

  const auto model = sp::train_masked_ae(epochs, mask, arch, train);

  const double mean = epochs.data.mean();
  const double baseline = (epochs.data.array() - mean).square().mean();
  EXPECT_LT(model.train_log.back(), 0.1 * baseline);
  EXPECT_LT(model.train_log.back(), model.train_log.front());
}

TEST(MaskedAeTraining, SameSeedsReproduceWeightsBitForBit) {
  const auto epochs = rank_one_toyset(60, 20, 13);
  sp::MaskConfig mask;
  mask.patch_len = 5;
  sp::AEArch arch;
  arch.hidden = 16;
  arch.d_latent = 8;
  sp::TrainConfig train;
  train.epochs = 5;
  train.batch = 6;

  const auto a = sp::train_masked_ae(epochs, mask, arch, train);
  const auto b = sp::train_masked_ae(epochs, mask, arch, train);
  EXPECT_TRUE(a.w1 == b.w1);
  EXPECT_TRUE(a.w4 == b.w4);
  EXPECT_EQ(a.train_log, b.train_log);
  EXPECT_EQ(a.config_digest, b.config_digest);

  auto other = train;
  other.seed = 99;
  const auto c = sp::train_masked_ae(epochs, mask, arch, other);
  EXPECT_FALSE(a.w1 == c.w1);
  EXPECT_NE(a.config_digest, c.config_digest);
}

TEST(MaskedAeTraining, DivergenceAbortsWithTheStepIndex) {
  const auto epochs = rank_one_toyset(60, 20, 14);
  sp::MaskConfig mask;
  mask.patch_len = 5;
  sp::AEArch arch;
  arch.hidden = 16;
  arch.d_latent = 8;
  sp::TrainConfig train;
  train.epochs = 2;
  train.batch = 6;
  train.lr = 1e160;  // guarantees overflow within the first few steps

  try {
    sp::train_masked_ae(epochs, mask, arch, train);
    FAIL() << "training should have diverged";
  } catch (const sp::training_error& e) {
    EXPECT_GE(e.step, 1);
  }
}

TEST(MaskedAeTraining, RejectsIllFormedRequests) {
  const auto epochs = rank_one_toyset(60, 20, 15);
  sp::MaskConfig mask;
  mask.patch_len = 5;
  sp::AEArch arch;
  sp::TrainConfig train;
  train.batch = 6;

  sp::MaskConfig bad_patch = mask;
  bad_patch.patch_len = 7;  // does not divide 20
  EXPECT_THROW(sp::train_masked_ae(epochs, bad_patch, arch, train),
               sp::config_error);

  sp::MaskConfig bad_frac = mask;
  bad_frac.mask_frac = 1.0;
  EXPECT_THROW(sp::train_masked_ae(epochs, bad_frac, arch, train),
               sp::config_error);

  sp::TrainConfig starved = train;
  starved.batch = 7;  // 60 rows < 10 * 7
  EXPECT_THROW(sp::train_masked_ae(epochs, mask, arch, starved),
               sp::validation_error);

  auto multi = epochs;
  multi.channels = 2;
  EXPECT_THROW(sp::train_masked_ae(multi, mask, arch, train),
               sp::validation_error);

  auto poisoned = epochs;
  poisoned.data(0, 0) = std::nan("");
  EXPECT_THROW(sp::train_masked_ae(poisoned, mask, arch, train),
               sp::validation_error);
}

TEST(MaskedAeEmbedding, ZeroWeightEncoderYieldsZeroEmbeddings) {
  sp::AEArch arch;
  arch.hidden = 8;
  arch.d_latent = 4;
  auto model = sp::init_masked_ae(20, arch, 16, sp::Normalize::none);
  model.w1.setZero();
  model.w2.setZero();

  const auto epochs = rank_one_toyset(5, 20, 17);
  const auto emb = sp::embed_ae(model, epochs);
  ASSERT_EQ(emb.rows(), 5u);
  ASSERT_EQ(emb.dim(), 4u);
  EXPECT_DOUBLE_EQ(emb.data.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(emb.embedder_id, "masked_ae");
}

TEST(MaskedAeEmbedding, DeterministicAndShapeChecked) {
  const auto epochs = rank_one_toyset(60, 20, 18);
  sp::MaskConfig mask;
  mask.patch_len = 5;
  sp::AEArch arch;
  arch.hidden = 16;
  arch.d_latent = 8;
  sp::TrainConfig train;
  train.epochs = 5;
  train.batch = 6;
  const auto model = sp::train_masked_ae(epochs, mask, arch, train);

  const auto a = sp::embed_ae(model, epochs);
  const auto b = sp::embed_ae(model, epochs);
  EXPECT_TRUE(a.data == b.data);
  EXPECT_EQ(a.config_digest, model.config_digest);

  auto wrong_len = rank_one_toyset(5, 40, 19);
  EXPECT_THROW(sp::embed_ae(model, wrong_len), sp::validation_error);
}

TEST(MaskedAeEmbedding, PerSignalZScoringMakesEmbeddingsScaleInvariant) {
  const auto epochs = rank_one_toyset(60, 20, 20);
  sp::MaskConfig mask;
  mask.patch_len = 5;
  sp::AEArch arch;
  arch.hidden = 16;
  arch.d_latent = 8;
  sp::TrainConfig train;
  train.epochs = 5;
  train.batch = 6;
  train.normalize = sp::Normalize::per_signal;
  const auto model = sp::train_masked_ae(epochs, mask, arch, train);

  sp::EpochSet pair;
  pair.data.resize(2, 20);
  pair.data.row(0) = epochs.data.row(0);
  pair.data.row(1) = 5.0 * epochs.data.row(0).array() + 3.0;
  pair.meta.resize(2);
  const auto emb = sp::embed_ae(model, pair);
  for (Eigen::Index j = 0; j < emb.data.cols(); ++j)
    EXPECT_NEAR(emb.data(0, j), emb.data(1, j), 1e-12);
}

// Global mode learns one corpus-wide shift/scale pair at training time and
// must keep relative amplitude differences visible at embedding time.
TEST(MaskedAeEmbedding, GlobalModeAppliesTheStoredCorpusTransform) {
  const auto epochs = rank_one_toyset(60, 20, 21);
  sp::MaskConfig mask;
  mask.patch_len = 5;
  sp::AEArch arch;
  arch.hidden = 16;
  arch.d_latent = 8;
  sp::TrainConfig train;
  train.epochs = 5;
  train.batch = 6;
  train.normalize = sp::Normalize::global;
  const auto model = sp::train_masked_ae(epochs, mask, arch, train);

  const double mu = epochs.data.mean();
  const double sd = std::sqrt((epochs.data.array() - mu).square().mean());
  EXPECT_NEAR(model.input_shift, mu, 1e-12);
  EXPECT_NEAR(model.input_scale, sd, 1e-12);

  // A loud copy of a quiet epoch must land elsewhere in latent space.
  sp::EpochSet pair;
  pair.data.resize(2, 20);
  pair.data.row(0) = epochs.data.row(0);
  pair.data.row(1) = 5.0 * epochs.data.row(0);
  pair.meta.resize(2);
  const auto emb = sp::embed_ae(model, pair);
  EXPECT_GT((emb.data.row(0) - emb.data.row(1)).norm(), 1e-6);

  // Embedding equals running the encoder on hand-scaled input.
  sp::EpochSet scaled = pair;
  scaled.data = (pair.data.array() - mu) / sd;
  auto raw_model = model;
  raw_model.normalize = sp::Normalize::none;
  const auto direct = sp::embed_ae(raw_model, scaled);
  EXPECT_TRUE(emb.data == direct.data);
}
