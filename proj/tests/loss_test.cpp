#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "dcl/loss.hpp"
#include "oracles.hpp"

namespace dcl {
namespace {

AngleCodeTable bcl(double omega = 1) {
  CodingConfig c;
  c.omega = omega;
  return AngleCodeTable(c);
}

WeightConfig mode(WeightMode m) {
  WeightConfig w;
  w.mode = m;
  return w;
}

TEST(AngleDistanceWeight, Examples) {
  EXPECT_EQ(angle_distance_weight(10, 10), 0.0);
  EXPECT_NEAR(angle_distance_weight(-90, 89), std::log(180.0), 1e-12);
  EXPECT_NEAR(angle_distance_weight(0, std::numbers::e - 1), 1.0, 1e-12);
  EXPECT_THROW(angle_distance_weight(std::nan(""), 0), InvalidInput);
}

TEST(AngleDistanceWeight, NotPeriodic) {
  EXPECT_GT(angle_distance_weight(-90, 89), 5.0);
  EXPECT_NEAR(angular_distance(-90, 89), 1.0, 1e-12);
}

TEST(AdarswWeight, Examples) {
  const WeightConfig w;
  EXPECT_EQ(adarsw_weight(30, 30, 4, 1, w), 0.0);
  EXPECT_NEAR(adarsw_weight(70.6, -19.7, 1.02, 1, w), std::abs(std::sin(180.6 * oracle::kPi / 180)), 1e-12);
  EXPECT_NEAR(adarsw_weight(70.6, -19.7, 1.02, 1, w), 0.01047, 1e-5);
  for (double eps : {1e-1, 1e-3, 1e-6}) {
    EXPECT_NEAR(adarsw_weight(-90 + eps, 90 - eps, 6, 1, w), std::sin(2 * eps * oracle::kPi / 180), 1e-12);
  }
  EXPECT_THROW(adarsw_weight(0, 1, 1, 2, w), InvalidInput);
  EXPECT_THROW(adarsw_weight(0, 1, 1, 0, w), InvalidInput);
}

TEST(AdarswWeight, RangeAndPeriod) {
  const WeightConfig w;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-90, 90), asp(1, 8);
  for (int i = 0; i < 2000; ++i) {
    const double g = ang(rng), p = ang(rng), a = asp(rng);
    const double v = adarsw_weight(g, p, a, 1, w);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    const double period = 180.0 / adarsw_alpha(a, 1, w);
    EXPECT_NEAR(v, adarsw_weight(g, p - period, a, 1, w), 1e-12);
  }
}

TEST(AdarswWeight, QuarterTurnVanishesForSquareLike) {
  const WeightConfig w;
  EXPECT_NEAR(adarsw_weight(45, -45, 1.2, 1, w), 0.0, 1e-12);
  EXPECT_NEAR(adarsw_weight(45, -45, 3, 1, w), 1.0, 1e-12);
}

TEST(AdarswWeight, StepInAspect) {
  const WeightConfig w;
  const double below = adarsw_weight(10, 40, 1.5, 1, w);
  const double above = adarsw_weight(10, 40, 1.5 + 1e-9, 1, w);
  for (double a = 1.0; a <= 1.5; a += 0.05) EXPECT_EQ(adarsw_weight(10, 40, a, 1, w), below);
  for (double a = 1.51; a <= 8; a += 0.25) EXPECT_EQ(adarsw_weight(10, 40, a, 1, w), above);
  EXPECT_NE(below, above);
}

TEST(WeightConfig, Validation) {
  WeightConfig w;
  w.aspect_threshold = 1.0;
  EXPECT_THROW(w.validate(), InvalidConfig);
  EXPECT_EQ(parse_weight_mode("adarsw"), WeightMode::Adarsw);
  EXPECT_THROW(parse_weight_mode("cosine"), InvalidConfig);
}

TEST(BinaryFocalLoss, Examples) {
  const FocalParams fp;
  const std::vector<double> z{0, 0, 40};
  const auto l = binary_focal_loss(std::vector<double>{1, 0, 1}, z, fp);
  EXPECT_NEAR(l[0], 0.25 * 0.25 * std::log(2.0), 1e-12);
  EXPECT_NEAR(l[0], 0.04332, 1e-5);
  EXPECT_NEAR(l[1], 0.12996, 1e-5);
  EXPECT_NEAR(l[2], 0.0, 1e-12);
  EXPECT_THROW(binary_focal_loss(std::vector<double>{1}, z, fp), InvalidInput);
}

TEST(BinaryFocalLoss, MatchesOracleForSoftTargets) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> t(0, 1), z(-4, 4);
  const FocalParams fp;
  for (int i = 0; i < 1000; ++i) {
    const double tt = t(rng), zz = z(rng);
    const double want = oracle::focal_term(tt, zz, fp.alpha, fp.gamma);
    EXPECT_NEAR(binary_focal_loss(std::vector<double>{tt}, std::vector<double>{zz}, fp)[0], want, 1e-12 + 1e-10 * want);
  }
}

TEST(DclLoss, PerfectBitsGiveNearZero) {
  const auto t = bcl();
  const auto z = saturated_logits(encode_angle(45, t), 30);
  EXPECT_LT(dcl_loss(45, z, t, mode(WeightMode::None), LossConfig{}, 4, 1), 1e-20);
  for (double g : dcl_loss_grad(45, z, t, mode(WeightMode::None), LossConfig{}, 4, 1)) EXPECT_NEAR(g, 0.0, 1e-10);
}

TEST(DclLoss, WeightNoneIsFocalSum) {
  const auto t = bcl();
  const std::vector<double> z{0.3, -1, 2, 0, 0.5, -0.2, 1, -3};
  double sum = 0;
  const auto target = encode_angle(-30, t);
  for (std::size_t i = 0; i < z.size(); ++i) sum += oracle::focal_term(target[i], z[i], 0.25, 2);
  EXPECT_NEAR(dcl_loss(-30, z, t, mode(WeightMode::None), LossConfig{}, 4, 1), sum, 1e-12);
  LossConfig mean;
  mean.bit_reduction = BitReduction::Mean;
  EXPECT_NEAR(dcl_loss(-30, z, t, mode(WeightMode::None), mean, 4, 1), sum / 8, 1e-12);
}

TEST(DclLoss, AdjacentPredictionIsSmallUnderAdarsw) {
  const auto t = bcl();
  const WeightConfig w;
  for (double pred : {44.0, 46.0}) {
    const auto z = saturated_logits(encode_angle(pred, t), 4);
    double fl = 0;
    const auto target = encode_angle(45, t);
    for (std::size_t i = 0; i < z.size(); ++i) fl += oracle::focal_term(target[i], z[i], 0.25, 2);
    EXPECT_LE(dcl_loss(45, z, t, w, LossConfig{}, 4, 1), fl * std::sin(1.5 * oracle::kPi / 180) + 1e-12);
  }
}

TEST(DclLoss, LengthMismatch) {
  EXPECT_THROW(dcl_loss(0, std::vector<double>(7, 0.0), bcl(), WeightConfig{}, LossConfig{}, 4, 1), InvalidInput);
}

// Finite differences of the oracle focal sum, scaled by the library weight at
// the base logits (the weight is a constant of the loss).
TEST(DclLossGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(-90, 90), lz(-4, 4), asp(1, 8);
  const LossConfig lc;
  const double h = 1e-5;
  double worst = 0;
  int n = 0;
  for (auto m : {WeightMode::None, WeightMode::LogDistance, WeightMode::Adarsw}) {
    for (auto s : {CodingScheme::BCL, CodingScheme::GCL, CodingScheme::CSL}) {
      CodingConfig cc;
      cc.scheme = s;
      cc.omega = s == CodingScheme::CSL ? 6 : 180.0 / 64;
      const AngleCodeTable t(cc);
      const auto w = mode(m);
      for (int k = 0; k < 112; ++k, ++n) {
        double theta = -ang(rng);
        if (theta <= -90) theta = 90;
        const double a = asp(rng);
        std::vector<double> z(static_cast<std::size_t>(t.code_length()));
        for (double& v : z) v = lz(rng);
        const double weight = dcl_loss_weight(theta, z, t, w, a, 1);
        const auto target = encode_angle(theta, t);
        const auto g = dcl_loss_grad(theta, z, t, w, lc, a, 1);
        for (std::size_t i = 0; i < z.size(); ++i) {
          const double fd = weight *
                            (oracle::focal_term(target[i], z[i] + h, 0.25, 2) -
                             oracle::focal_term(target[i], z[i] - h, 0.25, 2)) /
                            (2 * h);
          worst = std::max(worst, std::abs(g[i] - fd) / (std::max(std::abs(g[i]), std::abs(fd)) + 1e-10));
        }
      }
    }
  }
  EXPECT_GE(n, 1000);
  EXPECT_LT(worst, 1e-4);
}

TEST(DclLossGrad, CrossEntropyLimit) {
  LossConfig lc;
  lc.angle_focal = {0.5, 0.0};
  const auto t = bcl();
  const std::vector<double> z{0.3, -1, 2, 0, 0.5, -0.2, 1, -3};
  const auto target = encode_angle(12, t);
  const auto g = dcl_loss_grad(12, z, t, mode(WeightMode::None), lc, 4, 1);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(g[i], 0.5 * (sigmoid(z[i]) - target[i]), 1e-12);
}

TEST(BoxOffsets, Examples) {
  const RotatedBoxLongSide anchor{0, 0, 4, 2, 0};
  const auto t = box_offsets({1, 2, 8, 2, 0}, anchor);
  EXPECT_NEAR(t.tx, 0.5, 1e-15);
  EXPECT_NEAR(t.ty, 0.5, 1e-15);
  EXPECT_NEAR(t.tw, 0.0, 1e-15);
  EXPECT_NEAR(t.th, std::log(2.0), 1e-15);
  EXPECT_EQ(box_offsets(anchor, anchor), BoxOffsets{});
  EXPECT_NEAR(box_offsets({0, 0, 4, 2 * std::numbers::e, 0}, anchor).tw, 1.0, 1e-15);
  EXPECT_THROW(box_offsets({0, 0, 4, 0, 0}, anchor), InvalidInput);
  EXPECT_THROW(box_offsets(anchor, {0, 0, 4, 0, 0}), InvalidInput);
}

TEST(BoxOffsets, DecodeInverse) {
  const RotatedBoxLongSide anchor{3, -1, 10, 5, 20};
  const auto a = decode_box_offsets({}, anchor);
  EXPECT_EQ(a.x, anchor.x);
  EXPECT_EQ(a.h, anchor.h);
  EXPECT_NEAR(decode_box_offsets({0, 0, std::log(2.0), 0}, anchor).w, 10.0, 1e-12);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 1000; ++i) {
    const BoxOffsets t{u(rng), u(rng), u(rng), u(rng)};
    const auto back = box_offsets(decode_box_offsets(t, anchor), anchor);
    EXPECT_NEAR(back.tx, t.tx, 1e-9);
    EXPECT_NEAR(back.ty, t.ty, 1e-9);
    EXPECT_NEAR(back.tw, t.tw, 1e-9);
    EXPECT_NEAR(back.th, t.th, 1e-9);
  }
  EXPECT_THROW(decode_box_offsets({0, 0, 1000, 0}, anchor), NumericError);
  EXPECT_THROW(decode_box_offsets({std::nan(""), 0, 0, 0}, anchor), InvalidInput);
}

TEST(SmoothL1, Examples) {
  EXPECT_EQ(smooth_l1(0.0), 0.0);
  EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1(2.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1(-2.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1(std::vector<double>{0.5, 2}, std::vector<double>{0, 0}), 1.625);
  EXPECT_THROW(smooth_l1(1.0, 0.0), InvalidConfig);
}

TrainingSample make_sample(int obj, double theta, double zscale) {
  TrainingSample s;
  s.anchor = {0, 0, 4, 2, 0};
  s.gt_box = {1, 2, 8, 2, theta};
  s.class_label = 1;
  s.objectness = obj;
  s.class_logits = {-zscale, zscale, -zscale};
  if (obj == 0) s.class_logits = {-zscale, -zscale, -zscale};
  s.angle_logits = saturated_logits(encode_angle(theta, bcl()), zscale);
  s.box_pred = box_offsets(s.gt_box, s.anchor);
  return s;
}

TEST(MultitaskLoss, BackgroundOnlyHasNoRegressionOrAngle) {
  std::vector<TrainingSample> batch{make_sample(0, 30, 1), make_sample(0, -60, 0.5)};
  batch[0].box_pred = {5, 5, 5, 5};
  const auto r = multitask_loss(batch, bcl(), WeightConfig{}, LossConfig{});
  EXPECT_EQ(r.reg_term, 0.0);
  EXPECT_EQ(r.angle_term, 0.0);
  EXPECT_GT(r.cls_term, 0.0);
  EXPECT_DOUBLE_EQ(r.total, r.cls_term);
}

TEST(MultitaskLoss, PerfectSampleNearZero) {
  std::vector<TrainingSample> batch{make_sample(1, 30, 40)};
  const auto r = multitask_loss(batch, bcl(), mode(WeightMode::None), LossConfig{});
  EXPECT_LT(r.total, 1e-12);
}

TEST(MultitaskLoss, LambdaScalingAndOrder) {
  std::vector<TrainingSample> batch{make_sample(1, 30, 1), make_sample(0, 10, 1), make_sample(1, -80, 0.3)};
  batch[0].box_pred = {0.1, -0.4, 0.2, 1.5};
  batch[2].angle_logits[3] = 2.0;
  const WeightConfig w = mode(WeightMode::None);
  LossConfig lc;
  const auto base = multitask_loss(batch, bcl(), w, lc);
  lc.lambda2 *= 2;
  const auto dbl = multitask_loss(batch, bcl(), w, lc);
  EXPECT_NEAR(dbl.angle_term, 2 * base.angle_term, 1e-12);
  EXPECT_EQ(dbl.reg_term, base.reg_term);
  EXPECT_EQ(dbl.cls_term, base.cls_term);

  std::vector<TrainingSample> rev(batch.rbegin(), batch.rend());
  const auto r = multitask_loss(rev, bcl(), w, LossConfig{});
  EXPECT_NEAR(r.total, base.total, 1e-12);

  // Per-sample contribution scales by exactly 1/N.
  std::vector<TrainingSample> twice = batch;
  twice.insert(twice.end(), batch.begin(), batch.end());
  EXPECT_NEAR(multitask_loss(twice, bcl(), w, LossConfig{}).total, base.total, 1e-12);
}

TEST(MultitaskLoss, Errors) {
  EXPECT_THROW(multitask_loss(std::vector<TrainingSample>{}, bcl(), WeightConfig{}, LossConfig{}), InvalidInput);
  auto s = make_sample(1, 0, 1);
  s.objectness = 2;
  EXPECT_THROW(multitask_loss(std::vector<TrainingSample>{s}, bcl(), WeightConfig{}, LossConfig{}), InvalidInput);
  LossConfig bad;
  bad.lambda1 = 0;
  EXPECT_THROW(bad.validate(), InvalidConfig);
}

}  // namespace
}  // namespace dcl
