#pragma once

// Angle loss re-weighting, the dense-coded angle classification loss, box
// offset targets and the multi-task detection loss, with closed-form
// gradients for the angle logits.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcl/angle_coding.hpp"
#include "dcl/error.hpp"
#include "dcl/geometry.hpp"

namespace dcl {

enum class WeightMode { None, LogDistance, Adarsw };

inline std::string_view to_string(WeightMode m) {
  switch (m) {
    case WeightMode::None: return "none";
    case WeightMode::LogDistance: return "log_distance";
    case WeightMode::Adarsw: return "adarsw";
  }
  return "?";
}

inline WeightMode parse_weight_mode(std::string_view s) {
  if (s == "none") return WeightMode::None;
  if (s == "log_distance" || s == "log") return WeightMode::LogDistance;
  if (s == "adarsw") return WeightMode::Adarsw;
  throw InvalidConfig("unknown weight mode '" + std::string(s) + "'");
}

struct WeightConfig {
  WeightMode mode = WeightMode::Adarsw;
  double aspect_threshold = 1.5;  // r
  double log_base = std::numbers::e;

  void validate() const {
    if (!(aspect_threshold > 1.0)) throw InvalidConfig("aspect_threshold must be > 1");
    if (!(log_base > 1.0)) throw InvalidConfig("log_base must be > 1");
  }
};

enum class BitReduction { Sum, Mean };

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

struct LossConfig {
  double lambda1 = 1.0;
  double lambda2 = 0.5;
  double lambda3 = 0.1;
  FocalParams angle_focal{};
  FocalParams cls_focal{};
  double smooth_l1_beta = 1.0;
  BitReduction bit_reduction = BitReduction::Sum;

  void validate() const {
    if (!(lambda1 > 0 && lambda2 > 0 && lambda3 > 0)) throw InvalidConfig("lambdas must be positive");
    for (const auto& f : {angle_focal, cls_focal}) {
      if (!(f.alpha > 0 && f.alpha < 1)) throw InvalidConfig("focal alpha must lie in (0, 1)");
      if (!(f.gamma >= 0)) throw InvalidConfig("focal gamma must be >= 0");
    }
    if (!(smooth_l1_beta > 0)) throw InvalidConfig("smooth_l1_beta must be positive");
  }
};

/// log(|gt - pred| + 1) on the raw, non-modular difference. Large across the
/// angular boundary even when the boxes nearly coincide.
inline double angle_distance_weight(double theta_gt, double theta_pred, double log_base = std::numbers::e) {
  if (!std::isfinite(theta_gt) || !std::isfinite(theta_pred)) throw InvalidInput("angle_distance_weight: non-finite");
  return std::log(std::abs(theta_gt - theta_pred) + 1.0) / std::log(log_base);
}

/// 1 for elongated objects (h / w > r), 2 for square-like ones.
inline int adarsw_alpha(double h_gt, double w_gt, const WeightConfig& cfg) {
  if (!(w_gt > 0.0) || h_gt < w_gt) throw InvalidInput("adarsw: need h_gt >= w_gt > 0");
  return h_gt / w_gt > cfg.aspect_threshold ? 1 : 2;
}

inline double adarsw_weight(double theta_gt, double theta_pred, double h_gt, double w_gt, const WeightConfig& cfg) {
  const int alpha = adarsw_alpha(h_gt, w_gt, cfg);
  return std::abs(std::sin(alpha * (theta_gt - theta_pred) * kDegToRad));
}

inline double angle_weight(double theta_gt, double theta_pred, double h_gt, double w_gt, const WeightConfig& cfg) {
  switch (cfg.mode) {
    case WeightMode::None: return 1.0;
    case WeightMode::LogDistance: return angle_distance_weight(theta_gt, theta_pred, cfg.log_base);
    case WeightMode::Adarsw: return adarsw_weight(theta_gt, theta_pred, h_gt, w_gt, cfg);
  }
  return 1.0;
}

namespace detail {

// log(sigmoid(z)) and log(1 - sigmoid(z)) without cancellation.
inline double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }
inline double log_one_minus_sigmoid(double z) { return log_sigmoid(-z); }

inline void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail

/// Sigmoid focal loss per component. Soft targets t in [0, 1] blend the
/// positive and negative terms linearly:
///   FL = -[a t (1-p)^g log p + (1-a)(1-t) p^g log(1-p)],  p = sigmoid(z).
inline std::vector<double> binary_focal_loss(std::span<const double> targets, std::span<const double> logits,
                                             const FocalParams& fp) {
  detail::check_lengths(targets.size(), logits.size(), "binary_focal_loss");
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double t = targets[i];
    const double p = sigmoid(z);
    const double pos = t == 0.0 ? 0.0 : fp.alpha * t * std::pow(1.0 - p, fp.gamma) * detail::log_sigmoid(z);
    const double neg =
        t == 1.0 ? 0.0 : (1.0 - fp.alpha) * (1.0 - t) * std::pow(p, fp.gamma) * detail::log_one_minus_sigmoid(z);
    out[i] = -(pos + neg);
  }
  return out;
}

/// d FL / d z per component.
inline std::vector<double> binary_focal_loss_grad(std::span<const double> targets, std::span<const double> logits,
                                                  const FocalParams& fp) {
  detail::check_lengths(targets.size(), logits.size(), "binary_focal_loss_grad");
  std::vector<double> out(logits.size());
  const double g = fp.gamma;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double t = targets[i];
    const double p = sigmoid(z);
    const double q = sigmoid(-z);  // 1 - p without cancellation
    double d = 0.0;
    if (t != 0.0) d -= fp.alpha * t * std::pow(q, g) * (q - g * p * detail::log_sigmoid(z));
    if (t != 1.0) d += (1.0 - fp.alpha) * (1.0 - t) * std::pow(p, g) * (p - g * q * detail::log_one_minus_sigmoid(z));
    out[i] = d;
  }
  return out;
}

namespace detail {

inline double reduce(std::span<const double> v, BitReduction r) {
  double s = 0.0;
  for (double x : v) s += x;
  return (r == BitReduction::Mean && !v.empty()) ? s / static_cast<double>(v.size()) : s;
}

}  // namespace detail

/// Weight multiplying the angle focal loss for the current prediction. It is
/// evaluated at the decoded angle and carries no gradient.
inline double dcl_loss_weight(double theta_gt, std::span<const double> angle_logits, const AngleCodeTable& table,
                              const WeightConfig& wcfg, double h_gt, double w_gt) {
  if (wcfg.mode == WeightMode::None) return 1.0;
  const double theta_pred = decode_logits(angle_logits, table);
  return angle_weight(theta_gt, theta_pred, h_gt, w_gt, wcfg);
}

inline double dcl_loss(double theta_gt, std::span<const double> angle_logits, const AngleCodeTable& table,
                       const WeightConfig& wcfg, const LossConfig& lcfg, double h_gt, double w_gt) {
  detail::check_lengths(angle_logits.size(), static_cast<std::size_t>(table.code_length()), "dcl_loss");
  const auto target = table.codeword(discretize(theta_gt, table));
  const auto fl = binary_focal_loss(target, angle_logits, lcfg.angle_focal);
  const double w = dcl_loss_weight(theta_gt, angle_logits, table, wcfg, h_gt, w_gt);
  return detail::reduce(fl, lcfg.bit_reduction) * w;
}

inline std::vector<double> dcl_loss_grad(double theta_gt, std::span<const double> angle_logits,
                                         const AngleCodeTable& table, const WeightConfig& wcfg,
                                         const LossConfig& lcfg, double h_gt, double w_gt) {
  detail::check_lengths(angle_logits.size(), static_cast<std::size_t>(table.code_length()), "dcl_loss_grad");
  const auto target = table.codeword(discretize(theta_gt, table));
  auto grad = binary_focal_loss_grad(target, angle_logits, lcfg.angle_focal);
  double scale = dcl_loss_weight(theta_gt, angle_logits, table, wcfg, h_gt, w_gt);
  if (lcfg.bit_reduction == BitReduction::Mean) scale /= static_cast<double>(grad.size());
  for (double& g : grad) g *= scale;
  return grad;
}

/// Regression targets of a box relative to its anchor.
struct BoxOffsets {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;

  std::array<double, 4> as_array() const { return {tx, ty, tw, th}; }
  bool operator==(const BoxOffsets&) const = default;
};

inline BoxOffsets box_offsets(const RotatedBoxLongSide& gt, const RotatedBoxLongSide& anchor) {
  if (!(anchor.w > 0 && anchor.h > 0)) throw InvalidInput("box_offsets: anchor sides must be positive");
  if (!(gt.w > 0 && gt.h > 0)) throw InvalidInput("box_offsets: ground-truth sides must be positive");
  return {(gt.x - anchor.x) / anchor.w, (gt.y - anchor.y) / anchor.h, std::log(gt.w / anchor.w),
          std::log(gt.h / anchor.h)};
}

/// Inverse of box_offsets. The angle is not regressed; pass the decoded one.
inline RotatedBoxLongSide decode_box_offsets(const BoxOffsets& t, const RotatedBoxLongSide& anchor,
                                             double theta = 0.0) {
  for (double v : t.as_array()) {
    if (!std::isfinite(v)) throw InvalidInput("decode_box_offsets: non-finite offset");
  }
  if (!(anchor.w > 0 && anchor.h > 0)) throw InvalidInput("decode_box_offsets: anchor sides must be positive");
  const double w = anchor.w * std::exp(t.tw);
  const double h = anchor.h * std::exp(t.th);
  if (!std::isfinite(w) || !std::isfinite(h) || w == 0.0 || h == 0.0) {
    throw NumericError("decode_box_offsets: exp overflow");
  }
  RotatedBoxLongSide b;
  b.x = anchor.x + t.tx * anchor.w;
  b.y = anchor.y + t.ty * anchor.h;
  b.h = h;
  b.w = w;
  b.theta = theta;
  return b;
}

inline double smooth_l1(double diff, double beta = 1.0) {
  if (!(beta > 0)) throw InvalidConfig("smooth_l1: beta must be positive");
  const double d = std::abs(diff);
  return d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
}

inline double smooth_l1(std::span<const double> pred, std::span<const double> target, double beta = 1.0) {
  detail::check_lengths(pred.size(), target.size(), "smooth_l1");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += smooth_l1(pred[i] - target[i], beta);
  return s;
}

/// One anchor's worth of network output plus its assigned ground truth.
struct TrainingSample {
  RotatedBoxLongSide anchor;
  RotatedBoxLongSide gt_box;
  int class_label = 0;
  int objectness = 0;  // 1 foreground, 0 background
  std::vector<double> class_logits;
  std::vector<double> angle_logits;
  BoxOffsets box_pred;
};

struct MultitaskLoss {
  double total = 0.0;
  double reg_term = 0.0;
  double angle_term = 0.0;
  double cls_term = 0.0;
};

/// Weighted sum of smooth-L1 offset regression, DCL angle loss (foreground
/// only) and sigmoid focal classification loss, each averaged over N samples.
inline MultitaskLoss multitask_loss(std::span<const TrainingSample> samples, const AngleCodeTable& table,
                                    const WeightConfig& wcfg, const LossConfig& lcfg) {
  if (samples.empty()) throw InvalidInput("multitask_loss: empty batch");
  double reg = 0.0, ang = 0.0, cls = 0.0;
  for (const auto& s : samples) {
    if (s.objectness != 0 && s.objectness != 1) throw InvalidInput("multitask_loss: objectness must be 0 or 1");
    if (s.class_logits.empty()) throw InvalidInput("multitask_loss: empty class logits");
    std::vector<double> cls_target(s.class_logits.size(), 0.0);
    if (s.objectness == 1) {
      if (s.class_label < 0 || static_cast<std::size_t>(s.class_label) >= s.class_logits.size()) {
        throw InvalidInput("multitask_loss: class label out of range");
      }
      cls_target[static_cast<std::size_t>(s.class_label)] = 1.0;
      const auto target = box_offsets(s.gt_box, s.anchor).as_array();
      const auto pred = s.box_pred.as_array();
      reg += smooth_l1(pred, target, lcfg.smooth_l1_beta);
      ang += dcl_loss(s.gt_box.theta, s.angle_logits, table, wcfg, lcfg, s.gt_box.h, s.gt_box.w);
    }
    for (double v : binary_focal_loss(cls_target, s.class_logits, lcfg.cls_focal)) cls += v;
  }
  const double n = static_cast<double>(samples.size());
  MultitaskLoss out;
  out.reg_term = lcfg.lambda1 / n * reg;
  out.angle_term = lcfg.lambda2 / n * ang;
  out.cls_term = lcfg.lambda3 / n * cls;
  out.total = out.reg_term + out.angle_term + out.cls_term;
  return out;
}

}  // namespace dcl
