#pragma once

// Rotated-box detection evaluation: greedy score-ordered matching and
// PASCAL VOC average precision (11-point 2007 and all-point 2012 variants).

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcl/error.hpp"
#include "dcl/geometry.hpp"

namespace dcl {

struct DetectionRecord {
  std::string image_id;
  std::string class_id;
  RotatedBoxLongSide box;
  double score = 0.0;
};

struct GroundTruthRecord {
  std::string image_id;
  std::string class_id;
  RotatedBoxLongSide box;
  bool difficult = false;
};

enum class MatchFlag { TP, FP, Ignored };

struct DetectionMatch {
  std::size_t index = 0;  // position in the input detection list
  double score = 0.0;
  MatchFlag flag = MatchFlag::FP;
};

enum class ApMetric { Voc07, Voc12 };

inline ApMetric parse_ap_metric(std::string_view s) {
  if (s == "voc07") return ApMetric::Voc07;
  if (s == "voc12") return ApMetric::Voc12;
  throw InvalidConfig("unknown AP metric '" + std::string(s) + "'");
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct APResult {
  std::string class_id;
  double ap = 0.0;
  std::size_t n_gt = 0;
  std::vector<PrPoint> curve;
};

/// Indices of `scores` by descending score; equal scores keep input order.
inline std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

/// Greedy matching in descending score order. A detection takes the
/// highest-IoU ground truth of its image and class among those not yet
/// matched (difficult ones never count as matched); at or above the
/// threshold it is a TP, or Ignored when that ground truth is difficult.
/// Returned in ranked order.
inline std::vector<DetectionMatch> match_detections(std::span<const DetectionRecord> dets,
                                                    std::span<const GroundTruthRecord> gts, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw InvalidInput("iou_threshold must lie in (0, 1)");
  for (const auto& d : dets) {
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw InvalidInput("detection score outside [0, 1]");
  }
  std::vector<double> scores(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) scores[i] = dets[i].score;
  const auto order = rank_by_score(scores);

  std::vector<bool> taken(gts.size(), false);
  std::vector<DetectionMatch> out;
  out.reserve(dets.size());
  for (std::size_t i : order) {
    const auto& d = dets[i];
    double best = -1.0;
    std::size_t best_j = gts.size();
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const auto& g = gts[j];
      if (taken[j] || g.image_id != d.image_id || g.class_id != d.class_id) continue;
      const double iou = rotated_iou(d.box, g.box);
      if (iou > best) {
        best = iou;
        best_j = j;
      }
    }
    MatchFlag flag = MatchFlag::FP;
    if (best_j < gts.size() && best >= iou_threshold) {
      if (gts[best_j].difficult) {
        flag = MatchFlag::Ignored;
      } else {
        flag = MatchFlag::TP;
        taken[best_j] = true;
      }
    }
    out.push_back({i, d.score, flag});
  }
  return out;
}

/// AP from per-detection match flags. Detections are ranked by score
/// (stable), so `flags` and `scores` may be given in any order; Ignored
/// entries are dropped.
inline APResult average_precision(std::span<const MatchFlag> flags, std::span<const double> scores, std::size_t n_gt,
                                  ApMetric metric) {
  if (flags.size() != scores.size()) throw InvalidInput("average_precision: flags and scores differ in length");
  if (n_gt == 0) throw UndefinedAP("average_precision: no ground truth");
  std::vector<std::size_t> order;
  for (std::size_t i : rank_by_score(scores)) {
    if (flags[i] != MatchFlag::Ignored) order.push_back(i);
  }

  APResult r;
  r.n_gt = n_gt;
  r.curve.reserve(order.size());
  std::size_t ntp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    ntp += flags[order[k]] == MatchFlag::TP ? 1 : 0;
    r.curve.push_back({static_cast<double>(ntp) / static_cast<double>(n_gt),
                       static_cast<double>(ntp) / static_cast<double>(k + 1)});
  }

  if (metric == ApMetric::Voc07) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double thr = t / 10.0;
      double p = 0.0;
      for (const auto& pt : r.curve) {
        if (pt.recall >= thr - 1e-12) p = std::max(p, pt.precision);
      }
      ap += p;
    }
    r.ap = ap / 11.0;
  } else {
    std::vector<double> mrec{0.0}, mpre{0.0};
    for (const auto& pt : r.curve) {
      mrec.push_back(pt.recall);
      mpre.push_back(pt.precision);
    }
    mrec.push_back(1.0);
    mpre.push_back(0.0);
    for (std::size_t i = mpre.size() - 1; i-- > 0;) mpre[i] = std::max(mpre[i], mpre[i + 1]);
    double ap = 0.0;
    for (std::size_t i = 1; i < mrec.size(); ++i) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
    r.ap = ap;
  }
  r.ap = std::clamp(r.ap, 0.0, 1.0);
  return r;
}

struct EvaluationResult {
  std::vector<APResult> per_class;  // sorted by class id
  double map = 0.0;
};

/// Per-class AP and their mean over classes that have countable ground truth.
inline EvaluationResult evaluate_detections(std::span<const DetectionRecord> dets,
                                            std::span<const GroundTruthRecord> gts, double iou_threshold,
                                            ApMetric metric) {
  std::map<std::string, std::size_t> n_gt;
  for (const auto& g : gts) {
    auto& n = n_gt[g.class_id];
    if (!g.difficult) ++n;
  }
  std::map<std::string, std::vector<DetectionRecord>> by_class_dets;
  std::map<std::string, std::vector<GroundTruthRecord>> by_class_gts;
  for (const auto& d : dets) by_class_dets[d.class_id].push_back(d);
  for (const auto& g : gts) by_class_gts[g.class_id].push_back(g);

  EvaluationResult out;
  double sum = 0.0;
  for (const auto& [cls, count] : n_gt) {
    if (count == 0) continue;
    const auto& cd = by_class_dets[cls];
    const auto matches = match_detections(cd, by_class_gts[cls], iou_threshold);
    std::vector<MatchFlag> flags;
    std::vector<double> scores;
    for (const auto& m : matches) {
      flags.push_back(m.flag);
      scores.push_back(m.score);
    }
    auto r = average_precision(flags, scores, count, metric);
    r.class_id = cls;
    sum += r.ap;
    out.per_class.push_back(std::move(r));
  }
  out.map = out.per_class.empty() ? 0.0 : sum / static_cast<double>(out.per_class.size());
  return out;
}

/// Mean of mAP over IoU thresholds (e.g. 0.5:0.05:0.95).
inline double map_over_thresholds(std::span<const DetectionRecord> dets, std::span<const GroundTruthRecord> gts,
                                  std::span<const double> thresholds, ApMetric metric) {
  if (thresholds.empty()) throw InvalidInput("map_over_thresholds: no thresholds");
  double s = 0.0;
  for (double t : thresholds) s += evaluate_detections(dets, gts, t, metric).map;
  return s / static_cast<double>(thresholds.size());
}

}  // namespace dcl
