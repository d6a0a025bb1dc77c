#pragma once

// Desk-scale experiments: loss curves across the angular boundary, direct
// gradient-descent fitting of free angle logits, and granularity studies.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dcl/angle_coding.hpp"
#include "dcl/error.hpp"
#include "dcl/geometry.hpp"
#include "dcl/loss.hpp"

namespace dcl {

/// Logit magnitude used when turning a codeword into synthetic predictions:
/// sigmoid(+-4) is about 0.982 / 0.018.
inline constexpr double kSaturationScale = 4.0;

enum class SweepMethod { RegSmoothL1, RegSmoothL1OpenCV, DclPlain, DclLog, DclAdarsw, Csl };

inline std::string_view to_string(SweepMethod m) {
  switch (m) {
    case SweepMethod::RegSmoothL1: return "reg_smoothl1";
    case SweepMethod::RegSmoothL1OpenCV: return "reg_smoothl1_opencv";
    case SweepMethod::DclPlain: return "dcl_plain";
    case SweepMethod::DclLog: return "dcl_log";
    case SweepMethod::DclAdarsw: return "dcl_adarsw";
    case SweepMethod::Csl: return "csl";
  }
  return "?";
}

inline SweepMethod parse_sweep_method(std::string_view s) {
  for (auto m : {SweepMethod::RegSmoothL1, SweepMethod::RegSmoothL1OpenCV, SweepMethod::DclPlain,
                 SweepMethod::DclLog, SweepMethod::DclAdarsw, SweepMethod::Csl}) {
    if (to_string(m) == s) return m;
  }
  throw InvalidConfig("unknown sweep method '" + std::string(s) + "'");
}

struct SweepPoint {
  double theta_pred = 0.0;
  double loss = 0.0;

  bool operator==(const SweepPoint&) const = default;
};

struct SweepResult {
  SweepMethod method = SweepMethod::RegSmoothL1;
  double theta_gt = 0.0;
  double aspect = 1.0;
  std::vector<SweepPoint> points;  // theta_pred strictly increasing over (-90, 90]

  bool operator==(const SweepResult&) const = default;
};

/// Loss of a single prediction angle against `theta_gt` for a box of the
/// given aspect ratio (long side `aspect`, short side 1).
inline double sweep_loss(double theta_gt, double theta_pred, double aspect, SweepMethod method,
                         const AngleCodeTable& table, const WeightConfig& wcfg, const LossConfig& lcfg) {
  const double h = aspect;
  const double w = 1.0;
  switch (method) {
    case SweepMethod::RegSmoothL1:
      return smooth_l1(theta_pred - theta_gt, lcfg.smooth_l1_beta);
    case SweepMethod::RegSmoothL1OpenCV: {
      // Same shape, opencv parameterization: a boundary crossing swaps w and h.
      const auto g = to_opencv(RotatedBoxLongSide{0, 0, h, w, theta_gt});
      const auto p = to_opencv(RotatedBoxLongSide{0, 0, h, w, theta_pred});
      return smooth_l1(p.theta - g.theta, lcfg.smooth_l1_beta) + smooth_l1(std::log(p.w / g.w), lcfg.smooth_l1_beta) +
             smooth_l1(std::log(p.h / g.h), lcfg.smooth_l1_beta);
    }
    case SweepMethod::DclPlain:
    case SweepMethod::DclLog:
    case SweepMethod::DclAdarsw:
    case SweepMethod::Csl: {
      WeightConfig wc = wcfg;
      wc.mode = method == SweepMethod::DclLog      ? WeightMode::LogDistance
                : method == SweepMethod::DclAdarsw ? WeightMode::Adarsw
                                                   : WeightMode::None;
      const auto logits = saturated_logits(table.codeword(discretize(theta_pred, table)), kSaturationScale);
      return dcl_loss(theta_gt, logits, table, wc, lcfg, h, w);
    }
  }
  return 0.0;
}

inline SweepResult loss_surface_sweep(double theta_gt, double aspect, SweepMethod method, const AngleCodeTable& table,
                                      const WeightConfig& wcfg, const LossConfig& lcfg, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidInput("sweep: step must be positive");
  if (!(aspect >= 1.0)) throw InvalidInput("sweep: aspect must be >= 1");
  if (table.period() != 180) throw InvalidConfig("sweep: requires the 180 degree long-side range");
  const bool classification = method != SweepMethod::RegSmoothL1 && method != SweepMethod::RegSmoothL1OpenCV;
  if (classification && (method == SweepMethod::Csl) == table.dense()) {
    throw InvalidConfig(std::string("sweep: method ") + std::string(to_string(method)) +
                        " needs a " + (method == SweepMethod::Csl ? "sparse" : "dense") + " code table");
  }
  const double gt = canonicalize_angle(theta_gt, 180);
  SweepResult r{method, gt, aspect, {}};
  const auto count = static_cast<long long>(std::ceil(180.0 / step));
  for (long long k = count - 1; k >= 0; --k) {
    const double t = 90.0 - static_cast<double>(k) * step;
    if (t <= -90.0) continue;
    r.points.push_back({t, sweep_loss(gt, t, aspect, method, table, wcfg, lcfg)});
  }
  return r;
}

struct FitStep {
  double loss = 0.0;
  double decoded = 0.0;

  bool operator==(const FitStep&) const = default;
};

struct FitTrajectory {
  double theta_gt = 0.0;
  std::vector<FitStep> steps;
  double final_error = 0.0;
  bool converged = false;

  bool operator==(const FitTrajectory&) const = default;
};

struct FitOptions {
  int steps = 2000;
  double learning_rate = 1.0;
  std::uint64_t seed = 0;
  double aspect = 4.0;  // ground-truth h / w seen by the weighting
  bool stop_at_target = true;
  /// Start from the saturated target code instead of random logits.
  bool init_at_target = false;
};

/// Plain gradient descent on a free logit vector. Records (loss, decoded
/// angle) before each update; with `stop_at_target` it stops once the
/// decoded bin equals the target bin.
inline FitTrajectory fit_logits(double theta_gt, const AngleCodeTable& table, const WeightConfig& wcfg,
                                const LossConfig& lcfg, const FitOptions& opt) {
  if (opt.steps < 1) throw InvalidInput("fit_logits: steps must be >= 1");
  if (!(opt.learning_rate > 0.0)) throw InvalidInput("fit_logits: learning_rate must be positive");
  const double h = opt.aspect;
  const double w = 1.0;
  const int target_bin = discretize(theta_gt, table);

  std::vector<double> z(static_cast<std::size_t>(table.code_length()));
  if (opt.init_at_target) {
    z = saturated_logits(table.codeword(target_bin), kSaturationScale);
  } else {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> init(-0.5, 0.5);
    for (double& v : z) v = init(rng);
  }

  FitTrajectory tr;
  tr.theta_gt = theta_gt;
  tr.steps.reserve(static_cast<std::size_t>(opt.steps));
  for (int s = 0; s < opt.steps; ++s) {
    const double loss = dcl_loss(theta_gt, z, table, wcfg, lcfg, h, w);
    if (!std::isfinite(loss)) throw NumericError("fit_logits: non-finite loss at step " + std::to_string(s + 1));
    tr.steps.push_back({loss, decode_logits(z, table)});
    if (opt.stop_at_target && decode_category(z, table) == target_bin) break;
    const auto g = dcl_loss_grad(theta_gt, z, table, wcfg, lcfg, h, w);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= opt.learning_rate * g[i];
  }
  tr.final_error = angular_distance(theta_gt, tr.steps.back().decoded, table.period());
  tr.converged = tr.final_error <= table.omega() + 1e-12;
  return tr;
}

/// Seed for the i-th independent task of a run seeded with `seed`.
inline std::uint64_t task_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// `n` canonical angles drawn uniformly from (-90, 90].
inline std::vector<double> uniform_targets(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(n);
  for (double& t : out) t = 90.0 - 180.0 * unit(rng);
  return out;
}

struct FitSummary {
  std::size_t targets = 0;
  std::size_t converged = 0;
  double success_rate = 0.0;
  double mean_final_error = 0.0;
  double max_final_error = 0.0;
  double mean_steps = 0.0;
};

/// fit_logits over `n_targets` uniform angles, each with its own seed.
inline FitSummary fit_many(std::size_t n_targets, const AngleCodeTable& table, const WeightConfig& wcfg,
                           const LossConfig& lcfg, FitOptions opt) {
  if (n_targets < 1) throw InvalidInput("fit_many: need at least one target");
  const auto targets = uniform_targets(n_targets, opt.seed);
  FitSummary s;
  s.targets = n_targets;
  double err_sum = 0.0, step_sum = 0.0;
  for (std::size_t i = 0; i < n_targets; ++i) {
    FitOptions o = opt;
    o.seed = task_seed(opt.seed, i);
    const auto tr = fit_logits(targets[i], table, wcfg, lcfg, o);
    s.converged += tr.converged ? 1 : 0;
    err_sum += tr.final_error;
    step_sum += static_cast<double>(tr.steps.size());
    s.max_final_error = std::max(s.max_final_error, tr.final_error);
  }
  s.success_rate = static_cast<double>(s.converged) / static_cast<double>(n_targets);
  s.mean_final_error = err_sum / static_cast<double>(n_targets);
  s.mean_steps = step_sum / static_cast<double>(n_targets);
  return s;
}

struct GranularityRow {
  double omega = 0.0;
  int categories = 0;
  int code_length = 0;
  double max_error = 0.0;
  double mean_error = 0.0;
  double fit_rate = 0.0;

  bool operator==(const GranularityRow&) const = default;
};

struct GranularityOptions {
  CodingConfig coding{};  // omega is overridden per row
  std::size_t n_targets = 100;
  std::size_t quantization_samples = 100000;
  std::uint64_t seed = 0;
  FitOptions fit{};
};

inline std::vector<GranularityRow> granularity_study(const std::vector<double>& omegas, const GranularityOptions& opt,
                                                     const WeightConfig& wcfg, const LossConfig& lcfg) {
  if (omegas.empty()) throw InvalidInput("granularity_study: empty omega list");
  std::vector<GranularityRow> rows;
  rows.reserve(omegas.size());
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    CodingConfig cc = opt.coding;
    cc.omega = omegas[i];
    const AngleCodeTable table(cc);
    const auto q = quantization_error_stats(table, opt.quantization_samples, task_seed(opt.seed, 2 * i));
    FitOptions fo = opt.fit;
    fo.seed = task_seed(opt.seed, 2 * i + 1);
    const auto fit = fit_many(opt.n_targets, table, wcfg, lcfg, fo);
    rows.push_back({cc.omega, table.num_categories(), table.code_length(), q.max_error, q.mean_error,
                    fit.success_rate});
  }
  return rows;
}

/// Aspect ratio (long / short side) distribution for synthetic boxes.
struct AspectDistribution {
  enum class Kind { Fixed, Uniform, Mixed } kind = Kind::Mixed;
  double value = 1.0;  // Fixed
  double low = 1.0;    // Uniform / Mixed lower bound
  double high = 8.0;   // Uniform / Mixed upper bound
  double split = 1.5;  // Mixed: half the boxes below, half above
};

inline std::vector<RotatedBoxLongSide> synthetic_boxes(std::size_t n, std::uint64_t seed,
                                                       const AspectDistribution& dist = {}) {
  if (n < 1) throw InvalidInput("synthetic_boxes: n must be >= 1");
  if (!(dist.low >= 1.0) || !(dist.high >= dist.low) || (dist.kind == AspectDistribution::Kind::Fixed && !(dist.value >= 1.0))) {
    throw InvalidConfig("synthetic_boxes: aspect ratios must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RotatedBoxLongSide> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 1024.0 * unit(rng);
    const double y = 1024.0 * unit(rng);
    const double w = 4.0 + 60.0 * unit(rng);
    const double u = unit(rng);
    double aspect = dist.value;
    switch (dist.kind) {
      case AspectDistribution::Kind::Fixed:
        break;
      case AspectDistribution::Kind::Uniform:
        aspect = dist.low + (dist.high - dist.low) * u;
        break;
      case AspectDistribution::Kind::Mixed: {
        const double v = unit(rng);
        aspect = u < 0.5 ? dist.low + (dist.split - dist.low) * v : dist.split + (dist.high - dist.split) * v;
        break;
      }
    }
    const double theta = 90.0 - 180.0 * unit(rng);
    out.push_back({x, y, w * aspect, w, theta});
  }
  return out;
}

}  // namespace dcl
