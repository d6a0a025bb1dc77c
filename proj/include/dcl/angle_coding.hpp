#pragma once

// Angle discretization and the four label codings: One-Hot and CSL (sparse,
// one position per bin) and binary / Gray coded labels (dense, ceil(log2 C)
// bits per bin).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dcl/error.hpp"
#include "dcl/geometry.hpp"

namespace dcl {

enum class CodingScheme { OneHot, CSL, BCL, GCL };

/// What to do with a dense code whose integer value is >= C.
enum class InvalidCodePolicy { Wrap, Clamp };

enum class CslWindow { Gaussian, Pulse };

inline bool is_dense(CodingScheme s) { return s == CodingScheme::BCL || s == CodingScheme::GCL; }

inline std::string_view to_string(CodingScheme s) {
  switch (s) {
    case CodingScheme::OneHot: return "onehot";
    case CodingScheme::CSL: return "csl";
    case CodingScheme::BCL: return "bcl";
    case CodingScheme::GCL: return "gcl";
  }
  return "?";
}

inline CodingScheme parse_coding_scheme(std::string_view s) {
  if (s == "onehot") return CodingScheme::OneHot;
  if (s == "csl") return CodingScheme::CSL;
  if (s == "bcl") return CodingScheme::BCL;
  if (s == "gcl") return CodingScheme::GCL;
  throw InvalidConfig("unknown coding scheme '" + std::string(s) + "'");
}

struct CodingConfig {
  CodingScheme scheme = CodingScheme::BCL;
  double omega = 1.0;          // degrees per bin
  double angle_range = 180.0;  // 180 (long-side) or 90
  double csl_radius = 4.0;     // Gaussian sigma / pulse half-width, in bins
  CslWindow csl_window = CslWindow::Gaussian;
  double decode_threshold = 0.5;
  InvalidCodePolicy invalid_code = InvalidCodePolicy::Wrap;
  // Decode sparse codes to 90 - omega * (i + 0.5) instead of 90 - omega * i.
  bool scl_half_bin_offset = false;
};

using BitVector = std::vector<std::uint8_t>;

namespace detail {

inline int angle_period(double angle_range) {
  if (angle_range == 180.0) return 180;
  if (angle_range == 90.0) return 90;
  throw InvalidConfig("angle_range must be 90 or 180");
}

/// Number of bins AR / omega; must be (numerically) an integer >= 2.
inline int category_count(double angle_range, double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw InvalidConfig("omega must be positive and finite");
  const double ratio = angle_range / omega;
  const double c = std::round(ratio);
  if (std::abs(ratio - c) > 1e-9 * std::max(1.0, ratio)) {
    throw InvalidConfig("angle_range / omega must be an integer, got " + std::to_string(ratio));
  }
  if (c < 2) throw InvalidConfig("angle_range / omega must be at least 2");
  if (c > (1 << 24)) throw InvalidConfig("too many angle categories");
  return static_cast<int>(c);
}

inline int dense_code_length(int categories) {
  return std::bit_width(static_cast<unsigned>(categories - 1));
}

inline BitVector to_bits(std::uint32_t value, int length) {
  BitVector bits(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) bits[static_cast<std::size_t>(i)] = (value >> (length - 1 - i)) & 1u;
  return bits;
}

inline std::uint32_t from_bits(std::span<const std::uint8_t> bits) {
  std::uint32_t v = 0;
  for (auto b : bits) v = (v << 1) | (b ? 1u : 0u);
  return v;
}

}  // namespace detail

/// Reflected Gray code to plain binary, most significant bit first.
inline BitVector gray_to_binary(std::span<const std::uint8_t> gray) {
  BitVector out(gray.size());
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < gray.size(); ++i) {
    acc ^= gray[i] ? 1 : 0;
    out[i] = acc;
  }
  return out;
}

inline BitVector binary_to_gray(std::span<const std::uint8_t> bin) {
  BitVector out(bin.size());
  for (std::size_t i = 0; i < bin.size(); ++i) {
    out[i] = (bin[i] ? 1 : 0) ^ (i == 0 ? 0 : (bin[i - 1] ? 1 : 0));
  }
  return out;
}

/// All 2^n reflected Gray codewords in order, built by reflect-and-prefix.
inline std::vector<std::string> gray_code_sequence(int n) {
  if (n < 1) throw InvalidInput("gray_code_sequence: n must be >= 1");
  std::vector<std::string> codes{"0", "1"};
  for (int k = 2; k <= n; ++k) {
    std::vector<std::string> next;
    next.reserve(codes.size() * 2);
    for (const auto& s : codes) next.push_back("0" + s);
    for (auto it = codes.rbegin(); it != codes.rend(); ++it) next.push_back("1" + *it);
    codes = std::move(next);
  }
  return codes;
}

/// Bin index of a canonical angle: (-round((theta - AR/2) / omega)) mod C,
/// rounding half away from zero.
inline int discretize(double theta, double omega, double angle_range = 180.0) {
  const int period = detail::angle_period(angle_range);
  const int c = detail::category_count(angle_range, omega);
  const double half = period / 2.0;
  if (!std::isfinite(theta) || !(theta > -half && theta <= half)) {
    throw InvalidInput("discretize: angle " + std::to_string(theta) + " outside canonical range");
  }
  const long long k = -std::llround((theta - half) / omega);
  return static_cast<int>(((k % c) + c) % c);
}

/// Precomputed target vectors for one coding scheme and granularity.
class AngleCodeTable {
 public:
  explicit AngleCodeTable(const CodingConfig& config) : config_(config) {
    period_ = detail::angle_period(config.angle_range);
    categories_ = detail::category_count(config.angle_range, config.omega);
    if (!(config.decode_threshold > 0.0 && config.decode_threshold < 1.0)) {
      throw InvalidConfig("decode_threshold must lie in (0, 1)");
    }
    if (config.scheme == CodingScheme::CSL && !(config.csl_radius > 0.0)) {
      throw InvalidConfig("csl_radius must be positive");
    }
    code_length_ = is_dense(config.scheme) ? detail::dense_code_length(categories_) : categories_;
    build();
  }

  const CodingConfig& config() const noexcept { return config_; }
  CodingScheme scheme() const noexcept { return config_.scheme; }
  double omega() const noexcept { return config_.omega; }
  int period() const noexcept { return period_; }
  int num_categories() const noexcept { return categories_; }
  int code_length() const noexcept { return code_length_; }
  bool dense() const noexcept { return is_dense(config_.scheme); }

  std::span<const double> codeword(int index) const {
    if (index < 0 || index >= categories_) throw InvalidInput("codeword index out of range");
    return {codes_.data() + static_cast<std::size_t>(index) * code_length_, static_cast<std::size_t>(code_length_)};
  }

  /// Codeword as a '0'/'1' string (dense schemes) or with every position
  /// thresholded at 0.5 (sparse schemes).
  std::string codeword_string(int index) const {
    std::string s;
    for (double v : codeword(index)) s.push_back(v >= 0.5 ? '1' : '0');
    return s;
  }

  /// Bin index of the integer code value `k` under the invalid-code policy.
  int category_of_code(std::uint32_t k) const {
    if (k < static_cast<std::uint32_t>(categories_)) return static_cast<int>(k);
    if (config_.invalid_code == InvalidCodePolicy::Clamp) return categories_ - 1;
    return static_cast<int>(k % static_cast<std::uint32_t>(categories_));
  }

  /// Canonical angle represented by bin `index`.
  double angle_of_category(double index) const {
    return canonicalize_angle(period_ / 2.0 - config_.omega * index, period_);
  }

 private:
  void build() {
    const auto n = static_cast<std::size_t>(code_length_);
    codes_.assign(static_cast<std::size_t>(categories_) * n, 0.0);
    for (int i = 0; i < categories_; ++i) {
      double* row = codes_.data() + static_cast<std::size_t>(i) * n;
      switch (config_.scheme) {
        case CodingScheme::BCL:
        case CodingScheme::GCL: {
          auto value = static_cast<std::uint32_t>(i);
          if (config_.scheme == CodingScheme::GCL) value ^= value >> 1;
          const BitVector bits = detail::to_bits(value, code_length_);
          std::copy(bits.begin(), bits.end(), row);
          break;
        }
        case CodingScheme::OneHot:
          row[i] = 1.0;
          break;
        case CodingScheme::CSL:
          for (int j = 0; j < categories_; ++j) {
            const int raw = std::abs(j - i);
            const double d = std::min(raw, categories_ - raw);
            if (config_.csl_window == CslWindow::Gaussian) {
              row[j] = std::exp(-d * d / (2.0 * config_.csl_radius * config_.csl_radius));
            } else {
              row[j] = d <= config_.csl_radius ? 1.0 : 0.0;
            }
          }
          break;
      }
    }
  }

  CodingConfig config_;
  int period_ = 180;
  int categories_ = 0;
  int code_length_ = 0;
  std::vector<double> codes_;
};

inline AngleCodeTable build_code_table(const CodingConfig& config) { return AngleCodeTable(config); }

inline int discretize(double theta, const AngleCodeTable& table) {
  return discretize(theta, table.omega(), table.config().angle_range);
}

inline std::vector<double> encode_angle(double theta, const AngleCodeTable& table) {
  const auto cw = table.codeword(discretize(theta, table));
  return {cw.begin(), cw.end()};
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Bits obtained by thresholding sigmoid(logits) (dense schemes only).
inline BitVector logits_to_bits(std::span<const double> logits, double threshold) {
  BitVector bits(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) bits[i] = sigmoid(logits[i]) >= threshold ? 1 : 0;
  return bits;
}

/// Bin index predicted by `logits`.
inline int decode_category(std::span<const double> logits, const AngleCodeTable& table) {
  if (logits.size() != static_cast<std::size_t>(table.code_length())) {
    throw InvalidInput("decode: expected " + std::to_string(table.code_length()) + " logits, got " +
                       std::to_string(logits.size()));
  }
  for (double z : logits) {
    if (std::isnan(z)) throw InvalidInput("decode: NaN logit");
  }
  if (table.dense()) {
    BitVector bits = logits_to_bits(logits, table.config().decode_threshold);
    if (table.scheme() == CodingScheme::GCL) bits = gray_to_binary(bits);
    return table.category_of_code(detail::from_bits(bits));
  }
  // sigmoid is monotone, so argmax over logits equals argmax over scores.
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

inline double decode_logits(std::span<const double> logits, const AngleCodeTable& table) {
  const int k = decode_category(logits, table);
  const double offset = (!table.dense() && table.config().scl_half_bin_offset) ? 0.5 : 0.0;
  return table.angle_of_category(k + offset);
}

/// Logits whose sigmoid reproduces `code` at +-scale confidence.
inline std::vector<double> saturated_logits(std::span<const double> code, double scale) {
  std::vector<double> z(code.size());
  for (std::size_t i = 0; i < code.size(); ++i) z[i] = scale * (2.0 * code[i] - 1.0);
  return z;
}

enum class AngleMethod { Reg, OneHot, CSL, BCL, GCL };

inline AngleMethod parse_angle_method(std::string_view s) {
  if (s == "reg") return AngleMethod::Reg;
  if (s == "onehot") return AngleMethod::OneHot;
  if (s == "csl") return AngleMethod::CSL;
  if (s == "bcl") return AngleMethod::BCL;
  if (s == "gcl") return AngleMethod::GCL;
  throw InvalidConfig("unknown angle method '" + std::string(s) + "'");
}

/// Output channels of the angle head per feature-map location.
inline long long prediction_thickness(AngleMethod method, long long anchors, double angle_range = 180.0,
                                      double omega = 1.0) {
  if (anchors < 1) throw InvalidConfig("anchors per location must be >= 1");
  switch (method) {
    case AngleMethod::Reg:
      return anchors;
    case AngleMethod::OneHot:
    case AngleMethod::CSL:
      return anchors * detail::category_count(angle_range, omega);
    case AngleMethod::BCL:
    case AngleMethod::GCL: {
      if (!(omega > 0.0) || !(angle_range > 0.0)) throw InvalidConfig("omega and angle_range must be positive");
      const double ratio = angle_range / omega;
      const double nearest = std::round(ratio);
      long long bits = 0;
      if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio) && nearest >= 1) {
        bits = detail::dense_code_length(static_cast<int>(nearest));
      } else {
        bits = static_cast<long long>(std::ceil(std::log2(ratio)));
      }
      return anchors * bits;
    }
  }
  return 0;
}

struct QuantizationStats {
  double max_error = 0.0;
  double mean_error = 0.0;
};

/// Encode/decode `n_samples` uniform canonical angles through `table` and
/// measure the modular error. Dense decoding maps bin k to its upper edge
/// 90 - omega * k, which is the encode rounding target, so the error is
/// uniform on [0, omega / 2].
inline QuantizationStats quantization_error_stats(const AngleCodeTable& table, std::size_t n_samples,
                                                  std::uint64_t seed) {
  if (n_samples < 1) throw InvalidInput("quantization_error_stats: n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half = table.period() / 2.0;
  QuantizationStats st;
  double sum = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    // u in [0, 1) maps to (-half, half].
    const double theta = half - table.period() * unit(rng);
    const auto logits = saturated_logits(table.codeword(discretize(theta, table)), 4.0);
    const double err = angular_distance(theta, decode_logits(logits, table), table.period());
    st.max_error = std::max(st.max_error, err);
    sum += err;
  }
  st.mean_error = sum / static_cast<double>(n_samples);
  return st;
}

inline QuantizationStats quantization_error_stats(double omega, std::size_t n_samples, std::uint64_t seed,
                                                  CodingScheme scheme = CodingScheme::BCL) {
  CodingConfig cfg;
  cfg.scheme = scheme;
  cfg.omega = omega;
  return quantization_error_stats(AngleCodeTable(cfg), n_samples, seed);
}

}  // namespace dcl
