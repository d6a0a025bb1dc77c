#pragma once

// DOTA annotation and detection files, flat JSON run configuration, and
// JSON / CSV report emission.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dcl/angle_coding.hpp"
#include "dcl/error.hpp"
#include "dcl/eval.hpp"
#include "dcl/geometry.hpp"
#include "dcl/loss.hpp"

namespace dcl {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct AnnotationRecord {
  QuadBox quad;
  std::string category;
  int difficult = 0;
  std::size_t line = 0;  // 1-based source line, 0 when not parsed from text

  bool operator==(const AnnotationRecord& o) const {
    return quad == o.quad && category == o.category && difficult == o.difficult;
  }
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, out);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

inline bool parse_int(std::string_view tok, long long& out) {
  const auto* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

inline bool is_header_line(std::string_view first_token) {
  static constexpr std::string_view keys[] = {"imagesource:", "gsd:", "imagesource", "gsd"};
  for (auto k : keys) {
    if (first_token.substr(0, k.size()) == k) return true;
  }
  return false;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    fn(line_no, line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

}  // namespace detail

/// Parse DOTA-style "x1 y1 ... x4 y4 category difficult" lines. Lines with
/// fewer than ten tokens and "imagesource:" / "gsd:" headers are skipped.
inline std::vector<AnnotationRecord> parse_dota_annotation(std::string_view text) {
  std::vector<AnnotationRecord> out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto tok = detail::split_ws(line);
    if (tok.empty() || detail::is_header_line(tok[0]) || tok.size() < 10) return;
    if (tok.size() > 10) throw ParseError(line_no, "expected 10 fields, got " + std::to_string(tok.size()));
    AnnotationRecord rec;
    rec.line = line_no;
    for (std::size_t i = 0; i < 4; ++i) {
      double x = 0, y = 0;
      if (!detail::parse_double(tok[2 * i], x) || !detail::parse_double(tok[2 * i + 1], y)) {
        throw ParseError(line_no, "malformed coordinate in '" + std::string(line) + "'");
      }
      rec.quad.vertices[i] = {x, y};
    }
    rec.category = std::string(tok[8]);
    long long diff = -1;
    if (!detail::parse_int(tok[9], diff) || diff < 0 || diff > 2) {
      throw ParseError(line_no, "difficult flag must be 0, 1 or 2, got '" + std::string(tok[9]) + "'");
    }
    rec.difficult = static_cast<int>(diff);
    out.push_back(std::move(rec));
  });
  return out;
}

inline std::string format_dota_line(const AnnotationRecord& rec) {
  std::string s;
  for (const auto& p : rec.quad.vertices) {
    s += detail::format_double(p.x) + ' ' + detail::format_double(p.y) + ' ';
  }
  s += rec.category + ' ' + std::to_string(rec.difficult);
  return s;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Ground truth from a directory of DOTA label files; the image id is the
/// file stem. Files are read in sorted name order.
inline std::vector<GroundTruthRecord> load_ground_truth_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<GroundTruthRecord> out;
  for (const auto& f : files) {
    const std::string text = read_text_file(f);
    std::vector<AnnotationRecord> recs;
    try {
      recs = parse_dota_annotation(text);
    } catch (const ParseError& e) {
      throw ParseError(e.line(), f.filename().string() + ": " + e.message());
    }
    for (const auto& r : recs) {
      out.push_back({f.stem().string(), r.category, quad_to_longside(r.quad), r.difficult != 0});
    }
  }
  return out;
}

/// Detection lines "image_id class score x1 y1 ... x4 y4".
inline std::vector<DetectionRecord> parse_detections(std::string_view text) {
  std::vector<DetectionRecord> out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') return;
    if (tok.size() != 11) throw ParseError(line_no, "expected 11 fields, got " + std::to_string(tok.size()));
    DetectionRecord d;
    d.image_id = std::string(tok[0]);
    d.class_id = std::string(tok[1]);
    if (!detail::parse_double(tok[2], d.score) || d.score < 0.0 || d.score > 1.0) {
      throw ParseError(line_no, "score must be a number in [0, 1]");
    }
    QuadBox q;
    for (std::size_t i = 0; i < 4; ++i) {
      double x = 0, y = 0;
      if (!detail::parse_double(tok[3 + 2 * i], x) || !detail::parse_double(tok[4 + 2 * i], y)) {
        throw ParseError(line_no, "malformed coordinate");
      }
      q.vertices[i] = {x, y};
    }
    try {
      d.box = quad_to_longside(q);
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
    out.push_back(std::move(d));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reports

using ReportCell = std::variant<std::int64_t, double, std::string>;

struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<ReportCell>> rows;
};

enum class ReportFormat { Json, Csv };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw InvalidConfig("unknown report format '" + std::string(s) + "'");
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_cell(const ReportCell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", *d);
    return buf;
  }
  return csv_escape(std::get<std::string>(c));
}

inline nlohmann::ordered_json json_cell(const ReportCell& c) {
  return std::visit([](const auto& v) { return nlohmann::ordered_json(v); }, c);
}

}  // namespace detail

inline void validate_report(const ReportTable& t) {
  for (const auto& r : t.rows) {
    if (r.size() != t.columns.size()) throw InvalidInput("report rows must match the column schema");
  }
}

inline void write_csv(const ReportTable& t, std::ostream& os) {
  validate_report(t);
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << detail::csv_escape(t.columns[i]);
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << detail::csv_cell(r[i]);
    os << '\n';
  }
}

/// {tool_version, config, rows, ...extra}; keys keep insertion order.
inline nlohmann::ordered_json report_json(const ReportTable& t, const nlohmann::ordered_json& config,
                                          const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  validate_report(t);
  nlohmann::ordered_json doc;
  doc["tool_version"] = kToolVersion;
  doc["config"] = config;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < r.size(); ++i) obj[t.columns[i]] = detail::json_cell(r[i]);
    rows.push_back(std::move(obj));
  }
  doc["rows"] = std::move(rows);
  for (const auto& [k, v] : extra.items()) doc[k] = v;
  return doc;
}

inline void emit_report(const ReportTable& t, ReportFormat fmt, std::ostream& os,
                        const nlohmann::ordered_json& config = nlohmann::ordered_json::object(),
                        const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  if (fmt == ReportFormat::Csv) {
    write_csv(t, os);
  } else {
    os << report_json(t, config, extra).dump(2) << '\n';
  }
  if (!os) throw IoError("failed writing report");
}

inline void emit_report(const ReportTable& t, ReportFormat fmt, const std::filesystem::path& path,
                        const nlohmann::ordered_json& config = nlohmann::ordered_json::object(),
                        const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  emit_report(t, fmt, out, config, extra);
}

// ---------------------------------------------------------------------------
// Run configuration: one flat JSON object.

struct RunConfig {
  CodingConfig coding{};
  WeightConfig weight{};
  LossConfig loss{};
  std::uint64_t seed = 0;
  int steps = 2000;
  double learning_rate = 1.0;
  double fit_aspect = 4.0;
  std::size_t targets = 1000;
  std::vector<double> omegas{180.0 / 4, 180.0 / 8, 180.0 / 32, 180.0 / 64, 180.0 / 128, 180.0 / 180, 180.0 / 256};
  std::string out;  // empty: stdout
  ReportFormat format = ReportFormat::Json;

  void validate() const {
    (void)AngleCodeTable(coding);
    weight.validate();
    loss.validate();
    if (steps < 1) throw InvalidConfig("steps must be >= 1");
    if (!(learning_rate > 0)) throw InvalidConfig("learning_rate must be positive");
    if (!(fit_aspect >= 1)) throw InvalidConfig("fit_aspect must be >= 1");
    if (targets < 1) throw InvalidConfig("targets must be >= 1");
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["scheme"] = to_string(c.coding.scheme);
  j["omega"] = c.coding.omega;
  j["angle_range"] = c.coding.angle_range;
  j["csl_radius"] = c.coding.csl_radius;
  j["csl_window"] = c.coding.csl_window == CslWindow::Gaussian ? "gaussian" : "pulse";
  j["decode_threshold"] = c.coding.decode_threshold;
  j["invalid_code"] = c.coding.invalid_code == InvalidCodePolicy::Wrap ? "wrap" : "clamp";
  j["scl_half_bin_offset"] = c.coding.scl_half_bin_offset;
  j["weight_mode"] = to_string(c.weight.mode);
  j["aspect_threshold"] = c.weight.aspect_threshold;
  j["lambda1"] = c.loss.lambda1;
  j["lambda2"] = c.loss.lambda2;
  j["lambda3"] = c.loss.lambda3;
  j["focal_alpha"] = c.loss.angle_focal.alpha;
  j["focal_gamma"] = c.loss.angle_focal.gamma;
  j["cls_focal_alpha"] = c.loss.cls_focal.alpha;
  j["cls_focal_gamma"] = c.loss.cls_focal.gamma;
  j["smooth_l1_beta"] = c.loss.smooth_l1_beta;
  j["bit_reduction"] = c.loss.bit_reduction == BitReduction::Sum ? "sum" : "mean";
  j["seed"] = c.seed;
  j["steps"] = c.steps;
  j["learning_rate"] = c.learning_rate;
  j["fit_aspect"] = c.fit_aspect;
  j["targets"] = c.targets;
  j["omegas"] = c.omegas;
  j["out"] = c.out;
  j["format"] = c.format == ReportFormat::Json ? "json" : "csv";
  return j;
}

/// Overlay the keys of a flat JSON object onto `base`. Unknown keys and
/// wrongly typed values are configuration errors.
inline RunConfig apply_config_json(RunConfig c, const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  auto num = [](const nlohmann::json& v, const std::string& k) {
    if (!v.is_number()) throw InvalidConfig("config key '" + k + "' must be a number");
    return v.get<double>();
  };
  auto str = [](const nlohmann::json& v, const std::string& k) {
    if (!v.is_string()) throw InvalidConfig("config key '" + k + "' must be a string");
    return v.get<std::string>();
  };
  auto uint = [&](const nlohmann::json& v, const std::string& k) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw InvalidConfig("config key '" + k + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  };
  for (const auto& [k, v] : j.items()) {
    if (k == "scheme") c.coding.scheme = parse_coding_scheme(str(v, k));
    else if (k == "omega") c.coding.omega = num(v, k);
    else if (k == "angle_range") c.coding.angle_range = num(v, k);
    else if (k == "csl_radius") c.coding.csl_radius = num(v, k);
    else if (k == "csl_window") {
      const auto s = str(v, k);
      if (s != "gaussian" && s != "pulse") throw InvalidConfig("csl_window must be gaussian or pulse");
      c.coding.csl_window = s == "gaussian" ? CslWindow::Gaussian : CslWindow::Pulse;
    } else if (k == "decode_threshold") c.coding.decode_threshold = num(v, k);
    else if (k == "invalid_code") {
      const auto s = str(v, k);
      if (s != "wrap" && s != "clamp") throw InvalidConfig("invalid_code must be wrap or clamp");
      c.coding.invalid_code = s == "wrap" ? InvalidCodePolicy::Wrap : InvalidCodePolicy::Clamp;
    } else if (k == "scl_half_bin_offset") {
      if (!v.is_boolean()) throw InvalidConfig("scl_half_bin_offset must be a boolean");
      c.coding.scl_half_bin_offset = v.get<bool>();
    } else if (k == "weight_mode") c.weight.mode = parse_weight_mode(str(v, k));
    else if (k == "aspect_threshold") c.weight.aspect_threshold = num(v, k);
    else if (k == "lambda1") c.loss.lambda1 = num(v, k);
    else if (k == "lambda2") c.loss.lambda2 = num(v, k);
    else if (k == "lambda3") c.loss.lambda3 = num(v, k);
    else if (k == "focal_alpha") c.loss.angle_focal.alpha = num(v, k);
    else if (k == "focal_gamma") c.loss.angle_focal.gamma = num(v, k);
    else if (k == "cls_focal_alpha") c.loss.cls_focal.alpha = num(v, k);
    else if (k == "cls_focal_gamma") c.loss.cls_focal.gamma = num(v, k);
    else if (k == "smooth_l1_beta") c.loss.smooth_l1_beta = num(v, k);
    else if (k == "bit_reduction") {
      const auto s = str(v, k);
      if (s != "sum" && s != "mean") throw InvalidConfig("bit_reduction must be sum or mean");
      c.loss.bit_reduction = s == "sum" ? BitReduction::Sum : BitReduction::Mean;
    } else if (k == "seed") c.seed = uint(v, k);
    else if (k == "steps") c.steps = static_cast<int>(uint(v, k));
    else if (k == "learning_rate") c.learning_rate = num(v, k);
    else if (k == "fit_aspect") c.fit_aspect = num(v, k);
    else if (k == "targets") c.targets = static_cast<std::size_t>(uint(v, k));
    else if (k == "omegas") {
      if (!v.is_array() || v.empty()) throw InvalidConfig("omegas must be a non-empty array");
      c.omegas.clear();
      for (const auto& e : v) c.omegas.push_back(num(e, k));
    } else if (k == "out") c.out = str(v, k);
    else if (k == "format") c.format = parse_report_format(str(v, k));
    else throw InvalidConfig("unknown config key '" + k + "'");
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig(path.string() + ": " + e.what());
  }
  return apply_config_json(RunConfig{}, j);
}

}  // namespace dcl
