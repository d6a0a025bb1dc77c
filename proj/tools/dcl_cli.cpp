// Command-line front end: code tables, single encode/decode, head thickness,
// rotated IoU, loss sweeps, logit fitting, granularity studies and DOTA-style
// evaluation. Exit codes: 0 ok, 1 I/O failure, 2 config/parse error, 3 numeric
// divergence.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dcl/dcl.hpp"

namespace {

using nlohmann::ordered_json;

double parse_number(const std::string& tok) {
  const auto slash = tok.find('/');
  if (slash != std::string::npos) {
    const double num = parse_number(tok.substr(0, slash));
    const double den = parse_number(tok.substr(slash + 1));
    if (den == 0.0) throw dcl::InvalidConfig("division by zero in '" + tok + "'");
    return num / den;
  }
  double v = 0.0;
  std::string t = tok;
  t.erase(0, t.find_first_not_of(" \t"));
  t.erase(t.find_last_not_of(" \t") + 1);
  if (!dcl::detail::parse_double(t, v)) throw dcl::InvalidConfig("not a number: '" + tok + "'");
  return v;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_number(tok));
  if (out.empty()) throw dcl::InvalidConfig("empty list");
  return out;
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "Flat JSON run configuration");
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--out", c.out, "Output file (default: stdout)");
  sub->add_option("--format", c.format, "Report format: json or csv")->check(CLI::IsMember({"json", "csv"}));
}

dcl::RunConfig resolve(const Common& c) {
  dcl::RunConfig rc = c.config_path.empty() ? dcl::RunConfig{} : dcl::load_run_config(c.config_path);
  if (c.seed) rc.seed = *c.seed;
  if (!c.out.empty()) rc.out = c.out;
  if (!c.format.empty()) rc.format = dcl::parse_report_format(c.format);
  return rc;
}

void write(const dcl::RunConfig& rc, const dcl::ReportTable& t, const ordered_json& extra = ordered_json::object()) {
  if (rc.out.empty()) {
    dcl::emit_report(t, rc.format, std::cout, dcl::to_json(rc), extra);
  } else {
    dcl::emit_report(t, rc.format, std::filesystem::path(rc.out), dcl::to_json(rc), extra);
  }
}

std::string join_values(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v[i]);
    s += (i ? ";" : "");
    s += buf;
  }
  return s;
}

std::string codeword_text(const dcl::AngleCodeTable& t, int i) {
  return t.dense() ? t.codeword_string(i) : join_values(t.codeword(i));
}

dcl::RotatedBoxLongSide parse_box(const std::string& s) {
  const auto v = parse_list(s);
  if (v.size() != 5) throw dcl::InvalidConfig("box needs 5 values x,y,h,w,theta: '" + s + "'");
  return dcl::make_longside(v[0], v[1], v[2], v[3], v[4]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Angle coding, loss weighting and rotated-box evaluation toolkit"};
  app.require_subcommand(1);
  Common common;

  // codes
  auto* codes = app.add_subcommand("codes", "Dump the code table of one scheme");
  std::string scheme = "bcl";
  std::optional<double> omega_opt;
  std::optional<double> range_opt;
  std::string omega_text;
  codes->add_option("--scheme", scheme)->check(CLI::IsMember({"onehot", "csl", "bcl", "gcl"}));
  codes->add_option("--omega", omega_text, "Degrees per bin (e.g. 22.5 or 180/8)");
  codes->add_option("--angle-range", range_opt);
  add_common(codes, common);

  // encode / decode
  auto* encode = app.add_subcommand("encode", "Encode one angle");
  double theta = 0.0;
  encode->add_option("--theta", theta)->required();
  encode->add_option("--scheme", scheme)->check(CLI::IsMember({"onehot", "csl", "bcl", "gcl"}));
  encode->add_option("--omega", omega_text);
  encode->add_option("--angle-range", range_opt);
  add_common(encode, common);

  auto* decode = app.add_subcommand("decode", "Decode one logit vector");
  std::string logits_text;
  decode->add_option("--logits", logits_text, "Comma-separated logits")->required();
  decode->add_option("--scheme", scheme)->check(CLI::IsMember({"onehot", "csl", "bcl", "gcl"}));
  decode->add_option("--omega", omega_text);
  decode->add_option("--angle-range", range_opt);
  add_common(decode, common);

  // thickness
  auto* thickness = app.add_subcommand("thickness", "Angle head channels per location");
  std::string method = "bcl";
  long long anchors = 9;
  thickness->add_option("--method", method)->required()->check(CLI::IsMember({"reg", "onehot", "csl", "bcl", "gcl"}));
  thickness->add_option("--anchors", anchors)->required();
  thickness->add_option("--omega", omega_text);
  thickness->add_option("--angle-range", range_opt);
  add_common(thickness, common);

  // iou
  auto* iou = app.add_subcommand("iou", "Rotated IoU of two boxes");
  std::string box1, box2;
  iou->add_option("--box1", box1, "x,y,h,w,theta")->required();
  iou->add_option("--box2", box2, "x,y,h,w,theta")->required();
  add_common(iou, common);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Loss curve over predicted angles");
  double theta_gt = 0.0, aspect = 1.0, step = 1.0;
  std::string sweep_method;
  sweep->add_option("--theta-gt", theta_gt)->required();
  sweep->add_option("--aspect", aspect)->required();
  sweep->add_option("--method", sweep_method)
      ->required()
      ->check(CLI::IsMember({"reg_smoothl1", "reg_smoothl1_opencv", "dcl_plain", "dcl_log", "dcl_adarsw", "csl"}));
  sweep->add_option("--step", step)->required();
  sweep->add_option("--scheme", scheme)->check(CLI::IsMember({"bcl", "gcl"}));
  sweep->add_option("--omega", omega_text);
  add_common(sweep, common);

  // fit
  auto* fit = app.add_subcommand("fit", "Gradient-descent fit of free angle logits");
  std::optional<std::size_t> targets_opt;
  std::optional<int> steps_opt;
  std::optional<double> lr_opt;
  std::optional<double> fit_theta;
  fit->add_option("--targets", targets_opt, "Number of uniform target angles");
  fit->add_option("--theta-gt", fit_theta, "Fit one target and report its trajectory");
  fit->add_option("--omega", omega_text);
  fit->add_option("--steps", steps_opt);
  fit->add_option("--lr", lr_opt);
  fit->add_option("--scheme", scheme)->check(CLI::IsMember({"onehot", "csl", "bcl", "gcl"}));
  add_common(fit, common);

  // granularity
  auto* gran = app.add_subcommand("granularity", "Quantization and fit rate per omega");
  std::string omegas_text;
  gran->add_option("--omegas", omegas_text, "Comma-separated omegas, e.g. 180/4,180/256");
  gran->add_option("--targets", targets_opt);
  gran->add_option("--steps", steps_opt);
  gran->add_option("--lr", lr_opt);
  gran->add_option("--scheme", scheme)->check(CLI::IsMember({"bcl", "gcl", "onehot", "csl"}));
  add_common(gran, common);

  // eval
  auto* ev = app.add_subcommand("eval", "Per-class AP and mAP of rotated detections");
  std::string gt_dir, dets_file, metric = "voc07";
  double iou_thresh = 0.5;
  ev->add_option("--gt", gt_dir, "Directory of DOTA label files")->required();
  ev->add_option("--dets", dets_file, "Detection file")->required();
  ev->add_option("--iou-thresh", iou_thresh);
  ev->add_option("--metric", metric)->check(CLI::IsMember({"voc07", "voc12"}));
  add_common(ev, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    dcl::RunConfig rc = resolve(common);
    auto* active = app.get_subcommands().front();
    const auto given = [&](const char* name) { return active->get_option_no_throw(name) != nullptr &&
                                                      active->get_option(name)->count() > 0; };
    if (given("--scheme")) rc.coding.scheme = dcl::parse_coding_scheme(scheme);
    if (given("--omega")) rc.coding.omega = parse_number(omega_text);
    if (range_opt) rc.coding.angle_range = *range_opt;
    if (targets_opt) rc.targets = *targets_opt;
    if (steps_opt) rc.steps = *steps_opt;
    if (lr_opt) rc.learning_rate = *lr_opt;
    if (!omegas_text.empty()) rc.omegas = parse_list(omegas_text);
    rc.validate();

    if (active == codes) {
      const dcl::AngleCodeTable table(rc.coding);
      dcl::ReportTable t{{"index", "angle", "codeword"}, {}};
      ordered_json words = ordered_json::array();
      for (int i = 0; i < table.num_categories(); ++i) {
        t.rows.push_back({std::int64_t{i}, table.angle_of_category(i), codeword_text(table, i)});
        if (table.dense()) {
          words.push_back(table.codeword_string(i));
        } else {
          const auto cw = table.codeword(i);
          words.push_back(std::vector<double>(cw.begin(), cw.end()));
        }
      }
      ordered_json extra;
      extra["scheme"] = dcl::to_string(table.scheme());
      extra["omega"] = table.omega();
      extra["num_categories"] = table.num_categories();
      extra["code_length"] = table.code_length();
      extra["codewords"] = std::move(words);
      write(rc, t, extra);
    } else if (active == encode) {
      const dcl::AngleCodeTable table(rc.coding);
      const int k = dcl::discretize(theta, table);
      write(rc, {{"theta", "index", "codeword"}, {{theta, std::int64_t{k}, codeword_text(table, k)}}});
    } else if (active == decode) {
      const dcl::AngleCodeTable table(rc.coding);
      const auto logits = parse_list(logits_text);
      const int k = dcl::decode_category(logits, table);
      write(rc, {{"index", "theta"}, {{std::int64_t{k}, dcl::decode_logits(logits, table)}}});
    } else if (active == thickness) {
      const auto m = dcl::parse_angle_method(method);
      const long long th = dcl::prediction_thickness(m, anchors, rc.coding.angle_range, rc.coding.omega);
      write(rc, {{"method", "anchors", "angle_range", "omega", "thickness"},
                 {{method, std::int64_t{anchors}, rc.coding.angle_range, rc.coding.omega, std::int64_t{th}}}});
    } else if (active == iou) {
      const double v = dcl::rotated_iou(parse_box(box1), parse_box(box2));
      write(rc, {{"iou"}, {{v}}});
    } else if (active == sweep) {
      const auto m = dcl::parse_sweep_method(sweep_method);
      dcl::CodingConfig cc = rc.coding;
      if (m == dcl::SweepMethod::Csl) cc.scheme = dcl::CodingScheme::CSL;
      else if (!dcl::is_dense(cc.scheme)) cc.scheme = dcl::CodingScheme::BCL;
      const dcl::AngleCodeTable table(cc);
      const auto r = dcl::loss_surface_sweep(theta_gt, aspect, m, table, rc.weight, rc.loss, step);
      dcl::ReportTable t{{"theta_pred", "loss"}, {}};
      for (const auto& p : r.points) t.rows.push_back({p.theta_pred, p.loss});
      ordered_json extra;
      extra["method"] = dcl::to_string(m);
      extra["table_scheme"] = dcl::to_string(table.scheme());
      extra["theta_gt"] = r.theta_gt;
      extra["aspect"] = r.aspect;
      write(rc, t, extra);
    } else if (active == fit) {
      const dcl::AngleCodeTable table(rc.coding);
      dcl::FitOptions fo;
      fo.steps = rc.steps;
      fo.learning_rate = rc.learning_rate;
      fo.seed = rc.seed;
      fo.aspect = rc.fit_aspect;
      if (fit_theta) {
        const auto tr = dcl::fit_logits(*fit_theta, table, rc.weight, rc.loss, fo);
        dcl::ReportTable t{{"step", "loss", "decoded"}, {}};
        for (std::size_t i = 0; i < tr.steps.size(); ++i) {
          t.rows.push_back({static_cast<std::int64_t>(i + 1), tr.steps[i].loss, tr.steps[i].decoded});
        }
        ordered_json extra;
        extra["theta_gt"] = tr.theta_gt;
        extra["final_error"] = tr.final_error;
        extra["converged"] = tr.converged;
        write(rc, t, extra);
      } else {
        const auto targets = dcl::uniform_targets(rc.targets, rc.seed);
        dcl::ReportTable t{{"target", "theta_gt", "steps", "final_loss", "decoded", "final_error", "converged"}, {}};
        std::size_t ok = 0;
        for (std::size_t i = 0; i < targets.size(); ++i) {
          dcl::FitOptions o = fo;
          o.seed = dcl::task_seed(rc.seed, i);
          const auto tr = dcl::fit_logits(targets[i], table, rc.weight, rc.loss, o);
          ok += tr.converged ? 1 : 0;
          t.rows.push_back({static_cast<std::int64_t>(i), tr.theta_gt, static_cast<std::int64_t>(tr.steps.size()),
                            tr.steps.back().loss, tr.steps.back().decoded, tr.final_error,
                            std::int64_t{tr.converged ? 1 : 0}});
        }
        ordered_json extra;
        extra["targets"] = targets.size();
        extra["converged"] = ok;
        extra["success_rate"] = static_cast<double>(ok) / static_cast<double>(targets.size());
        write(rc, t, extra);
      }
    } else if (active == gran) {
      dcl::GranularityOptions go;
      go.coding = rc.coding;
      go.n_targets = rc.targets;
      go.seed = rc.seed;
      go.fit.steps = rc.steps;
      go.fit.learning_rate = rc.learning_rate;
      go.fit.aspect = rc.fit_aspect;
      const auto rows = dcl::granularity_study(rc.omegas, go, rc.weight, rc.loss);
      dcl::ReportTable t{{"omega", "C", "code_length", "max_error", "mean_error", "fit_rate"}, {}};
      for (const auto& r : rows) {
        t.rows.push_back({r.omega, std::int64_t{r.categories}, std::int64_t{r.code_length}, r.max_error,
                          r.mean_error, r.fit_rate});
      }
      write(rc, t);
    } else if (active == ev) {
      const auto gts = dcl::load_ground_truth_dir(gt_dir);
      const auto dets = dcl::parse_detections(dcl::read_text_file(dets_file));
      const auto res = dcl::evaluate_detections(dets, gts, iou_thresh, dcl::parse_ap_metric(metric));
      dcl::ReportTable t{{"class", "ap", "n_gt"}, {}};
      for (const auto& r : res.per_class) t.rows.push_back({r.class_id, r.ap, static_cast<std::int64_t>(r.n_gt)});
      ordered_json extra;
      extra["metric"] = metric;
      extra["iou_threshold"] = iou_thresh;
      extra["mAP"] = res.map;
      if (rc.format == dcl::ReportFormat::Csv) t.rows.push_back({std::string("mAP"), res.map, std::int64_t{0}});
      write(rc, t, extra);
    }
  } catch (const dcl::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const dcl::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const dcl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
