// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ibdpsc/detector.hpp"
#include "ibdpsc/errors.hpp"
#include "ibdpsc/metrics.hpp"
#include "ibdpsc/model_io.hpp"
#include "ibdpsc/purifier.hpp"
#include "ibdpsc/report_io.hpp"
#include "ibdpsc/selector.hpp"
#include "ibdpsc/theory.hpp"

namespace ibdpsc {

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOptions {
  std::uint64_t seed = 0;
};

struct DetectorOptions {
  double omega = 1.5;
  std::size_t n = 5;
  double xi = 0.6;
  double threshold = 0.9;
  std::size_t k = 0;  // 0: select on the benign set
  bool allow_shrink = false;

  DetectorConfig config() const {
    DetectorConfig cfg;
    cfg.omega = omega;
    cfg.n = n;
    cfg.xi = xi;
    cfg.threshold = threshold;
    if (k > 0) cfg.k = k;
    cfg.mode = allow_shrink ? ScalingMode::allow_shrink : ScalingMode::amplify_only;
    return cfg;
  }
};

void add_detector_flags(CLI::App* cmd, DetectorOptions& o, bool with_k) {
  cmd->add_option("--omega", o.omega, "BN scaling factor")->capture_default_str();
  cmd->add_option("--n", o.n, "number of amplified views")->capture_default_str();
  cmd->add_option("--xi", o.xi, "benign error-rate threshold for layer selection")->capture_default_str();
  cmd->add_option("--threshold", o.threshold, "PSC verdict threshold T")->capture_default_str();
  if (with_k) cmd->add_option("--k", o.k, "starting amplified layer count (default: select on --benign)");
  cmd->add_flag("--allow-shrink", o.allow_shrink, "permit omega < 1 (shrinking ablation)");
}

struct LoadedModel {
  ModelGraph graph;
  std::string sha256;
};

LoadedModel load_model_with_hash(const std::string& path) {
  const auto bytes = read_file(path);
  return {decode_model(bytes), sha256_hex(bytes)};
}

Provenance base_provenance(const std::string& command, const CommonOptions& common) {
  return {{"tool", "ibdpsc"}, {"version", kVersion}, {"command", command}, {"seed", std::to_string(common.seed)}};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path));
  return out;
}

void write_eta_csv(const std::string& path, const SelectionResult& sel, const Provenance& prov) {
  auto out = open_out(path);
  write_provenance(out, prov);
  out << "k,eta\n";
  for (std::size_t i = 0; i < sel.eta_curve.size(); ++i) out << fmt::format("{},{:.17g}\n", i + 1, sel.eta_curve[i]);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(',', start);
    const std::string cell = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("cannot parse number '{}' in list '{}'", cell, text));
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Input-level backdoor detection by BN parameter-amplification consistency", "ibdpsc"};
  app.require_subcommand(1);
  CommonOptions common;
  app.add_option("--seed", common.seed, "seed recorded in provenance and used by stochastic commands")
      ->capture_default_str();

  // select-layers
  auto* sel_cmd = app.add_subcommand("select-layers", "choose k on a benign reference set");
  std::string sel_model, sel_benign, sel_out = "eta_curve.csv";
  DetectorOptions sel_opts;
  sel_cmd->add_option("--model", sel_model, "model container (.ibdm)")->required();
  sel_cmd->add_option("--benign", sel_benign, "benign reference set (.ibds)")->required();
  sel_cmd->add_option("--omega", sel_opts.omega, "BN scaling factor")->capture_default_str();
  sel_cmd->add_option("--xi", sel_opts.xi, "error-rate threshold")->capture_default_str();
  sel_cmd->add_option("--out", sel_out, "eta curve CSV")->capture_default_str();
  sel_cmd->add_flag("--allow-shrink", sel_opts.allow_shrink, "permit omega < 1");

  // detect
  auto* det_cmd = app.add_subcommand("detect", "score inputs and write a detection report");
  std::string det_model, det_input, det_benign, det_out = "report.csv";
  DetectorOptions det_opts;
  det_cmd->add_option("--model", det_model, "model container (.ibdm)")->required();
  det_cmd->add_option("--input", det_input, "images to screen (.ibds)")->required();
  det_cmd->add_option("--benign", det_benign, "benign reference set, needed when --k is absent");
  det_cmd->add_option("--out", det_out, "report CSV")->capture_default_str();
  add_detector_flags(det_cmd, det_opts, true);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "AUROC/F1 of a report against ground-truth flags");
  std::string eval_report, eval_flags, eval_json;
  double eval_threshold = -1.0;
  eval_cmd->add_option("--report", eval_report, "report CSV from detect")->required();
  eval_cmd->add_option("--flags", eval_flags, "dataset carrying poison flags (.ibds)")->required();
  eval_cmd->add_option("--threshold", eval_threshold, "verdict threshold (default: the report's T)");
  eval_cmd->add_option("--json", eval_json, "also write metrics as JSON");

  // purify
  auto* pur_cmd = app.add_subcommand("purify", "partition a suspect training set into keep/drop");
  std::string pur_model, pur_suspect, pur_benign, pur_out = "purified";
  DetectorOptions pur_opts;
  pur_cmd->add_option("--model", pur_model, "model trained on the suspect set (.ibdm)")->required();
  pur_cmd->add_option("--suspect", pur_suspect, "suspect training set (.ibds)")->required();
  pur_cmd->add_option("--benign", pur_benign, "benign reference set (.ibds)")->required();
  pur_cmd->add_option("--out-dir", pur_out, "directory for keep.txt, drop.txt, summary.json")->capture_default_str();
  add_detector_flags(pur_cmd, pur_opts, true);

  // theory-check
  auto* th_cmd = app.add_subcommand("theory-check", "certify the norm threshold and simulate amplification");
  std::size_t th_classes = 4, th_target = 0, th_stages = 3, th_samples = 100000;
  double th_radius = 3.0, th_sigma_other = 1.0, th_sigma_target = 2.0;
  std::string th_omegas = "1,1.5,2", th_json = "certificate.json", th_csv = "norm_curves.csv";
  th_cmd->add_option("--classes", th_classes, "class count")->capture_default_str();
  th_cmd->add_option("--target", th_target, "target class")->capture_default_str();
  th_cmd->add_option("--radius", th_radius, "distance of class means from the origin")->capture_default_str();
  th_cmd->add_option("--sigma-other", th_sigma_other, "std of non-target classes")->capture_default_str();
  th_cmd->add_option("--sigma-target", th_sigma_target, "std of the target class")->capture_default_str();
  th_cmd->add_option("--stages", th_stages, "BN stages in the simulated chain")->capture_default_str();
  th_cmd->add_option("--omegas", th_omegas, "comma-separated scaling factors")->capture_default_str();
  th_cmd->add_option("--samples", th_samples, "Monte-Carlo sample count")->capture_default_str();
  th_cmd->add_option("--out-json", th_json, "certificate JSON")->capture_default_str();
  th_cmd->add_option("--out-csv", th_csv, "norm-vs-k CSV")->capture_default_str();

  // plot-roc
  auto* roc_cmd = app.add_subcommand("plot-roc", "export the ROC curve of a report as CSV and SVG");
  std::string roc_report, roc_flags, roc_csv = "roc.csv", roc_svg_path = "roc.svg", roc_title = "ROC";
  roc_cmd->add_option("--report", roc_report, "report CSV from detect")->required();
  roc_cmd->add_option("--flags", roc_flags, "dataset carrying poison flags (.ibds)")->required();
  roc_cmd->add_option("--csv", roc_csv, "curve CSV")->capture_default_str();
  roc_cmd->add_option("--svg", roc_svg_path, "curve SVG")->capture_default_str();
  roc_cmd->add_option("--title", roc_title, "plot title")->capture_default_str();

  std::vector<std::string> argv_storage{"ibdpsc"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sel_cmd) {
      const auto model = load_model_with_hash(sel_model);
      const LabeledSet benign = load_dataset(sel_benign);
      const auto mode = sel_opts.allow_shrink ? ScalingMode::allow_shrink : ScalingMode::amplify_only;
      const auto sel = select_k(model.graph, sel_opts.omega, sel_opts.xi, benign, mode);
      auto prov = base_provenance("select-layers", common);
      prov.insert(prov.end(), {{"model", sel_model},
                               {"model_sha256", model.sha256},
                               {"benign", sel_benign},
                               {"omega", fmt::format("{:.17g}", sel_opts.omega)},
                               {"xi", fmt::format("{:.17g}", sel_opts.xi)},
                               {"k", std::to_string(sel.k)},
                               {"saturated", sel.saturated ? "true" : "false"}});
      write_eta_csv(sel_out, sel, prov);
      out << "k=" << sel.k << '\n';
      out << "saturated=" << (sel.saturated ? "true" : "false") << '\n';
      if (sel.saturated) {
        err << fmt::format("warning: error rate never exceeded xi={}; using k=L_bn={}\n", sel_opts.xi, sel.k);
      }
    } else if (*det_cmd) {
      const auto model = load_model_with_hash(det_model);
      const LabeledSet input = load_dataset(det_input);
      DetectorConfig cfg = det_opts.config();
      cfg.validate();
      auto prov = base_provenance("detect", common);
      prov.insert(prov.end(), {{"model", det_model}, {"model_sha256", model.sha256}, {"input", det_input}});
      if (!cfg.k) {
        if (det_benign.empty()) throw ConfigError("detect needs --k or a --benign reference set for layer selection");
        const auto sel = select_k(model.graph, cfg.omega, cfg.xi, load_dataset(det_benign), cfg.mode);
        cfg.k = sel.k;
        prov.insert(prov.end(), {{"benign", det_benign},
                                 {"k_source", "selected"},
                                 {"eta_curve", fmt::format("{}", fmt::join(sel.eta_curve, ";"))},
                                 {"selection_saturated", sel.saturated ? "true" : "false"}});
        if (sel.saturated) err << fmt::format("warning: layer selection saturated; using k={}\n", sel.k);
      } else {
        prov.emplace_back("k_source", "given");
      }
      const auto report = detect(model.graph, cfg, input);
      for (const auto& w : report.warnings) err << "warning: " << w << '\n';
      auto csv = open_out(det_out);
      write_report_csv(csv, report, prov);
      out << fmt::format("samples={} flagged={} k={} views={}\n", report.samples.size(),
                         report.flagged_indices().size(), report.k, fmt::join(report.views, ","));
    } else if (*eval_cmd) {
      std::ifstream in(eval_report);
      if (!in) throw IoError(fmt::format("cannot open '{}' for reading", eval_report));
      const auto loaded = read_report_csv(in);
      const LabeledSet flags = load_dataset(eval_flags);
      const auto scored = scored_samples(loaded.report, flags);
      const double threshold = eval_threshold >= 0.0 ? eval_threshold : loaded.report.config.threshold;
      const double auc = auroc(scored);
      const auto m = f1_at_threshold(scored, threshold);
      out << fmt::format("auroc={:.6f}\nf1={:.6f}\nprecision={:.6f}\nrecall={:.6f}\ntpr={:.6f}\nfpr={:.6f}\n", auc,
                         m.f1, m.precision, m.recall, m.tpr, m.fpr);
      out << fmt::format("threshold={}\ntp={} fp={} tn={} fn={}\n", threshold, m.tp, m.fp, m.tn, m.fn);
      if (!eval_json.empty()) {
        nlohmann::json j = {{"auroc", auc},  {"f1", m.f1}, {"precision", m.precision}, {"recall", m.recall},
                            {"tpr", m.tpr},  {"fpr", m.fpr}, {"threshold", threshold},   {"tp", m.tp},
                            {"fp", m.fp},    {"tn", m.tn},   {"fn", m.fn}};
        nlohmann::json prov = nlohmann::json::object();
        for (const auto& [k, v] : base_provenance("evaluate", common)) prov[k] = v;
        prov["report"] = eval_report;
        prov["flags"] = eval_flags;
        j["provenance"] = prov;
        open_out(eval_json) << j.dump(2) << '\n';
      }
    } else if (*pur_cmd) {
      const auto model = load_model_with_hash(pur_model);
      const LabeledSet suspect = load_dataset(pur_suspect);
      const LabeledSet benign = load_dataset(pur_benign);
      const auto result = purify(model.graph, suspect, pur_opts.config(), benign);
      auto prov = base_provenance("purify", common);
      prov.insert(prov.end(), {{"model", pur_model},
                               {"model_sha256", model.sha256},
                               {"suspect", pur_suspect},
                               {"benign", pur_benign}});
      write_purification(result, pur_out, prov);
      for (const auto& w : result.report.warnings) err << "warning: " << w << '\n';
      out << fmt::format("total={} kept={} removed={} k={}\n", result.summary.total, result.keep_indices.size(),
                         result.summary.removed, result.k);
      if (result.summary.counts) {
        out << fmt::format("tpr={:.6f} fpr={:.6f}", result.summary.counts->tpr, result.summary.counts->fpr);
        if (result.summary.auroc) out << fmt::format(" auroc={:.6f}", *result.summary.auroc);
        out << '\n';
      }
    } else if (*th_cmd) {
      const auto head = make_symmetric_head(th_classes, th_radius, th_sigma_other, th_sigma_target, th_target);
      const auto cert = certify_norm_threshold(head);
      const auto omegas = parse_list(th_omegas);
      const auto sim =
          simulate_amplification(head, identity_chain(th_stages, head.dim()), omegas, th_samples, common.seed);

      nlohmann::json j;
      j["backdoor_condition_holds"] = cert.backdoor_condition_holds;
      j["m"] = std::isinf(cert.m) ? nlohmann::json("inf") : nlohmann::json(cert.m);
      j["any_clamped"] = cert.any_clamped;
      for (const auto& p : cert.pairs) {
        j["pairs"].push_back({{"class", p.other},
                              {"bound", std::isinf(p.bound) ? nlohmann::json("inf") : nlohmann::json(p.bound)},
                              {"clamped", p.clamped}});
      }
      j["head"] = {{"classes", th_classes},           {"target", th_target},
                   {"radius", th_radius},             {"sigma_other", th_sigma_other},
                   {"sigma_target", th_sigma_target}, {"means", head.means}};
      std::size_t above = 0, above_target = 0;
      for (const auto& p : sim.points) {
        above += p.above_m;
        above_target += p.above_m_target;
      }
      j["simulation"] = {{"seed", sim.seed},
                         {"samples", sim.samples},
                         {"stages", th_stages},
                         {"omegas", omegas},
                         {"above_m", above},
                         {"above_m_target", above_target}};
      nlohmann::json prov = nlohmann::json::object();
      for (const auto& [k, v] : base_provenance("theory-check", common)) prov[k] = v;
      j["provenance"] = prov;
      open_out(th_json) << j.dump(2) << '\n';

      auto csv = open_out(th_csv);
      write_provenance(csv, base_provenance("theory-check", common));
      csv << "omega,k,mean_norm,norm_std,target_fraction,top_decile_target_fraction,above_m,above_m_target\n";
      for (const auto& p : sim.points) {
        csv << fmt::format("{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", p.omega, p.k, p.mean_norm,
                           p.norm_std, p.target_fraction, p.top_decile_target_fraction, p.above_m,
                           p.above_m_target);
      }
      out << fmt::format("condition={} M={:.6f} above_M={} above_M_target={}\n", cert.backdoor_condition_holds,
                         cert.m, above, above_target);
    } else if (*roc_cmd) {
      std::ifstream in(roc_report);
      if (!in) throw IoError(fmt::format("cannot open '{}' for reading", roc_report));
      const auto loaded = read_report_csv(in);
      const auto scored = scored_samples(loaded.report, load_dataset(roc_flags));
      const auto curve = roc_curve(scored);
      auto csv = open_out(roc_csv);
      auto prov = base_provenance("plot-roc", common);
      prov.insert(prov.end(), {{"report", roc_report}, {"flags", roc_flags}});
      write_provenance(csv, prov);
      write_roc_csv(csv, curve);
      open_out(roc_svg_path) << roc_svg(curve, roc_title);
      out << fmt::format("points={} auroc={:.6f}\n", curve.size(), trapezoid_area(curve));
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace ibdpsc
