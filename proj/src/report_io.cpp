// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/report_io.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "ibdpsc/errors.hpp"

namespace ibdpsc {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

const std::string* find(const Provenance& p, const std::string& key) {
  for (const auto& [k, v] : p) {
    if (k == key) return &v;
  }
  return nullptr;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(fmt::format("report: cannot parse {} from '{}'", what, s));
  }
}

std::size_t parse_size(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size() || s.front() == '-') throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError(fmt::format("report: cannot parse {} from '{}'", what, s));
  }
}

}  // namespace

void write_provenance(std::ostream& out, const Provenance& provenance) {
  for (const auto& [key, value] : provenance) out << "# " << key << '=' << value << '\n';
}

Provenance report_provenance(const DetectionReport& report) {
  std::string warnings;
  for (const auto& w : report.warnings) warnings += (warnings.empty() ? "" : " | ") + w;
  return {
      {"omega", fmt::format("{:.17g}", report.config.omega)},
      {"n", std::to_string(report.config.n)},
      {"xi", fmt::format("{:.17g}", report.config.xi)},
      {"threshold", fmt::format("{:.17g}", report.config.threshold)},
      {"k", std::to_string(report.k)},
      {"views", fmt::format("{}", fmt::join(report.views, ";"))},
      {"truncated", report.truncated ? "true" : "false"},
      {"warnings", warnings},
  };
}

void write_report_csv(std::ostream& out, const DetectionReport& report, const Provenance& extra) {
  write_provenance(out, extra);
  write_provenance(out, report_provenance(report));
  out << "sample_index,y_prime,psc,verdict";
  for (std::size_t i = 1; i <= report.config.n; ++i) out << ",view_conf_" << i;
  out << '\n';
  for (const auto& s : report.samples) {
    out << fmt::format("{},{},{:.17g},{}", s.index, s.y_prime, s.psc, s.poisoned ? "poisoned" : "benign");
    for (std::size_t i = 0; i < report.config.n; ++i) {
      out << ',';
      if (i < s.per_view.size()) out << fmt::format("{:.9g}", s.per_view[i]);
    }
    out << '\n';
  }
}

LoadedReport read_report_csv(std::istream& in) {
  LoadedReport loaded;
  std::string line;
  bool header_seen = false;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("report: provenance line without '=': " + line);
      loaded.provenance.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    const auto cells = split(line, ',');
    if (!header_seen) {
      if (cells.size() < 4 || cells[0] != "sample_index" || cells[1] != "y_prime" || cells[2] != "psc" ||
          cells[3] != "verdict") {
        throw FormatError("report: missing header 'sample_index,y_prime,psc,verdict,...'");
      }
      columns = cells.size();
      header_seen = true;
      continue;
    }
    if (cells.size() != columns) {
      throw FormatError(fmt::format("report: row has {} cells, header has {}", cells.size(), columns));
    }
    SampleVerdict v;
    v.index = parse_size(cells[0], "sample_index");
    v.y_prime = parse_size(cells[1], "y_prime");
    v.psc = parse_double(cells[2], "psc");
    if (cells[3] == "poisoned") {
      v.poisoned = true;
    } else if (cells[3] != "benign") {
      throw FormatError("report: verdict must be 'poisoned' or 'benign', got '" + cells[3] + "'");
    }
    for (std::size_t c = 4; c < cells.size(); ++c) {
      if (cells[c].empty()) break;
      v.per_view.push_back(static_cast<float>(parse_double(cells[c], "view confidence")));
    }
    loaded.report.samples.push_back(std::move(v));
  }
  if (!header_seen) throw FormatError("report: no table found");

  auto& cfg = loaded.report.config;
  cfg.n = columns - 4;
  if (const auto* v = find(loaded.provenance, "omega")) cfg.omega = parse_double(*v, "omega");
  if (const auto* v = find(loaded.provenance, "xi")) cfg.xi = parse_double(*v, "xi");
  if (const auto* v = find(loaded.provenance, "threshold")) cfg.threshold = parse_double(*v, "threshold");
  if (const auto* v = find(loaded.provenance, "k")) {
    loaded.report.k = parse_size(*v, "k");
    cfg.k = loaded.report.k;
  }
  if (const auto* v = find(loaded.provenance, "views"); v && !v->empty()) {
    for (const auto& cell : split(*v, ';')) loaded.report.views.push_back(parse_size(cell, "views"));
  }
  if (const auto* v = find(loaded.provenance, "truncated")) loaded.report.truncated = *v == "true";
  if (cfg.omega < 1.0) cfg.mode = ScalingMode::allow_shrink;
  return loaded;
}

std::vector<ScoredSample> scored_samples(const DetectionReport& report, const LabeledSet& flags) {
  if (!flags.has_flags()) {
    throw FormatError("dataset has no poison flags; evaluation needs ground-truth flags");
  }
  const auto& f = *flags.poison_flags;
  std::vector<ScoredSample> out;
  out.reserve(report.samples.size());
  for (const auto& s : report.samples) {
    if (s.index >= f.size()) {
      throw FormatError(fmt::format("report sample {} has no flag (dataset holds {} samples)", s.index, f.size()));
    }
    out.push_back({s.psc, static_cast<bool>(f[s.index])});
  }
  if (out.size() != f.size()) {
    throw FormatError(fmt::format("report has {} rows but the flag set has {} samples", out.size(), f.size()));
  }
  return out;
}

}  // namespace ibdpsc
