// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "ibdpsc/errors.hpp"

namespace ibdpsc {

namespace {

void check_scores(const std::vector<ScoredSample>& samples) {
  for (const auto& s : samples) {
    if (!std::isfinite(s.score)) throw ConfigError("scores must be finite");
  }
}

std::vector<ScoredSample> sorted_desc(const std::vector<ScoredSample>& samples) {
  auto sorted = samples;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredSample& a, const ScoredSample& b) { return a.score > b.score; });
  return sorted;
}

}  // namespace

double auroc(const std::vector<ScoredSample>& samples) {
  check_scores(samples);
  std::size_t pos = 0;
  for (const auto& s : samples) pos += s.is_poisoned ? 1 : 0;
  const std::size_t neg = samples.size() - pos;
  if (pos == 0 || neg == 0) throw ConfigError("AUROC needs at least one positive and one negative sample");

  auto sorted = samples;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredSample& a, const ScoredSample& b) { return a.score < b.score; });
  // Twice the positive rank sum; midranks of tie groups are half-integers, so
  // doubling keeps everything integral and exact.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      group_pos += sorted[j].is_poisoned ? 1 : 0;
      ++j;
    }
    // ranks i+1 .. j, midrank (i+1+j)/2
    twice_rank_sum += static_cast<std::uint64_t>(group_pos) * (i + 1 + j);
    i = j;
  }
  const std::uint64_t twice_u = twice_rank_sum - static_cast<std::uint64_t>(pos) * (pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

ThresholdMetrics f1_at_threshold(const std::vector<ScoredSample>& samples, double threshold) {
  check_scores(samples);
  ThresholdMetrics m;
  for (const auto& s : samples) {
    const bool flagged = s.score > threshold;
    if (s.is_poisoned) {
      (flagged ? m.tp : m.fn) += 1;
    } else {
      (flagged ? m.fp : m.tn) += 1;
    }
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.tpr = m.recall;
  m.fpr = ratio(m.fp, m.fp + m.tn);
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

std::vector<RocPoint> roc_curve(const std::vector<ScoredSample>& samples) {
  check_scores(samples);
  std::size_t pos = 0;
  for (const auto& s : samples) pos += s.is_poisoned ? 1 : 0;
  const std::size_t neg = samples.size() - pos;
  if (pos == 0 || neg == 0) throw ConfigError("ROC curve needs at least one positive and one negative sample");

  const auto sorted = sorted_desc(samples);
  std::vector<RocPoint> curve;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    // Flagging "score > this value" leaves everything seen so far flagged.
    curve.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, sorted[i].score});
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].is_poisoned ? tp : fp) += 1;
      ++j;
    }
    i = j;
  }
  curve.push_back({1.0, 1.0, -std::numeric_limits<double>::infinity()});
  return curve;
}

double trapezoid_area(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& curve) {
  out << "fpr,tpr,threshold\n";
  for (const auto& p : curve) {
    out << fmt::format("{:.17g},{:.17g},{}\n", p.fpr, p.tpr,
                       std::isinf(p.threshold) ? std::string("-inf") : fmt::format("{:.17g}", p.threshold));
  }
}

namespace {

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string roc_svg(const std::vector<RocPoint>& curve, const std::string& title) {
  constexpr double size = 400.0, margin = 50.0;
  const auto px = [&](double fpr) { return margin + fpr * size; };
  const auto py = [&](double tpr) { return margin + (1.0 - tpr) * size; };
  std::string points;
  for (const auto& p : curve) points += fmt::format("{:.2f},{:.2f} ", px(p.fpr), py(p.tpr));
  if (!points.empty()) points.pop_back();

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
      size + 2 * margin);
  svg += fmt::format("  <rect x=\"{0}\" y=\"{0}\" width=\"{1}\" height=\"{1}\" fill=\"none\" stroke=\"black\"/>\n",
                     margin, size);
  svg += fmt::format(
      "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n", px(0), py(0),
      px(1), py(1));
  svg += fmt::format("  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n", points);
  svg += fmt::format("  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                     margin + size / 2, margin / 2, xml_escape(title));
  svg += fmt::format("  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">FPR</text>\n",
                     margin + size / 2, size + 1.7 * margin);
  svg += fmt::format(
      "  <text x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 {0} {1})\">TPR</text>\n",
      margin / 2, margin + size / 2);
  svg += "</svg>\n";
  return svg;
}

}  // namespace ibdpsc
