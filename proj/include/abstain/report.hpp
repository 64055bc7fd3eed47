// Copyright 2026 The Abstain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// CSV summaries and a dependency-free SVG learning-curve chart.

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "abstain/grpo.hpp"

namespace abstain {

inline constexpr std::string_view kSummaryHeader = "id,r1,r2,rl,sem,em,tp,fp,fn";

inline std::string fmt_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// One row per item plus a final "all" row. em is a percentage; tp/fp/fn are
// 0/1 indicators per item and totals on the "all" row.
inline void write_summary_csv(std::ostream& out, const EvalReport& rep) {
  out << kSummaryHeader << '\n';
  auto row = [&](std::string_view id, const PairScores& s, const ConfusionCounts& c) {
    out << csv_field(id) << ',' << fmt_fixed(s.r1) << ',' << fmt_fixed(s.r2) << ','
        << fmt_fixed(s.rl) << ',' << fmt_fixed(s.sem) << ',' << fmt_fixed(100.0 * s.em, 2) << ','
        << c.tp << ',' << c.fp << ',' << c.fn_ << '\n';
  };
  for (const auto& r : rep.rows) row(r.id, r.scores, r.confusion);
  row("all", rep.mean_scores, rep.confusion);
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline constexpr std::array<const char*, 8> kPalette = {
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace detail

struct RunCurves {
  std::string name;
  TrainLog log;
  ConfusionCounts final_confusion;
};

// Top panel: mean reward (solid) and abstain rate (dashed) per iteration for
// every run. Bottom panel: TP / FP / FN bars per run.
inline std::string render_curves_svg(const std::vector<RunCurves>& runs) {
  constexpr double kW = 900, kH = 640, kLeft = 70, kRight = 200, kTop = 40;
  constexpr double kPlotH = 300, kBarTop = 420, kBarH = 170;
  const double plot_w = kW - kLeft - kRight;

  std::size_t max_iter = 1;
  double max_reward = 1e-9, min_reward = 0.0;
  std::size_t max_count = 1;
  for (const auto& r : runs) {
    max_iter = std::max(max_iter, r.log.size());
    for (const auto& rec : r.log) {
      max_reward = std::max(max_reward, rec.mean_reward);
      min_reward = std::min(min_reward, rec.mean_reward);
    }
    max_count = std::max({max_count, r.final_confusion.tp, r.final_confusion.fp,
                          r.final_confusion.fn_});
  }
  const double y_hi = std::max(max_reward, 1.0), y_lo = min_reward;
  auto px = [&](double i) {
    return kLeft + (max_iter > 1 ? i / static_cast<double>(max_iter - 1) : 0.5) * plot_w;
  };
  auto py = [&](double v) { return kTop + kPlotH - (v - y_lo) / (y_hi - y_lo) * kPlotH; };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n"
    << "<text x=\"" << kLeft << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">"
    << "Mean reward (solid) and abstain rate (dashed) per iteration</text>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + kPlotH << "\" x2=\"" << kLeft + plot_w
    << "\" y2=\"" << kTop + kPlotH << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kTop + kPlotH << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = y_lo + (y_hi - y_lo) * t / 4.0;
    s << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt_fixed(py(v) + 4, 1)
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt_fixed(v, 2)
      << "</text>\n";
  }
  s << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kTop + kPlotH + 30
    << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">iteration (0.."
    << max_iter - 1 << ")</text>\n";

  for (std::size_t k = 0; k < runs.size(); ++k) {
    const char* color = detail::kPalette[k % detail::kPalette.size()];
    const auto& log = runs[k].log;
    if (!log.empty()) {
      std::ostringstream reward, abstain;
      for (std::size_t i = 0; i < log.size(); ++i) {
        reward << (i ? " " : "") << fmt_fixed(px(static_cast<double>(i)), 2) << ','
               << fmt_fixed(py(log[i].mean_reward), 2);
        abstain << (i ? " " : "") << fmt_fixed(px(static_cast<double>(i)), 2) << ','
                << fmt_fixed(py(log[i].abstain_rate), 2);
      }
      s << "<polyline class=\"reward\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\""
        << reward.str() << "\"/>\n"
        << "<polyline class=\"abstain\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\" points=\"" << abstain.str()
        << "\"/>\n";
    }
    s << "<text x=\"" << kLeft + plot_w + 12 << "\" y=\"" << kTop + 14 + 18.0 * k
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">"
      << detail::xml_escape(runs[k].name) << "</text>\n";
  }

  s << "<text x=\"" << kLeft << "\" y=\"" << kBarTop - 16
    << "\" font-family=\"sans-serif\" font-size=\"15\">TP / FP / FN per run</text>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kBarTop + kBarH << "\" x2=\"" << kLeft + plot_w
    << "\" y2=\"" << kBarTop + kBarH << "\" stroke=\"black\"/>\n";
  const double slot = runs.empty() ? plot_w : plot_w / static_cast<double>(runs.size());
  const double bar_w = std::min(40.0, slot / 4.0);
  static constexpr std::array<const char*, 3> kBarColor = {"#2ca02c", "#ff7f0e", "#d62728"};
  static constexpr std::array<const char*, 3> kBarName = {"TP", "FP", "FN"};
  static constexpr std::array<const char*, 3> kBarClass = {"bar-tp", "bar-fp", "bar-fn"};
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& c = runs[k].final_confusion;
    const std::array<std::size_t, 3> vals = {c.tp, c.fp, c.fn_};
    const double x0 = kLeft + slot * static_cast<double>(k) + (slot - 3 * bar_w) / 2;
    for (std::size_t b = 0; b < 3; ++b) {
      const double h = kBarH * static_cast<double>(vals[b]) / static_cast<double>(max_count);
      const double x = x0 + bar_w * static_cast<double>(b);
      s << "<rect class=\"" << kBarClass[b] << "\" x=\"" << fmt_fixed(x, 2)
        << "\" y=\"" << fmt_fixed(kBarTop + kBarH - h, 2)
        << "\" width=\"" << fmt_fixed(bar_w - 2, 2) << "\" height=\"" << fmt_fixed(h, 2)
        << "\" fill=\"" << kBarColor[b] << "\"><title>" << kBarName[b] << '=' << vals[b]
        << "</title></rect>\n"
        << "<text x=\"" << fmt_fixed(x + bar_w / 2 - 1, 2) << "\" y=\""
        << fmt_fixed(kBarTop + kBarH - h - 3, 2)
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << vals[b]
        << "</text>\n";
    }
    s << "<text x=\"" << fmt_fixed(x0 + 1.5 * bar_w, 2) << "\" y=\"" << kBarTop + kBarH + 16
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
      << detail::xml_escape(runs[k].name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace abstain
