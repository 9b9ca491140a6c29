#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lesionuq/error.hpp"
#include "lesionuq/evaluation.hpp"
#include "text_format.hpp"

namespace lesionuq {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

std::string real_or_nan(double v) { return std::isfinite(v) ? detail::format_real(v) : "nan"; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <class T>
T parse_number(const std::string& text, std::size_t line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError("score table line " + std::to_string(line_no) + ": bad number '" + text + "'");
  }
  return value;
}

}  // namespace

void write_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "scan_id,lesion_id,size,iou_adj,tp";
  for (const auto& m : table.methods) out << ',' << m;
  out << '\n';
  for (const auto& r : table.rows) {
    if (r.scan_id.find_first_of(",\n") != std::string::npos) {
      throw InputError("scan_id may not contain commas or newlines: " + r.scan_id);
    }
    if (r.scores.size() != table.methods.size()) {
      throw InputError("score row width does not match the method list");
    }
    out << r.scan_id << ',' << r.lesion_id << ',' << r.size << ','
        << detail::format_real(r.iou_adj) << ',' << (r.tp ? 1 : 0);
    for (double s : r.scores) out << ',' << detail::format_real(s);
    out << '\n';
  }
  finish(out, path);
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("score table is empty: " + path.string());
  const auto header = split_csv(line);
  const std::vector<std::string> fixed = {"scan_id", "lesion_id", "size", "iou_adj", "tp"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw FormatError("score table header must start with scan_id,lesion_id,size,iou_adj,tp");
  }
  ScoreTable table;
  table.methods.assign(header.begin() + static_cast<std::ptrdiff_t>(fixed.size()), header.end());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw FormatError("score table line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells");
    }
    ScoreRow r;
    r.scan_id = cells[0];
    r.lesion_id = parse_number<std::uint32_t>(cells[1], line_no);
    r.size = parse_number<std::size_t>(cells[2], line_no);
    r.iou_adj = parse_number<double>(cells[3], line_no);
    const auto tp = parse_number<int>(cells[4], line_no);
    if (tp != 0 && tp != 1) throw FormatError("score table line " + std::to_string(line_no) + ": tp must be 0 or 1");
    r.tp = tp == 1;
    for (std::size_t c = fixed.size(); c < cells.size(); ++c) {
      r.scores.push_back(parse_number<double>(cells[c], line_no));
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "method,auc_percent,spearman_rho\n";
  for (const auto& m : report.methods) {
    out << m.method << ',' << real_or_nan(m.auc_percent) << ',' << real_or_nan(m.spearman_rho)
        << '\n';
  }
  out << "# tp_lesions=" << report.tp_total << " fp_lesions=" << report.fp_total << '\n';
  finish(out, path);
}

void write_scan_csv(const EvalReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "scan_id,dice,tp_lesions,fp_lesions\n";
  for (const auto& s : report.scans) {
    out << s.scan_id << ',' << detail::format_real(s.dice) << ',' << s.tp << ',' << s.fp << '\n';
  }
  finish(out, path);
}

void write_curve_csv(const AccuracyConfidenceCurve& curve, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "tau,fp_norm,tp_norm\n";
  for (const auto& p : curve.points) {
    out << detail::format_real(p.tau) << ',' << detail::format_real(p.fp_norm) << ','
        << detail::format_real(p.tp_norm) << '\n';
  }
  finish(out, path);
}

void write_curves_svg(const EvalReport& report, const std::filesystem::path& path) {
  constexpr double kW = 640, kH = 480, kPad = 50;
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                   "#bcbd22", "#17becf", "#000000"};
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad
      << "\" height=\"" << kH - 2 * kPad << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">FP (normalised)</text>\n";
  out << "<text x=\"14\" y=\"" << kH / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 "
      << kH / 2 << ")\" text-anchor=\"middle\">TP (normalised)</text>\n";
  std::size_t i = 0;
  for (const auto& m : report.methods) {
    if (m.curve.points.empty()) continue;
    const char* color = kPalette[i % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : m.curve.points) {
      out << kPad + p.fp_norm * (kW - 2 * kPad) << ',' << kH - kPad - p.tp_norm * (kH - 2 * kPad)
          << ' ';
    }
    out << "\"/>\n";
    char auc[32];
    std::snprintf(auc, sizeof(auc), "%.2f", m.auc_percent);
    out << "<text x=\"" << kW - kPad - 150 << "\" y=\"" << kH - kPad - 14.0 * static_cast<double>(report.methods.size() - i)
        << "\" font-size=\"11\" fill=\"" << color << "\">" << m.method << " (" << auc
        << ")</text>\n";
    ++i;
  }
  out << "</svg>\n";
  finish(out, path);
}

}  // namespace lesionuq
