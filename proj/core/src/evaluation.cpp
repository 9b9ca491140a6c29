#include "lesionuq/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "lesionuq/error.hpp"

namespace lesionuq {

AccuracyConfidenceCurve accuracy_confidence_curve(std::span<const ScoredLesion> records) {
  std::size_t tp_total = 0;
  for (const auto& r : records) {
    if (!std::isfinite(r.uncertainty)) throw EvaluationError("non-finite uncertainty score");
    tp_total += r.tp;
  }
  const std::size_t fp_total = records.size() - tp_total;
  if (tp_total == 0 || fp_total == 0) {
    throw EvaluationError("accuracy-confidence curve needs at least one TP and one FP lesion");
  }

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].uncertainty > records[b].uncertainty;
  });

  AccuracyConfidenceCurve curve;
  const auto n = static_cast<double>(records.size());
  std::size_t tp_left = tp_total, fp_left = fp_total;
  auto point = [&](std::size_t removed) {
    return CurvePoint{static_cast<double>(removed) / n,
                      static_cast<double>(fp_left) / static_cast<double>(fp_total),
                      static_cast<double>(tp_left) / static_cast<double>(tp_total)};
  };
  curve.points.push_back(point(0));
  double area = 0.0;
  // Area is taken per run of equal uncertainties, so a tied run contributes its
  // chord rather than the staircase implied by the input order.
  CurvePoint run_start = curve.points.back();
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (records[order[k]].tp) {
      --tp_left;
    } else {
      --fp_left;
    }
    curve.points.push_back(point(k + 1));
    const bool run_ends = k + 1 == order.size() ||
                          records[order[k + 1]].uncertainty != records[order[k]].uncertainty;
    if (run_ends) {
      const CurvePoint& end = curve.points.back();
      area += (run_start.fp_norm - end.fp_norm) * (run_start.tp_norm + end.tp_norm) * 0.5;
      run_start = end;
    }
  }
  curve.auc_percent = 100.0 * area;
  return curve;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw EvaluationError("spearman_rho: length mismatch");
  if (a.size() < 2) throw EvaluationError("spearman_rho needs at least two values");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw EvaluationError("spearman_rho of a constant vector");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::size_t ScoreTable::method_index(const std::string& name) const {
  const auto it = std::find(methods.begin(), methods.end(), name);
  if (it == methods.end()) throw EvaluationError("no scores for method " + name);
  return static_cast<std::size_t>(it - methods.begin());
}

void sort_rows(ScoreTable& table) {
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    if (a.scan_id != b.scan_id) return a.scan_id < b.scan_id;
    return a.lesion_id < b.lesion_id;
  });
}

ScoreTable join_tables(std::span<const ScoreTable> tables) {
  ScoreTable out;
  if (tables.empty()) return out;
  using Key = std::pair<std::string, std::uint32_t>;
  std::map<Key, std::size_t> index;
  out.rows = tables.front().rows;
  for (auto& r : out.rows) r.scores.clear();
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (!index.emplace(Key{out.rows[i].scan_id, out.rows[i].lesion_id}, i).second) {
      throw EvaluationError("duplicate lesion " + out.rows[i].scan_id + "/" +
                            std::to_string(out.rows[i].lesion_id));
    }
  }
  for (const auto& t : tables) {
    if (t.rows.size() != out.rows.size()) {
      throw EvaluationError("score tables cover different lesion sets");
    }
    for (const auto& m : t.methods) {
      if (std::find(out.methods.begin(), out.methods.end(), m) != out.methods.end()) {
        throw EvaluationError("method " + m + " appears in more than one score table");
      }
      out.methods.push_back(m);
    }
    for (const auto& r : t.rows) {
      const auto it = index.find(Key{r.scan_id, r.lesion_id});
      if (it == index.end()) {
        throw EvaluationError("lesion " + r.scan_id + "/" + std::to_string(r.lesion_id) +
                              " is missing from another score table");
      }
      auto& dst = out.rows[it->second];
      dst.scores.insert(dst.scores.end(), r.scores.begin(), r.scores.end());
    }
  }
  return out;
}

const MethodResult& EvalReport::method(const std::string& name) const {
  for (const auto& m : methods) {
    if (m.method == name) return m;
  }
  throw EvaluationError("report has no method " + name);
}

EvalReport build_report(ScoreTable table, std::vector<ScanSummary> scans) {
  sort_rows(table);
  EvalReport report;
  std::vector<double> sizes;
  for (const auto& r : table.rows) {
    if (r.scores.size() != table.methods.size()) {
      throw EvaluationError("lesion " + r.scan_id + "/" + std::to_string(r.lesion_id) +
                            " lacks scores for some methods");
    }
    sizes.push_back(static_cast<double>(r.size));
    (r.tp ? report.tp_total : report.fp_total) += 1;
  }
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    std::vector<ScoredLesion> scored;
    std::vector<double> scores;
    for (const auto& r : table.rows) {
      if (!std::isfinite(r.scores[m])) {
        throw EvaluationError("method " + table.methods[m] + " has a non-finite score");
      }
      scored.push_back({r.scores[m], r.tp});
      scores.push_back(r.scores[m]);
    }
    MethodResult res;
    res.method = table.methods[m];
    res.curve = accuracy_confidence_curve(scored);
    res.auc_percent = res.curve.auc_percent;
    try {
      res.spearman_rho = spearman_rho(scores, sizes);
    } catch (const EvaluationError&) {
      res.spearman_rho = std::numeric_limits<double>::quiet_NaN();
    }
    report.methods.push_back(std::move(res));
  }
  report.scans = std::move(scans);
  return report;
}

EvalReport average_reports(std::span<const EvalReport> folds) {
  if (folds.empty()) throw EvaluationError("no fold reports to average");
  EvalReport out;
  out.methods = folds.front().methods;
  for (auto& m : out.methods) {
    m.curve = {};
    double auc = 0.0, rho = 0.0;
    std::size_t rho_count = 0;
    for (const auto& f : folds) {
      const auto& fm = f.method(m.method);
      auc += fm.auc_percent;
      if (std::isfinite(fm.spearman_rho)) {
        rho += fm.spearman_rho;
        ++rho_count;
      }
    }
    m.auc_percent = auc / static_cast<double>(folds.size());
    m.spearman_rho = rho_count ? rho / static_cast<double>(rho_count)
                               : std::numeric_limits<double>::quiet_NaN();
  }
  for (const auto& f : folds) {
    if (f.methods.size() != out.methods.size()) {
      throw EvaluationError("fold reports list different methods");
    }
    out.scans.insert(out.scans.end(), f.scans.begin(), f.scans.end());
    out.tp_total += f.tp_total;
    out.fp_total += f.fp_total;
  }
  return out;
}

}  // namespace lesionuq
