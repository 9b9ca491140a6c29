#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lesionuq {

struct ScoredLesion {
  double uncertainty = 0.0;
  bool tp = false;
};

struct CurvePoint {
  double tau = 0.0;  ///< fraction of lesions removed
  double fp_norm = 1.0;
  double tp_norm = 1.0;
};

struct AccuracyConfidenceCurve {
  std::vector<CurvePoint> points;  ///< N + 1 points, tau = k / N
  double auc_percent = 0.0;
};

/// Removes lesions one at a time from most to least uncertain (ties keep
/// input order) and integrates tp_norm over fp_norm with the trapezoid rule.
/// A run of tied scores is integrated as one straight segment. Throws EvaluationError without at least one TP and one FP.
AccuracyConfidenceCurve accuracy_confidence_curve(std::span<const ScoredLesion> records);

/// Average ranks, 1-based; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Throws EvaluationError on length
/// mismatch, fewer than two values or a constant input.
double spearman_rho(std::span<const double> a, std::span<const double> b);

/// One row per lesion, one score column per method.
struct ScoreRow {
  std::string scan_id;
  std::uint32_t lesion_id = 0;
  std::size_t size = 0;
  double iou_adj = 0.0;
  bool tp = false;
  std::vector<double> scores;
};

struct ScoreTable {
  std::vector<std::string> methods;
  std::vector<ScoreRow> rows;

  std::size_t method_index(const std::string& name) const;
};

/// Sorts rows by (scan_id, lesion_id), the canonical tie-breaking order.
void sort_rows(ScoreTable& table);

/// Joins tables on (scan_id, lesion_id). Every table must cover the same
/// lesions; otherwise EvaluationError.
ScoreTable join_tables(std::span<const ScoreTable> tables);

struct MethodResult {
  std::string method;
  double auc_percent = 0.0;
  double spearman_rho = 0.0;  ///< rho(uncertainty, size); NaN when undefined
  AccuracyConfidenceCurve curve;
};

struct ScanSummary {
  std::string scan_id;
  double dice = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
};

struct EvalReport {
  std::vector<MethodResult> methods;
  std::vector<ScanSummary> scans;
  std::size_t tp_total = 0;
  std::size_t fp_total = 0;

  const MethodResult& method(const std::string& name) const;
};

/// AUC and rho(uncertainty, size) per method. Throws EvaluationError if a
/// method has a non-finite score for some lesion.
EvalReport build_report(ScoreTable table, std::vector<ScanSummary> scans = {});

/// Means AUC and rho across folds (methods must match); concatenates scans.
EvalReport average_reports(std::span<const EvalReport> folds);

void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
void write_scan_csv(const EvalReport& report, const std::filesystem::path& path);
void write_curve_csv(const AccuracyConfidenceCurve& curve, const std::filesystem::path& path);
void write_curves_svg(const EvalReport& report, const std::filesystem::path& path);

/// CSV: scan_id,lesion_id,size,iou_adj,tp,<method>...
void write_score_table(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable read_score_table(const std::filesystem::path& path);

}  // namespace lesionuq
