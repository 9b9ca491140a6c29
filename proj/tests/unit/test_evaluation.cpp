#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lesionuq/evaluation.hpp"
#include "lesionuq/error.hpp"
#include "test_util.hpp"

using namespace lesionuq;
using lesionuq::testing::TempDir;

namespace {

// 100 * P(u_FP > u_TP) + 50 * P(u_FP == u_TP), counted over all pairs.
double mann_whitney_auc(const std::vector<ScoredLesion>& r) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& f : r) {
    if (f.tp) continue;
    for (const auto& t : r) {
      if (!t.tp) continue;
      pairs += 1.0;
      wins += f.uncertainty > t.uncertainty ? 1.0 : f.uncertainty == t.uncertainty ? 0.5 : 0.0;
    }
  }
  return 100.0 * wins / pairs;
}

// distinct_values > 0 draws scores from that many levels, producing ties.
std::vector<ScoredLesion> random_records(std::mt19937_64& gen, int n, int distinct_values) {
  std::uniform_int_distribution<int> level(0, std::max(distinct_values, 1) - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredLesion> r;
  for (int i = 0; i < n; ++i) {
    const bool tp = i < 2 ? i == 0 : u(gen) < 0.6;
    const double score = distinct_values > 0 ? level(gen) / static_cast<double>(distinct_values)
                                             : u(gen);
    r.push_back({score, tp});
  }
  return r;
}

ScoreTable small_table() {
  ScoreTable t;
  t.methods = {"A", "B"};
  t.rows = {{"s2", 1, 10, 0.5, true, {0.1, 0.9}},
            {"s1", 2, 3, 0.0, false, {0.8, 0.2}},
            {"s1", 1, 7, 0.7, true, {0.2, 0.5}},
            {"s3", 4, 1, 0.05, false, {0.95, 0.1}}};
  return t;
}

}  // namespace

TEST(Curve, PerfectRanking) {
  const std::vector<ScoredLesion> r = {{0.1, true}, {0.2, true}, {0.8, false}, {0.9, false}};
  const auto c = accuracy_confidence_curve(r);
  const std::vector<std::pair<double, double>> expected = {
      {1, 1}, {0.5, 1}, {0, 1}, {0, 0.5}, {0, 0}};
  ASSERT_EQ(c.points.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(c.points[k].fp_norm, expected[k].first);
    EXPECT_EQ(c.points[k].tp_norm, expected[k].second);
    EXPECT_EQ(c.points[k].tau, k / 4.0);
  }
  EXPECT_EQ(c.auc_percent, 100.0);
}

TEST(Curve, InvertedRanking) {
  const std::vector<ScoredLesion> r = {{0.9, true}, {0.8, true}, {0.2, false}, {0.1, false}};
  EXPECT_EQ(accuracy_confidence_curve(r).auc_percent, 0.0);
}

TEST(Curve, AllTiedIsTheDiagonal) {
  for (const auto& r : {std::vector<ScoredLesion>{{0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}},
                        std::vector<ScoredLesion>{{0.5, true}, {0.5, true}, {0.5, false}},
                        std::vector<ScoredLesion>{{0.3, false}, {0.3, false}, {0.3, true}}}) {
    EXPECT_DOUBLE_EQ(accuracy_confidence_curve(r).auc_percent, 50.0);
  }
}

TEST(Curve, MatchesMannWhitneyOracle) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = random_records(gen, 3 + trial % 40, trial % 3 == 0 ? 4 : 0);
    EXPECT_NEAR(accuracy_confidence_curve(r).auc_percent, mann_whitney_auc(r), 1e-9);
  }
}

TEST(Curve, MonotoneTransformInvariance) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto r = random_records(gen, 5 + trial, trial % 2 == 0 ? 5 : 0);
    const double auc = accuracy_confidence_curve(r).auc_percent;
    auto squared = r, shifted = r, exp = r;
    for (auto& s : squared) s.uncertainty *= s.uncertainty;
    for (auto& s : shifted) s.uncertainty = 3.0 * s.uncertainty - 7.0;
    for (auto& s : exp) s.uncertainty = std::exp(s.uncertainty);
    EXPECT_EQ(accuracy_confidence_curve(squared).auc_percent, auc);
    EXPECT_EQ(accuracy_confidence_curve(shifted).auc_percent, auc);
    EXPECT_EQ(accuracy_confidence_curve(exp).auc_percent, auc);
  }
}

TEST(Curve, ShapeInvariants) {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = random_records(gen, 2 + trial, 0);
    const auto c = accuracy_confidence_curve(r);
    ASSERT_EQ(c.points.size(), r.size() + 1);
    EXPECT_EQ(c.points.front().fp_norm, 1.0);
    EXPECT_EQ(c.points.front().tp_norm, 1.0);
    EXPECT_EQ(c.points.front().tau, 0.0);
    EXPECT_EQ(c.points.back().fp_norm, 0.0);
    EXPECT_EQ(c.points.back().tp_norm, 0.0);
    EXPECT_EQ(c.points.back().tau, 1.0);
    for (std::size_t k = 1; k < c.points.size(); ++k) {
      EXPECT_LE(c.points[k].fp_norm, c.points[k - 1].fp_norm);
      EXPECT_LE(c.points[k].tp_norm, c.points[k - 1].tp_norm);
    }
    EXPECT_GE(c.auc_percent, 0.0);
    EXPECT_LE(c.auc_percent, 100.0);
  }
}

TEST(Curve, Errors) {
  EXPECT_THROW(accuracy_confidence_curve(std::vector<ScoredLesion>{{0.1, true}, {0.2, true}}),
               EvaluationError);
  EXPECT_THROW(accuracy_confidence_curve(std::vector<ScoredLesion>{{0.1, false}}), EvaluationError);
  EXPECT_THROW(accuracy_confidence_curve(std::vector<ScoredLesion>{}), EvaluationError);
  EXPECT_THROW(accuracy_confidence_curve(
                   std::vector<ScoredLesion>{{std::nan(""), true}, {0.2, false}}),
               EvaluationError);
}

TEST(AverageRanks, TiesShareTheMean) {
  EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 20, 5}),
            (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(spearman_rho(std::vector<double>{1, 2, 3}, std::vector<double>{2, 1, 3}), 0.5);
  const std::vector<double> a = {0.5, 3.0, 1.25, 8.0, 2.0};
  std::vector<double> inv;
  for (double v : a) inv.push_back(1.0 / v);
  EXPECT_EQ(spearman_rho(a, inv), -1.0);
  EXPECT_EQ(spearman_rho(a, a), 1.0);
}

TEST(Spearman, SymmetricAndRankBased) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> u(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a, b, a3;
    for (int i = 0; i < 12; ++i) {
      a.push_back(u(gen));
      b.push_back(u(gen));
      a3.push_back(std::pow(a.back(), 3) + 1.0);
    }
    a[0] = -1;  // guarantees neither vector is constant
    b[0] = -1;
    b[1] = 20;
    a3[0] = -1;
    const double r = spearman_rho(a, b);
    EXPECT_DOUBLE_EQ(r, spearman_rho(b, a));
    EXPECT_NEAR(r, spearman_rho(a3, b), 1e-15);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
  }
}

TEST(Spearman, Errors) {
  EXPECT_THROW(spearman_rho(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
               EvaluationError);
  EXPECT_THROW(spearman_rho(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}),
               EvaluationError);
  EXPECT_THROW(spearman_rho(std::vector<double>{1}, std::vector<double>{1}), EvaluationError);
}

TEST(Report, MethodsAndCounts) {
  const EvalReport r = build_report(small_table(), {{"s1", 0.8, 1, 1}});
  ASSERT_EQ(r.methods.size(), 2u);
  EXPECT_EQ(r.tp_total, 2u);
  EXPECT_EQ(r.fp_total, 2u);
  EXPECT_EQ(r.method("A").auc_percent, 100.0);
  EXPECT_EQ(r.method("B").auc_percent, 0.0);
  for (const auto& m : r.methods) {
    EXPECT_EQ(m.curve.points.front().fp_norm, 1.0);
    EXPECT_EQ(m.curve.points.front().tp_norm, 1.0);
  }
  EXPECT_THROW(r.method("C"), EvaluationError);
  ASSERT_EQ(r.scans.size(), 1u);
}

TEST(Report, SizeMethodHasRhoMinusOne) {
  ScoreTable t;
  t.methods = {"Size"};
  std::mt19937_64 gen(3);
  for (std::uint32_t i = 0; i < 30; ++i) {
    ScoreRow row;
    row.scan_id = "s";
    row.lesion_id = i + 1;
    row.size = 1 + i * 3;
    row.tp = i % 3 != 0;
    row.scores = {1.0 / static_cast<double>(row.size)};
    t.rows.push_back(row);
  }
  std::shuffle(t.rows.begin(), t.rows.end(), gen);
  EXPECT_EQ(build_report(t).method("Size").spearman_rho, -1.0);
}

TEST(Report, Errors) {
  ScoreTable missing = small_table();
  missing.rows[1].scores.pop_back();
  EXPECT_THROW(build_report(missing), EvaluationError);
  ScoreTable nan = small_table();
  nan.rows[0].scores[1] = std::nan("");
  EXPECT_THROW(build_report(nan), EvaluationError);
}

TEST(Report, TieOrderUsesLesionIdentity) {
  ScoreTable t = small_table();
  for (auto& r : t.rows) r.scores = {0.5, 0.5};
  ScoreTable shuffled = t;
  std::reverse(shuffled.rows.begin(), shuffled.rows.end());
  const EvalReport a = build_report(t), b = build_report(shuffled);
  for (std::size_t k = 0; k < a.methods[0].curve.points.size(); ++k) {
    EXPECT_EQ(a.methods[0].curve.points[k].tp_norm, b.methods[0].curve.points[k].tp_norm);
  }
}

TEST(Report, AverageAcrossFolds) {
  const EvalReport a = build_report(small_table());
  ScoreTable t = small_table();
  t.rows[0].scores[0] = 0.85;  // one TP now outranks one FP
  const EvalReport b = build_report(t);
  const EvalReport avg = average_reports(std::vector<EvalReport>{a, b});
  EXPECT_DOUBLE_EQ(avg.method("A").auc_percent, (a.method("A").auc_percent + b.method("A").auc_percent) / 2);
  EXPECT_EQ(avg.tp_total, 4u);
  ScoreTable other = small_table();
  other.methods = {"A", "C"};
  EXPECT_THROW(average_reports(std::vector<EvalReport>{a, build_report(other)}), EvaluationError);
  EXPECT_THROW(average_reports(std::vector<EvalReport>{}), EvaluationError);
}

TEST(ScoreTableIo, RoundTripAndSort) {
  TempDir tmp;
  ScoreTable t = small_table();
  t.rows[0].scores[0] = 0.1234567890123456789;
  t.rows[0].iou_adj = 1.0 / 3.0;
  write_score_table(t, tmp / "s.csv");
  const ScoreTable back = read_score_table(tmp / "s.csv");
  EXPECT_EQ(back.methods, t.methods);
  ASSERT_EQ(back.rows.size(), t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].scan_id, t.rows[i].scan_id);
    EXPECT_EQ(back.rows[i].lesion_id, t.rows[i].lesion_id);
    EXPECT_EQ(back.rows[i].size, t.rows[i].size);
    EXPECT_EQ(back.rows[i].iou_adj, t.rows[i].iou_adj);
    EXPECT_EQ(back.rows[i].tp, t.rows[i].tp);
    EXPECT_EQ(back.rows[i].scores, t.rows[i].scores);
  }
  sort_rows(t);
  EXPECT_EQ(t.rows[0].scan_id, "s1");
  EXPECT_EQ(t.rows[0].lesion_id, 1u);
  EXPECT_EQ(t.rows[3].scan_id, "s3");
}

TEST(ScoreTableIo, Errors) {
  TempDir tmp;
  EXPECT_THROW(read_score_table(tmp / "none.csv"), IoError);
  lesionuq::testing::write_file(tmp / "empty.csv", "");
  EXPECT_THROW(read_score_table(tmp / "empty.csv"), FormatError);
  lesionuq::testing::write_file(tmp / "hdr.csv", "a,b\n");
  EXPECT_THROW(read_score_table(tmp / "hdr.csv"), FormatError);
  lesionuq::testing::write_file(tmp / "num.csv", "scan_id,lesion_id,size,iou_adj,tp,A\ns,1,3,0.5,1,abc\n");
  EXPECT_THROW(read_score_table(tmp / "num.csv"), FormatError);
  lesionuq::testing::write_file(tmp / "tp.csv", "scan_id,lesion_id,size,iou_adj,tp,A\ns,1,3,0.5,2,0.1\n");
  EXPECT_THROW(read_score_table(tmp / "tp.csv"), FormatError);
  lesionuq::testing::write_file(tmp / "w.csv", "scan_id,lesion_id,size,iou_adj,tp,A\ns,1,3,0.5,1\n");
  EXPECT_THROW(read_score_table(tmp / "w.csv"), FormatError);
}

TEST(JoinTables, MergesColumns) {
  ScoreTable a = small_table();
  ScoreTable b = small_table();
  b.methods = {"C", "D"};
  std::reverse(b.rows.begin(), b.rows.end());
  const ScoreTable j = join_tables(std::vector<ScoreTable>{a, b});
  EXPECT_EQ(j.methods, (std::vector<std::string>{"A", "B", "C", "D"}));
  ASSERT_EQ(j.rows.size(), 4u);
  for (const auto& r : j.rows) {
    ASSERT_EQ(r.scores.size(), 4u);
    EXPECT_EQ(r.scores[0], r.scores[2]);
    EXPECT_EQ(r.scores[1], r.scores[3]);
  }
}

TEST(JoinTables, Errors) {
  ScoreTable a = small_table();
  ScoreTable dup = small_table();
  EXPECT_THROW(join_tables(std::vector<ScoreTable>{a, dup}), EvaluationError);
  ScoreTable fewer = small_table();
  fewer.methods = {"C", "D"};
  fewer.rows.pop_back();
  EXPECT_THROW(join_tables(std::vector<ScoreTable>{a, fewer}), EvaluationError);
  ScoreTable repeated = small_table();
  repeated.rows.push_back(repeated.rows[0]);
  EXPECT_THROW(join_tables(std::vector<ScoreTable>{repeated}), EvaluationError);
}

TEST(ReportIo, WritesFiles) {
  TempDir tmp;
  const EvalReport r = build_report(small_table(), {{"s1", 0.8, 1, 1}});
  write_report_csv(r, tmp / "report.csv");
  write_scan_csv(r, tmp / "scans.csv");
  write_curve_csv(r.methods[0].curve, tmp / "curve.csv");
  write_curves_svg(r, tmp / "curves.svg");
  const std::string report = lesionuq::testing::read_file(tmp / "report.csv");
  EXPECT_NE(report.find("A,100"), std::string::npos);
  const std::string curve = lesionuq::testing::read_file(tmp / "curve.csv");
  EXPECT_EQ(curve.substr(0, curve.find('\n')), "tau,fp_norm,tp_norm");
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 6);
  EXPECT_NE(lesionuq::testing::read_file(tmp / "curves.svg").find("<svg"), std::string::npos);
}
