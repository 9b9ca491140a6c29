#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "lesionuq/lesions.hpp"
#include "test_util.hpp"

using namespace lesionuq;
using lesionuq::oracle::bfs_labels;
using lesionuq::testing::random_mask;

namespace {

LabelVolume mask_of(const Dims& d, std::initializer_list<Voxel> voxels) {
  LabelVolume m(d);
  for (const auto& v : voxels) m.at(v) = 1;
  return m;
}

// |k ∩ G| / |k ∪ (G \ A)| evaluated on explicit voxel sets.
double iou_adj_oracle(std::uint32_t k, const LabelVolume& pred, const LabelVolume& gt) {
  std::set<std::uint32_t> touched;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == k && gt[i]) touched.insert(gt[i]);
  }
  if (touched.empty()) return 0.0;
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool in_k = pred[i] == k;
    const bool in_g = gt[i] && touched.count(gt[i]);
    const bool in_a = pred[i] && pred[i] != k;
    inter += in_k && in_g;
    uni += in_k || (in_g && !in_a);
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST(Cca, CornerAdjacencyJoins) {
  const auto l = connected_components_26(mask_of(Dims{3, 3, 3}, {{0, 0, 0}, {1, 1, 1}}));
  EXPECT_EQ(l.count, 1u);
}

TEST(Cca, GapSeparates) {
  const auto l = connected_components_26(mask_of(Dims{3, 3, 3}, {{0, 0, 0}, {0, 0, 2}}));
  EXPECT_EQ(l.count, 2u);
  EXPECT_EQ(l.labels.at(0, 0, 0), 1u);
  EXPECT_EQ(l.labels.at(0, 0, 2), 2u);
}

TEST(Cca, EmptyAndFull) {
  EXPECT_EQ(connected_components_26(LabelVolume(Dims{4, 4, 4})).count, 0u);
  const auto full = connected_components_26(LabelVolume(Dims{4, 4, 4}, 1));
  EXPECT_EQ(full.count, 1u);
}

TEST(Cca, RejectsNonBinary) {
  LabelVolume m(Dims{2, 2, 2});
  m[3] = 2;
  EXPECT_THROW(connected_components_26(m), InputError);
}

TEST(Cca, MatchesBfsOracleOnRandomMasks) {
  std::mt19937_64 gen(2024);
  const Dims d{16, 16, 16};
  for (int trial = 0; trial < 50; ++trial) {
    const double density = 0.05 + 0.4 * (trial % 10) / 9.0;
    const auto mask = random_mask(d, density, gen);
    const auto l = connected_components_26(mask);
    const auto oracle = bfs_labels(mask);
    ASSERT_EQ(l.labels, oracle) << "trial " << trial;
    ASSERT_EQ(l.count, max_label(oracle));
  }
}

TEST(Cca, ZigzagChainsMergeLate) {
  // Two arms that only meet at the far end: union-find must merge them.
  LabelVolume m(Dims{7, 7, 1});
  for (int y = 0; y < 7; ++y) m.at(0, y, 0) = m.at(6, y, 0) = 1;
  for (int x = 0; x < 7; ++x) m.at(x, 6, 0) = 1;
  EXPECT_EQ(connected_components_26(m).labels, bfs_labels(m));
  EXPECT_EQ(connected_components_26(m).count, 1u);
}

TEST(ExtractLesions, VoxelsInLinearOrder) {
  std::mt19937_64 gen(3);
  const auto mask = random_mask(Dims{10, 9, 8}, 0.2, gen);
  const auto l = connected_components_26(mask);
  const auto lesions = extract_lesions(l);
  ASSERT_EQ(lesions.size(), l.count);
  std::size_t total = 0;
  for (std::size_t k = 0; k < lesions.size(); ++k) {
    EXPECT_EQ(lesions[k].id, k + 1);
    EXPECT_TRUE(std::is_sorted(lesions[k].voxels.begin(), lesions[k].voxels.end(),
                               [&](const Voxel& a, const Voxel& b) {
                                 return mask.dims().linear(a) < mask.dims().linear(b);
                               }));
    for (const auto& v : lesions[k].voxels) EXPECT_EQ(l.labels.at(v), k + 1);
    total += lesions[k].size();
  }
  EXPECT_EQ(total, static_cast<std::size_t>(std::count(mask.values().begin(), mask.values().end(), 1u)));
}

TEST(AdjustedIou, PartialOverlapEqualsPlainIou) {
  // GT: 10 voxels at y = 0. k: x 5..9 at y = 0 and y = 1, so 5 of its 10 voxels overlap.
  const Dims d{10, 2, 1};
  LabelVolume gt(d), pred(d);
  for (int x = 0; x < 10; ++x) gt.at(x, 0, 0) = 1;
  for (int x = 5; x < 10; ++x) pred.at(x, 0, 0) = pred.at(x, 1, 0) = 1;
  const auto p = connected_components_26(pred);
  const auto g = connected_components_26(gt);
  const auto l = extract_lesions(p);
  ASSERT_EQ(l.size(), 1u);
  EXPECT_NEAR(adjusted_iou(l[0], p, g), 5.0 / 15.0, 1e-15);
  EXPECT_NEAR(plain_iou(l[0], g), 5.0 / 15.0, 1e-15);
}

TEST(AdjustedIou, SiblingCoversRemainingGroundTruth) {
  // Same k; a second predicted component holds the other 5 GT voxels. A connected GT split
  // between two predictions makes them touch, so the labeling is built by hand.
  const Dims d{10, 2, 1};
  LabelVolume gt(d);
  for (int x = 0; x < 10; ++x) gt.at(x, 0, 0) = 1;
  ComponentLabeling p{LabelVolume(d), 2};
  for (int x = 0; x < 5; ++x) p.labels.at(x, 0, 0) = 1;
  for (int x = 5; x < 10; ++x) p.labels.at(x, 0, 0) = p.labels.at(x, 1, 0) = 2;
  const auto g = connected_components_26(gt);
  const auto l = extract_lesions(p);
  ASSERT_EQ(l.size(), 2u);
  EXPECT_NEAR(adjusted_iou(l[1], p, g), 0.5, 1e-15);
  EXPECT_NEAR(adjusted_ious(p, g)[1], 0.5, 1e-15);
  EXPECT_NEAR(iou_adj_oracle(2, p.labels, g.labels), 0.5, 1e-15);
  EXPECT_NEAR(plain_iou(l[1], g), 5.0 / 15.0, 1e-15);
}

TEST(AdjustedIou, SiblingCoversPartOfGroundTruth) {
  // GT spans z = 0..2 over x 0..4; k covers z = 0 plus 5 outside voxels, a sibling
  // covers z = 2 and the z = 1 layer stays uncovered.
  const Dims d{10, 1, 3};
  LabelVolume gt(d), pred(d);
  for (int x = 0; x < 5; ++x) gt.at(x, 0, 0) = gt.at(x, 0, 1) = gt.at(x, 0, 2) = 1;
  for (int x = 0; x < 10; ++x) pred.at(x, 0, 0) = 1;
  for (int x = 0; x < 5; ++x) pred.at(x, 0, 2) = 1;
  const auto p = connected_components_26(pred);
  const auto g = connected_components_26(gt);
  ASSERT_EQ(p.count, 2u);
  const auto l = extract_lesions(p);
  EXPECT_NEAR(adjusted_iou(l[0], p, g), 5.0 / 15.0, 1e-15);
  EXPECT_NEAR(plain_iou(l[0], g), 5.0 / 20.0, 1e-15);
}

TEST(AdjustedIou, LesionMustBelongToLabeling) {
  const Dims d{4, 1, 1};
  const auto p = connected_components_26(mask_of(d, {{0, 0, 0}}));
  const auto g = connected_components_26(mask_of(d, {{0, 0, 0}}));
  Lesion stray;
  stray.id = 1;
  stray.voxels = {{3, 0, 0}};
  EXPECT_THROW(adjusted_iou(stray, p, g), InputError);
}

TEST(AdjustedIou, DisjointIsZero) {
  const Dims d{6, 1, 1};
  const auto p = connected_components_26(mask_of(d, {{0, 0, 0}}));
  const auto g = connected_components_26(mask_of(d, {{4, 0, 0}}));
  const auto l = extract_lesions(p);
  EXPECT_EQ(adjusted_iou(l[0], p, g), 0.0);
  EXPECT_EQ(adjusted_ious(p, g), std::vector<double>{0.0});
}

TEST(AdjustedIou, DimMismatch) {
  const auto p = connected_components_26(mask_of(Dims{2, 1, 1}, {{0, 0, 0}}));
  const auto g = connected_components_26(mask_of(Dims{1, 2, 1}, {{0, 0, 0}}));
  EXPECT_THROW(adjusted_ious(p, g), InputError);
  EXPECT_THROW(adjusted_iou(extract_lesions(p)[0], p, g), InputError);
}

TEST(AdjustedIou, MatchesOracleAndBoundsOnRandomMasks) {
  std::mt19937_64 gen(99);
  const Dims d{12, 12, 12};
  for (int trial = 0; trial < 30; ++trial) {
    const auto pred = connected_components_26(random_mask(d, 0.12, gen));
    const auto gt = connected_components_26(random_mask(d, 0.12, gen));
    const auto lesions = extract_lesions(pred);
    const auto all = adjusted_ious(pred, gt);
    ASSERT_EQ(all.size(), lesions.size());
    for (std::size_t i = 0; i < lesions.size(); ++i) {
      const double adj = adjusted_iou(lesions[i], pred, gt);
      ASSERT_EQ(adj, all[i]);
      ASSERT_NEAR(adj, iou_adj_oracle(lesions[i].id, pred.labels, gt.labels), 1e-15);
      const double plain = plain_iou(lesions[i], gt);
      ASSERT_GE(adj, 0.0);
      ASSERT_LE(adj, 1.0);
      ASSERT_GE(adj + 1e-15, plain);
      if (pred.count == 1) ASSERT_NEAR(adj, plain, 1e-15);
    }
  }
}

TEST(AdjustedIou, SingleComponentEqualsPlainIou) {
  std::mt19937_64 gen(1);
  const Dims d{8, 8, 8};
  for (int trial = 0; trial < 20; ++trial) {
    LabelVolume pred(d);
    std::uniform_int_distribution<int> c(1, 6);
    const int cx = c(gen), cy = c(gen), cz = c(gen);
    for (int z = cz - 1; z <= cz + 1; ++z)
      for (int y = cy - 1; y <= cy + 1; ++y)
        for (int x = cx - 1; x <= cx + 1; ++x) pred.at(x, y, z) = 1;
    const auto p = connected_components_26(pred);
    const auto g = connected_components_26(random_mask(d, 0.3, gen));
    ASSERT_EQ(p.count, 1u);
    const auto l = extract_lesions(p);
    EXPECT_NEAR(adjusted_iou(l[0], p, g), plain_iou(l[0], g), 1e-15);
  }
}

TEST(LabelTpFp, EpsilonRule) {
  std::vector<Lesion> v(3);
  v[0].iou_adj = 0.05;
  v[1].iou_adj = 0.10;
  v[2].iou_adj = 0.9;
  const auto out = label_tp_fp(v, 0.1);
  EXPECT_FALSE(out[0].tp);
  EXPECT_TRUE(out[1].tp);
  EXPECT_TRUE(out[2].tp);
}

TEST(MatchLesions, LabelsEveryComponent) {
  const Dims d{8, 1, 1};
  const auto pred = mask_of(d, {{0, 0, 0}, {1, 0, 0}, {5, 0, 0}});
  const auto gt = mask_of(d, {{0, 0, 0}, {1, 0, 0}});
  const auto lesions = match_lesions(pred, gt, 0.1);
  ASSERT_EQ(lesions.size(), 2u);
  EXPECT_TRUE(lesions[0].tp);
  EXPECT_EQ(lesions[0].iou_adj, 1.0);
  EXPECT_FALSE(lesions[1].tp);
}

TEST(Dice, Examples) {
  const Dims d{4, 1, 1};
  const auto a = mask_of(d, {{0, 0, 0}, {1, 0, 0}});
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(dice(a, mask_of(d, {{2, 0, 0}, {3, 0, 0}})), 0.0);
  EXPECT_EQ(dice(a, mask_of(d, {{1, 0, 0}, {2, 0, 0}})), 0.5);
  EXPECT_EQ(dice(LabelVolume(d), LabelVolume(d)), 1.0);
  EXPECT_THROW(dice(a, LabelVolume(Dims{1, 4, 1})), InputError);
}

TEST(Dilate, Examples) {
  const Dims d{5, 5, 5};
  const std::vector<Voxel> center{{2, 2, 2}};
  EXPECT_EQ(dilate_26(center, d, 1).size(), 27u);
  const std::vector<Voxel> corner{{0, 0, 0}};
  EXPECT_EQ(dilate_26(corner, d, 1).size(), 8u);
  EXPECT_EQ(dilate_26(center, d, 0), center);
  EXPECT_EQ(dilate_26(center, d, 2).size(), 125u);
  EXPECT_TRUE(dilate_26(std::vector<Voxel>{}, d, 3).empty());
  EXPECT_THROW(dilate_26(center, d, -1), InputError);
}

TEST(Dilate, MatchesChebyshevOracleAndComposes) {
  std::mt19937_64 gen(8);
  const Dims d{9, 8, 7};
  for (int trial = 0; trial < 20; ++trial) {
    const auto mask = random_mask(d, 0.02, gen);
    std::vector<Voxel> in;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) in.push_back(d.to_xyz(i));
    const int iters = trial % 3;
    const auto out = dilate_26(in, d, iters);
    std::vector<Voxel> oracle;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const Voxel v = d.to_xyz(i);
      for (const auto& s : in) {
        if (std::abs(v.x - s.x) <= iters && std::abs(v.y - s.y) <= iters &&
            std::abs(v.z - s.z) <= iters) {
          oracle.push_back(v);
          break;
        }
      }
    }
    ASSERT_EQ(out, oracle);
    for (const auto& v : in) ASSERT_TRUE(std::binary_search(
        out.begin(), out.end(), v,
        [&](const Voxel& a, const Voxel& b) { return d.linear(a) < d.linear(b); }));
    ASSERT_EQ(dilate_26(dilate_26(in, d, 1), d, 1), dilate_26(in, d, 2));
  }
}
