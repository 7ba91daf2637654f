// Copyright 2026 The gradst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gradst/metrics.h"

#include <cmath>
#include <set>
#include <vector>

#include "gradst/rng.h"
#include "gtest/gtest.h"

namespace gradst {
namespace {

MultiLabel bits(std::size_t n, std::set<int> on) {
  MultiLabel m;
  m.bits.assign(n, 0);
  for (int i : on) m.bits[i] = 1;
  return m;
}

TEST(IntentMetricTest, AllCorrect) {
  const std::vector<int> gold = {0, 1, 2, 2};
  const auto m = metric_intent(gold, gold, 2);
  EXPECT_EQ(m.acc_all, 1.0);
  EXPECT_EQ(*m.acc_in, 1.0);
  EXPECT_EQ(*m.acc_out, 1.0);
  EXPECT_EQ(*m.recall_out, 1.0);
}

TEST(IntentMetricTest, MixedInAndOut) {
  // A=0, B=1, out-of-scope=2.
  const std::vector<int> gold = {0, 2};
  const std::vector<int> pred = {0, 1};
  const auto m = metric_intent(pred, gold, 2);
  EXPECT_DOUBLE_EQ(m.acc_all, 0.5);
  EXPECT_DOUBLE_EQ(*m.acc_in, 1.0);
  EXPECT_DOUBLE_EQ(*m.acc_out, 0.5);
  EXPECT_DOUBLE_EQ(*m.recall_out, 0.0);
}

TEST(IntentMetricTest, OptionalFields) {
  const std::vector<int> gold = {0, 1};
  const std::vector<int> pred = {0, 0};
  const auto no_oos = metric_intent(pred, gold, std::nullopt);
  EXPECT_DOUBLE_EQ(no_oos.acc_all, 0.5);
  EXPECT_FALSE(no_oos.acc_out.has_value());
  EXPECT_FALSE(no_oos.recall_out.has_value());
  const auto no_oos_gold = metric_intent(pred, gold, 5);
  EXPECT_FALSE(no_oos_gold.recall_out.has_value());
  EXPECT_TRUE(no_oos_gold.acc_out.has_value());
}

TEST(IntentMetricTest, Errors) {
  const std::vector<int> empty;
  EXPECT_THROW(metric_intent(empty, empty, std::nullopt), MetricError);
  const std::vector<int> a = {0, 1};
  const std::vector<int> b = {0};
  EXPECT_THROW(metric_intent(a, b, std::nullopt), MetricError);
}

TEST(DstMetricTest, Examples) {
  const std::vector<SlotAssignment> gold = {{{1, 2}}};
  EXPECT_EQ(metric_dst(gold, gold).joint_acc, 1.0);
  EXPECT_EQ(metric_dst(gold, gold).slot_acc, 1.0);
  const std::vector<SlotAssignment> pred = {{{1, 0}}};
  const auto m = metric_dst(pred, gold);
  EXPECT_DOUBLE_EQ(m.slot_acc, 0.5);
  EXPECT_DOUBLE_EQ(m.joint_acc, 0.0);
}

TEST(DstMetricTest, PairMismatchThrows) {
  const std::vector<SlotAssignment> gold = {{{1, 2}}};
  const std::vector<SlotAssignment> pred = {{{1}}};
  EXPECT_THROW(metric_dst(pred, gold), MetricError);
}

TEST(DstMetricTest, JointNeverExceedsSlot) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    const std::size_t pairs = 1 + rng.below(4);
    std::vector<SlotAssignment> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < pairs; ++j) {
        gold[i].values.push_back(static_cast<int>(rng.below(3)));
        pred[i].values.push_back(static_cast<int>(rng.below(3)));
      }
    }
    const auto m = metric_dst(pred, gold);
    EXPECT_LE(m.joint_acc, m.slot_acc);
    EXPECT_GE(m.joint_acc, 0.0);
    EXPECT_LE(m.slot_acc, 1.0);
  }
}

TEST(F1MetricTest, Examples) {
  const std::vector<MultiLabel> gold = {bits(2, {0}), bits(2, {1})};
  const auto perfect = metric_f1(gold, gold, 2);
  EXPECT_DOUBLE_EQ(perfect.micro_f1, 1.0);
  EXPECT_DOUBLE_EQ(perfect.macro_f1, 1.0);
  const std::vector<MultiLabel> pred = {bits(2, {0}), bits(2, {0})};
  const auto m = metric_f1(pred, gold, 2);
  EXPECT_DOUBLE_EQ(m.micro_f1, 0.5);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0 / 3.0);
}

TEST(F1MetricTest, EmptyEverywhereIsZero) {
  const std::vector<MultiLabel> none = {bits(3, {}), bits(3, {})};
  const auto m = metric_f1(none, none, 3);
  EXPECT_EQ(m.micro_f1, 0.0);
  EXPECT_EQ(m.macro_f1, 0.0);
}

TEST(F1MetricTest, ZeroLabelsThrows) {
  const std::vector<MultiLabel> none;
  EXPECT_THROW(metric_f1(none, none, 0), MetricError);
}

// Confusion counts taken straight from set membership.
struct Counts {
  double tp = 0, fp = 0, fn = 0;
};

double f1_of(const Counts& c) {
  const double denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2 * c.tp / denom;
}

TEST(F1MetricTest, MatchesConfusionOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t labels = 1 + rng.below(5);
    const std::size_t n = 1 + rng.below(6);
    std::vector<MultiLabel> pred, gold;
    std::vector<std::set<int>> ps, gs;
    for (std::size_t i = 0; i < n; ++i) {
      std::set<int> p, g;
      for (std::size_t c = 0; c < labels; ++c) {
        if (rng.uniform() < 0.4) p.insert(static_cast<int>(c));
        if (rng.uniform() < 0.4) g.insert(static_cast<int>(c));
      }
      pred.push_back(bits(labels, p));
      gold.push_back(bits(labels, g));
      ps.push_back(p);
      gs.push_back(g);
    }
    Counts pooled;
    std::vector<Counts> per(labels);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < labels; ++c) {
        const bool in_p = ps[i].count(static_cast<int>(c)) > 0;
        const bool in_g = gs[i].count(static_cast<int>(c)) > 0;
        Counts& k = per[c];
        if (in_p && in_g) k.tp += 1;
        if (in_p && !in_g) k.fp += 1;
        if (!in_p && in_g) k.fn += 1;
      }
    }
    double macro = 0;
    for (const auto& k : per) {
      pooled.tp += k.tp;
      pooled.fp += k.fp;
      pooled.fn += k.fn;
      macro += f1_of(k);
    }
    macro /= static_cast<double>(labels);
    const auto m = metric_f1(pred, gold, labels);
    EXPECT_NEAR(m.micro_f1, f1_of(pooled), 1e-12);
    EXPECT_NEAR(m.macro_f1, macro, 1e-12);
    EXPECT_GE(m.micro_f1, 0.0);
    EXPECT_LE(m.micro_f1, 1.0);
  }
}

Ranking ranked(int truth, int rank) {
  Ranking r;
  r.truth = truth;
  for (int i = 0; i < 6; ++i) {
    if (i != truth) r.order.push_back(i);
  }
  r.order.insert(r.order.begin() + (rank - 1), truth);
  return r;
}

TEST(RecallMetricTest, Examples) {
  const std::vector<Ranking> top = {ranked(3, 1), ranked(0, 1)};
  EXPECT_EQ(metric_recall_at_k(top, 1), 1.0);
  EXPECT_EQ(metric_recall_at_k(top, 3), 1.0);
  const std::vector<Ranking> mixed = {ranked(2, 1), ranked(2, 2), ranked(2, 5)};
  EXPECT_DOUBLE_EQ(metric_recall_at_k(mixed, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(metric_recall_at_k(mixed, 3), 2.0 / 3.0);
}

TEST(RecallMetricTest, MonotoneInK) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Ranking> rs;
    for (int i = 0; i < 5; ++i) {
      rs.push_back(ranked(static_cast<int>(rng.below(6)),
                          1 + static_cast<int>(rng.below(6))));
    }
    EXPECT_LE(metric_recall_at_k(rs, 1), metric_recall_at_k(rs, 3));
  }
}

TEST(RecallMetricTest, MissingTruthThrows) {
  Ranking r;
  r.truth = 9;
  r.order = {0, 1, 2};
  const std::vector<Ranking> rs = {r};
  EXPECT_THROW(metric_recall_at_k(rs, 1), MetricError);
}

}  // namespace
}  // namespace gradst
