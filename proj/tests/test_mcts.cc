#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "akhcfs/mcts.h"

namespace akhcfs {
namespace {

// Reward 0 for the favoured R, -1 for every other candidate.
struct RiggedModel {
  using State = int;
  double favoured = 0.1;
  SearchStep<int> step(const int& depth, double r) const {
    return SearchStep<int>{depth + 1, r == favoured ? 0.0 : -1.0, false};
  }
};

// Same rewards, but the in-place path counts its calls.
struct CountingModel {
  using State = int;
  mutable int advances = 0;
  SearchStep<int> step(const int& depth, double r) const {
    return SearchStep<int>{depth + 1, r == 0.5 ? 0.0 : -1.0, false};
  }
  SearchAdvance advance(int& depth, double r) const {
    ++advances;
    ++depth;
    return SearchAdvance{r == 0.5 ? 0.0 : -1.0, false};
  }
};

static_assert(SearchModel<RiggedModel>);
static_assert(!InPlaceSearchModel<RiggedModel>);
static_assert(InPlaceSearchModel<CountingModel>);

TEST(Ucb1, Examples) {
  EXPECT_TRUE(std::isinf(ucb1(0.0, 0, 10, 7.0)));
  EXPECT_EQ(ucb1(0.0, 1, 1, 7.0), 0.0);
  EXPECT_NEAR(ucb1(-2.0, 4, 16, 7.0), -0.5 + 7.0 * std::sqrt(std::log(16.0) / 4.0), 1e-12);
  EXPECT_NEAR(ucb1(-2.0, 4, 16, 7.0), 5.327, 1e-3);
}

TEST(Mcts, SingleCandidate) {
  MctsConfig c;
  c.candidates = {0.01};
  c.iterations = 50;
  EXPECT_EQ(mcts_search(RiggedModel{}, 0, c).best_r, 0.01);
}

TEST(Mcts, RejectsBadConfig) {
  MctsConfig c;
  c.candidates.clear();
  EXPECT_THROW(mcts_search(RiggedModel{}, 0, c), std::invalid_argument);
  c.candidates = {0.1, -1.0};
  EXPECT_THROW(mcts_search(RiggedModel{}, 0, c), std::invalid_argument);
  c.candidates = {0.1};
  c.iterations = 0;
  EXPECT_THROW(mcts_search(RiggedModel{}, 0, c), std::invalid_argument);
}

TEST(Mcts, EveryCandidateVisitedOnce) {
  MctsConfig c;
  c.iterations = static_cast<int>(c.candidates.size());
  const auto res = mcts_search(RiggedModel{}, 0, c);
  int sum = 0;
  for (const auto& child : res.root_children) {
    EXPECT_GE(child.visits, 1);
    sum += child.visits;
  }
  EXPECT_LE(sum, c.iterations);
}

TEST(Mcts, VisitConservation) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    MctsConfig c;
    c.iterations = 300;
    c.max_depth = 4;
    c.seed = seed;
    const auto res = mcts_search(RiggedModel{}, 0, c);
    EXPECT_EQ(res.root_visits, c.iterations);
    EXPECT_EQ(res.total_visits, res.total_path_length);
    int sum = 0;
    for (const auto& child : res.root_children) sum += child.visits;
    EXPECT_LE(sum, c.iterations);
  }
}

TEST(Mcts, ExplorationDecaysPerUcbSelection) {
  MctsConfig c;
  c.iterations = 200;
  c.max_depth = 3;
  c.seed = 17;
  const auto res = mcts_search(RiggedModel{}, 0, c, true);
  ASSERT_FALSE(res.selections.empty());
  std::map<int, int> ucb_steps;
  bool saw_decayed = false;
  for (const auto& s : res.selections) {
    const int prior = ucb_steps[s.iteration];
    EXPECT_NEAR(s.exploration, 7.0 * std::pow(0.995, prior), 1e-12);
    saw_decayed = saw_decayed || prior > 0;
    if (!s.random) ++ucb_steps[s.iteration];
  }
  EXPECT_TRUE(saw_decayed);
}

TEST(Mcts, RandomBranchNearEpsilon) {
  MctsConfig c;
  c.iterations = 1000;
  c.seed = 5;
  const auto res = mcts_search(RiggedModel{}, 0, c, true);
  int random = 0;
  for (const auto& s : res.selections) random += s.random ? 1 : 0;
  const double share = static_cast<double>(random) / static_cast<double>(res.selections.size());
  EXPECT_NEAR(share, 0.1, 0.03);
}

TEST(Mcts, SeededSearchIsDeterministic) {
  MctsConfig c;
  c.seed = 99;
  const auto a = mcts_search(RiggedModel{0.5}, 0, c);
  const auto b = mcts_search(RiggedModel{0.5}, 0, c);
  EXPECT_EQ(a.best_r, b.best_r);
  ASSERT_EQ(a.root_children.size(), b.root_children.size());
  for (std::size_t i = 0; i < a.root_children.size(); ++i) {
    EXPECT_EQ(a.root_children[i].visits, b.root_children[i].visits);
  }
}

TEST(Mcts, RecoversRiggedArgmax) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    MctsConfig c;
    c.seed = seed;
    const auto res = mcts_search(RiggedModel{}, 0, c);
    hits += res.best_r == 0.1 ? 1 : 0;
  }
  EXPECT_GE(hits, 95);
}

TEST(Mcts, InPlaceRolloutMatchesCopyingRollout) {
  struct CopyOnly {
    using State = int;
    SearchStep<int> step(const int& depth, double r) const {
      return SearchStep<int>{depth + 1, r == 0.5 ? 0.0 : -1.0, false};
    }
  };
  MctsConfig c;
  c.iterations = 200;
  c.seed = 4;
  CountingModel counting;
  const auto a = mcts_search(counting, 0, c);
  const auto b = mcts_search(CopyOnly{}, 0, c);
  EXPECT_GT(counting.advances, 0);
  EXPECT_EQ(a.best_r, b.best_r);
  for (std::size_t i = 0; i < a.root_children.size(); ++i) {
    EXPECT_EQ(a.root_children[i].visits, b.root_children[i].visits);
    EXPECT_EQ(a.root_children[i].mean_value, b.root_children[i].mean_value);
  }
}

TEST(Mcts, TieGoesToLargerR) {
  MctsConfig c;
  c.candidates = {0.01, 0.5};
  c.iterations = 2;
  c.epsilon = 0.0;
  struct Flat {
    using State = int;
    SearchStep<int> step(const int& s, double) const { return SearchStep<int>{s, 0.0, false}; }
  };
  EXPECT_EQ(mcts_search(Flat{}, 0, c).best_r, 0.5);
}

TEST(Mcts, TerminalNodesAreNotExpanded) {
  struct Crash {
    using State = int;
    SearchStep<int> step(const int& s, double) const { return SearchStep<int>{s + 1, -10.0, true}; }
  };
  MctsConfig c;
  c.iterations = 100;
  const auto res = mcts_search(Crash{}, 0, c);
  EXPECT_EQ(res.node_count, 1 + c.candidates.size());
}

TEST(Mcts, TreeDumpListsRootChildren) {
  MctsConfig c;
  c.iterations = 30;
  const auto dump = tree_dump(mcts_search(RiggedModel{}, 0, c));
  ASSERT_TRUE(dump.contains("children"));
  EXPECT_EQ(dump["children"].size(), c.candidates.size());
  EXPECT_TRUE(dump["children"][0].contains("R"));
  EXPECT_TRUE(dump["children"][0].contains("visits"));
  EXPECT_TRUE(dump["children"][0].contains("mean_value"));
}

}  // namespace
}  // namespace akhcfs
