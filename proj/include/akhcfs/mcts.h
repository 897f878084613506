#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace akhcfs {

struct MctsConfig {
  int iterations = 1000;
  double exploration = 7.0;
  double exploration_decay = 0.995;  // applied after every UCB selection in a descent
  double epsilon = 0.1;              // probability of a uniformly random child
  std::vector<double> candidates{0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0};
  int max_depth = 10;
  double gamma = 0.99;
  // Keep applying a new node's R until max depth when scoring it.
  bool rollout_to_depth = true;
  std::uint64_t seed = 0;
};

template <typename State>
struct SearchStep {
  State next;
  double reward = 0.0;
  bool terminal = false;
};

// A model advances a state by applying one candidate measurement-noise value.
template <typename M>
concept SearchModel = requires(const M& model, const typename M::State& state, double r) {
  { model.step(state, r) } -> std::convertible_to<SearchStep<typename M::State>>;
};

struct SearchAdvance {
  double reward = 0.0;
  bool terminal = false;
};

// Optional in-place variant used for rollouts, must match step().
template <typename M>
concept InPlaceSearchModel =
    SearchModel<M> && requires(const M& model, typename M::State& state, double r) {
      { model.advance(state, r) } -> std::convertible_to<SearchAdvance>;
    };

// Mean value plus exploration bonus; unvisited children rank first.
inline double ucb1(double value_sum, int visits, int parent_visits, double exploration) {
  if (visits == 0) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(visits);
  return value_sum / n +
         exploration * std::sqrt(std::log(static_cast<double>(parent_visits)) / n);
}

struct RootChildStats {
  double r = 0.0;
  int visits = 0;
  double mean_value = 0.0;
};

struct SelectionRecord {
  int iteration = 0;
  int level = 0;  // depth of the parent the choice was made at
  double exploration = 0.0;
  bool random = false;
};

struct SearchResult {
  double best_r = 0.0;
  std::vector<RootChildStats> root_children;
  std::size_t node_count = 0;
  int root_visits = 0;
  long long total_visits = 0;        // sum of visit counts over all nodes
  long long total_path_length = 0;   // sum over iterations of nodes on the backed-up path
  std::vector<SelectionRecord> selections;  // filled when tracing
};

nlohmann::json tree_dump(const SearchResult& result);

// Picks the measurement-noise value R whose subtree collects the most visits
// (ties go to the larger R).
template <SearchModel M>
SearchResult mcts_search(const M& model, const typename M::State& root_state,
                         const MctsConfig& config, bool trace = false) {
  using State = typename M::State;
  if (config.candidates.empty()) throw std::invalid_argument("mcts needs candidate R values");
  if (config.iterations <= 0) throw std::invalid_argument("mcts iterations must be positive");
  for (double r : config.candidates) {
    if (!(r > 0.0)) throw std::invalid_argument("mcts candidates must be positive");
  }

  struct Node {
    double action = 0.0;
    int visits = 0;
    double value = 0.0;
    int depth = 0;
    int parent = -1;
    std::vector<int> children;
    std::optional<State> state;
    double reward = 0.0;  // own step reward
    double score = 0.0;   // own step reward plus rollout, discounted from this node
    bool evaluated = false;
    bool terminal = false;
  };

  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(config.iterations) * config.candidates.size() + 1);
  nodes.push_back(Node{});
  nodes[0].state = root_state;
  nodes[0].evaluated = true;
  nodes[0].terminal = config.max_depth <= 0;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SearchResult result;

  const auto choose = [&](int parent, double& c, int iteration) {
    const auto& kids = nodes[static_cast<std::size_t>(parent)].children;
    SelectionRecord rec{iteration, nodes[static_cast<std::size_t>(parent)].depth, c, false};
    int chosen = kids.front();
    if (unit(rng) > config.epsilon) {
      double best = -std::numeric_limits<double>::infinity();
      const int parent_visits = nodes[static_cast<std::size_t>(parent)].visits;
      for (int k : kids) {
        const auto& n = nodes[static_cast<std::size_t>(k)];
        const double s = ucb1(n.value, n.visits, parent_visits, c);
        if (s > best) {
          best = s;
          chosen = k;
        }
      }
      c *= config.exploration_decay;
    } else {
      rec.random = true;
      std::vector<int> pool;
      for (int k : kids) {
        if (nodes[static_cast<std::size_t>(k)].visits == 0) pool.push_back(k);
      }
      if (pool.empty()) pool = kids;
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      chosen = pool[pick(rng)];
    }
    if (trace) result.selections.push_back(rec);
    return chosen;
  };

  const auto evaluate = [&](int idx) {
    auto& node = nodes[static_cast<std::size_t>(idx)];
    if (node.evaluated) return;
    const auto& parent_state = *nodes[static_cast<std::size_t>(node.parent)].state;
    auto step = model.step(parent_state, node.action);
    double score = step.reward;
    const bool terminal = step.terminal || node.depth >= config.max_depth;
    if (config.rollout_to_depth && !terminal) {
      State s = step.next;
      double discount = 1.0;
      for (int d = node.depth + 1; d <= config.max_depth; ++d) {
        discount *= config.gamma;
        if constexpr (InPlaceSearchModel<M>) {
          const SearchAdvance next = model.advance(s, node.action);
          score += discount * next.reward;
          if (next.terminal) break;
        } else {
          auto next = model.step(s, node.action);
          score += discount * next.reward;
          if (next.terminal) break;
          s = std::move(next.next);
        }
      }
    }
    auto& n = nodes[static_cast<std::size_t>(idx)];
    n.state = std::move(step.next);
    n.reward = step.reward;
    n.score = score;
    n.terminal = terminal;
    n.evaluated = true;
  };

  for (int it = 0; it < config.iterations; ++it) {
    double c = config.exploration;
    int cur = 0;
    while (!nodes[static_cast<std::size_t>(cur)].children.empty()) cur = choose(cur, c, it);

    const auto& leaf = nodes[static_cast<std::size_t>(cur)];
    if ((cur == 0 || leaf.visits > 0) && !leaf.terminal) {
      const int depth = leaf.depth + 1;
      for (double r : config.candidates) {
        auto& child = nodes.emplace_back();
        child.action = r;
        child.depth = depth;
        child.parent = cur;
        nodes[static_cast<std::size_t>(cur)].children.push_back(static_cast<int>(nodes.size()) - 1);
      }
      cur = choose(cur, c, it);
    }
    evaluate(cur);

    // Discounted return from the root: rewards along the path, then the leaf score.
    const auto& leaf_node = nodes[static_cast<std::size_t>(cur)];
    double r = std::pow(config.gamma, std::max(leaf_node.depth - 1, 0)) * leaf_node.score;
    for (int n = leaf_node.parent; n > 0; n = nodes[static_cast<std::size_t>(n)].parent) {
      const auto& node = nodes[static_cast<std::size_t>(n)];
      r += std::pow(config.gamma, node.depth - 1) * node.reward;
    }
    for (int n = cur; n >= 0; n = nodes[static_cast<std::size_t>(n)].parent) {
      auto& node = nodes[static_cast<std::size_t>(n)];
      node.visits += 1;
      node.value += std::pow(config.gamma, std::max(node.depth - 1, 0)) * r;
      ++result.total_path_length;
    }
  }

  const auto& root = nodes.front();
  int best_visits = -1;
  for (int k : root.children) {
    const auto& n = nodes[static_cast<std::size_t>(k)];
    result.root_children.push_back(
        RootChildStats{n.action, n.visits, n.visits > 0 ? n.value / n.visits : 0.0});
    if (n.visits > best_visits || (n.visits == best_visits && n.action > result.best_r)) {
      best_visits = n.visits;
      result.best_r = n.action;
    }
  }
  if (root.children.empty()) result.best_r = config.candidates.front();
  result.node_count = nodes.size();
  result.root_visits = root.visits;
  for (const auto& n : nodes) result.total_visits += n.visits;
  return result;
}

}  // namespace akhcfs
