#include "akhcfs/mcts.h"

namespace akhcfs {

nlohmann::json tree_dump(const SearchResult& result) {
  nlohmann::json children = nlohmann::json::array();
  for (const auto& c : result.root_children) {
    children.push_back({{"R", c.r}, {"visits", c.visits}, {"mean_value", c.mean_value}});
  }
  return nlohmann::json{{"best_R", result.best_r},
                        {"root_visits", result.root_visits},
                        {"nodes", result.node_count},
                        {"children", children}};
}

}  // namespace akhcfs
