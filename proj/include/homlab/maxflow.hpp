#pragma once

#include <cstdint>
#include <vector>

namespace homlab {

/// s-t max-flow on a directed graph with int64 capacities, by shortest
/// augmenting paths with exact distance labels and the gap heuristic.
/// Node ids are 0..n-1; terminal capacities are given per node.
class MaxFlowGraph {
 public:
  explicit MaxFlowGraph(int num_nodes);

  /// Arc u -> v with capacity cap and reverse capacity rev_cap.
  void add_edge(int u, int v, std::int64_t cap, std::int64_t rev_cap = 0);
  /// Capacities source -> u and u -> sink (added to existing ones).
  void add_terminal(int u, std::int64_t cap_source, std::int64_t cap_sink);

  std::int64_t solve();
  /// After solve(): true when u is on the sink side of the minimum cut.
  bool sink_side(int u) const { return !reach_[u]; }

  int num_nodes() const { return n_; }
  std::int64_t augmentations() const { return augmentations_; }

 private:
  struct PendingArc {
    int u, v;
    std::int64_t cap, rev;
  };

  int n_;
  std::vector<PendingArc> pending_;
  std::vector<std::int64_t> source_cap_;
  std::vector<std::int64_t> sink_cap_;
  std::vector<char> reach_;
  std::int64_t augmentations_ = 0;
};

}  // namespace homlab
