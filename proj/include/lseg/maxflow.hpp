#pragma once

#include <vector>

namespace lseg {

// s-t flow network over n ordinary nodes plus an implicit source and sink.
// Capacities are non-negative doubles. solve() computes a maximum flow
// (Dinic) and leaves residual state in place for min-cut queries.
class FlowNetwork {
 public:
  explicit FlowNetwork(int num_nodes);

  int num_nodes() const { return n_; }

  // Directed arc u -> v with capacity cap and reverse capacity rev_cap.
  void add_edge(int u, int v, double cap, double rev_cap = 0.0);

  // Accumulates terminal capacities source -> u and u -> sink.
  void add_terminal(int u, double cap_from_source, double cap_to_sink);

  double solve();

  // Minimum cut: true = source side. Standard partition (nodes residual-
  // reachable from the source).
  std::vector<bool> min_cut() const;

  // Minimum cut where nodes that are free to sit on either side (neither
  // reachable from the source nor able to reach the sink in the residual
  // graph) follow prefer_source. The result is still a minimum cut.
  std::vector<bool> min_cut_with_preference(const std::vector<bool>& prefer_source) const;

 private:
  struct Arc {
    int to;
    double cap;
    int rev;  // index of the reverse arc in arcs_[to]
  };

  bool bfs_levels();
  double dfs_push(int u, double limit);
  std::vector<bool> reach_from_source() const;
  std::vector<bool> reach_to_sink() const;

  int n_;
  int source_;
  int sink_;
  std::vector<std::vector<Arc>> arcs_;
  std::vector<int> level_;
  std::vector<int> iter_;
  bool solved_ = false;
};

}  // namespace lseg
