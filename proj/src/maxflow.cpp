#include "lseg/maxflow.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>

#include "lseg/errors.hpp"

namespace lseg {

namespace {
constexpr double kResidualEps = 1e-12;
}

FlowNetwork::FlowNetwork(int num_nodes)
    : n_(num_nodes), source_(num_nodes), sink_(num_nodes + 1), arcs_(num_nodes + 2) {
  if (num_nodes < 0) throw ConfigError("FlowNetwork: negative node count");
}

void FlowNetwork::add_edge(int u, int v, double cap, double rev_cap) {
  if (u < 0 || u >= n_ || v < 0 || v >= n_ || u == v)
    throw ConfigError("FlowNetwork: bad arc endpoints");
  if (cap < 0 || rev_cap < 0) throw ConfigError("FlowNetwork: negative capacity");
  arcs_[u].push_back({v, cap, static_cast<int>(arcs_[v].size())});
  arcs_[v].push_back({u, rev_cap, static_cast<int>(arcs_[u].size()) - 1});
}

void FlowNetwork::add_terminal(int u, double cap_from_source, double cap_to_sink) {
  if (u < 0 || u >= n_) throw ConfigError("FlowNetwork: bad terminal node");
  if (cap_from_source < 0 || cap_to_sink < 0)
    throw ConfigError("FlowNetwork: negative capacity");
  arcs_[source_].push_back({u, cap_from_source, static_cast<int>(arcs_[u].size())});
  arcs_[u].push_back({source_, 0.0, static_cast<int>(arcs_[source_].size()) - 1});
  arcs_[u].push_back({sink_, cap_to_sink, static_cast<int>(arcs_[sink_].size())});
  arcs_[sink_].push_back({u, 0.0, static_cast<int>(arcs_[u].size()) - 1});
}

bool FlowNetwork::bfs_levels() {
  level_.assign(n_ + 2, -1);
  std::deque<int> q;
  level_[source_] = 0;
  q.push_back(source_);
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (const Arc& a : arcs_[u]) {
      if (a.cap > kResidualEps && level_[a.to] < 0) {
        level_[a.to] = level_[u] + 1;
        q.push_back(a.to);
      }
    }
  }
  return level_[sink_] >= 0;
}

double FlowNetwork::dfs_push(int u, double limit) {
  if (u == sink_) return limit;
  double pushed_total = 0;
  for (int& i = iter_[u]; i < static_cast<int>(arcs_[u].size()); ++i) {
    Arc& a = arcs_[u][i];
    if (a.cap <= kResidualEps || level_[a.to] != level_[u] + 1) continue;
    double pushed = dfs_push(a.to, std::min(limit, a.cap));
    if (pushed > 0) {
      a.cap -= pushed;
      arcs_[a.to][a.rev].cap += pushed;
      pushed_total += pushed;
      limit -= pushed;
      if (limit <= kResidualEps) return pushed_total;
    } else {
      level_[a.to] = -1;  // dead end
    }
  }
  return pushed_total;
}

double FlowNetwork::solve() {
  double flow = 0;
  while (bfs_levels()) {
    iter_.assign(n_ + 2, 0);
    double pushed = dfs_push(source_, std::numeric_limits<double>::infinity());
    if (pushed <= kResidualEps) break;
    flow += pushed;
  }
  solved_ = true;
  return flow;
}

std::vector<bool> FlowNetwork::reach_from_source() const {
  std::vector<bool> seen(n_ + 2, false);
  std::deque<int> q;
  seen[source_] = true;
  q.push_back(source_);
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (const Arc& a : arcs_[u])
      if (a.cap > kResidualEps && !seen[a.to]) {
        seen[a.to] = true;
        q.push_back(a.to);
      }
  }
  return seen;
}

std::vector<bool> FlowNetwork::reach_to_sink() const {
  // u reaches the sink iff some residual arc u -> v exists with v reaching it;
  // walk backwards from the sink over forward-residual arcs.
  std::vector<bool> seen(n_ + 2, false);
  std::deque<int> q;
  seen[sink_] = true;
  q.push_back(sink_);
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    for (const Arc& a : arcs_[v]) {
      // residual capacity of the arc a.to -> v
      const Arc& fwd = arcs_[a.to][a.rev];
      if (fwd.cap > kResidualEps && !seen[a.to]) {
        seen[a.to] = true;
        q.push_back(a.to);
      }
    }
  }
  return seen;
}

std::vector<bool> FlowNetwork::min_cut() const {
  if (!solved_) throw ConfigError("FlowNetwork: min_cut before solve");
  std::vector<bool> rs = reach_from_source();
  return std::vector<bool>(rs.begin(), rs.begin() + n_);
}

std::vector<bool> FlowNetwork::min_cut_with_preference(
    const std::vector<bool>& prefer_source) const {
  if (!solved_) throw ConfigError("FlowNetwork: min_cut before solve");
  if (static_cast<int>(prefer_source.size()) != n_)
    throw ConfigError("FlowNetwork: preference size mismatch");
  std::vector<bool> rs = reach_from_source();
  std::vector<bool> rt = reach_to_sink();

  // Seed with the source side plus every free preferred node, then close
  // under residual arcs. Free nodes cannot reach the sink, so the closure
  // cannot either, and the cut value is unchanged.
  std::vector<bool> side(n_ + 2, false);
  std::deque<int> q;
  side[source_] = true;
  q.push_back(source_);
  for (int u = 0; u < n_; ++u) {
    if (rs[u] || (!rt[u] && prefer_source[u])) {
      if (!side[u]) {
        side[u] = true;
        q.push_back(u);
      }
    }
  }
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (const Arc& a : arcs_[u])
      if (a.cap > kResidualEps && !side[a.to]) {
        side[a.to] = true;
        q.push_back(a.to);
      }
  }
  return std::vector<bool>(side.begin(), side.begin() + n_);
}

}  // namespace lseg
