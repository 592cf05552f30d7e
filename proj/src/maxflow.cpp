#include "homlab/maxflow.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace homlab {

MaxFlowGraph::MaxFlowGraph(int num_nodes)
    : n_(num_nodes), source_cap_(num_nodes, 0), sink_cap_(num_nodes, 0), reach_(num_nodes, 1) {}

void MaxFlowGraph::add_edge(int u, int v, std::int64_t cap, std::int64_t rev_cap) {
  if (cap < 0 || rev_cap < 0) throw std::invalid_argument("negative capacity");
  if (u == v || (cap == 0 && rev_cap == 0)) return;
  pending_.push_back({u, v, cap, rev_cap});
}

void MaxFlowGraph::add_terminal(int u, std::int64_t cap_source, std::int64_t cap_sink) {
  if (cap_source < 0 || cap_sink < 0) throw std::invalid_argument("negative capacity");
  source_cap_[u] += cap_source;
  sink_cap_[u] += cap_sink;
}

std::int64_t MaxFlowGraph::solve() {
  const int s = n_, t = n_ + 1, N = n_ + 2;
  std::int64_t flow = 0;

  // Paths s -> u -> t need no search.
  std::vector<std::int64_t> src = source_cap_, snk = sink_cap_;
  for (int u = 0; u < n_; ++u) {
    const std::int64_t f = std::min(src[u], snk[u]);
    flow += f;
    src[u] -= f;
    snk[u] -= f;
  }

  // CSR residual graph; arc a and a ^ 1 are not paired, rev[a] is explicit.
  std::vector<int> degree(N + 1, 0);
  for (const PendingArc& a : pending_) {
    ++degree[a.u];
    ++degree[a.v];
  }
  for (int u = 0; u < n_; ++u) {
    if (src[u] > 0) {
      ++degree[s];
      ++degree[u];
    }
    if (snk[u] > 0) {
      ++degree[u];
      ++degree[t];
    }
  }
  std::vector<int> head(N + 1, 0);
  for (int u = 0; u < N; ++u) head[u + 1] = head[u] + degree[u];
  const int m = head[N];
  std::vector<int> to(m), rev(m);
  std::vector<std::int64_t> cap(m);
  std::vector<int> fill(head.begin(), head.end() - 1);
  auto link = [&](int u, int v, std::int64_t c, std::int64_t rc) {
    const int a = fill[u]++, b = fill[v]++;
    to[a] = v;
    cap[a] = c;
    rev[a] = b;
    to[b] = u;
    cap[b] = rc;
    rev[b] = a;
  };
  for (int u = 0; u < n_; ++u) {
    if (src[u] > 0) link(s, u, src[u], 0);
    if (snk[u] > 0) link(u, t, snk[u], 0);
  }
  for (const PendingArc& a : pending_) link(a.u, a.v, a.cap, a.rev);

  // Exact distance labels to the sink.
  std::vector<int> dist(N, N), count(N + 1, 0);
  {
    std::deque<int> queue{t};
    dist[t] = 0;
    while (!queue.empty()) {
      const int x = queue.front();
      queue.pop_front();
      for (int a = head[x]; a < head[x + 1]; ++a) {
        const int y = to[a];
        if (dist[y] == N && cap[rev[a]] > 0) {
          dist[y] = dist[x] + 1;
          queue.push_back(y);
        }
      }
    }
  }
  for (int u = 0; u < N; ++u) ++count[dist[u]];

  std::vector<int> current(head.begin(), head.end() - 1);
  std::vector<int> pred(N, -1);
  int u = s;
  while (dist[s] < N) {
    if (u == t) {
      std::int64_t bottleneck = INT64_MAX;
      for (int v = t; v != s; v = to[rev[pred[v]]]) bottleneck = std::min(bottleneck, cap[pred[v]]);
      for (int v = t; v != s; v = to[rev[pred[v]]]) {
        cap[pred[v]] -= bottleneck;
        cap[rev[pred[v]]] += bottleneck;
      }
      flow += bottleneck;
      ++augmentations_;
      u = s;
      continue;
    }
    int a = current[u];
    for (; a < head[u + 1]; ++a)
      if (cap[a] > 0 && dist[u] == dist[to[a]] + 1) break;
    if (a < head[u + 1]) {
      current[u] = a;
      pred[to[a]] = a;
      u = to[a];
      continue;
    }
    // Retreat: relabel u.
    int lowest = N - 1;
    for (int b = head[u]; b < head[u + 1]; ++b)
      if (cap[b] > 0) lowest = std::min(lowest, dist[to[b]]);
    if (--count[dist[u]] == 0) break;
    dist[u] = lowest + 1;
    ++count[dist[u]];
    current[u] = head[u];
    if (u != s) u = to[rev[pred[u]]];
  }

  // Source side of the minimum cut.
  std::vector<char> seen(N, 0);
  std::deque<int> queue{s};
  seen[s] = 1;
  while (!queue.empty()) {
    const int x = queue.front();
    queue.pop_front();
    for (int a = head[x]; a < head[x + 1]; ++a)
      if (cap[a] > 0 && !seen[to[a]]) {
        seen[to[a]] = 1;
        queue.push_back(to[a]);
      }
  }
  for (int v = 0; v < n_; ++v) reach_[v] = seen[v];
  return flow;
}

}  // namespace homlab
